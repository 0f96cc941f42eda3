#pragma once

#include "safesynth/loop.hpp"

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

namespace safesynth {

enum class ReportFormat { Human, Json, Csv };

namespace detail {

inline std::string sig(double v, const char* fmt = "%.12g") {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

inline std::string actionLabel(const Mdp& m, StateId s, ActionId a) {
    const Choice* c = m.findChoice(s, a);
    return c ? c->label : "?";
}

inline nlohmann::json numberOrInf(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline nlohmann::json schedulerJson(const Mdp& m, const DetScheduler& sigma) {
    nlohmann::json out = nlohmann::json::object();
    for (StateId s = 0; s < m.stateCount(); ++s)
        out[std::to_string(s)] = actionLabel(m, s, sigma.choice[s]);
    return out;
}

inline nlohmann::json permissiveJson(const Mdp& m, const DetPermissiveScheduler& theta) {
    nlohmann::json out = nlohmann::json::object();
    for (StateId s = 0; s < m.stateCount(); ++s) {
        nlohmann::json labels = nlohmann::json::array();
        for (ActionId a : theta.allowed[s]) labels.push_back(actionLabel(m, s, a));
        out[std::to_string(s)] = labels;
    }
    return out;
}

} // namespace detail

// i,t,lower,upper per iteration, t in cumulative milliseconds.
inline std::string renderCsv(const SynthesisReport& report) {
    std::string out = "i,t,lower,upper\n";
    for (const auto& it : report.iterations)
        out += std::to_string(it.index) + "," + detail::sig(it.cumulativeMs, "%.3f") + "," +
               detail::sig(it.lower) + "," + detail::sig(it.upper) + "\n";
    return out;
}

inline nlohmann::json reportJson(const SynthesisReport& report, const Mdp& m) {
    nlohmann::json j;
    j["termination"] = terminationName(report.termination);
    if (!report.message.empty()) j["message"] = report.message;
    j["bestCost"] = detail::numberOrInf(report.bestCost);
    j["lower"] = report.lower;
    if (report.best) j["best"] = detail::schedulerJson(m, *report.best);
    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& it : report.iterations) {
        nlohmann::json row;
        row["i"] = it.index;
        row["t"] = it.cumulativeMs;
        row["lower"] = it.lower;
        row["upper"] = detail::numberOrInf(it.upper);
        row["learnedCost"] = detail::numberOrInf(it.learnedCost);
        row["coverage"] = it.coverageOk;
        row["permissive"] = detail::permissiveJson(m, it.permissive);
        row["learned"] = detail::schedulerJson(m, it.learned);
        iterations.push_back(std::move(row));
    }
    j["iterations"] = std::move(iterations);
    return j;
}

inline std::string renderHuman(const SynthesisReport& report, const Mdp& m) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%4s  %10s  %14s  %14s  %s\n", "it", "t(ms)", "lower", "upper",
                  "learned");
    out += buf;
    for (const auto& it : report.iterations) {
        std::string learned;
        for (StateId s = 0; s < m.stateCount(); ++s) {
            if (it.learned.choice.empty()) break;
            if (m.enabled(s).size() < 2) continue; // skip forced states, they carry no decision
            if (!learned.empty()) learned += " ";
            learned += std::to_string(s) + ":" + detail::actionLabel(m, s, it.learned.choice[s]);
        }
        std::snprintf(buf, sizeof buf, "%4zu  %10.1f  %14s  %14s  %s\n", it.index, it.cumulativeMs,
                      detail::sig(it.lower).c_str(), detail::sig(it.upper).c_str(), learned.c_str());
        out += buf;
    }
    out += "termination: " + std::string(terminationName(report.termination));
    if (!report.message.empty()) out += " (" + report.message + ")";
    out += "\n";
    out += "bounds: [" + detail::sig(report.lower) + ", " + detail::sig(report.bestCost) + "]\n";
    if (report.best) {
        out += "best scheduler:\n";
        for (StateId s = 0; s < m.stateCount(); ++s)
            out += "  " + std::to_string(s) + " -> " +
                   detail::actionLabel(m, s, report.best->choice[s]) + "\n";
    }
    return out;
}

inline std::string renderReport(const SynthesisReport& report, const Mdp& m, ReportFormat fmt) {
    switch (fmt) {
        case ReportFormat::Csv: return renderCsv(report);
        case ReportFormat::Json: return reportJson(report, m).dump(2) + "\n";
        case ReportFormat::Human: return renderHuman(report, m);
    }
    return {};
}

} // namespace safesynth
