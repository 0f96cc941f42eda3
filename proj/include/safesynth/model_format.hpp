#pragma once

#include "safesynth/model.hpp"
#include "safesynth/objectives.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace safesynth {

class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t line, std::size_t column, const std::string& message)
        : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                             ": " + message),
          line(line), column(column) {}
    std::size_t line;
    std::size_t column;
};

namespace detail {

struct Token {
    std::string text;
    std::size_t column; // 1-based
};

inline std::vector<Token> tokenizeLine(const std::string& line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        if (line[i] == '#') break;
        if (std::isspace(static_cast<unsigned char>(line[i]))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])) && line[i] != '#')
            ++i;
        out.push_back({line.substr(start, i - start), start + 1});
    }
    return out;
}

inline double parseCostValue(const Token& tok, std::size_t lineNo) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(tok.text.c_str(), &end);
    if (end != tok.text.c_str() + tok.text.size() || errno == ERANGE)
        throw ParseError(lineNo, tok.column, "malformed cost value '" + tok.text + "'");
    return v;
}

inline std::size_t parseIndex(const Token& tok, std::size_t lineNo, const char* what) {
    for (char c : tok.text)
        if (!std::isdigit(static_cast<unsigned char>(c)))
            throw ParseError(lineNo, tok.column, std::string("malformed ") + what + " '" + tok.text + "'");
    try {
        return std::stoull(tok.text);
    } catch (const std::exception&) {
        throw ParseError(lineNo, tok.column, std::string(what) + " '" + tok.text + "' out of range");
    }
}

inline Rational parseProbability(const Token& tok, std::size_t lineNo) {
    try {
        return Rational::parse(tok.text);
    } catch (const std::exception&) {
        throw ParseError(lineNo, tok.column, "malformed probability '" + tok.text + "'");
    }
}

} // namespace detail

// Reads the line-oriented model format. One keyword per line:
//
//   safesynth model 1            header, required first line
//   name <word>                  instance name (optional)
//   param <key> <value>          provenance parameter (optional, repeatable)
//   states <n>                   required before any action
//   initial <state>
//   action <state> <label>       declares the next action id (0, 1, ...)
//   to <state> <probability>     transition of the latest action
//   lower <action> <cost>        one per action
//   upper <action> <cost>        one per action
//   oracle <action> <cost>       optional; all actions or none
//   safety <lambda>
//   unsafe <state>               repeatable
//   performance <kappa>
//   goal <state>                 repeatable
//
// '#' starts a comment. Probabilities are exact rationals ("3/5", "0.6",
// "1"); costs are doubles. Unknown keywords are rejected with their position.
inline ProblemInstance parseModelText(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineNo = 0;

    ProblemInstance p;
    bool sawHeader = false, sawStates = false, sawInitial = false;
    bool sawSafety = false, sawPerformance = false;
    std::optional<StateId> openActionState; // state of the action being filled
    std::vector<TransitionEntry> openEntries;
    std::string openLabel;
    std::size_t actionCount = 0;
    std::vector<std::optional<double>> lower, upper, oracle;

    auto closeAction = [&](std::size_t atLine) {
        if (!openActionState) return;
        if (openEntries.empty())
            throw ParseError(atLine, 1, "action '" + openLabel + "' has no transitions");
        p.model.addChoice(*openActionState, openLabel, Distribution{std::move(openEntries)});
        openEntries = {};
        openActionState.reset();
        ++actionCount;
        lower.emplace_back();
        upper.emplace_back();
        oracle.emplace_back();
    };

    while (std::getline(in, line)) {
        ++lineNo;
        std::vector<detail::Token> toks = detail::tokenizeLine(line);
        if (toks.empty()) continue;
        if (!sawHeader) {
            if (toks.size() != 3 || toks[0].text != "safesynth" || toks[1].text != "model" ||
                toks[2].text != "1")
                throw ParseError(lineNo, toks[0].column, "expected header 'safesynth model 1'");
            sawHeader = true;
            continue;
        }
        const std::string& kw = toks[0].text;
        auto need = [&](std::size_t n, const char* usage) {
            if (toks.size() != n)
                throw ParseError(lineNo, toks[0].column,
                                 "'" + kw + "' expects " + std::string(usage));
        };
        auto state = [&](const detail::Token& tok) {
            std::size_t v = detail::parseIndex(tok, lineNo, "state id");
            if (!sawStates || v >= p.model.stateCount())
                throw ParseError(lineNo, tok.column, "state id " + tok.text + " out of range");
            return static_cast<StateId>(v);
        };
        auto costSlot = [&](const detail::Token& tok) {
            // any open action block was closed before this is called
            std::size_t v = detail::parseIndex(tok, lineNo, "action id");
            if (v >= actionCount)
                throw ParseError(lineNo, tok.column, "action id " + tok.text + " not declared yet");
            return v;
        };

        if (kw == "name") {
            need(2, "1 argument: name <word>");
            p.metadata.name = toks[1].text;
        } else if (kw == "param") {
            need(3, "2 arguments: param <key> <value>");
            p.metadata.parameters.push_back({toks[1].text, toks[2].text});
        } else if (kw == "states") {
            need(2, "1 argument: states <n>");
            if (sawStates) throw ParseError(lineNo, toks[0].column, "duplicate 'states' line");
            std::size_t n = detail::parseIndex(toks[1], lineNo, "state count");
            if (n == 0) throw ParseError(lineNo, toks[1].column, "state count must be positive");
            p.model.addStates(n);
            sawStates = true;
        } else if (kw == "initial") {
            need(2, "1 argument: initial <state>");
            if (sawInitial) throw ParseError(lineNo, toks[0].column, "duplicate 'initial' line");
            p.model.initial = state(toks[1]);
            sawInitial = true;
        } else if (kw == "action") {
            need(3, "2 arguments: action <state> <label>");
            closeAction(lineNo);
            openActionState = state(toks[1]);
            openLabel = toks[2].text;
        } else if (kw == "to") {
            need(3, "2 arguments: to <state> <probability>");
            if (!openActionState)
                throw ParseError(lineNo, toks[0].column, "'to' outside an action block");
            openEntries.push_back({state(toks[1]), detail::parseProbability(toks[2], lineNo)});
        } else if (kw == "lower" || kw == "upper" || kw == "oracle") {
            need(3, ("2 arguments: " + kw + " <action> <cost>").c_str());
            closeAction(lineNo);
            std::size_t idx = costSlot(toks[1]);
            auto& table = kw == "lower" ? lower : kw == "upper" ? upper : oracle;
            if (table[idx])
                throw ParseError(lineNo, toks[1].column,
                                 "duplicate '" + kw + "' for action " + toks[1].text);
            table[idx] = detail::parseCostValue(toks[2], lineNo);
        } else if (kw == "safety") {
            need(2, "1 argument: safety <lambda>");
            if (sawSafety) throw ParseError(lineNo, toks[0].column, "duplicate 'safety' line");
            p.safety.lambda = detail::parseProbability(toks[1], lineNo);
            sawSafety = true;
        } else if (kw == "unsafe") {
            need(2, "1 argument: unsafe <state>");
            p.safety.target.push_back(state(toks[1]));
        } else if (kw == "performance") {
            need(2, "1 argument: performance <kappa>");
            if (sawPerformance)
                throw ParseError(lineNo, toks[0].column, "duplicate 'performance' line");
            p.performance.kappa = detail::parseProbability(toks[1], lineNo);
            sawPerformance = true;
        } else if (kw == "goal") {
            need(2, "1 argument: goal <state>");
            p.performance.goal.push_back(state(toks[1]));
        } else {
            throw ParseError(lineNo, toks[0].column, "unknown keyword '" + kw + "'");
        }
    }
    ++lineNo;
    closeAction(lineNo);

    if (!sawHeader) throw ParseError(1, 1, "empty input, expected 'safesynth model 1'");
    if (!sawStates) throw ParseError(lineNo, 1, "missing 'states' line");
    if (!sawInitial) throw ParseError(lineNo, 1, "missing 'initial' line");
    if (!sawSafety) throw ParseError(lineNo, 1, "missing 'safety' line");
    if (!sawPerformance) throw ParseError(lineNo, 1, "missing 'performance' line");

    std::vector<double> l(actionCount), u(actionCount);
    std::optional<std::vector<double>> t;
    std::size_t oracleCount = 0;
    for (const auto& v : oracle) oracleCount += v.has_value() ? 1 : 0;
    if (oracleCount != 0 && oracleCount != actionCount)
        throw ParseError(lineNo, 1, "oracle block must cover every action or be absent");
    if (oracleCount == actionCount) t.emplace(actionCount);
    for (std::size_t i = 0; i < actionCount; ++i) {
        if (!lower[i]) throw ParseError(lineNo, 1, "missing 'lower' for action " + std::to_string(i));
        if (!upper[i]) throw ParseError(lineNo, 1, "missing 'upper' for action " + std::to_string(i));
        l[i] = *lower[i];
        u[i] = *upper[i];
        if (t) (*t)[i] = *oracle[i];
    }
    p.costs = t ? CostModel(l, u, *t) : CostModel(l, u);

    sortUnique(p.safety.target);
    sortUnique(p.performance.goal);
    try {
        requireValid(p.model);
        checkSafetySpec(p.model, p.safety);
        checkPerformanceSpec(p.model, p.performance);
        requireValidCosts(p.model, p.costs);
    } catch (const std::invalid_argument& e) {
        throw ParseError(lineNo, 1, e.what());
    }
    p.syncCounts();
    return p;
}

inline ProblemInstance parseModelFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parseModelText(buf.str());
}

namespace detail {

inline std::string costLiteral(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace detail

// Canonical rendering; parseModelText(printModel(p)) reproduces p exactly.
inline std::string printModel(const ProblemInstance& p) {
    std::string out = "safesynth model 1\n";
    if (!p.metadata.name.empty()) out += "name " + p.metadata.name + "\n";
    for (const auto& [k, v] : p.metadata.parameters) out += "param " + k + " " + v + "\n";
    out += "states " + std::to_string(p.model.stateCount()) + "\n";
    out += "initial " + std::to_string(p.model.initial) + "\n";
    std::vector<const Choice*> byId(p.model.actionCount(), nullptr);
    std::vector<StateId> ownerOf(p.model.actionCount(), 0);
    for (StateId s = 0; s < p.model.stateCount(); ++s)
        for (const Choice& c : p.model.enabled(s)) {
            byId[c.action] = &c;
            ownerOf[c.action] = s;
        }
    for (ActionId a = 0; a < p.model.actionCount(); ++a)
        if (byId[a] == nullptr)
            throw std::invalid_argument("action ids are not dense; cannot print this model");
    for (ActionId a = 0; a < p.model.actionCount(); ++a) {
        out += "action " + std::to_string(ownerOf[a]) + " " + byId[a]->label + "\n";
        for (const auto& e : byId[a]->distribution.entries)
            out += "to " + std::to_string(e.target) + " " + e.probability.str() + "\n";
    }
    for (ActionId a = 0; a < p.model.actionCount(); ++a)
        out += "lower " + std::to_string(a) + " " + detail::costLiteral(p.costs.lowerBound(a)) + "\n";
    for (ActionId a = 0; a < p.model.actionCount(); ++a)
        out += "upper " + std::to_string(a) + " " + detail::costLiteral(p.costs.upperBound(a)) + "\n";
    if (p.costs.hasOracle())
        for (ActionId a = 0; a < p.model.actionCount(); ++a)
            out += "oracle " + std::to_string(a) + " " + detail::costLiteral(p.costs.reveal(a)) + "\n";
    out += "safety " + p.safety.lambda.str() + "\n";
    for (StateId s : p.safety.target) out += "unsafe " + std::to_string(s) + "\n";
    out += "performance " + p.performance.kappa.str() + "\n";
    for (StateId g : p.performance.goal) out += "goal " + std::to_string(g) + "\n";
    return out;
}

inline void writeModelFile(const std::string& path, const ProblemInstance& p) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write model file: " + path);
    out << printModel(p);
}

} // namespace safesynth
