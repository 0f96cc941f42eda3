#pragma once

#include "safesynth/analysis.hpp"
#include "safesynth/learning.hpp"
#include "safesynth/solver.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace safesynth {

enum class Termination { PerformanceMet, GloballyOptimal, Exhausted, IterationCap, SolverFailure };

inline const char* terminationName(Termination t) {
    switch (t) {
        case Termination::PerformanceMet: return "performance-met";
        case Termination::GloballyOptimal: return "globally-optimal";
        case Termination::Exhausted: return "exhausted";
        case Termination::IterationCap: return "iteration-cap";
        case Termination::SolverFailure: return "solver-failure";
    }
    return "?";
}

struct IterationRecord {
    std::size_t index = 0; // 1-based
    DetPermissiveScheduler permissive;
    DetScheduler learned;
    double learnedCost = std::numeric_limits<double>::infinity(); // exact cost of this iteration's scheduler
    bool coverageOk = false;
    double upper = std::numeric_limits<double>::infinity(); // best certified cost so far
    double lower = 0.0;                                     // refined-cost optimum on the full model
    double synthesisMs = 0, learningMs = 0, evaluationMs = 0, boundMs = 0;
    double cumulativeMs = 0;
};

struct SynthesisReport {
    std::vector<IterationRecord> iterations;
    std::optional<DetScheduler> best;
    double bestCost = std::numeric_limits<double>::infinity();
    double lower = 0.0;
    Termination termination = Termination::IterationCap;
    std::string message;
};

struct LoopConfig {
    enum class StopPolicy { StopAtKappa, ContinueToOptimal };
    SolverConfig solver;
    LearnConfig learner;
    StopPolicy stopPolicy = StopPolicy::StopAtKappa;
    std::size_t iterationCap = 100;
    double epsOpt = 1e-6;
    std::size_t evalBudget = 1000;
};

// Alternates scheduler synthesis with learning: synthesize a maximally
// permissive safe scheduler (excluding everything already tried), learn a
// cheap deterministic scheduler inside it, evaluate that scheduler exactly
// on observed costs (upper bound), and re-solve the full model under
// optimistic refined costs (lower bound). Terminates on optimality, on the
// performance threshold, on exhaustion of safe schedulers, on the iteration
// cap, or on solver failure (partial report).
inline SynthesisReport run(const Mdp& m, const CostModel& costs, const SafetySpec& safety,
                           const PerformanceSpec& perf, const LoopConfig& cfg,
                           const std::function<void(const IterationRecord&)>& onIteration = {}) {
    checkSafetySpec(m, safety);
    checkPerformanceSpec(m, perf);
    requireValidCosts(m, costs);

    using Clock = std::chrono::steady_clock;
    auto msSince = [](Clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    };
    const auto startedAt = Clock::now();

    SynthesisReport report;
    CostLedger ledger(m.actionCount());
    std::vector<DetScheduler> learned;
    std::vector<DetPermissiveScheduler> proposed;
    double lowerSoFar = 0.0;

    for (std::size_t i = 1; i <= cfg.iterationCap; ++i) {
        IterationRecord rec;
        rec.index = i;

        auto t0 = Clock::now();
        SynthesisOutcome outcome;
        try {
            outcome = synthesizeSafePermissive(m, safety, learned, proposed, cfg.solver);
        } catch (const SolverError& e) {
            report.termination = Termination::SolverFailure;
            report.message = e.what();
            return report;
        }
        rec.synthesisMs = msSince(t0);
        if (outcome.status == SynthesisStatus::Unknown) {
            report.termination = Termination::SolverFailure;
            report.message = "solver returned unknown";
            return report;
        }
        if (outcome.status == SynthesisStatus::Unsat) {
            report.termination = Termination::Exhausted;
            return report;
        }
        rec.permissive = *outcome.scheduler;

        Mdp sub = restrict(m, rec.permissive);
        Environment env(sub, costs, perf.goal, cfg.learner.seed + i, cfg.learner.stepCap);

        t0 = Clock::now();
        LearnConfig learnerCfg = cfg.learner;
        learnerCfg.seed += i;
        LearnResult lr = learn(env, learnerCfg, ledger);
        rec.learningMs = msSince(t0);
        rec.learned = lr.greedy;

        t0 = Clock::now();
        EvalResult eval = evaluateExactly(env, lr.greedy, perf.goal, ledger, cfg.evalBudget);
        rec.evaluationMs = msSince(t0);
        rec.learnedCost = eval.value;
        rec.coverageOk = eval.coverageOk;
        if (eval.coverageOk && eval.value < report.bestCost) {
            report.bestCost = eval.value;
            report.best = lr.greedy;
        }
        rec.upper = report.bestCost;

        t0 = Clock::now();
        CostResult bound = minExpectedCostMdp(m, refineCosts(ledger, costs), perf.goal);
        rec.boundMs = msSince(t0);
        // refined costs only grow, so the exact bound is monotone; keep the
        // running maximum to shield the report from iteration noise
        lowerSoFar = std::max(lowerSoFar, bound.atInitial(m));
        rec.lower = lowerSoFar;
        report.lower = lowerSoFar;

        learned.push_back(lr.greedy);
        proposed.push_back(rec.permissive);

        rec.cumulativeMs = msSince(startedAt);
        report.iterations.push_back(rec);
        if (onIteration) onIteration(report.iterations.back());

        if (std::isfinite(report.bestCost) && std::isfinite(lowerSoFar) &&
            std::abs(report.bestCost - lowerSoFar) <= cfg.epsOpt) {
            report.termination = Termination::GloballyOptimal;
            return report;
        }
        if (cfg.stopPolicy == LoopConfig::StopPolicy::StopAtKappa &&
            report.bestCost <= perf.kappa.toDouble()) {
            report.termination = Termination::PerformanceMet;
            return report;
        }
    }
    report.termination = Termination::IterationCap;
    return report;
}

struct BaselineResult {
    std::optional<DetScheduler> best;
    double cost = std::numeric_limits<double>::infinity();
    std::size_t safeSchedulers = 0;
};

// Reference answer obtained with full knowledge: reveal every cost upfront,
// enumerate the safe deterministic schedulers outright, and take the exact
// minimum. Exponential, for validation only.
inline BaselineResult naiveBaseline(const Mdp& m, const CostModel& costs, const SafetySpec& safety,
                                    const PerformanceSpec& perf, std::size_t cap = 1000000) {
    checkSafetySpec(m, safety);
    checkPerformanceSpec(m, perf);
    if (!costs.hasOracle()) throw std::invalid_argument("baseline requires a cost oracle");
    std::vector<double> trueCosts;
    for (ActionId a = 0; a < m.actionCount(); ++a) trueCosts.push_back(costs.reveal(a));

    BaselineResult out;
    AnalysisOptions opt;
    for (const DetScheduler& sigma : enumerateSafeSchedulers(m, safety, cap)) {
        ++out.safeSchedulers;
        Mc chain = induceMc(m, sigma);
        double value = expectedCostMc(chain, trueCosts, perf.goal, opt).atInitial(chain.mdp());
        if (value < out.cost) {
            out.cost = value;
            out.best = sigma;
        }
    }
    return out;
}

} // namespace safesynth
