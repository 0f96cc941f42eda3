#include "safesynth/benchmarks.hpp"
#include "safesynth/loop.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace safesynth;

namespace {

LoopConfig fallbackLoop() {
    LoopConfig cfg;
    cfg.solver.mode = SolverConfig::Mode::EnumerativeFallback;
    return cfg;
}

bool compliant(const DetPermissiveScheduler& theta, const DetScheduler& sigma) {
    for (StateId s = 0; s < sigma.choice.size(); ++s)
        if (!theta.allows(s, sigma.choice[s])) return false;
    return true;
}

void checkBoundLedger(const SynthesisReport& report) {
    double prevLower = 0.0;
    double prevUpper = th::kInfD();
    for (const IterationRecord& rec : report.iterations) {
        CHECK(rec.lower >= prevLower - 1e-12);
        CHECK(rec.upper <= prevUpper + 1e-12);
        if (std::isfinite(rec.upper)) CHECK(rec.lower <= rec.upper + 1e-9);
        prevLower = rec.lower;
        prevUpper = rec.upper;
    }
}

void checkNoRepeatedWork(const SynthesisReport& report) {
    const auto& its = report.iterations;
    for (std::size_t i = 0; i < its.size(); ++i)
        for (std::size_t j = i + 1; j < its.size(); ++j) {
            CHECK_FALSE((its[i].permissive == its[j].permissive));
            // earlier schedulers are excluded from every later restriction
            CHECK_FALSE(compliant(its[j].permissive, its[i].learned));
        }
}

} // namespace

TEST_CASE("known costs certify optimality in one iteration") {
    ProblemInstance p = genFig1();
    std::vector<double> ones(p.model.actionCount(), 1.0);
    CostModel unit(ones, ones, ones);

    SynthesisReport report = run(p.model, unit, p.safety, p.performance, fallbackLoop());

    CHECK(report.termination == Termination::GloballyOptimal);
    REQUIRE(report.iterations.size() == 1);
    CHECK(report.bestCost == Catch::Approx(1.4).margin(1e-9));
    CHECK(report.lower == Catch::Approx(1.4).margin(1e-9));
    CHECK(std::abs(report.bestCost - report.lower) <= 1e-6);
    REQUIRE(report.best.has_value());
    CHECK(th::chainCost(induceMc(p.model, *report.best), ones, p.performance.goal) ==
          Catch::Approx(1.4).margin(1e-9));
    CHECK(isSafePermissive(p.model, singleton(*report.best), p.safety));
}

TEST_CASE("hidden cheap unsafe actions force exhaustion, not optimality") {
    // true costs make the unsafe pairing (a, c) the unconstrained optimum,
    // so the lower bound can never climb up to the best safe cost
    ProblemInstance p = genFig1();
    std::vector<double> truth(p.model.actionCount(), 1.0);
    truth[0] = 0.1; // a
    truth[2] = 0.1; // c
    CostModel costs(p.costs.lowerVector(), p.costs.upperVector(), truth);
    PerformanceSpec strict{Rational(0), p.performance.goal};

    LoopConfig cfg = fallbackLoop();
    cfg.stopPolicy = LoopConfig::StopPolicy::ContinueToOptimal;

    SynthesisReport report = run(p.model, costs, p.safety, strict, cfg);

    CHECK(report.termination == Termination::Exhausted);
    CHECK(report.iterations.size() <= 3);
    CHECK(report.bestCost == Catch::Approx(0.7).margin(1e-9));
    CHECK(report.lower == Catch::Approx(0.16).margin(1e-9));
    REQUIRE(report.best.has_value());
    CHECK(report.best->choice[0] == 0); // a, then the detour d
    CHECK(report.best->choice[1] == 3);

    // the risky pairing is never proposed, in any iteration
    for (const IterationRecord& rec : report.iterations) {
        CHECK_FALSE((rec.permissive.allows(0, 0) && rec.permissive.allows(1, 2)));
        CHECK_FALSE((rec.learned.choice[0] == 0 && rec.learned.choice[1] == 2));
    }
    checkBoundLedger(report);
    checkNoRepeatedWork(report);

    BaselineResult base = naiveBaseline(p.model, costs, p.safety, strict);
    CHECK(base.cost == Catch::Approx(report.bestCost).margin(1e-6));
}

TEST_CASE("a single discounted action steers the loop to the cheapest safe scheduler") {
    ProblemInstance p = genFig1();
    std::vector<double> truth(p.model.actionCount(), 1.0);
    truth[2] = 0.1; // c only
    CostModel costs(p.costs.lowerVector(), p.costs.upperVector(), truth);

    LoopConfig cfg = fallbackLoop();
    cfg.stopPolicy = LoopConfig::StopPolicy::ContinueToOptimal;
    cfg.iterationCap = 10;

    SynthesisReport report = run(p.model, costs, p.safety, p.performance, cfg);
    BaselineResult base = naiveBaseline(p.model, costs, p.safety, p.performance);

    CHECK(base.cost == Catch::Approx(1.04).margin(1e-9));
    CHECK(report.bestCost == Catch::Approx(base.cost).margin(1e-6));
    CHECK((report.termination == Termination::GloballyOptimal ||
           report.termination == Termination::Exhausted));
    REQUIRE(report.best.has_value());
    CHECK(report.best->choice[0] == 1);
    CHECK(report.best->choice[1] == 2);
    checkBoundLedger(report);
    checkNoRepeatedWork(report);
}

TEST_CASE("an initial state inside the goal set is optimal for free") {
    Mdp m;
    m.addStates(2);
    m.addChoice(0, "stay", dirac(0));
    m.addChoice(1, "sink", dirac(1));
    std::vector<double> ones(2, 1.0);
    CostModel costs(std::vector<double>(2, 0.0), std::vector<double>(2, 2.0), ones);
    SafetySpec safety{Rational(1, 2), {1}};
    PerformanceSpec perf{Rational(5), {0}};

    SynthesisReport report = run(m, costs, safety, perf, fallbackLoop());

    CHECK(report.termination == Termination::GloballyOptimal);
    CHECK(report.iterations.size() == 1);
    CHECK(report.bestCost == 0.0);
    CHECK(report.lower == 0.0);
}

TEST_CASE("the exhaustive baseline prices the original example") {
    ProblemInstance p = genFig1();
    std::vector<double> ones(p.model.actionCount(), 1.0);
    CostModel unit(ones, ones, ones);

    BaselineResult base = naiveBaseline(p.model, unit, p.safety, p.performance);
    CHECK(base.safeSchedulers == 3);
    CHECK(base.cost == Catch::Approx(1.4).margin(1e-9));
    REQUIRE(base.best.has_value());
    CHECK(base.best->choice[0] == 1);
    CHECK(base.best->choice[1] == 2); // ties break toward the first enumerated

    SafetySpec tight{Rational(1, 10), p.safety.target};
    BaselineResult none = naiveBaseline(p.model, unit, tight, p.performance);
    CHECK(none.safeSchedulers == 0);
    CHECK_FALSE(none.best.has_value());
    CHECK(std::isinf(none.cost));

    SafetySpec loose{Rational(1), p.safety.target};
    BaselineResult all = naiveBaseline(p.model, unit, loose, p.performance);
    CHECK(all.safeSchedulers == 4);
    CHECK(all.cost == Catch::Approx(1.4).margin(1e-9));

    CostModel blind(std::vector<double>(7, 0.0), std::vector<double>(7, 2.0));
    CHECK_THROWS_AS(naiveBaseline(p.model, blind, p.safety, p.performance), std::invalid_argument);
}

TEST_CASE("a dead solver command yields a partial report, not a crash") {
    ProblemInstance p = genFig1();
    LoopConfig cfg;
    cfg.solver.mode = SolverConfig::Mode::External;
    cfg.solver.command = "/nonexistent/solver12345 -in";

    SynthesisReport report = run(p.model, p.costs, p.safety, p.performance, cfg);
    CHECK(report.termination == Termination::SolverFailure);
    CHECK(!report.message.empty());
    CHECK(report.iterations.empty());
    CHECK(std::isinf(report.bestCost));
}

TEST_CASE("the iteration callback sees every record in order") {
    ProblemInstance p = genFig1();
    std::vector<double> truth(p.model.actionCount(), 1.0);
    truth[0] = 0.1;
    truth[2] = 0.1;
    CostModel costs(p.costs.lowerVector(), p.costs.upperVector(), truth);

    LoopConfig cfg = fallbackLoop();
    cfg.stopPolicy = LoopConfig::StopPolicy::ContinueToOptimal;

    std::vector<std::size_t> indices;
    SynthesisReport report =
        run(p.model, costs, p.safety, p.performance, cfg,
            [&](const IterationRecord& rec) { indices.push_back(rec.index); });

    REQUIRE(indices.size() == report.iterations.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        CHECK(indices[i] == i + 1);
        CHECK(report.iterations[i].index == i + 1);
        CHECK(report.iterations[i].cumulativeMs >= 0.0);
    }
}

TEST_CASE("the kappa policy stops as soon as the threshold is met") {
    ProblemInstance p = genFig1();
    std::vector<double> truth(p.model.actionCount(), 1.0);
    truth[0] = 0.1;
    truth[2] = 0.1;
    CostModel costs(p.costs.lowerVector(), p.costs.upperVector(), truth);
    PerformanceSpec loose{Rational(3, 2), p.performance.goal}; // 0.7 <= 1.5 on iteration one

    LoopConfig cfg = fallbackLoop();
    SynthesisReport report = run(p.model, costs, p.safety, loose, cfg);

    CHECK(report.termination == Termination::PerformanceMet);
    CHECK(report.iterations.size() == 1);
    CHECK(report.bestCost <= 1.5);
    CHECK(report.bestCost == Catch::Approx(0.7).margin(1e-9));
}

TEST_CASE("the loop matches the exhaustive baseline on random instances") {
    std::mt19937_64 rng(777001);
    int mismatches = 0;
    int unsafeBest = 0;
    int nontrivial = 0;
    for (int round = 0; round < 60; ++round) {
        Mdp m = th::randomMdp(rng, 4, 2);
        SafetySpec safety = th::randomSafety(rng, m);
        PerformanceSpec perf = th::randomPerformance(rng, m);
        CostModel costs = th::randomCosts(rng, m);

        BaselineResult base = naiveBaseline(m, costs, safety, perf);

        LoopConfig cfg = fallbackLoop();
        cfg.stopPolicy = LoopConfig::StopPolicy::ContinueToOptimal;
        cfg.iterationCap = base.safeSchedulers + 2;
        cfg.learner.episodes = 300;
        cfg.learner.seed = rng();
        cfg.evalBudget = 5000;

        SynthesisReport report = run(m, costs, safety, perf, cfg);

        if (base.safeSchedulers > 0) ++nontrivial;
        bool bothInf = std::isinf(base.cost) && std::isinf(report.bestCost);
        if (!bothInf && std::abs(base.cost - report.bestCost) > 1e-6) ++mismatches;
        if (report.best && !isSafePermissive(m, singleton(*report.best), safety)) ++unsafeBest;
        if (report.termination == Termination::IterationCap ||
            report.termination == Termination::SolverFailure)
            ++mismatches;
        checkBoundLedger(report);
        checkNoRepeatedWork(report);
        CHECK(report.iterations.size() <= base.safeSchedulers + 1);
    }
    CHECK(mismatches == 0);
    CHECK(unsafeBest == 0);
    CHECK(nontrivial >= 10);
}
