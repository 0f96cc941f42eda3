#include "safesynth/analysis.hpp"
#include "safesynth/benchmarks.hpp"
#include "safesynth/loop.hpp"
#include "safesynth/model_format.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>

using namespace safesynth;

namespace {

void checkMetadataInSync(const ProblemInstance& p) {
    CHECK(p.metadata.states == p.model.stateCount());
    CHECK(p.metadata.transitions == p.model.choiceCount());
    std::size_t branches = 0;
    for (StateId s = 0; s < p.model.stateCount(); ++s)
        for (const Choice& c : p.model.enabled(s)) branches += c.distribution.entries.size();
    CHECK(p.metadata.branches == branches);
}

void checkWellFormedInstance(const ProblemInstance& p, bool disjoint = true) {
    CHECK_NOTHROW(validate(p.model));
    checkMetadataInSync(p);

    if (disjoint) {
        std::set<StateId> unsafe(p.safety.target.begin(), p.safety.target.end());
        for (StateId g : p.performance.goal) CHECK(unsafe.count(g) == 0);
    }

    // both objectives are live: the hazard and the goal can each be reached
    CHECK(maxReachProbMdp(p.model, p.safety.target).atInitial(p.model) > 0.0);
    CHECK(maxReachProbMdp(p.model, p.performance.goal).atInitial(p.model) > 0.0);
}

bool isAbsorbing(const Mdp& m, StateId s) {
    const auto& cs = m.enabled(s);
    return cs.size() == 1 && cs[0].distribution.entries.size() == 1 &&
           cs[0].distribution.entries[0].target == s;
}

} // namespace

TEST_CASE("the running example is generated as documented") {
    ProblemInstance p = genFig1();
    CHECK(p.model.stateCount() == 5);
    CHECK(p.model.actionCount() == 7);
    CHECK(p.safety.lambda == Rational(3, 10));
    CHECK(p.safety.target == std::vector<StateId>{2});
    CHECK(p.performance.goal == std::vector<StateId>{2, 3, 4});
    CHECK(p.performance.kappa == Rational(3, 2));
    CHECK(p.metadata.name == "fig1");
    checkWellFormedInstance(p, false);

    ProblemInstance custom = genFig1(Rational(7, 4));
    CHECK(custom.performance.kappa == Rational(7, 4));
}

TEST_CASE("the janitor grid has the documented size and structure") {
    ProblemInstance p = genJanitor(3, 3, Rational(1, 4), 7);
    CHECK(p.metadata.states == 324);
    CHECK(p.metadata.transitions == 836);
    CHECK(p.metadata.branches == 2108);
    CHECK(p.metadata.name == "janitor");
    checkWellFormedInstance(p);

    const std::size_t cells = 9;
    auto stateIdx = [&](std::size_t rc, std::size_t h, std::size_t jc) {
        return static_cast<StateId>((rc * 4 + h) * cells + jc);
    };

    // collisions and the finished task are absorbing; everything else steers
    std::size_t collisions = 0, done = 0;
    for (std::size_t rc = 0; rc < cells; ++rc)
        for (std::size_t h = 0; h < 4; ++h)
            for (std::size_t jc = 0; jc < cells; ++jc) {
                StateId s = stateIdx(rc, h, jc);
                if (rc == jc) {
                    CHECK(isAbsorbing(p.model, s));
                    ++collisions;
                } else if (rc == 8) {
                    CHECK(isAbsorbing(p.model, s));
                    ++done;
                } else {
                    CHECK(p.model.enabled(s).size() == 3);
                }
            }
    CHECK(collisions == 36);
    CHECK(done == 32);
    CHECK(p.safety.target.size() == 36);
    CHECK(p.performance.goal.size() == 32);

    // steering costs are known exactly; only forward fuel is uncertain
    for (StateId s = 0; s < p.model.stateCount(); ++s)
        for (const Choice& c : p.model.enabled(s)) {
            double lo = p.costs.lowerBound(c.action), hi = p.costs.upperBound(c.action);
            double truth = p.costs.reveal(c.action);
            CHECK(lo <= truth);
            CHECK(truth <= hi);
            if (c.label == "left" || c.label == "right") {
                CHECK(lo == 1.0);
                CHECK(hi == 1.0);
            } else if (c.label == "forward") {
                CHECK(lo == 1.0);
                CHECK(hi == 10.0);
            }
        }
}

TEST_CASE("janitor instances are reproducible per seed") {
    std::string a = printModel(genJanitor(3, 3, Rational(1, 4), 7));
    std::string b = printModel(genJanitor(3, 3, Rational(1, 4), 7));
    std::string c = printModel(genJanitor(3, 3, Rational(1, 4), 8));
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("the line follower has one speed fan per interior state") {
    ProblemInstance p = genFolLine(20, 3, 2, Rational(3, 5));
    CHECK(p.metadata.states == 100);
    CHECK(p.metadata.transitions == 290);
    CHECK(p.metadata.name == "folline");
    checkWellFormedInstance(p);

    const std::size_t offsets = 5;
    for (StateId s = 0; s < p.model.stateCount(); ++s) {
        std::size_t pos = s / offsets;
        const auto& cs = p.model.enabled(s);
        if (pos == 19) {
            CHECK(isAbsorbing(p.model, s));
        } else {
            REQUIRE(cs.size() == 3);
            for (std::size_t k = 0; k < 3; ++k) {
                CHECK(cs[k].label == "speed" + std::to_string(k + 1));
                // faster is cheaper, bounds stay honest
                CHECK(p.costs.reveal(cs[k].action) == static_cast<double>(3 - k));
                CHECK(p.costs.lowerBound(cs[k].action) == 1.0);
                CHECK(p.costs.upperBound(cs[k].action) == 3.0);
            }
        }
    }

    // the drift fans out to the neighbor offsets and clamps at the rim
    const Choice& slow = p.model.enabled(p.model.initial)[0];
    REQUIRE(slow.distribution.entries.size() == 3);
    CHECK(slow.distribution.entries[1].probability == Rational(5, 6)); // stay for speed1 of 3

    // deviating from the line is unsafe, finishing it is the goal
    CHECK(p.safety.target.size() == 38);
    CHECK(p.performance.goal.size() == 5);
    CHECK(printModel(p) == printModel(genFolLine(20, 3, 2, Rational(3, 5))));
}

TEST_CASE("tighter safety thresholds never make the optimum cheaper") {
    ProblemInstance tight = genFolLine(4, 2, 2, Rational(4, 100));
    ProblemInstance loose = genFolLine(4, 2, 2, Rational(12, 100));

    BaselineResult t = naiveBaseline(tight.model, tight.costs, tight.safety, tight.performance);
    BaselineResult l = naiveBaseline(loose.model, loose.costs, loose.safety, loose.performance);

    CHECK(t.safeSchedulers > 0);
    CHECK(t.safeSchedulers < l.safeSchedulers);
    CHECK(t.cost == Catch::Approx(4.25).margin(1e-9));
    CHECK(l.cost == Catch::Approx(3.25).margin(1e-9));

    // below the all-slow floor nothing is safe at all
    ProblemInstance choked = genFolLine(4, 2, 2, Rational(1, 100));
    BaselineResult c = naiveBaseline(choked.model, choked.costs, choked.safety, choked.performance);
    CHECK(c.safeSchedulers == 0);
}

TEST_CASE("the check-in robot resets its staleness counter on success") {
    ProblemInstance p = genComExp(4, 4, 2, Rational(1, 5));
    CHECK(p.metadata.states == 288);
    CHECK(p.metadata.name == "comexp");
    checkWellFormedInstance(p);

    const std::size_t counters = 6, tries = 3;
    auto stateIdx = [&](std::size_t cell, std::size_t counter, std::size_t used) {
        return static_cast<StateId>((cell * counters + counter) * tries + used);
    };

    for (StateId s = 0; s < p.model.stateCount(); ++s) {
        std::size_t used = s % tries;
        std::size_t counter = (s / tries) % counters;
        std::size_t cell = s / (tries * counters);
        const auto& cs = p.model.enabled(s);
        if (cell == 15 && counter < 5) {
            CHECK(isAbsorbing(p.model, s));
            continue;
        }
        // moving is always possible, so never communicating is a policy
        std::size_t moves = 0, comms = 0;
        for (const Choice& c : cs) {
            if (c.label == "east" || c.label == "north" || c.label == "west" ||
                c.label == "south") {
                ++moves;
                // movement restores the attempt budget and bumps staleness
                REQUIRE(c.distribution.entries.size() == 1);
                StateId t = c.distribution.entries[0].target;
                CHECK(t % tries == 0);
                CHECK((t / tries) % counters == std::min<std::size_t>(counter + 1, 5));
            } else {
                ++comms;
                CHECK((c.label == "chanA" || c.label == "chanB"));
                CHECK(p.costs.reveal(c.action) == 10.0); // talking is expensive here
            }
        }
        CHECK(moves == 4);
        CHECK(comms == (used < 2 ? 2 : 0));
    }

    // channel quality depends on the position and is never certain
    StateId midway = stateIdx(5, 2, 0); // cell (1,1), counter 2, fresh attempts
    const auto& cs = p.model.enabled(midway);
    const Choice* chanA = nullptr;
    for (const Choice& c : cs)
        if (c.label == "chanA") chanA = &c;
    REQUIRE(chanA != nullptr);
    REQUIRE(chanA->distribution.entries.size() == 2);
    StateId succ = stateIdx(5, 0, 1), fail = stateIdx(5, 3, 1);
    Rational ok(2, 5); // (1 + x) / (width + 1) at x = 1
    for (const auto& e : chanA->distribution.entries) {
        CHECK((e.target == succ || e.target == fail));
        CHECK(e.probability == (e.target == succ ? ok : Rational(1) - ok));
        CHECK(e.probability > Rational(0));
        CHECK(e.probability < Rational(1));
    }
}

TEST_CASE("the conflict family carries its halving threshold") {
    ProblemInstance p = genConflictFamily(4);
    CHECK(p.safety.lambda == Rational(1, 8));
    CHECK(p.metadata.name == "conflict");
    checkWellFormedInstance(p, false);

    ProblemInstance p6 = genConflictFamily(6);
    CHECK(p6.safety.lambda == Rational(1, 16));
}

TEST_CASE("degenerate generator parameters are rejected") {
    CHECK_THROWS_AS(genConflictFamily(0), std::invalid_argument);
    CHECK_THROWS_AS(genConflictFamily(5), std::invalid_argument);
    CHECK_THROWS_AS(genJanitor(1, 4, Rational(1, 4), 7), std::invalid_argument);
    CHECK_THROWS_AS(genJanitor(4, 1, Rational(1, 4), 7), std::invalid_argument);
    CHECK_THROWS_AS(genFolLine(1, 3, 2, Rational(1, 2)), std::invalid_argument);
    CHECK_THROWS_AS(genFolLine(20, 1, 2, Rational(1, 2)), std::invalid_argument);
    CHECK_THROWS_AS(genFolLine(20, 3, 0, Rational(1, 2)), std::invalid_argument);
    CHECK_THROWS_AS(genComExp(1, 4, 2, Rational(1, 5)), std::invalid_argument);
    CHECK_THROWS_AS(genComExp(4, 4, 0, Rational(1, 5)), std::invalid_argument);
}
