#include "safesynth/analysis.hpp"
#include "safesynth/benchmarks.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdint>
#include <set>

using namespace safesynth;

namespace {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
    std::uint64_t r = 1;
    for (std::uint64_t i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
    return r;
}

// All size-k subsets of the given ids, as sorted vectors.
std::set<std::vector<ActionId>> subsetsOfSize(const std::vector<ActionId>& ids, std::size_t k) {
    std::set<std::vector<ActionId>> out;
    std::vector<std::size_t> idx(k);
    for (std::size_t i = 0; i < k; ++i) idx[i] = i;
    while (true) {
        std::vector<ActionId> set;
        for (std::size_t i : idx) set.push_back(ids[i]);
        out.insert(set);
        std::size_t j = k;
        while (j-- > 0) {
            if (idx[j] + (k - j) < ids.size()) {
                ++idx[j];
                for (std::size_t l = j + 1; l < k; ++l) idx[l] = idx[l - 1] + 1;
                break;
            }
            if (j == 0) return out;
        }
    }
}

// Conflict search by definition: a set is a conflict when somebody uses all
// of it and everybody who does violates the threshold.
std::vector<std::vector<ActionId>> bruteConflicts(const Mdp& m, const SafetySpec& spec) {
    std::vector<DetScheduler> all = th::allDetSchedulers(m);
    std::vector<char> safe;
    const double bound = spec.lambda.toDouble() + 1e-10;
    for (const DetScheduler& s : all)
        safe.push_back(th::chainReach(induceMc(m, s), spec.target)[m.initial] <= bound);

    const std::size_t k = m.actionCount();
    auto isConflict = [&](std::uint64_t mask) {
        bool anyUser = false;
        for (std::size_t i = 0; i < all.size(); ++i) {
            std::uint64_t used = 0;
            for (ActionId a : all[i].choice) used |= std::uint64_t{1} << a;
            if ((used & mask) != mask) continue;
            if (safe[i]) return false;
            anyUser = true;
        }
        return anyUser;
    };

    std::vector<std::uint64_t> minimal;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << k); ++mask) {
        if (!isConflict(mask)) continue;
        bool hasConflictSubset = false;
        for (std::uint64_t sub = (mask - 1) & mask; sub; sub = (sub - 1) & mask)
            if (isConflict(sub)) {
                hasConflictSubset = true;
                break;
            }
        if (!hasConflictSubset) minimal.push_back(mask);
    }

    std::vector<std::vector<ActionId>> out;
    for (std::uint64_t mask : minimal) {
        std::vector<ActionId> set;
        for (ActionId a = 0; a < k; ++a)
            if (mask & (std::uint64_t{1} << a)) set.push_back(a);
        out.push_back(set);
    }
    return out;
}

} // namespace

TEST_CASE("fig1's only minimal conflict pairs the two risky actions") {
    ProblemInstance p = genFig1();
    auto conflicts = minimalConflictSets(p.model, p.safety);
    REQUIRE(conflicts.size() == 1);
    CHECK(conflicts[0] == std::vector<ActionId>{0, 2});
}

TEST_CASE("the chain family's conflicts are exactly the half-sized detour subsets") {
    for (std::size_t n : {std::size_t{2}, std::size_t{4}, std::size_t{6}}) {
        ProblemInstance p = genConflictFamily(n);
        auto conflicts = minimalConflictSets(p.model, p.safety);

        std::vector<ActionId> slowIds;
        for (std::size_t i = 0; i < n; ++i) slowIds.push_back(static_cast<ActionId>(2 * i + 1));
        std::set<std::vector<ActionId>> expected = subsetsOfSize(slowIds, n / 2);

        REQUIRE(conflicts.size() == expected.size());
        std::set<std::vector<ActionId>> got(conflicts.begin(), conflicts.end());
        CHECK(got == expected);
    }

    // sizes first, then ascending bitmask over the sorted action ids
    auto c4 = minimalConflictSets(genConflictFamily(4).model, genConflictFamily(4).safety);
    std::vector<std::vector<ActionId>> order = {{1, 3}, {1, 5}, {3, 5}, {1, 7}, {3, 7}, {5, 7}};
    CHECK(c4 == order);
}

TEST_CASE("conflict counts grow binomially with the family size") {
    std::vector<std::size_t> counts;
    for (std::size_t n : {std::size_t{2}, std::size_t{4}, std::size_t{6}, std::size_t{8}}) {
        ProblemInstance p = genConflictFamily(n);
        auto conflicts = minimalConflictSets(p.model, p.safety);
        CHECK(conflicts.size() == binomial(n, n / 2));
        CHECK(conflicts.size() >= (std::uint64_t{1} << (n / 2)));
        for (const auto& set : conflicts) CHECK(set.size() == n / 2);
        counts.push_back(conflicts.size());
    }
    CHECK(counts == std::vector<std::size_t>{2, 6, 20, 70});
}

TEST_CASE("models without unsafe schedulers have no conflicts") {
    ProblemInstance p = genFig1();
    CHECK(minimalConflictSets(p.model, {Rational(1), {2}}).empty());

    ProblemInstance m4 = genConflictFamily(4);
    CHECK(minimalConflictSets(m4.model, {Rational(1), m4.safety.target}).empty());
}

TEST_CASE("the candidate cap guards the subset search") {
    ProblemInstance p = genConflictFamily(10); // 22 actions, over the default cap
    CHECK_THROWS_AS(minimalConflictSets(p.model, p.safety), std::invalid_argument);

    ConflictOptions tight;
    tight.candidateCap = 4;
    ProblemInstance fig = genFig1(); // 7 actions
    CHECK_THROWS_AS(minimalConflictSets(fig.model, fig.safety, tight), std::invalid_argument);
}

TEST_CASE("conflict search matches a by-definition enumeration") {
    std::mt19937_64 rng(424242);
    int mismatches = 0;
    for (int round = 0; round < 60; ++round) {
        Mdp m = th::randomMdp(rng, 4, 2);
        SafetySpec spec = th::randomSafety(rng, m);
        auto expected = bruteConflicts(m, spec);
        auto got = minimalConflictSets(m, spec);
        std::set<std::vector<ActionId>> a(expected.begin(), expected.end());
        std::set<std::vector<ActionId>> b(got.begin(), got.end());
        if (a != b) ++mismatches;
    }
    CHECK(mismatches == 0);
}
