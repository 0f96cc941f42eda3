#pragma once

#include "safesynth/model.hpp"
#include "safesynth/objectives.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace safesynth {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline void finishInstance(ProblemInstance& p, bool disjointTargets) {
    requireValid(p.model);
    checkSafetySpec(p.model, p.safety);
    checkPerformanceSpec(p.model, p.performance);
    requireValidCosts(p.model, p.costs);
    p.syncCounts();
    if (disjointTargets) {
        std::vector<char> t = stateMask(p.model, p.safety.target);
        for (StateId g : p.performance.goal)
            if (t[g]) throw std::logic_error(p.metadata.name + ": unsafe and goal sets overlap");
    }
}

} // namespace detail

// Two-decision gridlet: four deterministic schedulers of which exactly three
// are safe at threshold 3/10, the canonical smoke test for the whole loop.
inline ProblemInstance genFig1(const Rational& kappa = Rational(3, 2)) {
    ProblemInstance p;
    Mdp& m = p.model;
    m.addStates(5);
    m.initial = 0;
    m.addChoice(0, "a", Distribution{{{1, Rational(3, 5)}, {3, Rational(2, 5)}}});
    m.addChoice(0, "b", Distribution{{{1, Rational(2, 5)}, {3, Rational(3, 5)}}});
    m.addChoice(1, "c", Distribution{{{2, Rational(3, 5)}, {4, Rational(2, 5)}}});
    m.addChoice(1, "d", Distribution{{{2, Rational(2, 5)}, {4, Rational(3, 5)}}});
    m.addChoice(2, "loop", dirac(2));
    m.addChoice(3, "loop", dirac(3));
    m.addChoice(4, "loop", dirac(4));

    p.safety = {Rational(3, 10), {2}};
    p.performance = {kappa, {2, 3, 4}};
    std::vector<double> lower(m.actionCount(), 0.0), upper(m.actionCount(), 2.0),
        oracle(m.actionCount(), 1.0);
    p.costs = CostModel(lower, upper, oracle);
    p.metadata.name = "fig1";
    p.metadata.parameters = {{"kappa", kappa.str()}};
    detail::finishInstance(p, false);
    return p;
}

// Chain of n risky/reliable action pairs: reaching the end through too many
// reliable steps is unsafe, and the minimal conflict sets are exactly the
// (n choose n/2) half-sized subsets of the reliable actions.
inline ProblemInstance genConflictFamily(std::size_t n) {
    if (n < 2 || n % 2 != 0)
        throw std::invalid_argument("conflict family requires an even n >= 2");
    ProblemInstance p;
    Mdp& m = p.model;
    const StateId bottom = static_cast<StateId>(n + 1);
    m.addStates(n + 2);
    m.initial = 0;
    for (StateId i = 0; i < n; ++i) {
        m.addChoice(i, "a" + std::to_string(i),
                    Distribution{{{i + 1, Rational(1, 2)}, {bottom, Rational(1, 2)}}});
        m.addChoice(i, "b" + std::to_string(i), dirac(i + 1));
    }
    m.addChoice(static_cast<StateId>(n), "c", dirac(static_cast<StateId>(n)));
    m.addChoice(bottom, "d", dirac(bottom));

    Rational lambda(1, 2);
    for (std::size_t k = 0; k < n / 2; ++k) lambda = lambda * Rational(1, 2);
    p.safety = {lambda, {static_cast<StateId>(n)}};
    p.performance = {Rational(static_cast<long long>(n)), {static_cast<StateId>(n), bottom}};
    std::vector<double> ones(m.actionCount(), 1.0);
    p.costs = CostModel(ones, ones, ones);
    p.metadata.name = "conflict";
    p.metadata.parameters = {{"n", std::to_string(n)}};
    detail::finishInstance(p, false);
    return p;
}

// Robot with a heading on a grid, a randomly walking janitor to avoid, and a
// seeded fuel surface revealed only on driving. Unsafe: sharing a cell
// (absorbing). Goal: the far corner while the janitor is elsewhere.
inline ProblemInstance genJanitor(std::size_t width, std::size_t height, const Rational& lambda,
                                  std::uint64_t seed) {
    if (width < 2 || height < 2) throw std::invalid_argument("janitor grid must be at least 2x2");
    ProblemInstance p;
    Mdp& m = p.model;
    const std::size_t cells = width * height;
    const std::size_t robotStates = cells * 4;
    const auto cellIdx = [&](std::size_t x, std::size_t y) { return y * width + x; };
    const auto stateIdx = [&](std::size_t rCell, std::size_t h, std::size_t jCell) {
        return static_cast<StateId>((rCell * 4 + h) * cells + jCell);
    };
    m.addStates(robotStates * cells);

    std::vector<double> fuel(cells);
    for (std::size_t c = 0; c < cells; ++c)
        fuel[c] = 1.0 + static_cast<double>(detail::splitmix64(seed ^ (0x517cc1b727220a95ULL * (c + 1))) % 10);

    // dx/dy per heading: E, N, W, S
    const int dx[4] = {1, 0, -1, 0};
    const int dy[4] = {0, -1, 0, 1};
    auto jNeighbors = [&](std::size_t jc) {
        std::vector<std::size_t> out;
        std::size_t x = jc % width, y = jc / width;
        if (x + 1 < width) out.push_back(cellIdx(x + 1, y));
        if (y > 0) out.push_back(cellIdx(x, y - 1));
        if (x > 0) out.push_back(cellIdx(x - 1, y));
        if (y + 1 < height) out.push_back(cellIdx(x, y + 1));
        return out;
    };

    std::vector<double> lower, upper, oracle;
    auto pushCost = [&](double l, double u, double t) {
        lower.push_back(l);
        upper.push_back(u);
        oracle.push_back(t);
    };
    const std::size_t goalCell = cellIdx(width - 1, height - 1);

    for (std::size_t rc = 0; rc < cells; ++rc) {
        for (std::size_t h = 0; h < 4; ++h) {
            for (std::size_t jc = 0; jc < cells; ++jc) {
                StateId s = stateIdx(rc, h, jc);
                if (rc == jc) { // collision, absorbing
                    m.addChoice(s, "halt", dirac(s));
                    pushCost(0.0, 0.0, 0.0);
                    continue;
                }
                if (rc == goalCell) { // task finished, absorbing
                    m.addChoice(s, "done", dirac(s));
                    pushCost(0.0, 0.0, 0.0);
                    continue;
                }
                auto neighbors = jNeighbors(jc);
                Rational step(1, static_cast<long long>(neighbors.size()));
                auto withJanitor = [&](std::size_t rCell, std::size_t rHead) {
                    Distribution d;
                    for (std::size_t jn : neighbors) d.entries.push_back({stateIdx(rCell, rHead, jn), step});
                    std::sort(d.entries.begin(), d.entries.end(),
                              [](const TransitionEntry& a, const TransitionEntry& b) { return a.target < b.target; });
                    return d;
                };
                m.addChoice(s, "left", withJanitor(rc, (h + 1) % 4));
                pushCost(1.0, 1.0, 1.0);
                m.addChoice(s, "right", withJanitor(rc, (h + 3) % 4));
                pushCost(1.0, 1.0, 1.0);
                std::size_t x = rc % width, y = rc / width;
                long long nx = static_cast<long long>(x) + dx[h];
                long long ny = static_cast<long long>(y) + dy[h];
                std::size_t tc = rc;
                if (nx >= 0 && nx < static_cast<long long>(width) && ny >= 0 &&
                    ny < static_cast<long long>(height))
                    tc = cellIdx(static_cast<std::size_t>(nx), static_cast<std::size_t>(ny));
                m.addChoice(s, "forward", withJanitor(tc, h));
                pushCost(1.0, 10.0, fuel[rc]);
            }
        }
    }

    std::size_t jStart = (width + height) % 2 == 0 ? cellIdx(width - 1, height - 2)
                                                   : cellIdx(width - 1, height - 1);
    m.initial = stateIdx(cellIdx(0, 0), 0, jStart);

    for (std::size_t rc = 0; rc < cells; ++rc)
        for (std::size_t h = 0; h < 4; ++h)
            for (std::size_t jc = 0; jc < cells; ++jc) {
                if (rc == jc) p.safety.target.push_back(stateIdx(rc, h, jc));
                else if (rc == goalCell) p.performance.goal.push_back(stateIdx(rc, h, jc));
            }
    p.safety.lambda = lambda;
    p.performance.kappa = Rational(static_cast<long long>(10 * (width + height)));
    p.costs = CostModel(lower, upper, oracle);
    p.metadata.name = "janitor";
    p.metadata.parameters = {{"width", std::to_string(width)},
                             {"height", std::to_string(height)},
                             {"lambda", lambda.str()},
                             {"seed", std::to_string(seed)}};
    detail::finishInstance(p, true);
    return p;
}

// Line follower: pick a speed each step, faster speeds deviate more often,
// drifting to the maximum offset is unsafe. The line end is the goal.
inline ProblemInstance genFolLine(std::size_t length, std::size_t speedLevels,
                                  std::size_t maxDistance, const Rational& lambda) {
    if (length < 2) throw std::invalid_argument("line must have length >= 2");
    if (speedLevels < 2) throw std::invalid_argument("need at least two speed levels");
    if (maxDistance < 1) throw std::invalid_argument("maximum distance must be >= 1");
    ProblemInstance p;
    Mdp& m = p.model;
    const std::size_t offsets = 2 * maxDistance + 1;
    const auto stateIdx = [&](std::size_t pos, long long off) {
        return static_cast<StateId>(pos * offsets + static_cast<std::size_t>(off + static_cast<long long>(maxDistance)));
    };
    m.addStates(length * offsets);
    m.initial = stateIdx(0, 0);

    std::vector<double> lower, upper, oracle;
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (long long off = -static_cast<long long>(maxDistance);
             off <= static_cast<long long>(maxDistance); ++off) {
            StateId s = stateIdx(pos, off);
            if (pos == length - 1) {
                m.addChoice(s, "done", dirac(s));
                lower.push_back(0.0);
                upper.push_back(0.0);
                oracle.push_back(0.0);
                continue;
            }
            for (std::size_t k = 1; k <= speedLevels; ++k) {
                Rational side(static_cast<long long>(k), static_cast<long long>(4 * speedLevels));
                Rational stay = Rational(1) - side - side;
                long long up = std::min<long long>(off + 1, static_cast<long long>(maxDistance));
                long long down = std::max<long long>(off - 1, -static_cast<long long>(maxDistance));
                Distribution d;
                auto add = [&](long long o, const Rational& prob) {
                    StateId t = stateIdx(pos + 1, o);
                    for (auto& e : d.entries)
                        if (e.target == t) {
                            e.probability = e.probability + prob;
                            return;
                        }
                    d.entries.push_back({t, prob});
                };
                add(down, side);
                add(off, stay);
                add(up, side);
                std::sort(d.entries.begin(), d.entries.end(),
                          [](const TransitionEntry& a, const TransitionEntry& b) { return a.target < b.target; });
                m.addChoice(s, "speed" + std::to_string(k), std::move(d));
                lower.push_back(1.0);
                upper.push_back(static_cast<double>(speedLevels));
                oracle.push_back(static_cast<double>(speedLevels + 1 - k));
            }
        }
    }

    for (std::size_t pos = 0; pos + 1 < length; ++pos) {
        p.safety.target.push_back(stateIdx(pos, static_cast<long long>(maxDistance)));
        p.safety.target.push_back(stateIdx(pos, -static_cast<long long>(maxDistance)));
    }
    sortUnique(p.safety.target);
    for (long long off = -static_cast<long long>(maxDistance);
         off <= static_cast<long long>(maxDistance); ++off)
        p.performance.goal.push_back(stateIdx(length - 1, off));
    p.safety.lambda = lambda;
    p.performance.kappa = Rational(static_cast<long long>(length * speedLevels));
    p.costs = CostModel(lower, upper, oracle);
    p.metadata.name = "folline";
    p.metadata.parameters = {{"length", std::to_string(length)},
                             {"speedLevels", std::to_string(speedLevels)},
                             {"maxDistance", std::to_string(maxDistance)},
                             {"lambda", lambda.str()}};
    detail::finishInstance(p, true);
    return p;
}

// Grid robot that must check in over lossy channels: the staleness counter
// resets on a successful transmission and hitting the cap is unsafe. Comm
// attempts are limited per cell visit; moving restores them.
inline ProblemInstance genComExp(std::size_t width, std::size_t height, std::size_t attempts,
                                 const Rational& lambda) {
    if (width < 2 || height < 2) throw std::invalid_argument("grid must be at least 2x2");
    if (attempts < 1) throw std::invalid_argument("need at least one comm attempt");
    ProblemInstance p;
    Mdp& m = p.model;
    const std::size_t cells = width * height;
    const std::size_t cap = (width + height + 1) / 2 + 1;
    const std::size_t counters = cap + 1;
    const std::size_t tries = attempts + 1;
    const auto stateIdx = [&](std::size_t cell, std::size_t counter, std::size_t used) {
        return static_cast<StateId>((cell * counters + counter) * tries + used);
    };
    m.addStates(cells * counters * tries);
    m.initial = stateIdx(0, 0, 0);
    const std::size_t goalCell = cells - 1;

    std::vector<double> lower, upper, oracle;
    auto pushCost = [&](double l, double u, double t) {
        lower.push_back(l);
        upper.push_back(u);
        oracle.push_back(t);
    };
    const char* moveNames[4] = {"east", "north", "west", "south"};
    const int dx[4] = {1, 0, -1, 0};
    const int dy[4] = {0, -1, 0, 1};

    for (std::size_t cell = 0; cell < cells; ++cell) {
        std::size_t x = cell % width, y = cell / width;
        for (std::size_t counter = 0; counter < counters; ++counter) {
            for (std::size_t used = 0; used < tries; ++used) {
                StateId s = stateIdx(cell, counter, used);
                if (cell == goalCell && counter < cap) { // goal, absorbing
                    m.addChoice(s, "done", dirac(s));
                    pushCost(0.0, 0.0, 0.0);
                    continue;
                }
                std::size_t bumped = std::min(counter + 1, cap);
                for (std::size_t dir = 0; dir < 4; ++dir) {
                    long long nx = static_cast<long long>(x) + dx[dir];
                    long long ny = static_cast<long long>(y) + dy[dir];
                    std::size_t tc = cell;
                    if (nx >= 0 && nx < static_cast<long long>(width) && ny >= 0 &&
                        ny < static_cast<long long>(height))
                        tc = static_cast<std::size_t>(ny) * width + static_cast<std::size_t>(nx);
                    m.addChoice(s, moveNames[dir], dirac(stateIdx(tc, bumped, 0)));
                    pushCost(1.0, 10.0, 1.0);
                }
                if (used < attempts) {
                    Rational ok1(static_cast<long long>(1 + x), static_cast<long long>(width + 1));
                    Rational ok2(static_cast<long long>(1 + y), static_cast<long long>(height + 1));
                    auto comm = [&](const char* label, const Rational& ok) {
                        StateId succ = stateIdx(cell, 0, used + 1);
                        StateId fail = stateIdx(cell, bumped, used + 1);
                        Distribution d;
                        if (succ == fail) {
                            d = dirac(succ);
                        } else {
                            d.entries = {{std::min(succ, fail), succ < fail ? ok : Rational(1) - ok},
                                         {std::max(succ, fail), succ < fail ? Rational(1) - ok : ok}};
                        }
                        m.addChoice(s, label, std::move(d));
                        pushCost(1.0, 10.0, 10.0);
                    };
                    comm("chanA", ok1);
                    comm("chanB", ok2);
                }
            }
        }
    }

    for (std::size_t cell = 0; cell < cells; ++cell)
        for (std::size_t used = 0; used < tries; ++used) {
            p.safety.target.push_back(stateIdx(cell, cap, used));
            if (cell == goalCell)
                for (std::size_t counter = 0; counter < cap; ++counter)
                    p.performance.goal.push_back(stateIdx(cell, counter, used));
        }
    sortUnique(p.safety.target);
    sortUnique(p.performance.goal);
    p.safety.lambda = lambda;
    p.performance.kappa = Rational(static_cast<long long>(20 * (width + height)));
    p.costs = CostModel(lower, upper, oracle);
    p.metadata.name = "comexp";
    p.metadata.parameters = {{"width", std::to_string(width)},
                             {"height", std::to_string(height)},
                             {"attempts", std::to_string(attempts)},
                             {"lambda", lambda.str()}};
    detail::finishInstance(p, true);
    return p;
}

} // namespace safesynth
