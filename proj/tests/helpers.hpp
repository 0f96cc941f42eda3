#pragma once

// Shared test fixtures: the fig1 schedulers by action id, independent chain
// solvers based on dense Gaussian elimination (deliberately a different
// algorithm than the library's value iteration), odometer enumeration of
// deterministic schedulers, random model generation for property tests, and
// a tiny process runner for CLI checks.

#include "safesynth/model.hpp"
#include "safesynth/objectives.hpp"
#include "safesynth/scheduler.hpp"

#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace th {

using namespace safesynth;

inline double kInfD() { return std::numeric_limits<double>::infinity(); }

// fig1 action ids: s0 has a=0, b=1; s1 has c=2, d=3; the loops are 4,5,6.
inline DetScheduler fig1Sched(ActionId atS0, ActionId atS1) {
    DetScheduler s;
    s.choice = {atS0, atS1, 4, 5, 6};
    return s;
}
inline DetScheduler sigma1() { return fig1Sched(0, 2); } // (a,c) unsafe
inline DetScheduler sigma2() { return fig1Sched(0, 3); } // (a,d)
inline DetScheduler sigma3() { return fig1Sched(1, 2); } // (b,c)
inline DetScheduler sigma4() { return fig1Sched(1, 3); } // (b,d)

inline DetPermissiveScheduler fig1ThetaSafe() {
    DetPermissiveScheduler t;
    t.allowed = {{0, 1}, {3}, {4}, {5}, {6}};
    return t;
}

// ---------------------------------------------------------------------------
// Independent chain solvers

inline std::vector<double> gaussSolve(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        std::swap(A[piv], A[col]);
        std::swap(b[piv], b[col]);
        if (std::abs(A[col][col]) < 1e-12) throw std::runtime_error("singular linear system");
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = A[r][col] / A[col][col];
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) A[r][c] -= f * A[col][c];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = b[i] / A[i][i];
    return x;
}

// Reach probabilities of a chain: 1 on the target, 0 where the target is
// graph-unreachable, and a dense linear solve on the remaining states.
inline std::vector<double> chainReach(const Mc& mc, const std::vector<StateId>& target) {
    const Mdp& m = mc.mdp();
    const std::size_t n = m.stateCount();
    std::vector<char> isTarget = stateMask(m, target);
    std::vector<char> can(isTarget.begin(), isTarget.end());
    bool changed = true;
    while (changed) {
        changed = false;
        for (StateId s = 0; s < n; ++s) {
            if (can[s]) continue;
            for (const auto& e : mc.transition(s).entries)
                if (can[e.target]) {
                    can[s] = 1;
                    changed = true;
                    break;
                }
        }
    }
    const std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> row(n, none);
    std::vector<StateId> unknown;
    for (StateId s = 0; s < n; ++s)
        if (can[s] && !isTarget[s]) {
            row[s] = unknown.size();
            unknown.push_back(s);
        }
    std::vector<std::vector<double>> A(unknown.size(), std::vector<double>(unknown.size(), 0.0));
    std::vector<double> b(unknown.size(), 0.0);
    for (std::size_t i = 0; i < unknown.size(); ++i) {
        A[i][i] = 1.0;
        for (const auto& e : mc.transition(unknown[i]).entries) {
            double p = e.probability.toDouble();
            if (isTarget[e.target])
                b[i] += p;
            else if (row[e.target] != none)
                A[i][row[e.target]] -= p;
        }
    }
    std::vector<double> x = unknown.empty() ? std::vector<double>{} : gaussSolve(A, b);
    std::vector<double> out(n, 0.0);
    for (StateId s = 0; s < n; ++s) {
        if (isTarget[s])
            out[s] = 1.0;
        else if (row[s] != none)
            out[s] = x[row[s]];
    }
    return out;
}

// Expected accumulated cost until the goal set; infinite unless the chain
// reaches the goal almost surely from the initial state.
inline double chainCost(const Mc& mc, const std::vector<double>& costs,
                        const std::vector<StateId>& goal) {
    const Mdp& m = mc.mdp();
    const std::size_t n = m.stateCount();
    std::vector<char> isGoal = stateMask(m, goal);
    if (isGoal[m.initial]) return 0.0;
    std::vector<double> reach = chainReach(mc, goal);
    if (reach[m.initial] < 1.0 - 1e-9) return std::numeric_limits<double>::infinity();

    std::vector<char> seen(n, 0);
    std::vector<StateId> stack{m.initial};
    seen[m.initial] = 1;
    while (!stack.empty()) {
        StateId s = stack.back();
        stack.pop_back();
        if (isGoal[s]) continue;
        for (const auto& e : mc.transition(s).entries)
            if (!seen[e.target]) {
                seen[e.target] = 1;
                stack.push_back(e.target);
            }
    }
    const std::size_t none = static_cast<std::size_t>(-1);
    std::vector<std::size_t> row(n, none);
    std::vector<StateId> unknown;
    for (StateId s = 0; s < n; ++s)
        if (seen[s] && !isGoal[s]) {
            row[s] = unknown.size();
            unknown.push_back(s);
        }
    std::vector<std::vector<double>> A(unknown.size(), std::vector<double>(unknown.size(), 0.0));
    std::vector<double> b(unknown.size(), 0.0);
    for (std::size_t i = 0; i < unknown.size(); ++i) {
        StateId s = unknown[i];
        A[i][i] += 1.0;
        b[i] += costs.at(mc.choice(s).action);
        for (const auto& e : mc.transition(s).entries)
            if (row[e.target] != none) A[i][row[e.target]] -= e.probability.toDouble();
    }
    std::vector<double> x = gaussSolve(A, b);
    return x[row[m.initial]];
}

// ---------------------------------------------------------------------------
// Exhaustive scheduler enumeration (odometer over enabled lists, independent
// of the library's range class)

inline std::vector<DetScheduler> allDetSchedulers(const Mdp& m) {
    std::vector<DetScheduler> out;
    std::vector<std::size_t> idx(m.stateCount(), 0);
    while (true) {
        DetScheduler s;
        for (StateId st = 0; st < m.stateCount(); ++st)
            s.choice.push_back(m.enabled(st)[idx[st]].action);
        out.push_back(std::move(s));
        bool advanced = false;
        for (std::size_t k = m.stateCount(); k-- > 0;) {
            if (++idx[k] < m.enabled(static_cast<StateId>(k)).size()) {
                advanced = true;
                break;
            }
            idx[k] = 0;
        }
        if (!advanced) return out;
    }
}

inline std::vector<DetScheduler> bruteSafeSchedulers(const Mdp& m, const SafetySpec& spec) {
    std::vector<DetScheduler> out;
    for (const DetScheduler& s : allDetSchedulers(m))
        if (chainReach(induceMc(m, s), spec.target)[m.initial] <= spec.lambda.toDouble() + 1e-9)
            out.push_back(s);
    return out;
}

inline double bruteBestSafeCost(const Mdp& m, const SafetySpec& spec,
                                const std::vector<double>& costs,
                                const std::vector<StateId>& goal) {
    double best = std::numeric_limits<double>::infinity();
    for (const DetScheduler& s : bruteSafeSchedulers(m, spec))
        best = std::min(best, chainCost(induceMc(m, s), costs, goal));
    return best;
}

// A safe permissive assignment exists iff a safe deterministic scheduler
// exists: restriction can only lower the maximal reach probability, so any
// safe assignment contains safe singletons, and a safe singleton is itself
// an assignment. Searching the schedulers is therefore exhaustive over the
// assignments as well.
inline bool bruteSafeAssignmentExists(const Mdp& m, const SafetySpec& spec) {
    return !bruteSafeSchedulers(m, spec).empty();
}

// ---------------------------------------------------------------------------
// Random models

inline Mdp randomMdp(std::mt19937_64& rng, std::size_t maxStates = 6,
                     std::size_t maxActionsPerState = 3) {
    const std::size_t n = 2 + rng() % (maxStates - 1);
    Mdp m;
    m.addStates(n);
    m.initial = 0;
    for (StateId s = 0; s < n; ++s) {
        const std::size_t k = 1 + rng() % maxActionsPerState;
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t supportSize = 1 + rng() % std::min<std::size_t>(3, n);
            std::vector<StateId> targets;
            while (targets.size() < supportSize) {
                StateId t = static_cast<StateId>(rng() % n);
                if (std::find(targets.begin(), targets.end(), t) == targets.end())
                    targets.push_back(t);
            }
            std::sort(targets.begin(), targets.end());
            std::vector<long long> w(supportSize);
            long long total = 0;
            for (auto& x : w) {
                x = 1 + static_cast<long long>(rng() % 4);
                total += x;
            }
            Distribution d;
            for (std::size_t i = 0; i < supportSize; ++i)
                d.entries.push_back({targets[i], Rational(w[i], total)});
            m.addChoice(s, "a" + std::to_string(j), std::move(d));
        }
    }
    return m;
}

inline SafetySpec randomSafety(std::mt19937_64& rng, const Mdp& m) {
    std::vector<StateId> target;
    while (target.empty())
        for (StateId s = 0; s < m.stateCount(); ++s)
            if (rng() % 3 == 0) target.push_back(s);
    const long long den = 1 + static_cast<long long>(rng() % 8);
    const long long num = static_cast<long long>(rng() % (den + 1));
    return {Rational(num, den), target};
}

inline PerformanceSpec randomPerformance(std::mt19937_64& rng, const Mdp& m) {
    std::vector<StateId> goal;
    while (goal.empty())
        for (StateId s = 0; s < m.stateCount(); ++s)
            if (rng() % 3 == 0) goal.push_back(s);
    return {Rational(1 + static_cast<long long>(rng() % 20)), goal};
}

inline CostModel randomCosts(std::mt19937_64& rng, const Mdp& m) {
    std::vector<double> lower, upper, truth;
    for (ActionId a = 0; a < m.actionCount(); ++a) {
        double lo = static_cast<double>(rng() % 9) * 0.25;
        double hi = lo + static_cast<double>(rng() % 9) * 0.25;
        double mid = lo + (hi - lo) * static_cast<double>(rng() % 5) / 4.0;
        lower.push_back(lo);
        upper.push_back(hi);
        truth.push_back(mid);
    }
    return CostModel(lower, upper, truth);
}

// ---------------------------------------------------------------------------
// Process helpers

struct CmdResult {
    int code = -1;
    std::string output;
};

inline CmdResult runCommand(const std::string& cmd) {
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) throw std::runtime_error("popen failed: " + cmd);
    CmdResult res;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) res.output.append(buf, n);
    int rc = pclose(pipe);
    res.code = (rc >= 0 && WIFEXITED(rc)) ? WEXITSTATUS(rc) : -1;
    return res;
}

inline std::string scratchDir() {
    static const std::string dir = [] {
        std::string d = "/tmp/safesynth_test_" + std::to_string(getpid());
        mkdir(d.c_str(), 0755);
        return d;
    }();
    return dir;
}

inline void writeFile(const std::string& path, const std::string& text) {
    FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot write " + path);
    std::fwrite(text.data(), 1, text.size(), f);
    std::fclose(f);
}

} // namespace th
