#pragma once

#include "safesynth/model.hpp"
#include "safesynth/objectives.hpp"
#include "safesynth/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace safesynth {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct AnalysisOptions {
    double epsProb = 1e-10;      // fixed-point residual threshold
    std::uint64_t maxSweeps = 1000000;
    double tieTolerance = 1e-9;  // argmin/argmax ties collapse within this
};

enum class SolveMethod { ExactAcyclic, Iterative };

struct ReachResult {
    std::vector<double> perState;
    SolveMethod method = SolveMethod::Iterative;
    std::optional<DetScheduler> witness;

    double atInitial(const Mdp& m) const { return perState.at(m.initial); }
};

struct CostResult {
    std::vector<double> perState;
    std::optional<DetScheduler> witness;

    double atInitial(const Mdp& m) const { return perState.at(m.initial); }
};

namespace detail {

// Per state, the indices (into enabled(s)) of the choices a computation may
// use. Lets the same engines serve full models, forced/banned searches, and
// almost-sure pruning without copying the model.
using ChoiceFilter = std::vector<std::vector<std::uint32_t>>;

inline ChoiceFilter allChoices(const Mdp& m) {
    ChoiceFilter f(m.stateCount());
    for (StateId s = 0; s < m.stateCount(); ++s) {
        f[s].resize(m.enabled(s).size());
        std::iota(f[s].begin(), f[s].end(), 0u);
    }
    return f;
}

inline std::vector<std::vector<StateId>> predecessorLists(const Mdp& m, const ChoiceFilter& allowed) {
    std::vector<std::vector<StateId>> pred(m.stateCount());
    for (StateId s = 0; s < m.stateCount(); ++s)
        for (std::uint32_t idx : allowed[s])
            for (const auto& e : m.enabled(s)[idx].distribution.entries)
                pred[e.target].push_back(s);
    return pred;
}

// States with a path into `set` (the set itself included). States in
// `blocked` are never expanded into, which models absorption at goals.
inline std::vector<char> reachesSet(const Mdp& m, const ChoiceFilter& allowed,
                                    const std::vector<char>& set,
                                    const std::vector<char>* blocked = nullptr) {
    auto pred = predecessorLists(m, allowed);
    std::vector<char> mark(m.stateCount(), 0);
    std::deque<StateId> queue;
    for (StateId s = 0; s < m.stateCount(); ++s)
        if (set[s]) {
            mark[s] = 1;
            queue.push_back(s);
        }
    while (!queue.empty()) {
        StateId t = queue.front();
        queue.pop_front();
        for (StateId p : pred[t]) {
            if (mark[p]) continue;
            if (blocked && (*blocked)[p]) continue;
            mark[p] = 1;
            queue.push_back(p);
        }
    }
    return mark;
}

// Greatest fixpoint of "some allowed action keeps all mass inside": the
// states from which the target can be avoided forever.
inline std::vector<char> avoidsForever(const Mdp& m, const ChoiceFilter& allowed,
                                       const std::vector<char>& target) {
    std::vector<char> in(m.stateCount(), 1);
    for (StateId s = 0; s < m.stateCount(); ++s)
        if (target[s]) in[s] = 0;
    bool changed = true;
    while (changed) {
        changed = false;
        for (StateId s = 0; s < m.stateCount(); ++s) {
            if (!in[s]) continue;
            bool keep = false;
            for (std::uint32_t idx : allowed[s]) {
                bool stays = true;
                for (const auto& e : m.enabled(s)[idx].distribution.entries)
                    if (!in[e.target]) {
                        stays = false;
                        break;
                    }
                if (stays) {
                    keep = true;
                    break;
                }
            }
            if (!keep) {
                in[s] = 0;
                changed = true;
            }
        }
    }
    return in;
}

struct AlmostSureResult {
    std::vector<char> inSet;             // exists a scheduler reaching goal almost surely
    std::vector<ActionId> certified;     // an action witnessing progress (kNoAction on goal / outside)
    std::vector<std::uint32_t> rank;     // BFS level of the certifying fixpoint
};

// Standard two-nested fixpoint for "exists scheduler with P(eventually
// goal) = 1", together with a certified proper choice per member state.
inline AlmostSureResult almostSurelyReaches(const Mdp& m, const ChoiceFilter& allowed,
                                            const std::vector<char>& goal) {
    const std::size_t n = m.stateCount();
    AlmostSureResult res;
    res.inSet.assign(n, 1);
    res.certified.assign(n, kNoAction);
    res.rank.assign(n, 0);
    while (true) {
        std::vector<char> r(n, 0);
        std::vector<ActionId> cert(n, kNoAction);
        std::vector<std::uint32_t> rank(n, 0);
        for (StateId s = 0; s < n; ++s)
            if (goal[s]) r[s] = 1;
        bool grew = true;
        std::uint32_t level = 0;
        while (grew) {
            grew = false;
            ++level;
            std::vector<StateId> added;
            for (StateId s = 0; s < n; ++s) {
                if (r[s] || goal[s] || !res.inSet[s]) continue;
                for (std::uint32_t idx : allowed[s]) {
                    bool staysIn = true, touchesR = false;
                    for (const auto& e : m.enabled(s)[idx].distribution.entries) {
                        if (!res.inSet[e.target]) staysIn = false;
                        if (r[e.target]) touchesR = true;
                    }
                    if (staysIn && touchesR) {
                        cert[s] = m.enabled(s)[idx].action;
                        rank[s] = level;
                        added.push_back(s);
                        break;
                    }
                }
            }
            for (StateId s : added) r[s] = 1;
            grew = !added.empty();
        }
        bool shrunk = false;
        for (StateId s = 0; s < n; ++s)
            if (res.inSet[s] && !r[s]) {
                res.inSet[s] = 0;
                shrunk = true;
            }
        if (!shrunk) {
            res.certified = std::move(cert);
            res.rank = std::move(rank);
            return res;
        }
    }
}

// Topological order of the non-pinned states over non-self edges; empty
// optional when that subgraph has a proper cycle.
inline std::optional<std::vector<StateId>> acyclicOrder(const Mdp& m, const ChoiceFilter& allowed,
                                                        const std::vector<char>& pinned) {
    const std::size_t n = m.stateCount();
    std::vector<char> color(n, 0); // 0 white, 1 on stack, 2 done
    std::vector<StateId> order;
    order.reserve(n);
    std::vector<std::pair<StateId, std::size_t>> stack;
    auto successors = [&](StateId s) {
        std::vector<StateId> succ;
        for (std::uint32_t idx : allowed[s])
            for (const auto& e : m.enabled(s)[idx].distribution.entries)
                if (e.target != s && !pinned[e.target]) succ.push_back(e.target);
        return succ;
    };
    std::vector<std::vector<StateId>> succCache(n);
    for (StateId s0 = 0; s0 < n; ++s0) {
        if (pinned[s0] || color[s0]) continue;
        stack.push_back({s0, 0});
        color[s0] = 1;
        succCache[s0] = successors(s0);
        while (!stack.empty()) {
            auto& [s, i] = stack.back();
            if (i < succCache[s].size()) {
                StateId t = succCache[s][i++];
                if (color[t] == 1) return std::nullopt;
                if (color[t] == 0) {
                    color[t] = 1;
                    succCache[t] = successors(t);
                    stack.push_back({t, 0});
                }
            } else {
                color[s] = 2;
                order.push_back(s);
                stack.pop_back();
            }
        }
    }
    return order; // successors appear before their predecessors
}

struct ReachValues {
    std::vector<double> x;
    SolveMethod method;
    std::vector<char> prob0;
};

// Shared engine for reachability values. Pins exact zeros via graph
// analysis, solves acyclic parts in closed form, iterates otherwise.
inline ReachValues reachValues(const Mdp& m, const ChoiceFilter& allowed,
                               const std::vector<char>& target, bool maximize,
                               const AnalysisOptions& opt) {
    const std::size_t n = m.stateCount();
    for (StateId s = 0; s < n; ++s)
        if (!target[s] && allowed[s].empty())
            throw std::logic_error("reachValues: state " + std::to_string(s) + " has no allowed action");

    ReachValues out;
    out.prob0.assign(n, 0);
    if (maximize) {
        auto canReach = reachesSet(m, allowed, target);
        for (StateId s = 0; s < n; ++s) out.prob0[s] = !canReach[s];
    } else {
        out.prob0 = avoidsForever(m, allowed, target);
    }

    // Pin probability-one states by graph analysis so almost-sure reach comes
    // out as exactly 1.0 instead of a value-iteration approximation. For the
    // maximum it is the usual two-nested fixpoint; for the minimum a state is
    // certain iff no run can slip into the avoidable region past the target.
    std::vector<char> prob1(n, 0);
    if (maximize) {
        prob1 = almostSurelyReaches(m, allowed, target).inSet;
    } else {
        auto escape = reachesSet(m, allowed, out.prob0, &target);
        for (StateId s = 0; s < n; ++s) prob1[s] = target[s] || !escape[s];
    }

    out.x.assign(n, 0.0);
    std::vector<char> pinned(n, 0);
    for (StateId s = 0; s < n; ++s) {
        if (target[s]) {
            out.x[s] = 1.0;
            pinned[s] = 1;
        } else if (out.prob0[s]) {
            out.x[s] = 0.0;
            pinned[s] = 1;
        } else if (prob1[s]) {
            out.x[s] = 1.0;
            pinned[s] = 1;
        }
    }

    auto backup = [&](StateId s, std::uint32_t idx, const std::vector<double>& x) {
        double self = 0, rest = 0;
        for (const auto& e : m.enabled(s)[idx].distribution.entries) {
            double p = e.probability.toDouble();
            if (e.target == s)
                self += p;
            else
                rest += p * x[e.target];
        }
        return std::pair<double, double>(self, rest);
    };

    if (auto order = acyclicOrder(m, allowed, pinned)) {
        out.method = SolveMethod::ExactAcyclic;
        for (StateId s : *order) {
            double best = maximize ? 0.0 : kInf;
            for (std::uint32_t idx : allowed[s]) {
                auto [self, rest] = backup(s, idx, out.x);
                double v = self < 1.0 ? rest / (1.0 - self) : 0.0;
                best = maximize ? std::max(best, v) : std::min(best, v);
            }
            out.x[s] = best;
        }
        return out;
    }

    out.method = SolveMethod::Iterative;
    std::vector<double> next = out.x;
    for (std::uint64_t sweep = 0; sweep < opt.maxSweeps; ++sweep) {
        double residual = 0;
        for (StateId s = 0; s < n; ++s) {
            if (pinned[s]) continue;
            double best = maximize ? 0.0 : kInf;
            for (std::uint32_t idx : allowed[s]) {
                double v = 0;
                for (const auto& e : m.enabled(s)[idx].distribution.entries)
                    v += e.probability.toDouble() * out.x[e.target];
                best = maximize ? std::max(best, v) : std::min(best, v);
            }
            next[s] = best;
            residual = std::max(residual, std::abs(next[s] - out.x[s]));
        }
        std::swap(out.x, next);
        if (residual < opt.epsProb) break;
    }
    return out;
}

inline ActionId smallestAllowedAction(const Mdp& m, const ChoiceFilter& allowed, StateId s) {
    ActionId best = kNoAction;
    for (std::uint32_t idx : allowed[s]) best = std::min(best, m.enabled(s)[idx].action);
    return best;
}

// Greedy witness for reachability values plus a repair pass: among
// tie-tolerance-equal choices, rewire states that currently miss the target
// toward choices with a successor that reaches it. Needed because a plain
// smallest-id tie-break can select a value-preserving loop.
inline DetScheduler reachWitness(const Mdp& m, const ChoiceFilter& allowed,
                                 const std::vector<char>& target, bool maximize,
                                 const ReachValues& vals, const AnalysisOptions& opt) {
    const std::size_t n = m.stateCount();
    DetScheduler sigma;
    sigma.choice.assign(n, kNoAction);
    std::vector<std::vector<std::uint32_t>> tied(n);
    for (StateId s = 0; s < n; ++s) {
        if (target[s]) {
            sigma.choice[s] = m.enabled(s).empty() ? kNoAction : smallestAllowedAction(m, allowed, s);
            if (sigma.choice[s] == kNoAction && !m.enabled(s).empty())
                sigma.choice[s] = m.enabled(s).front().action;
            continue;
        }
        if (!maximize && vals.prob0[s]) {
            // stay inside the avoiding region
            ActionId pick = kNoAction;
            for (std::uint32_t idx : allowed[s]) {
                bool stays = true;
                for (const auto& e : m.enabled(s)[idx].distribution.entries)
                    if (!vals.prob0[e.target]) {
                        stays = false;
                        break;
                    }
                if (stays) pick = std::min(pick, m.enabled(s)[idx].action);
            }
            sigma.choice[s] = pick;
            continue;
        }
        double best = maximize ? -kInf : kInf;
        std::vector<std::pair<double, std::uint32_t>> scored;
        for (std::uint32_t idx : allowed[s]) {
            double v = 0;
            for (const auto& e : m.enabled(s)[idx].distribution.entries)
                v += e.probability.toDouble() * vals.x[e.target];
            scored.push_back({v, idx});
            best = maximize ? std::max(best, v) : std::min(best, v);
        }
        ActionId pick = kNoAction;
        for (const auto& [v, idx] : scored)
            if (std::abs(v - best) <= opt.tieTolerance) {
                tied[s].push_back(idx);
                pick = std::min(pick, m.enabled(s)[idx].action);
            }
        sigma.choice[s] = pick;
    }
    if (maximize) {
        // repair: every positive-value state must reach the target under sigma
        while (true) {
            std::vector<char> reach(n, 0);
            {
                // backward closure over sigma's edges
                std::vector<std::vector<StateId>> pred(n);
                for (StateId s = 0; s < n; ++s) {
                    if (target[s]) continue;
                    const Choice* c = m.findChoice(s, sigma.choice[s]);
                    if (!c) continue;
                    for (const auto& e : c->distribution.entries) pred[e.target].push_back(s);
                }
                std::deque<StateId> queue;
                for (StateId s = 0; s < n; ++s)
                    if (target[s]) {
                        reach[s] = 1;
                        queue.push_back(s);
                    }
                while (!queue.empty()) {
                    StateId t = queue.front();
                    queue.pop_front();
                    for (StateId p : pred[t])
                        if (!reach[p]) {
                            reach[p] = 1;
                            queue.push_back(p);
                        }
                }
            }
            bool switched = false;
            for (StateId s = 0; s < n && !switched; ++s) {
                if (target[s] || vals.prob0[s] || reach[s]) continue;
                for (std::uint32_t idx : tied[s]) {
                    bool touches = false;
                    for (const auto& e : m.enabled(s)[idx].distribution.entries)
                        if (reach[e.target]) {
                            touches = true;
                            break;
                        }
                    if (touches) {
                        sigma.choice[s] = m.enabled(s)[idx].action;
                        switched = true;
                        break;
                    }
                }
            }
            if (!switched) break;
        }
    }
    return sigma;
}

} // namespace detail

// Reachability probability of `target` in a Markov chain.
inline ReachResult reachProbMc(const Mc& mc, const std::vector<StateId>& target,
                               const AnalysisOptions& opt = {}) {
    auto mask = stateMask(mc.mdp(), target);
    auto allowed = detail::allChoices(mc.mdp());
    auto vals = detail::reachValues(mc.mdp(), allowed, mask, true, opt);
    return ReachResult{std::move(vals.x), vals.method, std::nullopt};
}

// Maximal reachability probability over all schedulers, with an attaining
// deterministic witness (ties resolved toward the smallest action id).
inline ReachResult maxReachProbMdp(const Mdp& m, const std::vector<StateId>& target,
                                   const AnalysisOptions& opt = {}) {
    auto mask = stateMask(m, target);
    auto allowed = detail::allChoices(m);
    auto vals = detail::reachValues(m, allowed, mask, true, opt);
    ReachResult res{vals.x, vals.method, std::nullopt};
    res.witness = detail::reachWitness(m, allowed, mask, true, vals, opt);
    return res;
}

// Minimal reachability probability over all schedulers.
inline ReachResult minReachProbMdp(const Mdp& m, const std::vector<StateId>& target,
                                   const AnalysisOptions& opt = {}) {
    auto mask = stateMask(m, target);
    auto allowed = detail::allChoices(m);
    auto vals = detail::reachValues(m, allowed, mask, false, opt);
    ReachResult res{vals.x, vals.method, std::nullopt};
    res.witness = detail::reachWitness(m, allowed, mask, false, vals, opt);
    return res;
}

// Minimal reachability with per-state forced actions (kNoAction = free) and
// a set of banned action ids. Empty when the constraints deadlock a state.
inline std::optional<ReachResult> minReachConstrained(const Mdp& m,
                                                      const std::vector<StateId>& target,
                                                      const std::vector<ActionId>& forced,
                                                      const std::vector<char>& banned,
                                                      const AnalysisOptions& opt = {}) {
    auto mask = stateMask(m, target);
    detail::ChoiceFilter allowed(m.stateCount());
    for (StateId s = 0; s < m.stateCount(); ++s) {
        const auto& choices = m.enabled(s);
        for (std::uint32_t idx = 0; idx < choices.size(); ++idx) {
            ActionId a = choices[idx].action;
            if (forced[s] != kNoAction && forced[s] != a) continue;
            if (a < banned.size() && banned[a]) continue;
            allowed[s].push_back(idx);
        }
        if (allowed[s].empty()) return std::nullopt;
    }
    auto vals = detail::reachValues(m, allowed, mask, false, opt);
    ReachResult res{vals.x, vals.method, std::nullopt};
    res.witness = detail::reachWitness(m, allowed, mask, false, vals, opt);
    return res;
}

// Expected accumulated cost until the first goal visit in a Markov chain;
// infinite wherever the goal is not reached almost surely.
inline CostResult expectedCostMc(const Mc& mc, const std::vector<double>& costs,
                                 const std::vector<StateId>& goal,
                                 const AnalysisOptions& opt = {}) {
    const Mdp& m = mc.mdp();
    if (costs.size() < m.actionCount())
        throw std::invalid_argument("cost table smaller than the action id universe");
    const std::size_t n = m.stateCount();
    auto goalMask = stateMask(m, goal);
    auto allowed = detail::allChoices(m);
    auto canReach = detail::reachesSet(m, allowed, goalMask);
    std::vector<char> zero(n, 0);
    for (StateId s = 0; s < n; ++s) zero[s] = !canReach[s];
    auto risky = detail::reachesSet(m, allowed, zero, &goalMask);

    CostResult res;
    res.perState.assign(n, 0.0);
    std::vector<char> pinned(n, 0);
    for (StateId s = 0; s < n; ++s) {
        if (goalMask[s]) {
            pinned[s] = 1;
        } else if (risky[s]) {
            res.perState[s] = kInf;
            pinned[s] = 1;
        }
    }

    auto stepCost = [&](StateId s) { return costs[mc.choice(s).action]; };

    if (auto order = detail::acyclicOrder(m, allowed, pinned)) {
        for (StateId s : *order) {
            double self = 0, rest = 0;
            for (const auto& e : mc.transition(s).entries) {
                double p = e.probability.toDouble();
                if (e.target == s)
                    self += p;
                else
                    rest += p * res.perState[e.target];
            }
            res.perState[s] = self < 1.0 ? (stepCost(s) + rest) / (1.0 - self) : kInf;
        }
        return res;
    }

    std::vector<double> next = res.perState;
    for (std::uint64_t sweep = 0; sweep < opt.maxSweeps; ++sweep) {
        double residual = 0;
        for (StateId s = 0; s < n; ++s) {
            if (pinned[s]) continue;
            double v = stepCost(s);
            for (const auto& e : mc.transition(s).entries)
                v += e.probability.toDouble() * res.perState[e.target];
            next[s] = v;
            double d = std::abs(next[s] - res.perState[s]);
            if (std::isnan(d)) d = 0;
            residual = std::max(residual, d);
        }
        std::swap(res.perState, next);
        if (residual < opt.epsProb) break;
    }
    return res;
}

namespace detail {

// Rewires tie-equivalent choices so that every finite-value state reaches
// the goal under the witness; mirrors the reachability repair.
inline void repairCostWitness(const Mdp& m, const ChoiceFilter& allowed,
                              const std::vector<char>& goalMask,
                              const std::vector<double>& x,
                              const std::vector<double>& costs,
                              const AnalysisOptions& opt, DetScheduler& sigma) {
    const std::size_t n = m.stateCount();
    while (true) {
        std::vector<char> reach(n, 0);
        std::vector<std::vector<StateId>> pred(n);
        for (StateId s = 0; s < n; ++s) {
            if (goalMask[s]) continue;
            const Choice* c = m.findChoice(s, sigma.choice[s]);
            if (!c) continue;
            for (const auto& e : c->distribution.entries) pred[e.target].push_back(s);
        }
        std::deque<StateId> queue;
        for (StateId s = 0; s < n; ++s)
            if (goalMask[s]) {
                reach[s] = 1;
                queue.push_back(s);
            }
        while (!queue.empty()) {
            StateId t = queue.front();
            queue.pop_front();
            for (StateId p : pred[t])
                if (!reach[p]) {
                    reach[p] = 1;
                    queue.push_back(p);
                }
        }
        bool switched = false;
        for (StateId s = 0; s < n && !switched; ++s) {
            if (goalMask[s] || reach[s] || std::isinf(x[s])) continue;
            for (std::uint32_t idx : allowed[s]) {
                double q = costs[m.enabled(s)[idx].action];
                bool touches = false;
                for (const auto& e : m.enabled(s)[idx].distribution.entries) {
                    q += e.probability.toDouble() * x[e.target];
                    if (reach[e.target]) touches = true;
                }
                if (touches && std::abs(q - x[s]) <= opt.tieTolerance) {
                    sigma.choice[s] = m.enabled(s)[idx].action;
                    switched = true;
                    break;
                }
            }
        }
        if (!switched) return;
    }
}

} // namespace detail

// Minimal expected cost to the goal over all schedulers, with witness.
// States with no almost-surely-reaching scheduler get infinite value. The
// iteration starts from an exactly evaluated proper policy and descends,
// which keeps zero-cost cycles from dragging the fixpoint below the optimum.
inline CostResult minExpectedCostMdp(const Mdp& m, const std::vector<double>& costs,
                                     const std::vector<StateId>& goal,
                                     const AnalysisOptions& opt = {}) {
    if (costs.size() < m.actionCount())
        throw std::invalid_argument("cost table smaller than the action id universe");
    const std::size_t n = m.stateCount();
    auto goalMask = stateMask(m, goal);
    auto allowed = detail::allChoices(m);
    auto sure = detail::almostSurelyReaches(m, allowed, goalMask);

    // proper initial policy from the fixpoint certificates
    DetScheduler sigma0;
    sigma0.choice.assign(n, kNoAction);
    for (StateId s = 0; s < n; ++s) {
        if (!goalMask[s] && sure.inSet[s] && sure.certified[s] != kNoAction)
            sigma0.choice[s] = sure.certified[s];
        else
            sigma0.choice[s] = m.enabled(s).front().action;
    }

    CostResult res;
    res.perState = expectedCostMc(induceMc(m, sigma0), costs, goal, opt).perState;
    for (StateId s = 0; s < n; ++s)
        if (!sure.inSet[s]) res.perState[s] = kInf;

    std::vector<char> pinned(n, 0);
    for (StateId s = 0; s < n; ++s)
        if (goalMask[s] || !sure.inSet[s]) pinned[s] = 1;
    for (StateId s = 0; s < n; ++s)
        if (goalMask[s]) res.perState[s] = 0.0;

    std::vector<double> next = res.perState;
    for (std::uint64_t sweep = 0; sweep < opt.maxSweeps; ++sweep) {
        double residual = 0;
        for (StateId s = 0; s < n; ++s) {
            if (pinned[s]) continue;
            double best = kInf;
            for (std::uint32_t idx : allowed[s]) {
                const Choice& c = m.enabled(s)[idx];
                double v = costs[c.action];
                for (const auto& e : c.distribution.entries)
                    v += e.probability.toDouble() * res.perState[e.target];
                best = std::min(best, v);
            }
            next[s] = best;
            double d = std::abs(next[s] - res.perState[s]);
            if (std::isnan(d) || std::isinf(d)) d = 0;
            residual = std::max(residual, d);
        }
        std::swap(res.perState, next);
        if (residual < opt.epsProb) break;
    }

    DetScheduler sigma;
    sigma.choice.assign(n, kNoAction);
    for (StateId s = 0; s < n; ++s) {
        if (pinned[s]) {
            sigma.choice[s] = m.enabled(s).front().action;
            for (const Choice& c : m.enabled(s)) sigma.choice[s] = std::min(sigma.choice[s], c.action);
            continue;
        }
        double best = kInf;
        std::vector<std::pair<double, ActionId>> scored;
        for (std::uint32_t idx : allowed[s]) {
            const Choice& c = m.enabled(s)[idx];
            double v = costs[c.action];
            for (const auto& e : c.distribution.entries)
                v += e.probability.toDouble() * res.perState[e.target];
            scored.push_back({v, c.action});
            best = std::min(best, v);
        }
        ActionId pick = kNoAction;
        for (const auto& [v, a] : scored)
            if (v <= best + opt.tieTolerance) pick = std::min(pick, a);
        sigma.choice[s] = pick;
    }
    detail::repairCostWitness(m, allowed, goalMask, res.perState, costs, opt, sigma);
    res.witness = std::move(sigma);
    return res;
}

// Is the restricted model safe for every compliant scheduler? Equivalent to
// checking the maximal reachability of the sub-MDP against lambda.
inline bool isSafePermissive(const Mdp& m, const DetPermissiveScheduler& theta,
                             const SafetySpec& spec, const AnalysisOptions& opt = {}) {
    checkSafetySpec(m, spec);
    Mdp sub = restrict(m, theta);
    auto res = maxReachProbMdp(sub, spec.target, opt);
    return res.atInitial(sub) <= spec.lambda.toDouble() + opt.epsProb;
}

// All safe deterministic schedulers, in lexicographic state-major order.
inline std::vector<DetScheduler> enumerateSafeSchedulers(const Mdp& m, const SafetySpec& spec,
                                                         std::uint64_t cap = 1000000,
                                                         const AnalysisOptions& opt = {}) {
    checkSafetySpec(m, spec);
    auto full = fullPermissive(m);
    CompliantSchedulerRange range(full, cap);
    std::vector<DetScheduler> out;
    DetScheduler s;
    double bound = spec.lambda.toDouble() + opt.epsProb;
    while (range.next(s)) {
        auto res = reachProbMc(induceMc(m, s), spec.target, opt);
        if (res.perState[m.initial] <= bound) out.push_back(s);
    }
    return out;
}

struct ConflictOptions {
    std::size_t candidateCap = 20;
    std::uint64_t schedulerCap = 1000000;
};

// Inclusion-minimal action sets whose joint use forces a safety violation:
// C is a conflict when at least one scheduler uses all of C and every such
// scheduler is unsafe. Output ordered by size, then by bitmask over the
// sorted action ids.
inline std::vector<std::vector<ActionId>> minimalConflictSets(const Mdp& m, const SafetySpec& spec,
                                                              const ConflictOptions& copt = {},
                                                              const AnalysisOptions& opt = {}) {
    checkSafetySpec(m, spec);
    std::vector<ActionId> candidates;
    for (StateId s = 0; s < m.stateCount(); ++s)
        for (const Choice& c : m.enabled(s)) candidates.push_back(c.action);
    std::sort(candidates.begin(), candidates.end());
    if (candidates.size() > copt.candidateCap)
        throw std::invalid_argument("conflict search over " + std::to_string(candidates.size()) +
                                    " actions exceeds the cap of " + std::to_string(copt.candidateCap));

    auto full = fullPermissive(m);
    CompliantSchedulerRange range(full, copt.schedulerCap);
    const std::size_t words = static_cast<std::size_t>((range.size() + 63) / 64);
    std::vector<std::uint64_t> safe(words, 0);
    std::vector<std::vector<std::uint64_t>> uses(candidates.size(),
                                                 std::vector<std::uint64_t>(words, 0));
    std::vector<std::size_t> posOf(m.actionCount(), 0);
    for (std::size_t i = 0; i < candidates.size(); ++i) posOf[candidates[i]] = i;

    double bound = spec.lambda.toDouble() + opt.epsProb;
    DetScheduler s;
    std::uint64_t index = 0;
    while (range.next(s)) {
        auto res = reachProbMc(induceMc(m, s), spec.target, opt);
        if (res.perState[m.initial] <= bound) safe[index / 64] |= std::uint64_t{1} << (index % 64);
        for (ActionId a : s.choice) uses[posOf[a]][index / 64] |= std::uint64_t{1} << (index % 64);
        ++index;
    }

    const std::size_t k = candidates.size();
    std::vector<std::uint64_t> found; // subset masks over candidate positions
    std::vector<std::vector<ActionId>> out;
    std::vector<std::uint64_t> acc(words);
    for (std::size_t size = 1; size <= k; ++size) {
        std::uint64_t mask = (size == 64) ? ~std::uint64_t{0} : ((std::uint64_t{1} << size) - 1);
        std::uint64_t limit = (k == 64) ? ~std::uint64_t{0} : (std::uint64_t{1} << k);
        while (mask < limit) {
            bool dominated = false;
            for (std::uint64_t f : found)
                if ((mask & f) == f) {
                    dominated = true;
                    break;
                }
            if (!dominated) {
                std::fill(acc.begin(), acc.end(), ~std::uint64_t{0});
                std::uint64_t rest = mask;
                while (rest) {
                    std::size_t pos = static_cast<std::size_t>(__builtin_ctzll(rest));
                    rest &= rest - 1;
                    const auto& u = uses[pos];
                    for (std::size_t w = 0; w < words; ++w) acc[w] &= u[w];
                }
                if (range.size() % 64 != 0 && words > 0)
                    acc[words - 1] &= (std::uint64_t{1} << (range.size() % 64)) - 1;
                bool anyUser = false, anySafeUser = false;
                for (std::size_t w = 0; w < words; ++w) {
                    if (acc[w]) anyUser = true;
                    if (acc[w] & safe[w]) anySafeUser = true;
                }
                if (anyUser && !anySafeUser) {
                    found.push_back(mask);
                    std::vector<ActionId> set;
                    std::uint64_t bits = mask;
                    while (bits) {
                        std::size_t pos = static_cast<std::size_t>(__builtin_ctzll(bits));
                        bits &= bits - 1;
                        set.push_back(candidates[pos]);
                    }
                    out.push_back(std::move(set));
                }
            }
            // next mask with the same popcount (Gosper)
            std::uint64_t c = mask & -mask;
            std::uint64_t r = mask + c;
            if (r >= limit || c == 0) break;
            mask = (((r ^ mask) >> 2) / c) | r;
        }
    }
    return out;
}

} // namespace safesynth
