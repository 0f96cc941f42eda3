#pragma once

#include "safesynth/model.hpp"

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace safesynth {

// Memoryless deterministic scheduler: one enabled action per state.
struct DetScheduler {
    std::vector<ActionId> choice;

    friend bool operator==(const DetScheduler& a, const DetScheduler& b) {
        return a.choice == b.choice;
    }
};

// Memoryless randomized scheduler: a distribution over enabled actions per
// state (weights sum to one).
struct RandScheduler {
    std::vector<std::vector<std::pair<ActionId, Rational>>> choice;
};

// Deterministic permissive scheduler: a nonempty set of enabled actions per
// state, kept sorted by action id.
struct DetPermissiveScheduler {
    std::vector<std::vector<ActionId>> allowed;

    bool allows(StateId s, ActionId a) const {
        const auto& v = allowed.at(s);
        return std::binary_search(v.begin(), v.end(), a);
    }
    std::size_t totalAllowed() const {
        std::size_t n = 0;
        for (const auto& v : allowed) n += v.size();
        return n;
    }
    friend bool operator==(const DetPermissiveScheduler& a, const DetPermissiveScheduler& b) {
        return a.allowed == b.allowed;
    }
};

namespace detail {
inline const Choice& requireChoice(const Mdp& m, StateId s, ActionId a, const char* who) {
    const Choice* c = m.findChoice(s, a);
    if (!c)
        throw std::invalid_argument(std::string(who) + ": action id " + std::to_string(a) +
                                    " not enabled in state " + std::to_string(s));
    return *c;
}
} // namespace detail

inline void checkScheduler(const Mdp& m, const DetScheduler& s) {
    if (s.choice.size() != m.stateCount())
        throw std::invalid_argument("scheduler covers " + std::to_string(s.choice.size()) +
                                    " states, model has " + std::to_string(m.stateCount()));
    for (StateId st = 0; st < m.stateCount(); ++st)
        detail::requireChoice(m, st, s.choice[st], "scheduler");
}

inline void checkPermissive(const Mdp& m, const DetPermissiveScheduler& p) {
    if (p.allowed.size() != m.stateCount())
        throw std::invalid_argument("permissive scheduler covers " + std::to_string(p.allowed.size()) +
                                    " states, model has " + std::to_string(m.stateCount()));
    for (StateId st = 0; st < m.stateCount(); ++st) {
        const auto& v = p.allowed[st];
        if (v.empty())
            throw std::invalid_argument("permissive scheduler allows nothing in state " + std::to_string(st));
        if (!std::is_sorted(v.begin(), v.end()))
            throw std::invalid_argument("permissive scheduler action set not sorted in state " + std::to_string(st));
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i > 0 && v[i] == v[i - 1])
                throw std::invalid_argument("permissive scheduler repeats an action in state " + std::to_string(st));
            detail::requireChoice(m, st, v[i], "permissive scheduler");
        }
    }
}

// Markov chain induced by a randomized scheduler: each state keeps a single
// merged distribution P(s,s') = sum_a sigma(s)(a) * P(s,a)(s').
inline Mc induceMc(const Mdp& m, const RandScheduler& sigma) {
    if (sigma.choice.size() != m.stateCount())
        throw std::invalid_argument("scheduler covers " + std::to_string(sigma.choice.size()) +
                                    " states, model has " + std::to_string(m.stateCount()));
    Mdp chain;
    chain.initial = m.initial;
    chain.addStates(m.stateCount());
    for (StateId s = 0; s < m.stateCount(); ++s) {
        const auto& weights = sigma.choice[s];
        if (weights.empty())
            throw std::invalid_argument("scheduler assigns no action in state " + std::to_string(s));
        Rational total;
        std::vector<std::pair<StateId, Rational>> acc;
        std::string label;
        for (const auto& [action, weight] : weights) {
            if (weight <= Rational(0) || weight > Rational(1))
                throw std::invalid_argument("scheduler weight " + weight.str() + " outside (0,1] in state " +
                                            std::to_string(s));
            const Choice& c = detail::requireChoice(m, s, action, "scheduler");
            if (!label.empty()) label += '+';
            label += c.label;
            total += weight;
            for (const auto& e : c.distribution.entries) {
                Rational p = weight * e.probability;
                auto it = std::find_if(acc.begin(), acc.end(),
                                       [&](const auto& q) { return q.first == e.target; });
                if (it == acc.end())
                    acc.emplace_back(e.target, p);
                else
                    it->second += p;
            }
        }
        if (total != Rational(1))
            throw std::invalid_argument("scheduler weights sum to " + total.str() + " in state " +
                                        std::to_string(s));
        std::sort(acc.begin(), acc.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        Distribution dist;
        for (auto& [t, p] : acc) dist.entries.push_back({t, p});
        chain.addChoice(s, std::move(label), std::move(dist));
    }
    return Mc(std::move(chain));
}

inline RandScheduler asRandomized(const DetScheduler& s) {
    RandScheduler r;
    r.choice.resize(s.choice.size());
    for (std::size_t i = 0; i < s.choice.size(); ++i)
        r.choice[i] = {{s.choice[i], Rational(1)}};
    return r;
}

// Deterministic schedulers keep the id of the action they take in each state,
// so cost tables indexed by the original id universe stay valid on the chain.
inline Mc induceMc(const Mdp& m, const DetScheduler& sigma) {
    if (sigma.choice.size() != m.stateCount())
        throw std::invalid_argument("scheduler covers " + std::to_string(sigma.choice.size()) +
                                    " states, model has " + std::to_string(m.stateCount()));
    Mdp chain;
    chain.initial = m.initial;
    chain.addStates(m.stateCount());
    for (StateId s = 0; s < m.stateCount(); ++s) {
        const Choice& c = detail::requireChoice(m, s, sigma.choice[s], "scheduler");
        chain.addChoiceWithId(s, c.action, c.label, c.distribution);
    }
    chain.setActionUniverse(m.actionCount());
    return Mc(std::move(chain));
}

// Sub-MDP keeping exactly the allowed actions. Action ids and the id
// universe are preserved, so cost tables and Q tables transfer unchanged.
inline Mdp restrict(const Mdp& m, const DetPermissiveScheduler& theta) {
    checkPermissive(m, theta);
    Mdp sub;
    sub.initial = m.initial;
    sub.addStates(m.stateCount());
    for (StateId s = 0; s < m.stateCount(); ++s)
        for (const Choice& c : m.enabled(s))
            if (theta.allows(s, c.action))
                sub.addChoiceWithId(s, c.action, c.label, c.distribution);
    sub.setActionUniverse(m.actionCount());
    return sub;
}

// Does the deterministic scheduler pick an allowed action everywhere?
inline bool isCompliant(const DetScheduler& sigma, const DetPermissiveScheduler& theta) {
    if (sigma.choice.size() != theta.allowed.size())
        throw std::invalid_argument("scheduler and permissive scheduler cover different state counts");
    for (StateId s = 0; s < sigma.choice.size(); ++s)
        if (!theta.allows(s, sigma.choice[s])) return false;
    return true;
}

inline std::uint64_t compliantCount(const DetPermissiveScheduler& theta) {
    std::uint64_t n = 1;
    for (const auto& v : theta.allowed) {
        if (v.empty())
            throw std::invalid_argument("permissive scheduler allows nothing in some state");
        if (n > (std::uint64_t{1} << 62) / v.size())
            return std::numeric_limits<std::uint64_t>::max();
        n *= v.size();
    }
    return n;
}

// Enumerates the compliant deterministic schedulers in lexicographic
// state-major order (the first state varies slowest). The product size must
// stay within `cap`.
class CompliantSchedulerRange {
public:
    explicit CompliantSchedulerRange(DetPermissiveScheduler theta,
                                     std::uint64_t cap = 1000000)
        : theta_(std::move(theta)) {
        std::uint64_t n = compliantCount(theta_);
        if (n > cap)
            throw std::invalid_argument("compliant scheduler space has " +
                                        (n == std::numeric_limits<std::uint64_t>::max()
                                             ? std::string("more than 2^62")
                                             : std::to_string(n)) +
                                        " elements, cap is " + std::to_string(cap));
        count_ = n;
        index_.assign(theta_.allowed.size(), 0);
    }

    std::uint64_t size() const { return count_; }

    // Fills `out` with the next scheduler; false when exhausted.
    bool next(DetScheduler& out) {
        if (done_) return false;
        out.choice.resize(theta_.allowed.size());
        for (StateId s = 0; s < theta_.allowed.size(); ++s)
            out.choice[s] = theta_.allowed[s][index_[s]];
        // advance, last state fastest
        for (std::size_t i = index_.size(); i-- > 0;) {
            if (++index_[i] < theta_.allowed[i].size()) return true;
            index_[i] = 0;
            if (i == 0) done_ = true;
        }
        if (index_.empty()) done_ = true;
        return true;
    }

private:
    DetPermissiveScheduler theta_;
    std::vector<std::size_t> index_;
    std::uint64_t count_ = 0;
    bool done_ = false;
};

inline std::vector<DetScheduler> compliantSchedulers(const DetPermissiveScheduler& theta,
                                                     std::uint64_t cap = 1000000) {
    CompliantSchedulerRange range(theta, cap);
    std::vector<DetScheduler> out;
    out.reserve(range.size());
    DetScheduler s;
    while (range.next(s)) out.push_back(s);
    return out;
}

inline DetPermissiveScheduler fullPermissive(const Mdp& m) {
    DetPermissiveScheduler p;
    p.allowed.resize(m.stateCount());
    for (StateId s = 0; s < m.stateCount(); ++s) {
        for (const Choice& c : m.enabled(s)) p.allowed[s].push_back(c.action);
        std::sort(p.allowed[s].begin(), p.allowed[s].end());
    }
    return p;
}

inline DetPermissiveScheduler singleton(const DetScheduler& sigma) {
    DetPermissiveScheduler p;
    p.allowed.resize(sigma.choice.size());
    for (StateId s = 0; s < sigma.choice.size(); ++s) p.allowed[s] = {sigma.choice[s]};
    return p;
}

// Synchronous product of a controllable MDP with an autonomous environment
// chain: the MDP picks an action, then both components move independently.
// Pair states are re-indexed densely, row-major in the environment state.
struct Product {
    Mdp mdp;
    std::size_t envStates = 0;

    StateId stateFor(StateId sys, StateId env) const {
        return static_cast<StateId>(sys * envStates + env);
    }
    std::pair<StateId, StateId> pairFor(StateId product) const {
        return {static_cast<StateId>(product / envStates),
                static_cast<StateId>(product % envStates)};
    }
};

inline Product product(const Mdp& sys, const Mc& env) {
    Product out;
    out.envStates = env.stateCount();
    Mdp& p = out.mdp;
    p.addStates(sys.stateCount() * env.stateCount());
    p.initial = static_cast<StateId>(sys.initial * env.stateCount() + env.initial());
    for (StateId s = 0; s < sys.stateCount(); ++s) {
        for (StateId e = 0; e < env.stateCount(); ++e) {
            StateId here = out.stateFor(s, e);
            const Distribution& envDist = env.transition(e);
            for (const Choice& c : sys.enabled(s)) {
                Distribution d;
                for (const auto& se : c.distribution.entries)
                    for (const auto& ee : envDist.entries)
                        d.entries.push_back({out.stateFor(se.target, ee.target),
                                             se.probability * ee.probability});
                std::sort(d.entries.begin(), d.entries.end(),
                          [](const auto& a, const auto& b) { return a.target < b.target; });
                p.addChoice(here, c.label, std::move(d));
            }
        }
    }
    return out;
}

} // namespace safesynth
