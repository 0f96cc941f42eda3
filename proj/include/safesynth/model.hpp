#pragma once

#include "safesynth/rational.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace safesynth {

using StateId = std::uint32_t;
using ActionId = std::uint32_t;

inline constexpr StateId kNoState = std::numeric_limits<StateId>::max();
inline constexpr ActionId kNoAction = std::numeric_limits<ActionId>::max();

struct TransitionEntry {
    StateId target;
    Rational probability;
};

// Probability distribution over successor states. Targets are distinct and
// the probabilities sum to exactly one (checked by validate()).
struct Distribution {
    std::vector<TransitionEntry> entries;

    Rational sum() const {
        Rational s;
        for (const auto& e : entries) s += e.probability;
        return s;
    }
    bool isDirac() const {
        return entries.size() == 1 && entries.front().probability.isOne();
    }
    Rational probabilityOf(StateId target) const {
        for (const auto& e : entries)
            if (e.target == target) return e.probability;
        return Rational(0);
    }
};

inline Distribution dirac(StateId target) {
    return Distribution{{TransitionEntry{target, Rational(1)}}};
}

struct Choice {
    ActionId action;
    std::string label;
    Distribution distribution;
};

// Finite MDP. States are dense indices; action ids are globally unique and
// index every per-action table in the project (costs, Q values, ledgers).
// A restricted copy of a model keeps the ids and the id universe of the
// original, so its enabled ids form a strict subset of 0..actionCount()-1.
class Mdp {
public:
    StateId initial = 0;

    StateId addState() {
        states_.emplace_back();
        return static_cast<StateId>(states_.size() - 1);
    }
    StateId addStates(std::size_t n) {
        StateId first = static_cast<StateId>(states_.size());
        states_.resize(states_.size() + n);
        return first;
    }

    ActionId addChoice(StateId s, std::string label, Distribution dist) {
        checkState(s);
        ActionId id = actionUniverse_++;
        states_[s].push_back(Choice{id, std::move(label), std::move(dist)});
        return id;
    }

    // Inserts a choice under a caller-chosen id; used when a derived model
    // must keep the ids of its source.
    void addChoiceWithId(StateId s, ActionId id, std::string label, Distribution dist) {
        checkState(s);
        if (id >= actionUniverse_) actionUniverse_ = id + 1;
        states_[s].push_back(Choice{id, std::move(label), std::move(dist)});
    }

    std::size_t stateCount() const { return states_.size(); }
    std::size_t actionCount() const { return actionUniverse_; }

    const std::vector<Choice>& enabled(StateId s) const {
        checkState(s);
        return states_[s];
    }

    std::size_t transitionCount() const {
        std::size_t n = 0;
        for (const auto& st : states_)
            for (const auto& c : st) n += c.distribution.entries.size();
        return n;
    }
    std::size_t choiceCount() const {
        std::size_t n = 0;
        for (const auto& st : states_) n += st.size();
        return n;
    }

    const Choice* findChoice(StateId s, ActionId a) const {
        checkState(s);
        for (const auto& c : states_[s])
            if (c.action == a) return &c;
        return nullptr;
    }

    // Owning state of each action id (kNoState for ids absent from a
    // restricted model).
    std::vector<StateId> ownerTable() const {
        std::vector<StateId> owner(actionUniverse_, kNoState);
        for (StateId s = 0; s < states_.size(); ++s)
            for (const auto& c : states_[s])
                if (c.action < owner.size()) owner[c.action] = s;
        return owner;
    }

    // Used by restriction/product code to preserve the id universe of a
    // source model.
    void setActionUniverse(std::size_t n) { actionUniverse_ = static_cast<ActionId>(n); }

private:
    void checkState(StateId s) const {
        if (s >= states_.size())
            throw std::out_of_range("Mdp: state index " + std::to_string(s) + " out of range");
    }

    std::vector<std::vector<Choice>> states_;
    ActionId actionUniverse_ = 0;
};

struct ModelViolation {
    std::string message;
};

// Structural diagnostics: empty = well-formed. Checks distribution sums,
// distinct successors, dangling targets, deadlocks, duplicate labels within
// a state, and global uniqueness of action ids.
inline std::vector<ModelViolation> validate(const Mdp& m) {
    std::vector<ModelViolation> out;
    if (m.stateCount() == 0) {
        out.push_back({"model has no states"});
        return out;
    }
    if (m.initial >= m.stateCount())
        out.push_back({"initial state " + std::to_string(m.initial) + " out of range"});
    std::vector<char> seenAction(m.actionCount(), 0);
    for (StateId s = 0; s < m.stateCount(); ++s) {
        const auto& choices = m.enabled(s);
        if (choices.empty())
            out.push_back({"state " + std::to_string(s) + " has no enabled action (deadlock)"});
        for (std::size_t i = 0; i < choices.size(); ++i) {
            const Choice& c = choices[i];
            if (c.action >= m.actionCount()) {
                out.push_back({"state " + std::to_string(s) + ": action id " + std::to_string(c.action) + " outside id universe"});
            } else if (seenAction[c.action]) {
                out.push_back({"action id " + std::to_string(c.action) + " appears more than once"});
            } else {
                seenAction[c.action] = 1;
            }
            for (std::size_t j = 0; j < i; ++j)
                if (choices[j].label == c.label)
                    out.push_back({"state " + std::to_string(s) + ": duplicate action label '" + c.label + "'"});
            if (c.distribution.entries.empty()) {
                out.push_back({"state " + std::to_string(s) + ", action '" + c.label + "': empty distribution"});
                continue;
            }
            for (std::size_t j = 0; j < c.distribution.entries.size(); ++j) {
                const auto& e = c.distribution.entries[j];
                if (e.target >= m.stateCount())
                    out.push_back({"state " + std::to_string(s) + ", action '" + c.label + "': successor " + std::to_string(e.target) + " out of range"});
                if (e.probability <= Rational(0) || e.probability > Rational(1))
                    out.push_back({"state " + std::to_string(s) + ", action '" + c.label + "': probability " + e.probability.str() + " outside (0,1]"});
                for (std::size_t k = 0; k < j; ++k)
                    if (c.distribution.entries[k].target == e.target)
                        out.push_back({"state " + std::to_string(s) + ", action '" + c.label + "': duplicate successor " + std::to_string(e.target)});
            }
            if (c.distribution.sum() != Rational(1))
                out.push_back({"state " + std::to_string(s) + ", action '" + c.label + "': probabilities sum to " + c.distribution.sum().str()});
        }
    }
    return out;
}

// Markov chain: an Mdp whose every state has exactly one enabled action.
class Mc {
public:
    explicit Mc(Mdp m) : m_(std::move(m)) {
        for (StateId s = 0; s < m_.stateCount(); ++s)
            if (m_.enabled(s).size() != 1)
                throw std::invalid_argument("Mc: state " + std::to_string(s) + " has " +
                                            std::to_string(m_.enabled(s).size()) + " actions, expected 1");
    }

    const Mdp& mdp() const { return m_; }
    StateId initial() const { return m_.initial; }
    std::size_t stateCount() const { return m_.stateCount(); }
    const Choice& choice(StateId s) const { return m_.enabled(s).front(); }
    const Distribution& transition(StateId s) const { return m_.enabled(s).front().distribution; }

private:
    Mdp m_;
};

inline void sortUnique(std::vector<StateId>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

inline std::vector<char> stateMask(const Mdp& m, const std::vector<StateId>& set) {
    std::vector<char> mask(m.stateCount(), 0);
    for (StateId s : set) {
        if (s >= m.stateCount())
            throw std::out_of_range("state set member " + std::to_string(s) + " out of range");
        mask[s] = 1;
    }
    return mask;
}

// Throwing form of validate(): joins all diagnostics into one message.
inline void requireValid(const Mdp& m) {
    std::vector<ModelViolation> issues = validate(m);
    if (issues.empty()) return;
    std::string joined = "invalid model:";
    for (const auto& v : issues) joined += "\n  " + v.message;
    throw std::invalid_argument(joined);
}

} // namespace safesynth
