#pragma once

#include "safesynth/model.hpp"

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace safesynth {

// Probabilistic safety requirement: reach the target set with probability
// at most lambda from the initial state.
struct SafetySpec {
    Rational lambda;
    std::vector<StateId> target;
};

// Performance requirement: expected accumulated cost to the goal set at
// most kappa.
struct PerformanceSpec {
    Rational kappa;
    std::vector<StateId> goal;
};

inline void checkSafetySpec(const Mdp& m, const SafetySpec& spec) {
    if (spec.lambda < Rational(0) || spec.lambda > Rational(1))
        throw std::invalid_argument("safety threshold " + spec.lambda.str() + " outside [0,1]");
    if (spec.target.empty())
        throw std::invalid_argument("safety target set is empty");
    stateMask(m, spec.target);
}

inline void checkPerformanceSpec(const Mdp& m, const PerformanceSpec& spec) {
    if (spec.kappa.isNegative())
        throw std::invalid_argument("performance bound " + spec.kappa.str() + " is negative");
    if (spec.goal.empty())
        throw std::invalid_argument("performance goal set is empty");
    stateMask(m, spec.goal);
}

// Per-action cost information. Bounds l/u are public knowledge; the true
// cost is revealed only when an action is executed, so everything outside
// the learning environment and the baseline oracle should touch bounds only.
class CostModel {
public:
    CostModel() = default;
    CostModel(std::vector<double> lower, std::vector<double> upper,
              std::optional<std::vector<double>> trueCosts = std::nullopt)
        : lower_(std::move(lower)), upper_(std::move(upper)), true_(std::move(trueCosts)) {
        if (lower_.size() != upper_.size())
            throw std::invalid_argument("CostModel: bound vectors differ in size");
        if (true_ && true_->size() != lower_.size())
            throw std::invalid_argument("CostModel: oracle vector differs in size");
    }

    std::size_t size() const { return lower_.size(); }
    double lowerBound(ActionId a) const { return lower_.at(a); }
    double upperBound(ActionId a) const { return upper_.at(a); }
    bool hasOracle() const { return true_.has_value(); }
    const std::optional<std::vector<double>>& oracle() const { return true_; }

    // The hidden cost function; call sites are the learning environment and
    // the exhaustive baseline.
    double reveal(ActionId a) const {
        if (!true_)
            throw std::logic_error("CostModel: no cost oracle attached");
        return true_->at(a);
    }

    std::vector<double> lowerVector() const { return lower_; }
    std::vector<double> upperVector() const { return upper_; }

private:
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::optional<std::vector<double>> true_;
};

// Diagnostics for a cost model against a model: finite nonnegative bounds,
// l <= u, and (when present) l <= true <= u for every enabled action.
inline std::vector<ModelViolation> validateCosts(const Mdp& m, const CostModel& c) {
    std::vector<ModelViolation> out;
    if (c.size() != m.actionCount()) {
        out.push_back({"cost table covers " + std::to_string(c.size()) + " action ids, model has " +
                       std::to_string(m.actionCount())});
        return out;
    }
    for (StateId s = 0; s < m.stateCount(); ++s) {
        for (const Choice& ch : m.enabled(s)) {
            double l = c.lowerBound(ch.action), u = c.upperBound(ch.action);
            auto tag = [&] {
                return "state " + std::to_string(s) + ", action '" + ch.label + "': ";
            };
            if (!(l >= 0) || !std::isfinite(l) || !std::isfinite(u))
                out.push_back({tag() + "bounds must be finite and nonnegative"});
            if (l > u)
                out.push_back({tag() + "lower bound exceeds upper bound"});
            if (c.hasOracle()) {
                double t = c.reveal(ch.action);
                if (t < l || t > u)
                    out.push_back({tag() + "true cost outside its bounds"});
            }
        }
    }
    return out;
}

// Throwing form of validateCosts().
inline void requireValidCosts(const Mdp& m, const CostModel& c) {
    std::vector<ModelViolation> issues = validateCosts(m, c);
    if (issues.empty()) return;
    std::string joined = "invalid cost model:";
    for (const auto& v : issues) joined += "\n  " + v.message;
    throw std::invalid_argument(joined);
}

// A complete problem: model, costs, both objectives, and where it came from.
struct ProblemInstance {
    Mdp model;
    CostModel costs;
    SafetySpec safety;
    PerformanceSpec performance;
    struct Metadata {
        std::string name;
        std::vector<std::pair<std::string, std::string>> parameters;
        std::size_t states = 0;      // kept in sync with the model by syncCounts()
        std::size_t transitions = 0; // state-action pairs
        std::size_t branches = 0;    // distribution entries
    } metadata;

    void syncCounts() {
        metadata.states = model.stateCount();
        metadata.transitions = model.choiceCount();
        metadata.branches = model.transitionCount();
    }
};

// One executed episode: the visited transitions with their revealed costs.
struct EpisodeTrace {
    struct Step {
        StateId state;
        ActionId action;
        double cost;
        StateId next;
    };
    std::vector<Step> steps;
    bool reachedGoal = false;

    double totalCost() const {
        double t = 0;
        for (const auto& st : steps) t += st.cost;
        return t;
    }
};

} // namespace safesynth
