#pragma once

#include "safesynth/analysis.hpp"
#include "safesynth/model.hpp"
#include "safesynth/objectives.hpp"
#include "safesynth/scheduler.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace safesynth {

// Process-wide tally of attempted steps outside the restricted action set.
// Stays at zero unless the exploration layer is broken; asserted on by the
// test suite.
inline std::atomic<std::uint64_t>& safetyViolationCounter() {
    static std::atomic<std::uint64_t> counter{0};
    return counter;
}

class SafetyViolation : public std::logic_error {
  public:
    explicit SafetyViolation(const std::string& what) : std::logic_error(what) {}
};

// Costs observed so far, keyed by action id. The oracle is deterministic, so
// a repeat observation must agree with the stored value.
class CostLedger {
  public:
    explicit CostLedger(std::size_t actionCount)
        : observed_(actionCount, 0.0), visits_(actionCount, 0) {}

    void record(ActionId a, double cost) {
        if (a >= observed_.size()) throw std::out_of_range("cost ledger: action id out of range");
        if (visits_[a] > 0 && observed_[a] != cost)
            throw std::logic_error("cost ledger: oracle returned inconsistent costs");
        observed_[a] = cost;
        ++visits_[a];
    }
    bool seen(ActionId a) const { return visits_[a] > 0; }
    double cost(ActionId a) const { return observed_[a]; }
    std::uint64_t visits(ActionId a) const { return visits_[a]; }
    std::size_t observedCount() const {
        std::size_t n = 0;
        for (auto v : visits_)
            if (v > 0) ++n;
        return n;
    }
    std::size_t size() const { return observed_.size(); }

  private:
    std::vector<double> observed_;
    std::vector<std::uint64_t> visits_;
};

// Observed cost where available, the stated lower bound everywhere else:
// an optimistic surrogate that under-approximates the true costs.
inline std::vector<double> refineCosts(const CostLedger& ledger, const CostModel& costs) {
    std::vector<double> out = costs.lowerVector();
    if (ledger.size() != out.size())
        throw std::invalid_argument("refineCosts: ledger and cost model sizes differ");
    for (ActionId a = 0; a < out.size(); ++a)
        if (ledger.seen(a)) out[a] = ledger.cost(a);
    return out;
}

namespace detail {

inline double nextUnit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t nextIndex(std::mt19937_64& rng, std::size_t n) {
    return static_cast<std::size_t>(rng() % n);
}

} // namespace detail

// Simulation access to a restricted model: the only way the learner touches
// transitions and the cost oracle. Stepping with an action the restriction
// does not allow counts as a safety violation and throws.
class Environment {
  public:
    Environment(const Mdp& sub, const CostModel& costs, const std::vector<StateId>& goal,
                std::uint64_t seed, std::size_t stepCap = 0)
        : sub_(&sub), costs_(&costs), goalMask_(stateMask(sub, goal)), rng_(seed),
          stepCap_(stepCap == 0 ? 10 * sub.stateCount() : stepCap) {
        if (!costs.hasOracle())
            throw std::invalid_argument("environment requires a cost model with an oracle");
        requireValidCosts(sub, costs);
        reset();
    }

    StateId reset() {
        current_ = sub_->initial;
        stepsTaken_ = 0;
        trace_ = EpisodeTrace{};
        trace_.reachedGoal = goalMask_[current_] != 0;
        return current_;
    }

    struct StepResult {
        StateId next;
        double cost;
        bool atGoal;
        bool capped;
    };

    StepResult step(ActionId a) {
        const Choice* choice = sub_->findChoice(current_, a);
        if (choice == nullptr) {
            safetyViolationCounter().fetch_add(1, std::memory_order_relaxed);
            throw SafetyViolation("environment: action " + std::to_string(a) +
                                  " is not allowed in state " + std::to_string(current_));
        }
        double cost = costs_->reveal(a);
        StateId next = sample(choice->distribution);
        trace_.steps.push_back({current_, a, cost, next});
        current_ = next;
        ++stepsTaken_;
        bool atGoal = goalMask_[next] != 0;
        if (atGoal) trace_.reachedGoal = true;
        return {next, cost, atGoal, stepsTaken_ >= stepCap_};
    }

    StateId current() const { return current_; }
    bool atGoal() const { return goalMask_[current_] != 0; }
    const Mdp& model() const { return *sub_; }
    const CostModel& costs() const { return *costs_; }
    const std::vector<char>& goalMask() const { return goalMask_; }
    const EpisodeTrace& trace() const { return trace_; }
    std::size_t stepCap() const { return stepCap_; }
    std::mt19937_64& rng() { return rng_; }

  private:
    StateId sample(const Distribution& d) {
        double u = detail::nextUnit(rng_);
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < d.entries.size(); ++i) {
            acc += d.entries[i].probability.toDouble();
            if (u < acc) return d.entries[i].target;
        }
        return d.entries.back().target;
    }

    const Mdp* sub_;
    const CostModel* costs_;
    std::vector<char> goalMask_;
    std::mt19937_64 rng_;
    std::size_t stepCap_;
    StateId current_ = 0;
    std::size_t stepsTaken_ = 0;
    EpisodeTrace trace_;
};

// Action values aligned with the model's enabled lists.
struct QTable {
    std::vector<std::vector<double>> values; // [state][enabled index]

    static QTable optimistic(const Mdp& m, const CostModel& costs) {
        QTable q;
        q.values.resize(m.stateCount());
        for (StateId s = 0; s < m.stateCount(); ++s)
            for (const Choice& c : m.enabled(s))
                q.values[s].push_back(costs.lowerBound(c.action));
        return q;
    }

    std::size_t greedyIndex(StateId s) const {
        const auto& row = values[s];
        std::size_t best = 0;
        for (std::size_t i = 1; i < row.size(); ++i)
            if (row[i] < row[best]) best = i;
        // ties resolve to the smallest action id, which is enabled-list order
        return best;
    }

    double stateValue(StateId s, const std::vector<char>& goalMask) const {
        if (goalMask[s]) return 0.0;
        return values[s][greedyIndex(s)];
    }

    DetScheduler greedy(const Mdp& m) const {
        DetScheduler sigma;
        for (StateId s = 0; s < m.stateCount(); ++s)
            sigma.choice.push_back(m.enabled(s)[greedyIndex(s)].action);
        return sigma;
    }
};

struct LearnConfig {
    std::size_t episodes = 10000;
    double alpha = 0.1;
    double epsilonStart = 1.0;
    double epsilonEnd = 0.05;
    double decayFraction = 0.8; // epsilon reaches its floor after this share of episodes
    std::size_t stepCap = 0;    // 0 = ten times the state count
    std::uint64_t seed = 1;
};

struct LearnResult {
    DetScheduler greedy;
    QTable q;
    std::size_t episodesRun = 0;
};

// Tabular Q-learning for expected cost to the goal set, epsilon-greedy with
// a linear decay, optimistic initialisation at the lower bounds. Fully
// deterministic for a fixed seed.
inline LearnResult learn(Environment& env, const LearnConfig& cfg, CostLedger& ledger) {
    const Mdp& m = env.model();
    QTable q = QTable::optimistic(m, env.costs());
    const double decaySpan = cfg.decayFraction * static_cast<double>(cfg.episodes);

    for (std::size_t episode = 0; episode < cfg.episodes; ++episode) {
        double eps = cfg.epsilonEnd;
        if (decaySpan > 0 && static_cast<double>(episode) < decaySpan)
            eps = cfg.epsilonStart +
                  (cfg.epsilonEnd - cfg.epsilonStart) * (static_cast<double>(episode) / decaySpan);
        StateId s = env.reset();
        if (env.atGoal()) continue;
        while (true) {
            const auto& row = m.enabled(s);
            std::size_t pick = detail::nextUnit(env.rng()) < eps
                                   ? detail::nextIndex(env.rng(), row.size())
                                   : q.greedyIndex(s);
            auto r = env.step(row[pick].action);
            ledger.record(row[pick].action, r.cost);
            double future = q.stateValue(r.next, env.goalMask());
            double& cell = q.values[s][pick];
            cell += cfg.alpha * (r.cost + future - cell);
            s = r.next;
            if (r.atGoal || r.capped) break;
        }
    }
    LearnResult out;
    out.greedy = q.greedy(m);
    out.q = std::move(q);
    out.episodesRun = cfg.episodes;
    return out;
}

struct EvalResult {
    double value = std::numeric_limits<double>::infinity();
    bool coverageOk = false;
    std::size_t episodesUsed = 0;
};

// Exact expected cost of a scheduler's induced chain, using only costs the
// oracle has revealed: first confirms the chain reaches the goal almost
// surely (otherwise the value is infinite), then drives episodes until every
// action on the reachable support has been observed, then solves the chain.
inline EvalResult evaluateExactly(Environment& env, const DetScheduler& sigma,
                                  const std::vector<StateId>& goal, CostLedger& ledger,
                                  std::size_t episodeBudget = 1000) {
    const Mdp& m = env.model();
    checkScheduler(m, sigma);
    Mc chain = induceMc(m, sigma);
    AnalysisOptions opt;
    std::vector<double> reach = reachProbMc(chain, goal, opt).perState;
    EvalResult out;
    if (reach[m.initial] < 1.0 - 1e-9) {
        out.value = std::numeric_limits<double>::infinity();
        out.coverageOk = true;
        return out;
    }

    // support of the scheduler from the initial state
    std::vector<char> onSupport(m.stateCount(), 0);
    std::vector<StateId> stack{m.initial};
    onSupport[m.initial] = 1;
    while (!stack.empty()) {
        StateId s = stack.back();
        stack.pop_back();
        if (env.goalMask()[s]) continue;
        for (const auto& e : m.findChoice(s, sigma.choice[s])->distribution.entries)
            if (!onSupport[e.target]) {
                onSupport[e.target] = 1;
                stack.push_back(e.target);
            }
    }
    auto covered = [&] {
        for (StateId s = 0; s < m.stateCount(); ++s)
            if (onSupport[s] && !env.goalMask()[s] && !ledger.seen(sigma.choice[s])) return false;
        return true;
    };

    while (!covered() && out.episodesUsed < episodeBudget) {
        StateId s = env.reset();
        ++out.episodesUsed;
        if (env.atGoal()) continue;
        while (true) {
            auto r = env.step(sigma.choice[s]);
            ledger.record(sigma.choice[s], r.cost);
            s = r.next;
            if (r.atGoal || r.capped) break;
        }
    }
    out.coverageOk = covered();

    std::vector<double> costs(ledger.size(), 0.0);
    for (ActionId a = 0; a < ledger.size(); ++a)
        if (ledger.seen(a)) costs[a] = ledger.cost(a);
    out.value = expectedCostMc(chain, costs, goal, opt).atInitial(chain.mdp());
    return out;
}

} // namespace safesynth
