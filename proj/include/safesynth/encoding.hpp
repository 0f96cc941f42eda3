#pragma once

#include "safesynth/analysis.hpp"
#include "safesynth/model.hpp"
#include "safesynth/objectives.hpp"
#include "safesynth/scheduler.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace safesynth {

// Propositional-plus-linear encoding of "there is a safe deterministic
// permissive scheduler": one Boolean y per enabled (state, action), one real
// p per state, the threshold/choice/target/Bellman constraint families, and
// exclusion clauses. Kept structural so the emitter is a pure serializer and
// the enumerative engine can interpret the same object.
struct Encoding {
    struct ChoiceVar {
        StateId state;
        ActionId action;
        std::string label;
        std::string name;
        bool fixedTrue; // single-action states are pre-decided
    };
    struct ProbVar {
        StateId state;
        std::string name;
    };
    // p_{state(var)} >= sum of probability * p_target, guarded by the var
    struct BellmanRow {
        std::size_t var;
        std::vector<std::pair<StateId, Rational>> terms;
    };

    std::vector<ChoiceVar> booleanVars; // state-major, enabled order
    std::vector<ProbVar> realVars;      // one per state
    StateId initial = 0;
    Rational lambda;
    std::vector<char> targetMask;
    std::vector<std::vector<std::size_t>> choiceClauses; // per state: var indices
    std::vector<BellmanRow> rows;
    // clause: at least one listed var is false
    std::vector<std::vector<std::size_t>> schedulerExclusions;
    // clause: at least one var differs from the recorded value
    std::vector<std::vector<std::pair<std::size_t, bool>>> assignmentExclusions;
    std::vector<std::size_t> varOfAction; // ActionId -> index into booleanVars

    std::size_t freeChoiceCount() const {
        std::size_t n = 0;
        for (const auto& v : booleanVars)
            if (!v.fixedTrue) ++n;
        return n;
    }
    std::size_t fixedChoiceCount() const { return booleanVars.size() - freeChoiceCount(); }

    // One per emitted (assert ...); keeps the emitter honest in tests.
    std::size_t assertionCount() const {
        std::size_t targets = 0;
        for (char t : targetMask) targets += t ? 1 : 0;
        return 1                          // threshold at the initial state
               + choiceClauses.size()     // one disjunction per state
               + targets                  // p = 1 on target states
               + rows.size()              // guarded Bellman inequalities
               + 2 * realVars.size()      // 0 <= p <= 1
               + fixedChoiceCount()       // pre-decided singles
               + schedulerExclusions.size() + assignmentExclusions.size();
    }
};

inline Encoding buildEncoding(const Mdp& m, const SafetySpec& spec,
                              const std::vector<DetScheduler>& excludedSchedulers,
                              const std::vector<DetPermissiveScheduler>& excludedAssignments) {
    checkSafetySpec(m, spec);
    Encoding enc;
    enc.initial = m.initial;
    enc.lambda = spec.lambda;
    enc.targetMask = stateMask(m, spec.target);
    enc.varOfAction.assign(m.actionCount(), static_cast<std::size_t>(-1));
    enc.choiceClauses.resize(m.stateCount());

    for (StateId s = 0; s < m.stateCount(); ++s) {
        const auto& choices = m.enabled(s);
        for (const Choice& c : choices) {
            std::size_t idx = enc.booleanVars.size();
            enc.booleanVars.push_back({s, c.action, c.label,
                                       "y_" + std::to_string(s) + "_" + std::to_string(c.action),
                                       choices.size() == 1});
            enc.varOfAction[c.action] = idx;
            enc.choiceClauses[s].push_back(idx);
            if (!enc.targetMask[s]) {
                Encoding::BellmanRow row;
                row.var = idx;
                for (const auto& e : c.distribution.entries)
                    row.terms.push_back({e.target, e.probability});
                enc.rows.push_back(std::move(row));
            }
        }
        enc.realVars.push_back({s, "p_" + std::to_string(s)});
    }

    // Variables fixed true by a singleton state can never differ, so the
    // exclusion clauses mention only the free variables. A clause that comes
    // out empty is unsatisfiable, which is the correct reading: nothing is
    // left to exclude the scheduler with.
    for (const DetScheduler& sigma : excludedSchedulers) {
        checkScheduler(m, sigma);
        std::vector<std::size_t> clause;
        for (StateId s = 0; s < m.stateCount(); ++s) {
            std::size_t idx = enc.varOfAction[sigma.choice[s]];
            if (!enc.booleanVars[idx].fixedTrue) clause.push_back(idx);
        }
        enc.schedulerExclusions.push_back(std::move(clause));
    }
    for (const DetPermissiveScheduler& theta : excludedAssignments) {
        checkPermissive(m, theta);
        std::vector<std::pair<std::size_t, bool>> clause;
        for (std::size_t idx = 0; idx < enc.booleanVars.size(); ++idx) {
            const auto& v = enc.booleanVars[idx];
            if (!v.fixedTrue) clause.push_back({idx, theta.allows(v.state, v.action)});
        }
        enc.assignmentExclusions.push_back(std::move(clause));
    }
    return enc;
}

namespace detail {

inline std::string smtRational(const Rational& r) {
    std::string num = r.num() < 0 ? "(- " + std::to_string(-r.num()) + ")" : std::to_string(r.num());
    if (r.den() == 1) return num;
    return "(/ " + num + " " + std::to_string(r.den()) + ")";
}

} // namespace detail

// Deterministic SMT-LIB2 rendering of the encoding: byte-identical for
// identical input, rationals always as exact quotients.
inline std::string emitSmtlib(const Encoding& enc) {
    std::string out;
    out += "(set-option :print-success false)\n";
    out += "(set-logic QF_LRA)\n";
    for (const auto& v : enc.booleanVars) out += "(declare-const " + v.name + " Bool)\n";
    for (const auto& v : enc.realVars) out += "(declare-const " + v.name + " Real)\n";

    out += "(assert (<= " + enc.realVars[enc.initial].name + " " + detail::smtRational(enc.lambda) + "))\n";
    for (const auto& clause : enc.choiceClauses) {
        out += "(assert (or";
        for (std::size_t idx : clause) out += " " + enc.booleanVars[idx].name;
        out += "))\n";
    }
    for (StateId s = 0; s < enc.targetMask.size(); ++s)
        if (enc.targetMask[s]) out += "(assert (= " + enc.realVars[s].name + " 1))\n";
    for (const auto& row : enc.rows) {
        const auto& v = enc.booleanVars[row.var];
        std::string sum;
        if (row.terms.size() == 1) {
            sum = "(* " + detail::smtRational(row.terms[0].second) + " " +
                  enc.realVars[row.terms[0].first].name + ")";
        } else {
            sum = "(+";
            for (const auto& [t, p] : row.terms)
                sum += " (* " + detail::smtRational(p) + " " + enc.realVars[t].name + ")";
            sum += ")";
        }
        out += "(assert (=> " + v.name + " (>= " + enc.realVars[v.state].name + " " + sum + ")))\n";
    }
    for (const auto& v : enc.realVars) {
        out += "(assert (<= 0 " + v.name + "))\n";
        out += "(assert (<= " + v.name + " 1))\n";
    }
    for (const auto& v : enc.booleanVars)
        if (v.fixedTrue) out += "(assert " + v.name + ")\n";
    for (const auto& clause : enc.schedulerExclusions) {
        if (clause.empty()) {
            out += "(assert false)\n";
            continue;
        }
        out += "(assert (or";
        for (std::size_t idx : clause) out += " (not " + enc.booleanVars[idx].name + ")";
        out += "))\n";
    }
    for (const auto& clause : enc.assignmentExclusions) {
        if (clause.empty()) {
            out += "(assert false)\n";
            continue;
        }
        out += "(assert (or";
        for (const auto& [idx, value] : clause)
            out += value ? " (not " + enc.booleanVars[idx].name + ")" : " " + enc.booleanVars[idx].name;
        out += "))\n";
    }
    out += "(check-sat)\n";
    out += "(get-value (";
    bool first = true;
    for (const auto& v : enc.booleanVars) {
        if (!first) out += " ";
        out += v.name;
        first = false;
    }
    for (const auto& v : enc.realVars) {
        if (!first) out += " ";
        out += v.name;
        first = false;
    }
    out += "))\n";
    return out;
}

// Reach-equivalent model rebuilt from the encoding alone: target states
// become absorbing dummies (their choices carry no Bellman rows). Used by
// the enumerative engine and by re-verification inside solve().
struct ReconstructedProblem {
    Mdp model;
    SafetySpec spec;
};

inline ReconstructedProblem reconstructProblem(const Encoding& enc) {
    ReconstructedProblem rec;
    rec.model.addStates(enc.realVars.size());
    rec.model.initial = enc.initial;
    std::vector<const Encoding::BellmanRow*> rowOfVar(enc.booleanVars.size(), nullptr);
    for (const auto& row : enc.rows) rowOfVar[row.var] = &row;
    for (StateId s = 0; s < enc.realVars.size(); ++s) {
        for (std::size_t idx : enc.choiceClauses[s]) {
            const auto& v = enc.booleanVars[idx];
            Distribution d;
            if (const auto* row = rowOfVar[idx]) {
                for (const auto& [t, p] : row->terms) d.entries.push_back({t, p});
            } else {
                d = dirac(s);
            }
            rec.model.addChoiceWithId(s, v.action, v.label, std::move(d));
        }
    }
    std::size_t universe = 0;
    for (const auto& v : enc.booleanVars) universe = std::max<std::size_t>(universe, v.action + 1);
    rec.model.setActionUniverse(universe);
    rec.spec.lambda = enc.lambda;
    for (StateId s = 0; s < enc.targetMask.size(); ++s)
        if (enc.targetMask[s]) rec.spec.target.push_back(s);
    return rec;
}

} // namespace safesynth
