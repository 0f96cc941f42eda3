#pragma once

#include "safesynth/analysis.hpp"
#include "safesynth/encoding.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace safesynth {

class SolverError : public std::runtime_error {
  public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Exceeded wall-clock budget; surfaced as an unknown verdict, not a failure.
class SolverTimeout : public SolverError {
  public:
    explicit SolverTimeout(const std::string& what) : SolverError(what) {}
};

inline std::string defaultSolverCommand() {
    if (const char* env = std::getenv("SAFE_SYNTH_SOLVER"); env && *env) return env;
    return "z3 -in";
}

struct SolverConfig {
    enum class Mode { External, EnumerativeFallback };
    std::string command = defaultSolverCommand();
    double timeoutSeconds = 60.0;
    Mode mode = Mode::External;
};

enum class SynthesisStatus { Sat, Unsat, Unknown };

struct SynthesisOutcome {
    SynthesisStatus status = SynthesisStatus::Unknown;
    std::optional<DetPermissiveScheduler> scheduler;
    // reach-probability witness per state, when the engine produced one
    std::optional<std::vector<Rational>> probabilityWitness;
};

namespace detail {

// ---------------------------------------------------------------------------
// S-expressions (the sliver needed for get-value responses)

struct SExpr {
    bool isAtom = true;
    std::string atom;
    std::vector<SExpr> kids;
};

inline SExpr parseSExpr(const std::string& text, std::size_t& pos) {
    auto skipWs = [&] {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    skipWs();
    if (pos >= text.size()) throw SolverError("unexpected end of solver response");
    if (text[pos] == '(') {
        ++pos;
        SExpr node;
        node.isAtom = false;
        while (true) {
            skipWs();
            if (pos >= text.size()) throw SolverError("unbalanced solver response");
            if (text[pos] == ')') {
                ++pos;
                return node;
            }
            node.kids.push_back(parseSExpr(text, pos));
        }
    }
    if (text[pos] == ')') throw SolverError("stray ')' in solver response");
    SExpr node;
    if (text[pos] == '"') { // quoted atom, e.g. inside (error "...")
        std::size_t end = text.find('"', pos + 1);
        if (end == std::string::npos) throw SolverError("unterminated string in solver response");
        node.atom = text.substr(pos + 1, end - pos - 1);
        pos = end + 1;
        return node;
    }
    std::size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')')
        ++pos;
    node.atom = text.substr(start, pos - start);
    return node;
}

inline SExpr parseSExpr(const std::string& text) {
    std::size_t pos = 0;
    SExpr e = parseSExpr(text, pos);
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos != text.size()) throw SolverError("trailing junk in solver response: " + text.substr(pos));
    return e;
}

inline Rational decimalToRational(const std::string& s) {
    std::size_t used = 0;
    Rational r = Rational::parsePrefix(s, used);
    if (used != s.size()) throw SolverError("malformed numeral in solver response: " + s);
    return r;
}

inline Rational valueToRational(const SExpr& e) {
    if (e.isAtom) return decimalToRational(e.atom);
    if (e.kids.empty()) throw SolverError("empty value term in solver response");
    const SExpr& head = e.kids[0];
    if (head.isAtom && head.atom == "-" && e.kids.size() == 2)
        return Rational(0) - valueToRational(e.kids[1]);
    if (head.isAtom && head.atom == "/" && e.kids.size() == 3)
        return valueToRational(e.kids[1]) / valueToRational(e.kids[2]);
    throw SolverError("unsupported value term in solver response");
}

// ---------------------------------------------------------------------------
// External process speaking SMT-LIB2 on stdin/stdout

class SmtProcess {
  public:
    SmtProcess(const std::string& command, double timeoutSeconds)
        : timeoutSeconds_(timeoutSeconds), command_(command) {
        // A solver that dies mid-conversation must surface as EPIPE on write,
        // not as a fatal SIGPIPE.
        static const bool pipeSignalIgnored = [] {
            signal(SIGPIPE, SIG_IGN);
            return true;
        }();
        (void)pipeSignalIgnored;
        std::vector<std::string> argv = splitCommand(command);
        if (argv.empty()) throw SolverError("empty solver command");
        int inPipe[2], outPipe[2];
        if (pipe(inPipe) != 0 || pipe(outPipe) != 0) throw SolverError("pipe() failed");
        pid_ = fork();
        if (pid_ < 0) throw SolverError("fork() failed");
        if (pid_ == 0) {
            setpgid(0, 0); // own group, so teardown can reap helpers it spawned
            dup2(inPipe[0], STDIN_FILENO);
            dup2(outPipe[1], STDOUT_FILENO);
            close(inPipe[0]);
            close(inPipe[1]);
            close(outPipe[0]);
            close(outPipe[1]);
            std::vector<char*> cargv;
            for (auto& a : argv) cargv.push_back(a.data());
            cargv.push_back(nullptr);
            execvp(cargv[0], cargv.data());
            _exit(127);
        }
        setpgid(pid_, pid_); // either side may win the race; both agree
        close(inPipe[0]);
        close(outPipe[1]);
        toChild_ = inPipe[1];
        fromChild_ = outPipe[0];
    }

    SmtProcess(const SmtProcess&) = delete;
    SmtProcess& operator=(const SmtProcess&) = delete;

    ~SmtProcess() {
        if (toChild_ >= 0) close(toChild_);
        if (fromChild_ >= 0) close(fromChild_);
        if (pid_ > 0) {
            if (kill(-pid_, SIGKILL) != 0) kill(pid_, SIGKILL);
            waitpid(pid_, nullptr, 0);
        }
    }

    void send(const std::string& text) {
        std::size_t off = 0;
        while (off < text.size()) {
            ssize_t n = write(toChild_, text.data() + off, text.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw SolverError("solver process closed its input (command: " + command_ + ")");
            }
            off += static_cast<std::size_t>(n);
        }
    }

    // one non-empty line, e.g. the check-sat verdict
    std::string readLine() {
        while (true) {
            std::size_t nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
                if (!line.empty()) return line;
                continue;
            }
            fill();
        }
    }

    // one balanced parenthesized term (may span lines)
    std::string readBalanced() {
        while (true) {
            std::size_t start = buffer_.find_first_not_of(" \t\r\n");
            if (start != std::string::npos && buffer_[start] != '(') return readLine();
            if (start != std::string::npos) {
                int depth = 0;
                bool inString = false;
                for (std::size_t i = start; i < buffer_.size(); ++i) {
                    char c = buffer_[i];
                    if (inString) {
                        if (c == '"') inString = false;
                        continue;
                    }
                    if (c == '"') inString = true;
                    else if (c == '(') ++depth;
                    else if (c == ')' && --depth == 0) {
                        std::string term = buffer_.substr(start, i - start + 1);
                        buffer_.erase(0, i + 1);
                        return term;
                    }
                }
            }
            fill();
        }
    }

  private:
    static std::vector<std::string> splitCommand(const std::string& command) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : command) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) out.push_back(std::move(cur));
        return out;
    }

    void fill() {
        pollfd pfd{fromChild_, POLLIN, 0};
        int millis = static_cast<int>(timeoutSeconds_ * 1000.0);
        int r = poll(&pfd, 1, millis > 0 ? millis : 1);
        if (r == 0) throw SolverTimeout("solver timed out after " + std::to_string(timeoutSeconds_) +
                                        "s (command: " + command_ + ")");
        if (r < 0) throw SolverError("poll() failed while reading solver output");
        char chunk[4096];
        ssize_t n = read(fromChild_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR) return;
            throw SolverError("read() failed on solver output");
        }
        if (n == 0)
            throw SolverError("solver produced no further output; failed to launch or crashed "
                              "(command: " + command_ + ")");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }

    double timeoutSeconds_;
    std::string command_;
    pid_t pid_ = -1;
    int toChild_ = -1;
    int fromChild_ = -1;
    std::string buffer_;
};

// Incremental session: the encoding's declarations and base assertions are
// sent once; callers push/pop probe assertions on top.
class SmtSession {
  public:
    SmtSession(const Encoding& enc, const SolverConfig& cfg)
        : enc_(&enc), proc_(cfg.command, cfg.timeoutSeconds) {
        std::string script = emitSmtlib(enc);
        // strip the final check-sat/get-value: the session drives those itself
        std::size_t cut = script.find("(check-sat)");
        proc_.send(script.substr(0, cut));
    }

    void assertTerm(const std::string& term) { proc_.send("(assert " + term + ")\n"); }
    void push() { proc_.send("(push 1)\n"); }
    void pop() { proc_.send("(pop 1)\n"); }

    SynthesisStatus checkSat() {
        proc_.send("(check-sat)\n");
        std::string verdict = proc_.readLine();
        if (verdict == "sat") return SynthesisStatus::Sat;
        if (verdict == "unsat") return SynthesisStatus::Unsat;
        if (verdict == "unknown") return SynthesisStatus::Unknown;
        throw SolverError("unexpected check-sat reply: " + verdict);
    }

    // assignment of every declared variable, in declaration order
    std::pair<std::vector<bool>, std::vector<Rational>> getValues() {
        std::string query = "(get-value (";
        bool first = true;
        for (const auto& v : enc_->booleanVars) {
            if (!first) query += " ";
            query += v.name;
            first = false;
        }
        for (const auto& v : enc_->realVars) {
            query += " " + v.name;
        }
        query += "))\n";
        proc_.send(query);
        SExpr reply = parseSExpr(proc_.readBalanced());
        if (reply.isAtom || (reply.kids.size() >= 1 && reply.kids[0].isAtom && reply.kids[0].atom == "error"))
            throw SolverError("solver rejected get-value");
        std::map<std::string, const SExpr*> byName;
        for (const SExpr& pair : reply.kids) {
            if (pair.isAtom || pair.kids.size() != 2 || !pair.kids[0].isAtom)
                throw SolverError("malformed get-value pair");
            byName[pair.kids[0].atom] = &pair.kids[1];
        }
        std::vector<bool> bools;
        for (const auto& v : enc_->booleanVars) {
            auto it = byName.find(v.name);
            if (it == byName.end()) throw SolverError("solver omitted " + v.name);
            const SExpr& val = *it->second;
            if (!val.isAtom || (val.atom != "true" && val.atom != "false"))
                throw SolverError("non-boolean value for " + v.name);
            bools.push_back(val.atom == "true");
        }
        std::vector<Rational> reals;
        for (const auto& v : enc_->realVars) {
            auto it = byName.find(v.name);
            if (it == byName.end()) throw SolverError("solver omitted " + v.name);
            reals.push_back(valueToRational(*it->second));
        }
        return {std::move(bools), std::move(reals)};
    }

  private:
    const Encoding* enc_;
    SmtProcess proc_;
};

inline DetPermissiveScheduler assignmentToPermissive(const Encoding& enc, const std::vector<bool>& bools) {
    DetPermissiveScheduler theta;
    theta.allowed.resize(enc.realVars.size());
    for (std::size_t idx = 0; idx < enc.booleanVars.size(); ++idx)
        if (bools[idx]) theta.allowed[enc.booleanVars[idx].state].push_back(enc.booleanVars[idx].action);
    for (auto& v : theta.allowed) sortUnique(v);
    return theta;
}

// ---------------------------------------------------------------------------
// Enumerative engine: best-first search over deterministic schedulers in
// min-reach order (partitioning the space on each popped witness), plus a
// breadth-first climb through feasible assignments when exclusion clauses
// rule the popped singleton out.

struct FallbackState {
    ReconstructedProblem rec;
    std::vector<char> targetMask;
    AnalysisOptions opt;
};

inline bool violatesSchedulerClause(const Encoding& enc, const DetPermissiveScheduler& theta) {
    for (const auto& clause : enc.schedulerExclusions) {
        bool allAllowed = true;
        for (std::size_t idx : clause) {
            const auto& v = enc.booleanVars[idx];
            if (!theta.allows(v.state, v.action)) {
                allAllowed = false;
                break;
            }
        }
        if (allAllowed) return true;
    }
    return false;
}

inline bool violatesAssignmentClause(const Encoding& enc, const DetPermissiveScheduler& theta) {
    for (const auto& clause : enc.assignmentExclusions) {
        bool identical = true;
        for (const auto& [idx, value] : clause) {
            const auto& v = enc.booleanVars[idx];
            if (theta.allows(v.state, v.action) != value) {
                identical = false;
                break;
            }
        }
        if (identical) return true;
    }
    return false;
}

inline bool safeUnderThreshold(const FallbackState& fs, const DetPermissiveScheduler& theta) {
    Mdp sub = restrict(fs.rec.model, theta);
    ReachResult r = maxReachProbMdp(sub, fs.rec.spec.target, fs.opt);
    return r.atInitial(sub) <= fs.rec.spec.lambda.toDouble() + fs.opt.epsProb;
}

inline bool feasibleAssignment(const FallbackState& fs, const Encoding& enc,
                               const DetPermissiveScheduler& theta, bool checkAssignmentClauses) {
    for (const auto& v : theta.allowed)
        if (v.empty()) return false;
    if (violatesSchedulerClause(enc, theta)) return false;
    if (checkAssignmentClauses && violatesAssignmentClause(enc, theta)) return false;
    return safeUnderThreshold(fs, theta);
}

// Grow the feasible singleton into a feasible assignment outside every
// assignment-exclusion clause. Downward closure of feasibility makes the
// one-action-at-a-time frontier complete; at most |clauses| members can be
// excluded, so the climb visits O(|clauses| * actions) candidates.
inline std::optional<DetPermissiveScheduler>
escapeAssignmentClauses(const FallbackState& fs, const Encoding& enc, const DetPermissiveScheduler& seed) {
    std::set<std::vector<std::vector<ActionId>>> visited;
    std::deque<DetPermissiveScheduler> frontier;
    frontier.push_back(seed);
    visited.insert(seed.allowed);
    while (!frontier.empty()) {
        DetPermissiveScheduler cur = std::move(frontier.front());
        frontier.pop_front();
        if (!violatesAssignmentClause(enc, cur)) return cur;
        for (std::size_t idx = 0; idx < enc.booleanVars.size(); ++idx) {
            const auto& v = enc.booleanVars[idx];
            if (cur.allows(v.state, v.action)) continue;
            DetPermissiveScheduler grown = cur;
            auto& slot = grown.allowed[v.state];
            slot.insert(std::lower_bound(slot.begin(), slot.end(), v.action), v.action);
            if (!visited.insert(grown.allowed).second) continue;
            if (feasibleAssignment(fs, enc, grown, false)) frontier.push_back(std::move(grown));
        }
    }
    return std::nullopt;
}

struct SearchNode {
    double value;
    std::uint64_t seq;
    std::vector<ActionId> forced; // kNoAction = free
    std::vector<char> banned;     // by ActionId
    DetScheduler witness;
    bool operator>(const SearchNode& other) const {
        return value != other.value ? value > other.value : seq > other.seq;
    }
};

inline SynthesisOutcome solveEnumerative(const Encoding& enc, const AnalysisOptions& opt = {}) {
    FallbackState fs{reconstructProblem(enc), {}, opt};
    fs.targetMask = stateMask(fs.rec.model, fs.rec.spec.target);
    const Mdp& m = fs.rec.model;
    const double bound = fs.rec.spec.lambda.toDouble() + opt.epsProb;

    std::priority_queue<SearchNode, std::vector<SearchNode>, std::greater<SearchNode>> queue;
    std::uint64_t seq = 0;

    auto push = [&](std::vector<ActionId> forced, std::vector<char> banned) {
        auto r = minReachConstrained(m, fs.rec.spec.target, forced, banned, opt);
        if (!r) return; // constraints deadlock some state
        queue.push({r->atInitial(m), seq++, std::move(forced), std::move(banned), *r->witness});
    };

    push(std::vector<ActionId>(m.stateCount(), kNoAction), std::vector<char>(m.actionCount(), 0));

    std::size_t popBudget = 16 + 4 * (enc.schedulerExclusions.size() + enc.assignmentExclusions.size() +
                                      m.stateCount() * m.stateCount());
    while (!queue.empty()) {
        if (popBudget-- == 0) throw SolverError("enumerative search exceeded its pop budget");
        SearchNode node = queue.top();
        queue.pop();
        if (node.value > bound) break; // everything left is unsafe
        DetPermissiveScheduler candidate = singleton(node.witness);

        bool excludedScheduler = violatesSchedulerClause(enc, candidate);
        if (!excludedScheduler) {
            std::optional<DetPermissiveScheduler> escaped = escapeAssignmentClauses(fs, enc, candidate);
            if (escaped) {
                SynthesisOutcome out;
                out.status = SynthesisStatus::Sat;
                out.scheduler = std::move(*escaped);
                return out;
            }
        }
        // carve the popped scheduler out of this cell and keep searching
        for (StateId s = 0; s < m.stateCount(); ++s) {
            if (node.forced[s] != kNoAction) continue;
            std::vector<ActionId> forced = node.forced;
            std::vector<char> banned = node.banned;
            for (StateId t = 0; t < s; ++t)
                if (node.forced[t] == kNoAction) forced[t] = node.witness.choice[t];
            banned[node.witness.choice[s]] = 1;
            push(std::move(forced), std::move(banned));
        }
    }
    SynthesisOutcome out;
    out.status = SynthesisStatus::Unsat;
    return out;
}

} // namespace detail

// Decide the encoding, returning a feasible assignment when one exists.
// External mode talks SMT-LIB2 to cfg.command and re-verifies the model it
// returns; fallback mode runs the enumerative engine.
inline SynthesisOutcome solve(const Encoding& enc, const SolverConfig& cfg) {
    if (cfg.mode == SolverConfig::Mode::EnumerativeFallback) return detail::solveEnumerative(enc);

    try {
        detail::SmtSession session(enc, cfg);
        SynthesisStatus verdict = session.checkSat();
        SynthesisOutcome out;
        out.status = verdict;
        if (verdict != SynthesisStatus::Sat) return out;

        auto [bools, reals] = session.getValues();
        DetPermissiveScheduler theta = detail::assignmentToPermissive(enc, bools);
        detail::FallbackState fs{reconstructProblem(enc), {}, {}};
        for (const auto& v : theta.allowed)
            if (v.empty()) throw SolverError("solver returned an assignment with an action-free state");
        if (!detail::feasibleAssignment(fs, enc, theta, true))
            throw SolverError("solver returned sat but its model failed re-verification");
        out.scheduler = std::move(theta);
        out.probabilityWitness = std::move(reals);
        return out;
    } catch (const SolverTimeout&) {
        SynthesisOutcome out;
        out.status = SynthesisStatus::Unknown;
        return out;
    }
}

// Grow a feasible assignment to a subset-maximal one: probe each disallowed
// pair in declaration order, keep it when the strengthened encoding stays
// sat, pin it false otherwise.
inline DetPermissiveScheduler maximizeLocally(const Encoding& enc, const DetPermissiveScheduler& base,
                                              const SolverConfig& cfg) {
    if (cfg.mode == SolverConfig::Mode::EnumerativeFallback) {
        detail::FallbackState fs{reconstructProblem(enc), {}, {}};
        DetPermissiveScheduler cur = base;
        // Safety and scheduler-clause rejections are monotone under growth and
        // never need re-probing; an exact assignment-clause match can clear
        // once something else is added, so sweep until a pass adds nothing.
        std::vector<char> ruledOut(enc.booleanVars.size(), 0);
        bool grew = true;
        while (grew) {
            grew = false;
            for (std::size_t idx = 0; idx < enc.booleanVars.size(); ++idx) {
                const auto& v = enc.booleanVars[idx];
                if (ruledOut[idx] || cur.allows(v.state, v.action)) continue;
                DetPermissiveScheduler grown = cur;
                auto& slot = grown.allowed[v.state];
                slot.insert(std::lower_bound(slot.begin(), slot.end(), v.action), v.action);
                if (detail::violatesSchedulerClause(enc, grown) ||
                    !detail::safeUnderThreshold(fs, grown)) {
                    ruledOut[idx] = 1;
                    continue;
                }
                if (detail::violatesAssignmentClause(enc, grown)) continue;
                cur = std::move(grown);
                grew = true;
            }
        }
        return cur;
    }

    // External mode: one incremental session, probing under push/pop and
    // pinning each variable permanently once decided.
    auto attempt = [&](const std::vector<std::size_t>& skipKept) -> std::optional<DetPermissiveScheduler> {
        detail::SmtSession session(enc, cfg);
        std::vector<bool> pinned(enc.booleanVars.size(), false);
        std::vector<bool> value(enc.booleanVars.size(), false);
        for (std::size_t idx = 0; idx < enc.booleanVars.size(); ++idx) {
            const auto& v = enc.booleanVars[idx];
            if (base.allows(v.state, v.action)) {
                session.assertTerm(v.name);
                pinned[idx] = true;
                value[idx] = true;
            }
        }
        for (std::size_t idx = 0; idx < enc.booleanVars.size(); ++idx) {
            if (pinned[idx]) continue;
            bool skip = std::find(skipKept.begin(), skipKept.end(), idx) != skipKept.end();
            if (skip) {
                session.assertTerm("(not " + enc.booleanVars[idx].name + ")");
                pinned[idx] = true;
                continue;
            }
            session.push();
            session.assertTerm(enc.booleanVars[idx].name);
            SynthesisStatus st = session.checkSat();
            session.pop();
            if (st == SynthesisStatus::Unknown) throw SolverError("solver returned unknown during maximization");
            bool keep = st == SynthesisStatus::Sat;
            session.assertTerm(keep ? enc.booleanVars[idx].name : "(not " + enc.booleanVars[idx].name + ")");
            pinned[idx] = true;
            value[idx] = keep;
        }
        if (session.checkSat() != SynthesisStatus::Sat) return std::nullopt;
        std::vector<bool> bools;
        for (std::size_t idx = 0; idx < enc.booleanVars.size(); ++idx) bools.push_back(value[idx]);
        return detail::assignmentToPermissive(enc, bools);
    };

    // The final check only fails if a probe's sat was spurious; dropping the
    // most recent kept additions converges back to the (feasible) base. A
    // session failure mid-loop degrades to the already-verified base rather
    // than sinking the whole synthesis step.
    try {
        std::vector<std::size_t> dropped;
        while (true) {
            std::optional<DetPermissiveScheduler> grown = attempt(dropped);
            if (grown) return *grown;
            bool droppedOne = false;
            for (std::size_t idx = enc.booleanVars.size(); idx-- > 0;) {
                const auto& v = enc.booleanVars[idx];
                if (base.allows(v.state, v.action)) continue;
                if (std::find(dropped.begin(), dropped.end(), idx) == dropped.end()) {
                    dropped.push_back(idx);
                    droppedOne = true;
                    break;
                }
            }
            if (!droppedOne) return base;
        }
    } catch (const SolverError&) {
        return base;
    }
}

// Full synthesis step: encode, decide, maximize, and re-verify against the
// original model. Throws SolverError on protocol or verification failures.
inline SynthesisOutcome synthesizeSafePermissive(const Mdp& m, const SafetySpec& spec,
                                                 const std::vector<DetScheduler>& excludedSchedulers,
                                                 const std::vector<DetPermissiveScheduler>& excludedAssignments,
                                                 const SolverConfig& cfg) {
    Encoding enc = buildEncoding(m, spec, excludedSchedulers, excludedAssignments);
    SynthesisOutcome out = solve(enc, cfg);
    if (out.status != SynthesisStatus::Sat) return out;
    out.scheduler = maximizeLocally(enc, *out.scheduler, cfg);
    if (!isSafePermissive(m, *out.scheduler, spec))
        throw SolverError("synthesized scheduler failed final safety verification");
    return out;
}

} // namespace safesynth
