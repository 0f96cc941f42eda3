// Command line front end: generate benchmark instances, analyze models,
// run the synthesis loop, and inspect conflicts.

#include "safesynth/analysis.hpp"
#include "safesynth/benchmarks.hpp"
#include "safesynth/learning.hpp"
#include "safesynth/loop.hpp"
#include "safesynth/model_format.hpp"
#include "safesynth/report.hpp"
#include "safesynth/solver.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace safesynth;

std::vector<double> parseOracleFile(const std::string& path, std::size_t actionCount) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open oracle file: " + path);
    std::string line;
    std::size_t lineNo = 0;
    bool sawHeader = false;
    std::vector<std::optional<double>> values(actionCount);
    while (std::getline(in, line)) {
        ++lineNo;
        auto toks = detail::tokenizeLine(line);
        if (toks.empty()) continue;
        if (!sawHeader) {
            if (toks.size() != 3 || toks[0].text != "safesynth" || toks[1].text != "oracle" ||
                toks[2].text != "1")
                throw ParseError(lineNo, toks[0].column, "expected header 'safesynth oracle 1'");
            sawHeader = true;
            continue;
        }
        if (toks[0].text != "oracle" || toks.size() != 3)
            throw ParseError(lineNo, toks[0].column, "expected 'oracle <action> <cost>'");
        std::size_t idx = detail::parseIndex(toks[1], lineNo, "action id");
        if (idx >= actionCount)
            throw ParseError(lineNo, toks[1].column, "action id out of range");
        if (values[idx]) throw ParseError(lineNo, toks[1].column, "duplicate oracle entry");
        values[idx] = detail::parseCostValue(toks[2], lineNo);
    }
    if (!sawHeader) throw std::runtime_error(path + ": empty oracle file");
    std::vector<double> out(actionCount);
    for (std::size_t i = 0; i < actionCount; ++i) {
        if (!values[i])
            throw std::runtime_error(path + ": missing oracle entry for action " + std::to_string(i));
        out[i] = *values[i];
    }
    return out;
}

void emit(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
}

std::string describeSet(const Mdp& m, const std::vector<ActionId>& actions) {
    std::vector<StateId> owner = m.ownerTable();
    std::string out = "{";
    for (std::size_t i = 0; i < actions.size(); ++i) {
        if (i) out += ", ";
        StateId s = owner[actions[i]];
        out += "(" + std::to_string(s) + "," + detail::actionLabel(m, s, actions[i]) + ")";
    }
    return out + "}";
}

std::string describeScheduler(const Mdp& m, const DetScheduler& sigma) {
    std::string out;
    for (StateId s = 0; s < m.stateCount(); ++s) {
        if (m.enabled(s).size() < 2) continue;
        if (!out.empty()) out += " ";
        out += std::to_string(s) + ":" + detail::actionLabel(m, s, sigma.choice[s]);
    }
    return out.empty() ? "(no choices)" : out;
}

int runGenerate(const std::string& family, std::size_t width, std::size_t height, std::size_t n,
                std::size_t length, std::size_t speedLevels, std::size_t maxDistance,
                std::size_t attempts, const std::string& lambdaText, const std::string& kappaText,
                std::uint64_t seed, const std::string& outPath) {
    ProblemInstance p;
    if (family == "fig1") {
        p = kappaText.empty() ? genFig1() : genFig1(Rational::parse(kappaText));
    } else if (family == "conflict") {
        p = genConflictFamily(n);
    } else if (family == "janitor") {
        p = genJanitor(width, height, Rational::parse(lambdaText.empty() ? "1/4" : lambdaText), seed);
    } else if (family == "folline") {
        p = genFolLine(length, speedLevels, maxDistance,
                       Rational::parse(lambdaText.empty() ? "3/5" : lambdaText));
    } else if (family == "comexp") {
        p = genComExp(width, height, attempts,
                      Rational::parse(lambdaText.empty() ? "1/5" : lambdaText));
    } else {
        std::cerr << "unknown family '" << family
                  << "' (expected fig1|conflict|janitor|folline|comexp)\n";
        return 1;
    }
    emit(printModel(p), outPath);
    std::cerr << p.metadata.name << ": " << p.model.stateCount() << " states, "
              << p.model.actionCount() << " actions, " << p.model.transitionCount()
              << " transitions\n";
    return 0;
}

SolverConfig makeSolverConfig(const std::string& solver, bool fallback, double timeout) {
    SolverConfig cfg;
    if (!solver.empty()) cfg.command = solver;
    cfg.timeoutSeconds = timeout;
    cfg.mode = fallback ? SolverConfig::Mode::EnumerativeFallback : SolverConfig::Mode::External;
    return cfg;
}

int runAnalyze(const ProblemInstance& p, const std::string& query) {
    const Mdp& m = p.model;
    if (query == "maxreach") {
        ReachResult r = maxReachProbMdp(m, p.safety.target);
        std::printf("max reach probability of the unsafe set: %.12g\n", r.atInitial(m));
        std::printf("threshold: %s (%s)\n", p.safety.lambda.str().c_str(),
                    r.atInitial(m) <= p.safety.lambda.toDouble() + 1e-10 ? "met" : "exceeded");
        return 0;
    }
    if (query == "mincost") {
        std::vector<double> costs;
        if (p.costs.hasOracle()) {
            for (ActionId a = 0; a < m.actionCount(); ++a) costs.push_back(p.costs.reveal(a));
            std::printf("using true costs from the oracle block\n");
        } else {
            costs = p.costs.lowerVector();
            std::printf("no oracle block; using lower bounds (optimistic)\n");
        }
        CostResult r = minExpectedCostMdp(m, costs, p.performance.goal);
        std::printf("min expected cost to the goal set: %.12g\n", r.atInitial(m));
        if (r.witness) std::printf("witness: %s\n", describeScheduler(m, *r.witness).c_str());
        return 0;
    }
    if (query == "safesched") {
        std::vector<DetScheduler> safe = enumerateSafeSchedulers(m, p.safety);
        std::printf("%zu safe deterministic scheduler(s)\n", safe.size());
        for (const auto& sigma : safe) std::printf("  %s\n", describeScheduler(m, sigma).c_str());
        return 0;
    }
    if (query == "conflicts") {
        std::vector<std::vector<ActionId>> sets = minimalConflictSets(m, p.safety);
        std::printf("%zu minimal conflict set(s)\n", sets.size());
        for (const auto& set : sets) std::printf("  %s\n", describeSet(m, set).c_str());
        return 0;
    }
    std::cerr << "unknown query '" << query << "' (expected maxreach|mincost|safesched|conflicts)\n";
    return 1;
}

int exitCodeFor(Termination t) {
    switch (t) {
        case Termination::PerformanceMet:
        case Termination::GloballyOptimal: return 0;
        case Termination::Exhausted:
        case Termination::IterationCap: return 2;
        case Termination::SolverFailure: return 3;
    }
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    using namespace safesynth;
    CLI::App app{"synthesis of cost-optimal safe schedulers"};
    app.require_subcommand(1);

    // generate
    std::string gFamily, gLambda, gKappa, gOut = "-";
    std::size_t gWidth = 4, gHeight = 4, gN = 4, gLength = 20, gSpeed = 3, gMaxDist = 2,
                gAttempts = 2;
    std::uint64_t gSeed = 7;
    auto* gen = app.add_subcommand("generate", "write a benchmark instance as a model file");
    gen->add_option("family", gFamily, "fig1|conflict|janitor|folline|comexp")->required();
    gen->add_option("--width", gWidth, "grid width (janitor, comexp)");
    gen->add_option("--height", gHeight, "grid height (janitor, comexp)");
    gen->add_option("-n,--size", gN, "chain length (conflict, even)");
    gen->add_option("--length", gLength, "line length (folline)");
    gen->add_option("--speed-levels", gSpeed, "speed levels (folline)");
    gen->add_option("--max-distance", gMaxDist, "offset bound (folline)");
    gen->add_option("--attempts", gAttempts, "comm attempts per visit (comexp)");
    gen->add_option("--lambda", gLambda, "safety threshold, rational");
    gen->add_option("--kappa", gKappa, "performance bound, rational (fig1)");
    gen->add_option("--seed", gSeed, "surface seed (janitor)");
    gen->add_option("-o,--output", gOut, "output file, '-' for stdout");

    // analyze
    std::string aModel, aQuery;
    auto* ana = app.add_subcommand("analyze", "model checking queries against a model file");
    ana->add_option("model", aModel, "model file")->required();
    ana->add_option("query", aQuery, "maxreach|mincost|safesched|conflicts")->required();

    // conflicts (alias for analyze <model> conflicts)
    std::string cModel;
    auto* con = app.add_subcommand("conflicts", "list minimal conflict sets of a model file");
    con->add_option("model", cModel, "model file")->required();

    // synthesize
    std::string sModel, sSolver, sOracle, sReport, sFormat = "human";
    bool sFallback = false, sToOptimal = false, sStopAtKappa = false;
    std::size_t sEpisodes = 10000, sMaxIter = 100;
    std::uint64_t sSeed = 1;
    double sTimeout = 60.0;
    auto* syn = app.add_subcommand("synthesize", "run the full synthesis loop on a model file");
    syn->add_option("model", sModel, "model file")->required();
    syn->add_option("--solver", sSolver, "SMT solver command (default: $SAFE_SYNTH_SOLVER or 'z3 -in')");
    syn->add_flag("--fallback-enum", sFallback, "use the built-in enumerative engine instead of SMT");
    syn->add_option("--solver-timeout", sTimeout, "seconds per solver call");
    syn->add_option("--seed", sSeed, "learning seed");
    syn->add_option("--episodes", sEpisodes, "learning episodes per iteration");
    syn->add_option("--max-iterations", sMaxIter, "iteration cap");
    auto* optFlag = syn->add_flag("--to-optimal", sToOptimal, "keep iterating past kappa until optimal");
    syn->add_flag("--stop-at-kappa", sStopAtKappa, "stop once the bound kappa is certified (default)")
        ->excludes(optFlag);
    syn->add_option("--report", sReport, "write the report to this file");
    syn->add_option("--format", sFormat, "human|json|csv (default human)");
    syn->add_option("--oracle", sOracle, "oracle file for models without an oracle block");

    // learn
    std::string lModel, lSolver, lOracle;
    bool lFallback = false;
    std::size_t lEpisodes = 10000;
    std::uint64_t lSeed = 1;
    double lTimeout = 60.0;
    auto* lrn = app.add_subcommand(
        "learn", "synthesize one safe permissive scheduler and run a single learning pass in it");
    lrn->add_option("model", lModel, "model file")->required();
    lrn->add_option("--solver", lSolver, "SMT solver command");
    lrn->add_flag("--fallback-enum", lFallback, "use the built-in enumerative engine instead of SMT");
    lrn->add_option("--solver-timeout", lTimeout, "seconds per solver call");
    lrn->add_option("--seed", lSeed, "learning seed");
    lrn->add_option("--episodes", lEpisodes, "learning episodes");
    lrn->add_option("--oracle", lOracle, "oracle file for models without an oracle block");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return runGenerate(gFamily, gWidth, gHeight, gN, gLength, gSpeed, gMaxDist, gAttempts,
                               gLambda, gKappa, gSeed, gOut);

        if (ana->parsed()) return runAnalyze(parseModelFile(aModel), aQuery);
        if (con->parsed()) return runAnalyze(parseModelFile(cModel), "conflicts");

        if (syn->parsed() || lrn->parsed()) {
            bool isSyn = syn->parsed();
            ProblemInstance p = parseModelFile(isSyn ? sModel : lModel);
            const std::string& oraclePath = isSyn ? sOracle : lOracle;
            if (!oraclePath.empty()) {
                std::vector<double> truth = parseOracleFile(oraclePath, p.model.actionCount());
                p.costs = CostModel(p.costs.lowerVector(), p.costs.upperVector(), truth);
                requireValidCosts(p.model, p.costs);
            }
            if (!p.costs.hasOracle()) {
                std::cerr << "model has no oracle block; pass --oracle <file> to supply true costs\n";
                return 1;
            }

            if (isSyn) {
                LoopConfig cfg;
                cfg.solver = makeSolverConfig(sSolver, sFallback, sTimeout);
                cfg.learner.episodes = sEpisodes;
                cfg.learner.seed = sSeed;
                cfg.iterationCap = sMaxIter;
                cfg.stopPolicy = sToOptimal ? LoopConfig::StopPolicy::ContinueToOptimal
                                            : LoopConfig::StopPolicy::StopAtKappa;
                SynthesisReport report =
                    run(p.model, p.costs, p.safety, p.performance, cfg, [](const IterationRecord& it) {
                        std::fprintf(stderr, "[iter %zu] lower=%.10g upper=%.10g (%.0f ms)\n",
                                     it.index, it.lower, it.upper, it.cumulativeMs);
                    });
                ReportFormat fmt = sFormat == "json"  ? ReportFormat::Json
                                   : sFormat == "csv" ? ReportFormat::Csv
                                                      : ReportFormat::Human;
                if (sFormat != "json" && sFormat != "csv" && sFormat != "human") {
                    std::cerr << "unknown format '" << sFormat << "'\n";
                    return 1;
                }
                std::string rendered = renderReport(report, p.model, fmt);
                if (!sReport.empty()) {
                    emit(rendered, sReport);
                    std::cout << renderHuman(report, p.model);
                } else {
                    std::cout << rendered;
                }
                return exitCodeFor(report.termination);
            }

            // learn: one synthesis step, one learning pass
            SolverConfig scfg = makeSolverConfig(lSolver, lFallback, lTimeout);
            SynthesisOutcome outcome = synthesizeSafePermissive(p.model, p.safety, {}, {}, scfg);
            if (outcome.status != SynthesisStatus::Sat) {
                std::cerr << "no safe permissive scheduler exists for this model\n";
                return 2;
            }
            Mdp sub = restrict(p.model, *outcome.scheduler);
            Environment env(sub, p.costs, p.performance.goal, lSeed);
            CostLedger ledger(p.model.actionCount());
            LearnConfig lc;
            lc.episodes = lEpisodes;
            lc.seed = lSeed;
            LearnResult lr = learn(env, lc, ledger);
            EvalResult eval = evaluateExactly(env, lr.greedy, p.performance.goal, ledger);
            std::printf("restricted to: %s\n",
                        detail::permissiveJson(p.model, *outcome.scheduler).dump().c_str());
            std::printf("learned scheduler: %s\n", describeScheduler(sub, lr.greedy).c_str());
            std::printf("exact cost on observed values: %.12g%s\n", eval.value,
                        eval.coverageOk ? "" : " (incomplete coverage)");
            std::printf("observed %zu of %zu action costs\n", ledger.observedCount(), ledger.size());
            return 0;
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 1;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
