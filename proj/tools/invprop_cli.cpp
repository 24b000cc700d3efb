#include "invprop/apps.hpp"
#include "invprop/oracle.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <iostream>

using namespace invprop;

namespace {

struct Common
{
    RunOptions run;
    std::string configPath;
    std::string jsonPath;
    std::string svgPath;
    std::string csvPath;
    int threads = 1;
    int iters = -1;
    int maxSweeps = -1;
};

void addCommon(CLI::App *cmd, Common &c)
{
    cmd->add_option("--planes", c.run.planes, "cutting planes (2D: evenly rotated; otherwise 2d box planes)");
    cmd->add_option("--branches", c.run.branches, "input regions (breadth-first midpoint splits)");
    cmd->add_option("--samples", c.run.samples, "samples for the ratio estimate");
    cmd->add_option("--seed", c.run.seed, "sampler seed");
    cmd->add_option("--final-iters", c.run.finalIters, "ascent steps of the final half-space pass");
    cmd->add_option("--config", c.configPath, "optimizer config JSON")->check(CLI::ExistingFile);
    cmd->add_option("--iters", c.iters, "override config iters");
    cmd->add_option("--max-sweeps", c.maxSweeps, "override config max_sweeps");
    cmd->add_option("--threads", c.threads, "worker threads (0 = all cores)");
    cmd->add_option("--json", c.jsonPath, "write the report here");
    cmd->add_option("--svg", c.svgPath, "write a 2D plot here");
    cmd->add_option("--csv", c.csvPath, "write half-spaces as CSV here");
    cmd->add_flag("--timings", c.run.timings, "include wall-clock phases in the report");
}

OptimizerConfig configOf(const Common &c)
{
    OptimizerConfig cfg = c.configPath.empty() ? OptimizerConfig{} : loadConfig(c.configPath);
    cfg.threads = c.threads;
    if (c.iters >= 0)
        cfg.iters = c.iters;
    if (c.maxSweeps >= 0)
        cfg.max_sweeps = c.maxSweeps;
    cfg.validate();
    return cfg;
}

std::vector<Vector> plotPoints(const Network &net,
                               const OutputSet &outSet,
                               const InputBox &box,
                               const Common &c,
                               std::size_t cap)
{
    auto pts = sampleFeasible(net, box, outSet, std::min<std::uint64_t>(c.run.samples, 200000), c.run.seed,
                              c.threads);
    if (pts.size() > cap)
        pts.resize(cap);
    return pts;
}

std::optional<InputBox> boxOf(const OutputSet &s)
{
    // Axis-aligned obstacle rows only: +-e_i x + d <= 0.
    const Index n = s.outputDim();
    Vector lo = Vector::Constant(n, -std::numeric_limits<double>::infinity());
    Vector hi = Vector::Constant(n, std::numeric_limits<double>::infinity());
    for (Index r = 0; r < s.rows(); ++r) {
        Index axis = -1;
        for (Index i = 0; i < n; ++i)
            if (s.H(r, i) != 0.0) {
                if (axis >= 0)
                    return std::nullopt;
                axis = i;
            }
        if (axis < 0)
            return std::nullopt;
        const double v = -s.d[r] / s.H(r, axis);
        if (s.H(r, axis) > 0)
            hi[axis] = std::min(hi[axis], v);
        else
            lo[axis] = std::max(lo[axis], v);
    }
    if (!lo.allFinite() || !hi.allFinite() || (lo.array() > hi.array()).any())
        return std::nullopt;
    return InputBox(lo, hi);
}

void printRun(const PreimageRun &run, const std::string &prefix)
{
    int done = 0, pruned = 0;
    for (const auto &l : run.result.leaves)
        (l.status == NodeStatus::Done ? done : pruned) += 1;
    fmt::print("{}regions {} (pruned {}), ", prefix, done + pruned, pruned);
    if (run.ratio.empiricallyEmpty)
        fmt::print("no feasible samples");
    else
        fmt::print("ratio {:.4f} +- {:.4f} ({} in set / {} feasible of {})", run.ratio.ratio, run.ratio.sigma,
                   run.ratio.inSet, run.ratio.feasible, run.ratio.samples);
    if (run.ratio.feasibleOutside)
        fmt::print(", {} FEASIBLE SAMPLES OUTSIDE", run.ratio.feasibleOutside);
    fmt::print("\n");
}

void printHalfspaces(const PolytopeUnion &set)
{
    for (std::size_t l = 0; l < set.leaves.size(); ++l)
        for (const auto &h : set.leaves[l].halfspaces) {
            fmt::print("  leaf {}: [", l);
            for (Index i = 0; i < h.c.size(); ++i)
                fmt::print("{}{:.6g}", i ? ", " : "", h.c[i]);
            fmt::print("] . x >= {:.6g}\n", h.lb);
        }
}

std::array<Index, 3> parseTriple(const std::string &s)
{
    std::array<Index, 3> out{};
    std::size_t pos = 0;
    for (int k = 0; k < 3; ++k) {
        const auto next = s.find(',', pos);
        const std::string tok = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        try {
            out[static_cast<std::size_t>(k)] = std::stol(tok);
        } catch (const std::exception &) {
            throw Error(ErrorKind::Parse, fmt::format("--max-gap expects a,b,ood; got \"{}\"", s));
        }
        if ((next == std::string::npos) != (k == 2))
            throw Error(ErrorKind::Parse, fmt::format("--max-gap expects a,b,ood; got \"{}\"", s));
        pos = next + 1;
    }
    return out;
}

std::string stepPath(const std::string &path, int t)
{
    std::filesystem::path p(path);
    return (p.parent_path() / fmt::format("{}_t{:02d}{}", p.stem().string(), t, p.extension().string())).string();
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Certified preimage over-approximation of ReLU networks"};
    app.require_subcommand(1);

    Common common;

    auto *pre = app.add_subcommand("preimage", "over-approximate f^-1(out_set) within a box");
    std::string netPath, outPath, boxPath, maxGap;
    pre->add_option("net", netPath, "network JSON")->required()->check(CLI::ExistingFile);
    pre->add_option("outset", outPath, "output set JSON (H y + d <= 0)")->required()->check(CLI::ExistingFile);
    pre->add_option("box", boxPath, "input box JSON")->required()->check(CLI::ExistingFile);
    pre->add_option("--max-gap", maxGap, "analyse max(y_a, y_b) - y_ood instead, given as a,b,ood");
    addCommon(pre, common);

    auto *reach = app.add_subcommand("reach", "backward reachable sets of an obstacle");
    std::string dynPath, policyPath, obstaclePath, reachBox;
    int steps = 1;
    reach->add_option("dynamics", dynPath, "dynamics JSON {A, B}")->required()->check(CLI::ExistingFile);
    reach->add_option("policy", policyPath, "policy network JSON")->required()->check(CLI::ExistingFile);
    reach->add_option("obstacle", obstaclePath, "obstacle as output set JSON")->required()->check(CLI::ExistingFile);
    reach->add_option("--box", reachBox, "state domain box JSON")->required()->check(CLI::ExistingFile);
    reach->add_option("--steps", steps, "time steps t (1..t are all analysed)");
    addCommon(reach, common);

    auto *robust = app.add_subcommand("robust", "prove a margin positive on a box");
    std::string robNet, robBox;
    Index label = 0;
    robust->add_option("net", robNet, "network JSON (scalar margin or logits)")->required()->check(CLI::ExistingFile);
    robust->add_option("box", robBox, "input box JSON")->required()->check(CLI::ExistingFile);
    robust->add_option("--label", label, "class that must win (ignored for scalar margins)");
    addCommon(robust, common);

    auto *verify = app.add_subcommand("verify", "exact small-instance checks");
    bool oracle = false;
    std::string vNet, vOut, vBox;
    verify->add_flag("--oracle", oracle, "dual <= LP <= MILP <= sampled minimum, per plane")->required();
    verify->add_option("net", vNet)->required()->check(CLI::ExistingFile);
    verify->add_option("outset", vOut)->required()->check(CLI::ExistingFile);
    verify->add_option("box", vBox)->required()->check(CLI::ExistingFile);
    addCommon(verify, common);

    auto *recheck = app.add_subcommand("recheck", "re-verify a report by sampling only");
    std::string reportPath;
    std::uint64_t recheckSamples = 100000;
    std::uint64_t recheckSeed = 1;
    int recheckThreads = 1;
    recheck->add_option("report", reportPath)->required()->check(CLI::ExistingFile);
    recheck->add_option("--samples", recheckSamples);
    recheck->add_option("--seed", recheckSeed);
    recheck->add_option("--threads", recheckThreads);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitParse;
    }

    try {
        if (*pre) {
            const OptimizerConfig cfg = configOf(common);
            Network net = loadNetwork(netPath);
            const OutputSet outSet = loadOutputSet(outPath);
            const InputBox box = loadBox(boxPath);
            if (!maxGap.empty())
                net = maxGapNetwork(net, box, parseTriple(maxGap));
            const PreimageRun run = runPreimage(net, outSet, box, cfg, common.run);
            printRun(run, "");
            printHalfspaces(run.result.set);
            if (!common.jsonPath.empty())
                writeTextFile(common.jsonPath, dumpReport(run.report));
            if (!common.csvPath.empty())
                writeTextFile(common.csvPath, halfspacesCsv(run.result.set));
            if (!common.svgPath.empty()) {
                SvgScene scene{box, {&run.result.set}, plotPoints(net, outSet, box, common, 4000), std::nullopt,
                               "preimage"};
                writeTextFile(common.svgPath, renderSvg(scene));
            }
            return run.exitCode;
        }
        if (*reach) {
            const OptimizerConfig cfg = configOf(common);
            const Dynamics dyn = loadDynamics(dynPath);
            const Network policy = loadNetwork(policyPath);
            const OutputSet obstacle = loadOutputSet(obstaclePath);
            const InputBox box = loadBox(reachBox);
            const ReachRun run = runReach(dyn, policy, obstacle, box, steps, cfg, common.run);
            for (std::size_t k = 0; k < run.steps.size(); ++k)
                printRun(run.steps[k], fmt::format("t={:<2} {}", k + 1, run.steps[k].reused ? "reused " : ""));
            if (!common.jsonPath.empty())
                writeTextFile(common.jsonPath, dumpReport(run.report));
            if (!common.csvPath.empty())
                for (std::size_t k = 0; k < run.steps.size(); ++k)
                    writeTextFile(stepPath(common.csvPath, static_cast<int>(k + 1)),
                                  halfspacesCsv(run.steps[k].result.set));
            if (!common.svgPath.empty()) {
                SvgScene scene{box, {}, {}, boxOf(obstacle), fmt::format("backward reachable sets, t = 1..{}", steps)};
                for (const auto &s : run.steps) {
                    scene.sets.push_back(&s.result.set);
                    auto pts = plotPoints(s.net, s.outSet, box, common, 600);
                    scene.points.insert(scene.points.end(), pts.begin(), pts.end());
                }
                writeTextFile(common.svgPath, renderSvg(scene));
            }
            return run.exitCode;
        }
        if (*robust) {
            const OptimizerConfig cfg = configOf(common);
            const RobustRun run = runRobust(loadNetwork(robNet), loadBox(robBox), label, cfg, common.run);
            fmt::print("{}{}\n", to_string(run.verdict), run.baselineVerified ? " (also without output constraint)" : "");
            if (run.witness) {
                fmt::print("witness:");
                for (Index i = 0; i < run.witness->size(); ++i)
                    fmt::print(" {:.9g}", (*run.witness)[i]);
                fmt::print("\n");
            }
            if (!common.jsonPath.empty())
                writeTextFile(common.jsonPath, dumpReport(run.report));
            switch (run.verdict) {
            case Verdict::Verified: return kExitOk;
            case Verdict::Falsified: return 1;
            case Verdict::Unknown: return kExitBudget;
            }
        }
        if (*verify) {
            const OptimizerConfig cfg = configOf(common);
            const OracleRun run = runOracle(loadNetwork(vNet), loadOutputSet(vOut), loadBox(vBox), cfg, common.run);
            for (const auto &r : run.rows)
                fmt::print("{} c=[{:.4f}, ...]  dual {:.6g} <= lp {:.6g} <= milp {:.6g} <= sampled {:.6g}\n",
                           r.ok ? "ok  " : "FAIL", r.c[0], r.ascended, r.relaxation, r.milp, r.sampled);
            if (!common.jsonPath.empty())
                writeTextFile(common.jsonPath, dumpReport(run.report));
            return run.ok ? kExitOk : 1;
        }
        if (*recheck) {
            const RecheckResult r = recheckReport(readJsonFile(reportPath), recheckSamples, recheckSeed, recheckThreads);
            fmt::print("{}: {} report(s), {} feasible of {} samples, {} outside\n", r.ok() ? "sound" : "UNSOUND",
                       r.reports, r.feasible, r.samples, r.outside);
            return r.ok() ? kExitOk : 1;
        }
    } catch (const Error &e) {
        fmt::print(stderr, "error ({}): {}\n", to_string(e.kind()), e.what());
        if (e.kind() == ErrorKind::Budget)
            return kExitBudget;
        // Bad input of any sort (files, shapes, flag values) is a usage error.
        return e.kind() == ErrorKind::Parse || e.kind() == ErrorKind::Dimension || e.kind() == ErrorKind::NonFinite ||
                       e.kind() == ErrorKind::Precondition
                   ? kExitParse
                   : 1;
    } catch (const nlohmann::json::exception &e) {
        fmt::print(stderr, "error (parse): {}\n", e.what());
        return kExitParse;
    } catch (const std::exception &e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 1;
}
