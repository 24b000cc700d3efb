#include "invprop/apps.hpp"

#include "invprop/oracle.hpp"
#include "invprop/parallel.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <limits>

namespace invprop {

namespace {

using Clock = std::chrono::steady_clock;

double secondsSince(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// JSON has no infinities; those only show up for empty estimates.
nlohmann::json number(double v)
{
    if (std::isfinite(v))
        return v;
    return nullptr;
}

nlohmann::json numbers(const std::vector<double> &v)
{
    auto j = nlohmann::json::array();
    for (double x : v)
        j.push_back(number(x));
    return j;
}

const char *statusName(int code)
{
    switch (code) {
    case kExitOk: return "ok";
    case kExitEmpty: return "empty";
    case kExitBudget: return "budget";
    default: return "error";
    }
}

// Mirrors the root step of branchAndBound, but keeps the solver so callers
// can import bounds before tightening and read the final store afterwards.
BranchResult solveSingle(PreimageSolver &solver,
                         const Network &net,
                         const OutputSet &outSet,
                         const InputBox &box,
                         const std::vector<Vector> &directions,
                         int finalIters)
{
    BranchNode node;
    node.box = box;
    node.tightened = box;
    if (intervalInfeasible(net, outSet, box)) {
        node.status = NodeStatus::PrunedInfeasible;
        node.converged = true;
    } else {
        solver.track(directions);
        node.converged = solver.tightenAll();
        node.sweeps = solver.sweeps();
        node.history = solver.history();
        if (solver.infeasible()) {
            node.status = NodeStatus::PrunedInfeasible;
        } else {
            node.halfspaces = solver.boundHalfspaces(finalIters);
            node.status = NodeStatus::Done;
            node.tightened = solver.store().inputBox();
        }
    }
    BranchResult r;
    r.allPruned = node.status != NodeStatus::Done;
    r.budgetExhausted = !node.converged;
    if (node.status == NodeStatus::Done)
        r.set.leaves.push_back({node.tightened, node.halfspaces});
    r.leaves.push_back(std::move(node));
    return r;
}

int exitCodeOf(const BranchResult &r)
{
    if (r.allPruned)
        return kExitEmpty;
    if (r.budgetExhausted)
        return kExitBudget;
    return kExitOk;
}

void finishRun(PreimageRun &run,
               const OptimizerConfig &cfg,
               const RunOptions &opts,
               double tightenSeconds,
               const char *kind)
{
    const auto t0 = Clock::now();
    run.ratio = approxRatio(run.result.set, run.net, run.outSet, run.box, opts.samples, opts.seed, cfg.threads);
    const double ratioSeconds = secondsSince(t0);
    run.exitCode = exitCodeOf(run.result);

    nlohmann::json leaves = nlohmann::json::array();
    for (const auto &leaf : run.result.leaves)
        leaves.push_back(toJson(leaf));

    nlohmann::json rep;
    rep["kind"] = kind;
    rep["status"] = statusName(run.exitCode);
    rep["network"] = toJson(run.net);
    rep["out_set"] = toJson(run.outSet);
    rep["box"] = toJson(run.box);
    rep["config"] = toJson(cfg);
    rep["seed"] = opts.seed;
    rep["branches"] = opts.branches;
    rep["final_iters"] = opts.finalIters < 0 ? cfg.iters : opts.finalIters;
    rep["bounds_reused"] = run.reused;
    rep["leaves"] = std::move(leaves);
    rep["ratio"] = toJson(run.ratio);
    if (opts.timings)
        rep["timings"] = {{"tighten_s", tightenSeconds}, {"ratio_s", ratioSeconds}};
    run.report = std::move(rep);
}

void checkOptions(const RunOptions &opts)
{
    if (opts.branches < 1)
        throw Error(ErrorKind::Precondition, "--branches must be at least 1");
    if (opts.samples < 1)
        throw Error(ErrorKind::Precondition, "--samples must be at least 1");
}

} // namespace

std::vector<Vector> defaultDirections(Index dim, int planes)
{
    if (planes < 0)
        throw Error(ErrorKind::Precondition, "--planes must be non-negative");
    if (dim == 2)
        return genDirections2d(planes == 0 ? 40 : planes);
    if (planes != 0 && planes != 2 * dim)
        throw Error(ErrorKind::Precondition,
                    fmt::format("in {} dimensions only the {} box planes are supported", dim, 2 * dim));
    return genDirectionsBox(dim);
}

nlohmann::json toJson(const RatioEstimate &r)
{
    return {{"samples", r.samples},
            {"seed", r.seed},
            {"in_set", r.inSet},
            {"feasible", r.feasible},
            {"feasible_outside", r.feasibleOutside},
            {"empirically_empty", r.empiricallyEmpty},
            {"ratio", r.empiricallyEmpty ? nlohmann::json(nullptr) : number(r.ratio)},
            {"sigma", r.empiricallyEmpty ? nlohmann::json(nullptr) : number(r.sigma)}};
}

nlohmann::json toJson(const SweepRecord &r)
{
    return {{"sweep", r.sweep},
            {"width_sums", numbers(r.widthSums)},
            {"halfspace_lbs", numbers(r.halfspaceLbs)},
            {"improvement", number(r.improvement)}};
}

nlohmann::json toJson(const BranchNode &n)
{
    auto hs = nlohmann::json::array();
    for (const auto &h : n.halfspaces)
        hs.push_back(toJson(h));
    auto hist = nlohmann::json::array();
    for (const auto &r : n.history)
        hist.push_back(toJson(r));
    return {{"box", toJson(n.box)},
            {"tightened", toJson(n.tightened)},
            {"status", to_string(n.status)},
            {"depth", n.depth},
            {"sweeps", n.sweeps},
            {"converged", n.converged},
            {"halfspaces", hs},
            {"history", hist}};
}

std::string dumpReport(const nlohmann::json &report)
{
    // nlohmann objects are std::map backed, so keys come out sorted.
    return report.dump(1) + "\n";
}

PreimageRun runPreimage(const Network &net,
                        const OutputSet &outSet,
                        const InputBox &box,
                        const OptimizerConfig &cfg,
                        const RunOptions &opts)
{
    checkOptions(opts);
    cfg.validate();
    if (box.dim() != net.inputDim())
        throw Error(ErrorKind::Dimension, "box dimension does not match the network input");
    if (outSet.outputDim() != net.outputDim())
        throw Error(ErrorKind::Dimension, "output set does not match the network output");
    const auto dirs = defaultDirections(net.inputDim(), opts.planes);

    PreimageRun run{net, outSet, box, {}, {}, std::nullopt, false, {}, kExitOk};
    const auto t0 = Clock::now();
    if (opts.branches == 1) {
        PreimageSolver solver(net, outSet, box, cfg);
        run.result = solveSingle(solver, net, outSet, box, dirs, opts.finalIters);
        run.store = solver.store();
    } else {
        run.result = branchAndBound(net, outSet, box, dirs, cfg, opts.branches, opts.finalIters);
    }
    finishRun(run, cfg, opts, secondsSince(t0), "preimage");
    return run;
}

Network maxGapNetwork(const Network &net, const InputBox &box, const std::array<Index, 3> &idx)
{
    return encodeMaxGap(net, idx[0], idx[1], idx[2], outputLowerBounds(net, box));
}

ReachRun runReach(const Dynamics &dyn,
                  const Network &policy,
                  const OutputSet &obstacle,
                  const InputBox &box,
                  int steps,
                  const OptimizerConfig &cfg,
                  const RunOptions &opts)
{
    if (steps < 1)
        throw Error(ErrorKind::Precondition, "--steps must be at least 1");
    checkOptions(opts);
    cfg.validate();
    if (box.dim() != dyn.A.rows())
        throw Error(ErrorKind::Dimension, "box dimension does not match the state dimension");
    if (obstacle.outputDim() != dyn.A.rows())
        throw Error(ErrorKind::Dimension, "obstacle does not match the state dimension");

    // One shift for every horizon so step t is literally a prefix-extension
    // of step t - 1 and layer bounds line up.
    const Vector shift = closedLoopShift(dyn.A, dyn.B, policy, box, steps);
    const Network stepNet = encodeClosedLoop(dyn.A, dyn.B, policy, shift);
    const int perStep = stepNet.numLayers() - 1;
    const auto dirs = defaultDirections(box.dim(), opts.planes);

    ReachRun reach;
    auto stepReports = nlohmann::json::array();
    bool anyBudget = false;
    bool allEmpty = true;
    for (int t = 1; t <= steps; ++t) {
        const Network net = stack(stepNet, t);
        PreimageRun run{net, obstacle, box, {}, {}, std::nullopt, false, {}, kExitOk};
        const auto t0 = Clock::now();
        if (opts.branches == 1) {
            PreimageSolver solver(net, obstacle, box, cfg);
            const PreimageRun *prev = reach.steps.empty() ? nullptr : &reach.steps.back();
            if (prev && prev->store && perStep >= 1 && !solver.infeasible()) {
                // State after the first step, from this network's own bounds.
                const BoundStore &s = solver.store();
                const Vector lo = s.lo(perStep).cwiseMax(0.0);
                const Vector hi = s.hi(perStep).cwiseMax(0.0);
                const AffineLayer &out = stepNet.layers().back();
                const Matrix Wp = out.weights.cwiseMax(0.0);
                const Matrix Wn = out.weights.cwiseMin(0.0);
                const Vector x1lo = Wp * lo + Wn * hi + out.bias;
                const Vector x1hi = Wp * hi + Wn * lo + out.bias;
                const bool inside = (x1lo.array() >= box.lo.array()).all() && (x1hi.array() <= box.hi.array()).all();
                if (inside) {
                    const BoundStore &p = *prev->store;
                    for (int i = perStep + 1; i <= solver.folded().numLayers(); ++i)
                        solver.importLayer(i, p.lo(i - perStep), p.hi(i - perStep));
                    run.reused = true;
                }
            }
            run.result = solveSingle(solver, net, obstacle, box, dirs, opts.finalIters);
            run.store = solver.store();
        } else {
            run.result = branchAndBound(net, obstacle, box, dirs, cfg, opts.branches, opts.finalIters);
        }
        finishRun(run, cfg, opts, secondsSince(t0), "preimage");
        run.report["step"] = t;
        stepReports.push_back(run.report);
        anyBudget = anyBudget || run.exitCode == kExitBudget;
        allEmpty = allEmpty && run.exitCode == kExitEmpty;
        reach.steps.push_back(std::move(run));
    }
    reach.exitCode = allEmpty ? kExitEmpty : (anyBudget ? kExitBudget : kExitOk);
    reach.report = {{"kind", "reach"},
                    {"status", statusName(reach.exitCode)},
                    {"dynamics", {{"A", toJson(dyn.A)}, {"B", toJson(dyn.B)}}},
                    {"policy", toJson(policy)},
                    {"obstacle", toJson(obstacle)},
                    {"box", toJson(box)},
                    {"shift", toJson(shift)},
                    {"seed", opts.seed},
                    {"steps", stepReports}};
    return reach;
}

const char *to_string(Verdict v) noexcept
{
    switch (v) {
    case Verdict::Verified: return "verified";
    case Verdict::Falsified: return "falsified";
    case Verdict::Unknown: return "unknown";
    }
    return "unknown";
}

namespace {

bool provenEmpty(PreimageSolver &solver, const Network &net, const OutputSet &outSet, const InputBox &box)
{
    if (intervalInfeasible(net, outSet, box))
        return true;
    solver.tightenAll();
    if (solver.infeasible())
        return true;
    // Without the output constraint nothing is flagged; a positive lower
    // bound on a folded row is the same certificate.
    const BoundStore &s = solver.store();
    const int L = solver.folded().numLayers();
    return (s.lo(L).array() > kInfeasibleTol).any();
}

} // namespace

RobustRun runRobust(const Network &net,
                    const InputBox &box,
                    Index label,
                    const OptimizerConfig &cfg,
                    const RunOptions &opts)
{
    checkOptions(opts);
    cfg.validate();
    if (box.dim() != net.inputDim())
        throw Error(ErrorKind::Dimension, "box dimension does not match the network input");
    const Index m = net.outputDim();
    if (label < 0 || label >= m)
        throw Error(ErrorKind::Dimension, fmt::format("label {} out of range for {} outputs", label, m));

    // Violation sets, one per competing class.
    std::vector<std::pair<Index, OutputSet>> sets;
    if (m == 1) {
        sets.emplace_back(0, OutputSet(Matrix::Ones(1, 1), Vector::Zero(1)));
    } else {
        for (Index j = 0; j < m; ++j) {
            if (j == label)
                continue;
            Matrix H = Matrix::Zero(1, m);
            H(0, label) = 1.0;
            H(0, j) = -1.0;
            sets.emplace_back(j, OutputSet(std::move(H), Vector::Zero(1)));
        }
    }

    RobustRun run;
    bool all = true;
    bool allBaseline = true;
    auto classes = nlohmann::json::array();
    for (const auto &[j, set] : sets) {
        ClassCheck cc;
        cc.other = j;
        OptimizerConfig base = cfg;
        base.use_output_constraint = false;
        PreimageSolver plain(net, set, box, base);
        cc.baselineVerified = provenEmpty(plain, net, set, box);
        PreimageSolver constrained(net, set, box, cfg);
        cc.verified = cc.baselineVerified || provenEmpty(constrained, net, set, box);
        all = all && cc.verified;
        allBaseline = allBaseline && cc.baselineVerified;
        classes.push_back({{"other", j}, {"verified", cc.verified}, {"baseline_verified", cc.baselineVerified}});
        run.classes.push_back(cc);
    }
    run.baselineVerified = allBaseline;

    if (all) {
        run.verdict = Verdict::Verified;
    } else {
        // First counterexample in shard order, so the witness is reproducible.
        std::vector<std::optional<Vector>> first(kSampleShards);
        forEachSample(box, opts.samples, opts.seed, cfg.threads, [&](int shard, const Vector &x) {
            if (first[static_cast<std::size_t>(shard)])
                return;
            const Vector y = net.forward(x);
            for (const auto &[j, set] : sets) {
                (void)j;
                if (set.satisfied(y, 0.0)) {
                    first[static_cast<std::size_t>(shard)] = x;
                    return;
                }
            }
        });
        for (auto &w : first)
            if (w) {
                run.witness = *w;
                break;
            }
        run.verdict = run.witness ? Verdict::Falsified : Verdict::Unknown;
    }

    run.report = {{"kind", "robust"},
                  {"verdict", to_string(run.verdict)},
                  {"baseline_verified", run.baselineVerified},
                  {"label", label},
                  {"network", toJson(net)},
                  {"box", toJson(box)},
                  {"config", toJson(cfg)},
                  {"seed", opts.seed},
                  {"samples", opts.samples},
                  {"classes", classes},
                  {"witness", run.witness ? toJson(*run.witness) : nlohmann::json(nullptr)}};
    return run;
}

namespace {

RecheckResult recheckOne(const nlohmann::json &rep, std::uint64_t samples, std::uint64_t seed, int threads)
{
    const Network net = networkFromJson(rep.at("network"));
    const OutputSet outSet = outputSetFromJson(rep.at("out_set"));
    const InputBox box = boxFromJson(rep.at("box"));
    PolytopeUnion set;
    for (const auto &leaf : rep.at("leaves")) {
        if (leaf.at("status").get<std::string>() != "done")
            continue;
        PolytopeLeaf pl{boxFromJson(leaf.at("tightened")), {}};
        for (const auto &h : leaf.at("halfspaces"))
            pl.halfspaces.push_back(halfSpaceFromJson(h));
        set.leaves.push_back(std::move(pl));
    }
    const RatioEstimate r = approxRatio(set, net, outSet, box, samples, seed, threads);
    RecheckResult out;
    out.samples = r.samples;
    out.feasible = r.feasible;
    out.outside = r.feasibleOutside;
    out.reports = 1;
    return out;
}

} // namespace

RecheckResult recheckReport(const nlohmann::json &report, std::uint64_t samples, std::uint64_t seed, int threads)
{
    try {
        const std::string kind = report.at("kind").get<std::string>();
        if (kind == "preimage")
            return recheckOne(report, samples, seed, threads);
        if (kind == "reach") {
            RecheckResult total;
            for (const auto &step : report.at("steps")) {
                const RecheckResult r = recheckOne(step, samples, seed, threads);
                total.samples += r.samples;
                total.feasible += r.feasible;
                total.outside += r.outside;
                total.reports += 1;
            }
            return total;
        }
        throw Error(ErrorKind::Parse, fmt::format("cannot recheck a report of kind \"{}\"", kind));
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::Parse, fmt::format("malformed report: {}", e.what()));
    }
}

OracleRun runOracle(const Network &net,
                    const OutputSet &outSet,
                    const InputBox &box,
                    const OptimizerConfig &cfg,
                    const RunOptions &opts)
{
    checkOptions(opts);
    constexpr double slack = 1e-6;
    const auto dirs = defaultDirections(net.inputDim(), opts.planes);
    PreimageSolver solver(net, outSet, box, cfg);
    solver.tightenAll();
    const auto feasible = sampleFeasible(net, box, outSet, opts.samples, opts.seed, cfg.threads);

    OracleRun run;
    auto rows = nlohmann::json::array();
    for (const Vector &c : dirs) {
        OracleRow row;
        row.c = c;
        const MilpResult milp = exactMinMilp(net, box, outSet, c);
        if (milp.empty) {
            run.empty = true;
            row.milp = std::numeric_limits<double>::infinity();
        } else {
            row.milp = milp.value;
        }
        row.relaxation = solver.infeasible() ? std::numeric_limits<double>::infinity()
                                             : exactLpRelaxation(net, solver.store(), outSet,
                                                                 LinearObjective::direction(c))
                                                   .value;
        row.ascended = solver.infeasible() ? std::numeric_limits<double>::infinity()
                                           : solver.lowerBound(LinearObjective::direction(c));
        row.sampled = std::numeric_limits<double>::infinity();
        for (const Vector &x : feasible)
            row.sampled = std::min(row.sampled, c.dot(x));
        // Infinite entries only appear on certified-empty instances.
        auto le = [&](double a, double b) { return !std::isfinite(b) || a <= b + slack; };
        row.ok = (solver.infeasible() || le(row.ascended, row.relaxation)) && le(row.relaxation, row.milp) &&
                 le(row.milp, row.sampled);
        if (solver.infeasible() && !feasible.empty())
            row.ok = false;
        run.ok = run.ok && row.ok;
        rows.push_back({{"c", toJson(c)},
                        {"ascended", number(row.ascended)},
                        {"relaxation", number(row.relaxation)},
                        {"milp", number(row.milp)},
                        {"sampled_min", number(row.sampled)},
                        {"ok", row.ok}});
        run.rows.push_back(std::move(row));
    }
    run.report = {{"kind", "oracle"},
                  {"ok", run.ok},
                  {"empty", run.empty},
                  {"feasible_samples", feasible.size()},
                  {"network", toJson(net)},
                  {"out_set", toJson(outSet)},
                  {"box", toJson(box)},
                  {"config", toJson(cfg)},
                  {"seed", opts.seed},
                  {"rows", rows}};
    return run;
}

} // namespace invprop
