#pragma once

#include "invprop/branch.hpp"
#include "invprop/io.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace invprop {

enum ExitCode : int {
    kExitOk = 0,
    kExitParse = 2,
    kExitEmpty = 3,
    kExitBudget = 4,
};

struct RunOptions
{
    // 0 picks 40 planes in 2D and the +-e_i box directions otherwise.
    int planes = 0;
    int branches = 1;
    std::uint64_t samples = 100000;
    std::uint64_t seed = 0;
    // Ascent steps for the final half-space pass; < 0 means config iters.
    int finalIters = -1;
    // Wall-clock numbers make reports non-reproducible, so they are opt-in.
    bool timings = false;
};

std::vector<Vector> defaultDirections(Index dim, int planes);

struct PreimageRun
{
    Network net;
    OutputSet outSet;
    InputBox box;
    BranchResult result;
    RatioEstimate ratio;
    // Folded-network bounds of the root region (single-region runs only).
    std::optional<BoundStore> store;
    bool reused = false;
    nlohmann::json report;
    int exitCode = kExitOk;
};

/// Bounds, half-spaces, optional branching and the sampled ratio, packed into
/// a self-contained report.
PreimageRun runPreimage(const Network &net,
                        const OutputSet &outSet,
                        const InputBox &box,
                        const OptimizerConfig &cfg,
                        const RunOptions &opts);

// Max-gap scalar max(y_a, y_b) - y_ood, shifted with interval bounds over box.
Network maxGapNetwork(const Network &net, const InputBox &box, const std::array<Index, 3> &idx);

struct ReachRun
{
    std::vector<PreimageRun> steps;
    nlohmann::json report;
    int exitCode = kExitOk;
};

/// Backward reachable sets of the obstacle for t = 1..steps. With a single
/// region, bounds of step t-1 are imported into the last layers of step t
/// whenever the certified state after the first step stays inside the box
/// (otherwise those bounds would not apply).
ReachRun runReach(const Dynamics &dyn,
                  const Network &policy,
                  const OutputSet &obstacle,
                  const InputBox &box,
                  int steps,
                  const OptimizerConfig &cfg,
                  const RunOptions &opts);

enum class Verdict { Verified, Falsified, Unknown };

const char *to_string(Verdict v) noexcept;

struct ClassCheck
{
    Index other = 0;
    bool verified = false;
    // Same pipeline with the output constraint ignored.
    bool baselineVerified = false;
};

struct RobustRun
{
    Verdict verdict = Verdict::Unknown;
    bool baselineVerified = false;
    std::optional<Vector> witness;
    std::vector<ClassCheck> classes;
    nlohmann::json report;
};

/// A scalar-output net is read as a margin that must stay positive; with
/// several outputs, y_label must beat every other logit. Each violated-margin
/// set {y_label - y_j <= 0} gets its own preimage run.
RobustRun runRobust(const Network &net,
                    const InputBox &box,
                    Index label,
                    const OptimizerConfig &cfg,
                    const RunOptions &opts);

struct RecheckResult
{
    std::uint64_t samples = 0;
    std::uint64_t feasible = 0;
    std::uint64_t outside = 0;
    std::size_t reports = 0;
    bool ok() const
    {
        return outside == 0;
    }
};

/// Sampling-only re-verification of a preimage or reach report: every
/// feasible sample must lie in the reported union.
RecheckResult recheckReport(const nlohmann::json &report, std::uint64_t samples, std::uint64_t seed, int threads);

struct OracleRow
{
    Vector c;
    double ascended = 0.0;
    double relaxation = 0.0;
    double milp = 0.0;
    double sampled = 0.0;
    bool ok = false;
};

struct OracleRun
{
    bool empty = false;
    std::vector<OracleRow> rows;
    bool ok = true;
    nlohmann::json report;
};

/// Sandwich check per direction: ascended dual <= LP relaxation <= MILP <=
/// sampled minimum (slack 1e-6).
OracleRun runOracle(const Network &net,
                    const OutputSet &outSet,
                    const InputBox &box,
                    const OptimizerConfig &cfg,
                    const RunOptions &opts);

nlohmann::json toJson(const RatioEstimate &r);
nlohmann::json toJson(const SweepRecord &r);
nlohmann::json toJson(const BranchNode &n);

// Stable textual form: fixed indentation, keys sorted.
std::string dumpReport(const nlohmann::json &report);

} // namespace invprop
