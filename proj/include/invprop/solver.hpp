#pragma once

#include "invprop/dual.hpp"
#include "invprop/geometry.hpp"

#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace invprop {

struct OptimizerConfig
{
    int iters = 200;
    double lr = 0.1;
    double lr_decay = 0.98;
    double tolerance = 1e-4;
    int max_sweeps = 50;
    double alpha_init = 0.5;
    double gamma_init = 0.025;
    int check_every = 10;

    // Not part of the published defaults.
    int threads = 1;
    bool use_output_constraint = true;
    bool optimize_stable = false;

    void validate() const;
};

OptimizerConfig configFromJson(const nlohmann::json &j);
nlohmann::json toJson(const OptimizerConfig &cfg);

/// Warm-start state of one tracked objective: its dual variables plus the
/// running second-moment estimate of the adaptive step.
struct AscentState
{
    DualState dual;
    std::vector<Vector> sqAlpha;
    Vector sqGamma;
    long step = 0;
    bool initialized = false;

    void reset()
    {
        *this = AscentState();
    }
};

/// Projected gradient ascent on g for one objective. Steps are scaled per
/// parameter by a running RMS of the gradient (no momentum) and the base rate
/// decays by lr_decay every 10 steps. Returns the best bound seen; the state
/// is left at the best iterate.
double optimizeBound(DualEvaluator &ev,
                     const LinearObjective &obj,
                     const OptimizerConfig &cfg,
                     AscentState &state,
                     int iters);

// Fresh state from alpha = [u >= -l], gamma = 0: starts at the backward-pass
// bound, so the ascent never ends below it.
AscentState closedFormStart(const DualEvaluator &ev, const OptimizerConfig &cfg);

// Continues `state`, then runs a second ascent from closedFormStart and keeps
// whichever ends higher. The surface has ridges where the default start stalls.
double optimizeBestOfTwo(DualEvaluator &ev,
                         const LinearObjective &obj,
                         const OptimizerConfig &cfg,
                         AscentState &state,
                         int iters);

// Convenience one-shot form with a fresh state (best of two starts).
double optimizeBound(const Network &folded,
                     const BoundStore &store,
                     const LinearObjective &obj,
                     const OptimizerConfig &cfg,
                     DualState *dualOut = nullptr);

struct SweepRecord
{
    int sweep = 0;
    // Summed hi - lo per layer 0..L of the folded network.
    std::vector<double> widthSums;
    std::vector<double> halfspaceLbs;
    double improvement = 0.0;
};

/// Iterative tightening of all intermediate bounds against the output
/// constraint, plus certified half-space bounds on the input.
///
/// Bounds live on the folded network: its last layer is H f(x) + d, which is
/// <= 0 on the preimage, so those rows get lower bounds only and a lower bound
/// above zero proves the region empty.
class PreimageSolver
{
public:
    PreimageSolver(const Network &net, const OutputSet &outSet, const InputBox &box, OptimizerConfig cfg);

    // Warm start: `warm` must be bounds on the folded network valid for `box`.
    PreimageSolver(const Network &net,
                   const OutputSet &outSet,
                   const InputBox &box,
                   const BoundStore &warm,
                   OptimizerConfig cfg);

    const Network &folded() const
    {
        return _folded;
    }
    const BoundStore &store() const
    {
        return _store;
    }
    const OptimizerConfig &config() const
    {
        return _cfg;
    }
    bool infeasible() const
    {
        return _store.infeasible();
    }
    bool converged() const
    {
        return _converged;
    }
    int sweeps() const
    {
        return _sweeps;
    }
    const std::vector<SweepRecord> &history() const
    {
        return _history;
    }
    bool withGamma() const
    {
        return _withGamma;
    }

    // Tracked directions get refined after every sweep. `floor` gives
    // already-certified lower bounds (e.g. from a parent region).
    void track(const std::vector<Vector> &directions, const std::vector<double> &floor = {});
    const std::vector<HalfSpace> &tracked() const
    {
        return _halfspaces;
    }

    // Layers whose bounds are imported and kept as they are.
    void freezeLayer(int i);

    // Intersect layer i with bounds proven elsewhere for the same neurons
    // (under the same output constraint) and freeze it.
    void importLayer(int i, const Vector &lo, const Vector &hi);

    /// Sweeps until tracked half-space bounds stop improving (relative
    /// tolerance) or max_sweeps. Returns true on convergence or infeasibility.
    bool tightenAll();

    /// Full ascent on every tracked direction against the current bounds,
    /// warm plus a closed-form restart; iters < 0 means config().iters.
    std::vector<HalfSpace> boundHalfspaces(int iters = -1);

    // Best lower bound of obj against the current bounds (fresh duals).
    double lowerBound(const LinearObjective &obj);

private:
    void initBounds();
    void sweepLayer(int layer);
    void refineHalfspaces(int iters, bool restart = false);
    SweepRecord record(double improvement) const;

    Network _folded;
    OptimizerConfig _cfg;
    bool _withGamma = false;
    BoundStore _store;

    // _states[layer][2 * j + sense], sense 0 = lower, 1 = upper.
    std::vector<std::vector<AscentState>> _states;
    std::vector<bool> _frozen;

    std::vector<HalfSpace> _halfspaces;
    std::vector<AscentState> _hsStates;

    std::vector<SweepRecord> _history;
    int _sweeps = 0;
    bool _converged = false;
};

struct TightenResult
{
    BoundStore store;
    std::vector<SweepRecord> history;
    bool converged = false;
};

TightenResult tightenAll(const Network &net, const OutputSet &outSet, const InputBox &box, const OptimizerConfig &cfg);

std::vector<HalfSpace> boundHalfspaces(const Network &net,
                                       const OutputSet &outSet,
                                       const InputBox &box,
                                       const std::vector<Vector> &directions,
                                       const OptimizerConfig &cfg);

} // namespace invprop
