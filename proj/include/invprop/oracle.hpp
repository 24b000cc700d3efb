#pragma once

#include "invprop/dual.hpp"
#include "invprop/lp.hpp"

#include <cstdint>
#include <vector>

namespace invprop {

inline constexpr int kMaxOracleUnstable = 14;

struct NeuronRef
{
    int layer = 0;
    Index index = 0;
};

/// Phase bit per unstable neuron (layer order); stable neurons are fixed by
/// the bounds and not part of the pattern.
struct ActivationPattern
{
    std::vector<bool> active;

    bool operator==(const ActivationPattern &o) const = default;
    bool operator<(const ActivationPattern &o) const
    {
        return active < o.active;
    }
};

/// Bounds, classification and unstable-neuron list used for enumeration.
struct OracleSetup
{
    Network net;
    InputBox box;
    BoundStore store;
    NeuronClass cls;
    std::vector<NeuronRef> unstable;
};

// Interval + backward bounds on the plain network; throws Budget when more
// than maxUnstable neurons remain unstable.
OracleSetup prepareOracle(const Network &net, const InputBox &box, int maxUnstable = kMaxOracleUnstable);

ActivationPattern patternOf(const OracleSetup &setup, const Vector &x);

/// min c^T x over inputs in the box whose unstable neurons follow `pattern`
/// and whose output satisfies the output set.
LpResult patternLp(const OracleSetup &setup, const OutputSet &outSet, const ActivationPattern &pattern, const Vector &c);

struct MilpResult
{
    bool empty = true;
    double value = 0.0;
    Vector argmin;
    // Patterns whose region meets the output set. Only filled when asked
    // (collection disables incumbent pruning).
    std::vector<ActivationPattern> feasiblePatterns;
    std::int64_t lpSolves = 0;
};

MilpResult exactMinMilp(const Network &net,
                        const InputBox &box,
                        const OutputSet &outSet,
                        const Vector &c,
                        bool collectPatterns = false,
                        int maxUnstable = kMaxOracleUnstable);

/// Optimum of the triangle relaxation of `net` with `outSet` folded in, using
/// the bounds of `store` (which must be bounds of that folded network). Stable neurons are
/// exact; unstable ones use x_hat >= 0, x_hat >= x, (u - l) x_hat <= u x - u l.
/// An infeasible relaxation gives status Infeasible and value +inf.
LpResult exactLpRelaxation(const Network &net,
                           const BoundStore &store,
                           const OutputSet &outSet,
                           const LinearObjective &obj,
                           bool useOutputConstraint = true);

/// Uniform box samples with H f(x) + d <= 1e-9, in deterministic order.
std::vector<Vector> sampleFeasible(const Network &net,
                                   const InputBox &box,
                                   const OutputSet &outSet,
                                   std::uint64_t n,
                                   std::uint64_t seed,
                                   int threads = 1);

} // namespace invprop
