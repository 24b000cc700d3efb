#pragma once

#include "invprop/network.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <vector>

namespace invprop {

/// Tolerance beyond which lo > hi is treated as a proof of emptiness.
inline constexpr double kInfeasibleTol = 1e-9;

/// Per-layer bounds l(i) <= x(i) <= u(i), layers 0 (input) to L (output).
///
/// Updates only ever tighten. A crossing lo > hi + kInfeasibleTol marks the
/// store infeasible instead of throwing, so callers (branch pruning, robust
/// verification) can consume it as a result.
class BoundStore
{
public:
    BoundStore() = default;

    // Input layer from the box, every other layer unbounded.
    BoundStore(const Network &net, const InputBox &box);

    int numLayers() const
    {
        return static_cast<int>(_lo.size()) - 1;
    }
    const Vector &lo(int i) const
    {
        return _lo[static_cast<std::size_t>(i)];
    }
    const Vector &hi(int i) const
    {
        return _hi[static_cast<std::size_t>(i)];
    }
    Index width(int i) const
    {
        return lo(i).size();
    }
    InputBox inputBox() const
    {
        return InputBox(_lo.front(), _hi.front());
    }

    // Each returns true when the stored value changed.
    bool tightenLower(int i, Index j, double value);
    bool tightenUpper(int i, Index j, double value);
    bool tighten(int i, Index j, double lower, double upper)
    {
        const bool a = tightenLower(i, j, lower);
        const bool b = tightenUpper(i, j, upper);
        return a || b;
    }
    void intersect(const BoundStore &other);
    // Intersect a single layer with externally known bounds.
    void intersectLayer(int i, const Vector &lower, const Vector &upper);

    bool infeasible() const
    {
        return _infeasible;
    }
    void markInfeasible()
    {
        _infeasible = true;
        ++_version;
    }

    // Bumped on every change; classifications are stamped with it.
    std::uint64_t version() const
    {
        return _version;
    }

    double widthSum(int i) const;
    bool allFiniteBounds() const;

    bool sameShape(const Network &net) const;

private:
    std::vector<Vector> _lo;
    std::vector<Vector> _hi;
    bool _infeasible = false;
    std::uint64_t _version = 0;
};

enum class Phase : std::uint8_t { Inactive, Active, Unstable };

/// Partition of hidden neurons into inactive (u <= 0), active (l >= 0) and
/// unstable (l < 0 < u). Valid only for the store version it was built from.
struct NeuronClass
{
    // phases[i] for hidden layers i in [1, L-1]; phases[0] is empty.
    std::vector<std::vector<Phase>> phases;
    std::uint64_t version = 0;

    Index unstableCount() const;
    Index unstableCount(int layer) const;
    Phase at(int layer, Index j) const
    {
        return phases[static_cast<std::size_t>(layer)][static_cast<std::size_t>(j)];
    }
};

Phase classifyNeuron(double lo, double hi);

NeuronClass classify(const BoundStore &store);

/// Interval arithmetic through every affine layer with ReLU clamping.
BoundStore intervalPropagate(const Network &net, const InputBox &box);

/// Backward (CROWN-style) pass per neuron with gamma = 0 and the closed-form
/// slope alpha = [u >= -l], layer by layer from the input, intersected with
/// the existing bounds. Output-layer bounds are filled as well.
BoundStore rsipInit(const Network &net, const BoundStore &store, int threads = 1);

nlohmann::json toJson(const BoundStore &store);
BoundStore boundStoreFromJson(const nlohmann::json &j);

} // namespace invprop
