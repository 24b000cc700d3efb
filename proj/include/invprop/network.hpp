#pragma once

#include "invprop/common.hpp"

#include <optional>
#include <vector>

namespace invprop {

/// One affine map x -> W x + b. Rows of W are output neurons.
struct AffineLayer
{
    Matrix weights;
    Vector bias;

    AffineLayer() = default;
    AffineLayer(Matrix w, Vector b);

    Index inDim() const
    {
        return weights.cols();
    }
    Index outDim() const
    {
        return weights.rows();
    }
    Vector apply(const Vector &x) const
    {
        return weights * x + bias;
    }

    static AffineLayer identity(Index n);
};

/// Feed-forward ReLU network: ReLU after every layer except the last.
///
/// Layer numbering follows the usual bound-propagation convention: layer 0 is
/// the input, layer i (1 <= i <= L) is the pre-activation produced by
/// layers()[i - 1]. Networks are immutable once built.
class Network
{
public:
    explicit Network(std::vector<AffineLayer> layers);

    int numLayers() const
    {
        return static_cast<int>(_layers.size());
    }
    const std::vector<AffineLayer> &layers() const
    {
        return _layers;
    }
    // 1-based, matches pre-activation layer numbering.
    const AffineLayer &affine(int i) const
    {
        return _layers[static_cast<std::size_t>(i - 1)];
    }

    Index inputDim() const
    {
        return _layers.front().inDim();
    }
    Index outputDim() const
    {
        return _layers.back().outDim();
    }
    // Width of layer i in [0, L].
    Index width(int i) const
    {
        return i == 0 ? inputDim() : affine(i).outDim();
    }
    Index hiddenNeuronCount() const;

    Vector forward(const Vector &x) const;

    // Records pre-activations: pre[0] = x, pre[i] for i in [1, L].
    Vector forward(const Vector &x, std::vector<Vector> &pre) const;

    bool operator==(const Network &other) const;

private:
    std::vector<AffineLayer> _layers;
};

/// Axis-aligned input region [lo, hi].
struct InputBox
{
    Vector lo;
    Vector hi;

    InputBox() = default;
    InputBox(Vector lo, Vector hi);

    Index dim() const
    {
        return lo.size();
    }
    bool contains(const Vector &x, double tol = 0.0) const;
    double volume() const;
    Vector center() const
    {
        return 0.5 * (lo + hi);
    }
};

/// Linear output constraint set {y : H y + d <= 0}.
struct OutputSet
{
    Matrix H;
    Vector d;

    OutputSet() = default;
    OutputSet(Matrix H, Vector d);

    Index rows() const
    {
        return H.rows();
    }
    Index outputDim() const
    {
        return H.cols();
    }
    bool satisfied(const Vector &y, double tol = 0.0) const;

    // Constraints lo <= y <= hi.
    static OutputSet fromBox(const InputBox &box);
};

// Structural transforms. Each returns a new network; inputs are not modified.

AffineLayer fuseAffine(const AffineLayer &first, const AffineLayer &second);

// second(first(x)) with the seam affine layers fused.
Network compose(const Network &first, const Network &second);

Network stack(const Network &net, int steps);

Network foldOutputConstraints(const Network &net, const OutputSet &outSet);

Network appendAffine(const Network &net, const AffineLayer &layer);

/// Slack subtracted from every passthrough shift constant so shifted channels
/// stay strictly positive.
inline constexpr double kShiftSlack = 1e-6;

/// Closed loop x -> A x + B policy(x) as a pure affine/ReLU network. The state
/// is carried through each ReLU stage as relu(x - M) + M with M = shift, which
/// must lower-bound every state the network will be evaluated on.
Network encodeClosedLoop(const Matrix &A, const Matrix &B, const Network &policy, const Vector &shift);

// Shift taken from the box: M = box.lo - kShiftSlack.
Network encodeClosedLoop(const Matrix &A, const Matrix &B, const Network &policy, const InputBox &box);

/// Common shift valid for every state reached within `horizon` steps from the
/// box, computed by interval propagation of the closed loop.
Vector closedLoopShift(const Matrix &A, const Matrix &B, const Network &policy, const InputBox &box, int horizon);

/// t-step closed loop; every step uses the same shift so the result equals
/// stack(step, t) exactly.
Network unrollClosedLoop(const Matrix &A,
                         const Matrix &B,
                         const Network &policy,
                         const InputBox &box,
                         int steps,
                         int horizon);

/// Appends max(y_a, y_b) - y_ood as a ReLU stage plus a final affine layer.
/// lowerShift holds lower bounds of all outputs over the analysed region;
/// entries b and ood are used for the passthrough channels.
Network encodeMaxGap(const Network &net, Index a, Index b, Index ood, const Vector &lowerShift);

// Interval lower bounds of the network outputs over the box.
Vector outputLowerBounds(const Network &net, const InputBox &box);

} // namespace invprop
