#include "invprop/network.hpp"

#include "invprop/bounds.hpp"

#include <fmt/format.h>

namespace invprop {

const char *to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::Parse:
        return "parse error";
    case ErrorKind::Dimension:
        return "dimension mismatch";
    case ErrorKind::NonFinite:
        return "non-finite value";
    case ErrorKind::Precondition:
        return "precondition violated";
    case ErrorKind::StaleClassification:
        return "stale neuron classification";
    case ErrorKind::Numerical:
        return "numerical failure";
    case ErrorKind::Budget:
        return "budget exceeded";
    }
    return "unknown error";
}

AffineLayer::AffineLayer(Matrix w, Vector b)
    : weights(std::move(w))
    , bias(std::move(b))
{
    if (bias.size() != weights.rows())
        throw Error(ErrorKind::Dimension,
                    fmt::format("bias length {} does not match weight rows {}", bias.size(), weights.rows()));
    if (weights.rows() == 0 || weights.cols() == 0)
        throw Error(ErrorKind::Dimension, "affine layer has an empty weight matrix");
    if (!allFinite(weights) || !allFinite(bias))
        throw Error(ErrorKind::NonFinite, "affine layer has non-finite entries");
}

AffineLayer AffineLayer::identity(Index n)
{
    return AffineLayer(Matrix::Identity(n, n), Vector::Zero(n));
}

Network::Network(std::vector<AffineLayer> layers)
    : _layers(std::move(layers))
{
    if (_layers.empty())
        throw Error(ErrorKind::Dimension, "network needs at least one layer");
    for (std::size_t k = 1; k < _layers.size(); ++k) {
        if (_layers[k].inDim() != _layers[k - 1].outDim())
            throw Error(ErrorKind::Dimension,
                        fmt::format("layer {} expects {} inputs but layer {} produces {}",
                                    k,
                                    _layers[k].inDim(),
                                    k - 1,
                                    _layers[k - 1].outDim()));
    }
}

Index Network::hiddenNeuronCount() const
{
    Index n = 0;
    for (int i = 1; i < numLayers(); ++i)
        n += width(i);
    return n;
}

Vector Network::forward(const Vector &x) const
{
    if (x.size() != inputDim())
        throw Error(ErrorKind::Dimension, fmt::format("input has {} entries, network expects {}", x.size(), inputDim()));
    Vector h = x;
    for (std::size_t k = 0; k < _layers.size(); ++k) {
        h = _layers[k].apply(h);
        if (k + 1 < _layers.size())
            h = h.cwiseMax(0.0);
    }
    return h;
}

Vector Network::forward(const Vector &x, std::vector<Vector> &pre) const
{
    if (x.size() != inputDim())
        throw Error(ErrorKind::Dimension, fmt::format("input has {} entries, network expects {}", x.size(), inputDim()));
    pre.assign(_layers.size() + 1, Vector());
    pre[0] = x;
    Vector h = x;
    for (std::size_t k = 0; k < _layers.size(); ++k) {
        pre[k + 1] = _layers[k].apply(h);
        h = k + 1 < _layers.size() ? Vector(pre[k + 1].cwiseMax(0.0)) : pre[k + 1];
    }
    return h;
}

bool Network::operator==(const Network &other) const
{
    if (_layers.size() != other._layers.size())
        return false;
    for (std::size_t k = 0; k < _layers.size(); ++k) {
        const auto &a = _layers[k];
        const auto &b = other._layers[k];
        if (a.weights.rows() != b.weights.rows() || a.weights.cols() != b.weights.cols())
            return false;
        if (a.weights != b.weights || a.bias != b.bias)
            return false;
    }
    return true;
}

InputBox::InputBox(Vector l, Vector h)
    : lo(std::move(l))
    , hi(std::move(h))
{
    if (lo.size() != hi.size())
        throw Error(ErrorKind::Dimension, "box lo and hi differ in length");
    if (lo.size() == 0)
        throw Error(ErrorKind::Dimension, "box has zero dimensions");
    if (!allFinite(lo) || !allFinite(hi))
        throw Error(ErrorKind::NonFinite, "box has non-finite bounds");
    for (Index k = 0; k < lo.size(); ++k)
        if (lo[k] > hi[k])
            throw Error(ErrorKind::Precondition, fmt::format("box dimension {} has lo > hi", k));
}

bool InputBox::contains(const Vector &x, double tol) const
{
    if (x.size() != dim())
        return false;
    for (Index k = 0; k < dim(); ++k)
        if (x[k] < lo[k] - tol || x[k] > hi[k] + tol)
            return false;
    return true;
}

double InputBox::volume() const
{
    return (hi - lo).prod();
}

OutputSet::OutputSet(Matrix h, Vector dd)
    : H(std::move(h))
    , d(std::move(dd))
{
    if (H.rows() != d.size())
        throw Error(ErrorKind::Dimension, "output set H rows and d length differ");
    if (!allFinite(H) || !allFinite(d))
        throw Error(ErrorKind::NonFinite, "output set has non-finite entries");
}

bool OutputSet::satisfied(const Vector &y, double tol) const
{
    return ((H * y + d).array() <= tol).all();
}

OutputSet OutputSet::fromBox(const InputBox &box)
{
    const Index n = box.dim();
    Matrix H(2 * n, n);
    H.topRows(n) = Matrix::Identity(n, n);
    H.bottomRows(n) = -Matrix::Identity(n, n);
    Vector d(2 * n);
    d.head(n) = -box.hi;
    d.tail(n) = box.lo;
    return OutputSet(std::move(H), std::move(d));
}

AffineLayer fuseAffine(const AffineLayer &first, const AffineLayer &second)
{
    if (second.inDim() != first.outDim())
        throw Error(ErrorKind::Dimension,
                    fmt::format("cannot fuse: second layer expects {} inputs, first produces {}",
                                second.inDim(),
                                first.outDim()));
    return AffineLayer(second.weights * first.weights, second.weights * first.bias + second.bias);
}

Network compose(const Network &first, const Network &second)
{
    if (second.inputDim() != first.outputDim())
        throw Error(ErrorKind::Dimension,
                    fmt::format("cannot compose: second network expects {} inputs, first produces {}",
                                second.inputDim(),
                                first.outputDim()));
    std::vector<AffineLayer> layers(first.layers().begin(), first.layers().end() - 1);
    layers.push_back(fuseAffine(first.layers().back(), second.layers().front()));
    layers.insert(layers.end(), second.layers().begin() + 1, second.layers().end());
    return Network(std::move(layers));
}

Network stack(const Network &net, int steps)
{
    if (steps < 1)
        throw Error(ErrorKind::Precondition, "stack needs at least one step");
    if (net.inputDim() != net.outputDim())
        throw Error(ErrorKind::Dimension, "only networks with equal input and output dimension can be stacked");
    Network result = net;
    for (int t = 1; t < steps; ++t)
        result = compose(result, net);
    return result;
}

Network foldOutputConstraints(const Network &net, const OutputSet &outSet)
{
    if (outSet.outputDim() != net.outputDim())
        throw Error(ErrorKind::Dimension,
                    fmt::format("output set has {} columns, network has {} outputs", outSet.outputDim(), net.outputDim()));
    return appendAffine(net, AffineLayer(outSet.H, outSet.d));
}

Network appendAffine(const Network &net, const AffineLayer &layer)
{
    std::vector<AffineLayer> layers = net.layers();
    layers.back() = fuseAffine(layers.back(), layer);
    return Network(std::move(layers));
}

Network encodeClosedLoop(const Matrix &A, const Matrix &B, const Network &policy, const Vector &shift)
{
    const Index n = A.rows();
    if (A.cols() != n)
        throw Error(ErrorKind::Dimension, "dynamics matrix A must be square");
    if (B.rows() != n || B.cols() != policy.outputDim())
        throw Error(ErrorKind::Dimension,
                    fmt::format("B must be {}x{}, got {}x{}", n, policy.outputDim(), B.rows(), B.cols()));
    if (policy.inputDim() != n)
        throw Error(ErrorKind::Dimension, "policy input dimension must equal the state dimension");
    if (shift.size() != n)
        throw Error(ErrorKind::Dimension, "shift must have one entry per state");
    if (!allFinite(shift))
        throw Error(ErrorKind::NonFinite, "unbounded passthrough shift constant");

    const auto &pl = policy.layers();
    if (pl.size() == 1)
        return Network({AffineLayer(A + B * pl[0].weights, B * pl[0].bias)});

    std::vector<AffineLayer> layers;
    layers.reserve(pl.size());
    // First stage: policy layer plus shifted state channels relu(x - M).
    {
        const Index h = pl[0].outDim();
        Matrix W = Matrix::Zero(h + n, n);
        W.topRows(h) = pl[0].weights;
        W.bottomRows(n) = Matrix::Identity(n, n);
        Vector b(h + n);
        b.head(h) = pl[0].bias;
        b.tail(n) = -shift;
        layers.emplace_back(std::move(W), std::move(b));
    }
    // Middle stages carry the (non-negative) shifted state unchanged.
    for (std::size_t k = 1; k + 1 < pl.size(); ++k) {
        const Index hin = pl[k].inDim();
        const Index hout = pl[k].outDim();
        Matrix W = Matrix::Zero(hout + n, hin + n);
        W.topLeftCorner(hout, hin) = pl[k].weights;
        W.bottomRightCorner(n, n) = Matrix::Identity(n, n);
        Vector b = Vector::Zero(hout + n);
        b.head(hout) = pl[k].bias;
        layers.emplace_back(std::move(W), std::move(b));
    }
    // Final stage: A (s + M) + B (W h + b).
    {
        const auto &last = pl.back();
        const Index hin = last.inDim();
        Matrix W(n, hin + n);
        W.leftCols(hin) = B * last.weights;
        W.rightCols(n) = A;
        Vector b = A * shift + B * last.bias;
        layers.emplace_back(std::move(W), std::move(b));
    }
    return Network(std::move(layers));
}

Network encodeClosedLoop(const Matrix &A, const Matrix &B, const Network &policy, const InputBox &box)
{
    if (box.dim() != A.rows())
        throw Error(ErrorKind::Dimension, "box dimension must equal the state dimension");
    return encodeClosedLoop(A, B, policy, Vector(box.lo.array() - kShiftSlack));
}

Vector closedLoopShift(const Matrix &A, const Matrix &B, const Network &policy, const InputBox &box, int horizon)
{
    if (horizon < 1)
        throw Error(ErrorKind::Precondition, "horizon must be at least one step");
    // Per-step state bounds: each step is encoded with a shift valid for the
    // current state box, which keeps the passthrough exact under intervals.
    Vector shift = box.lo;
    InputBox state = box;
    for (int t = 1; t < horizon; ++t) {
        Network step = encodeClosedLoop(A, B, policy, state);
        BoundStore bounds = intervalPropagate(step, state);
        state = InputBox(bounds.lo(step.numLayers()), bounds.hi(step.numLayers()));
        shift = shift.cwiseMin(state.lo);
    }
    return (shift.array() - kShiftSlack).matrix();
}

Network unrollClosedLoop(const Matrix &A,
                         const Matrix &B,
                         const Network &policy,
                         const InputBox &box,
                         int steps,
                         int horizon)
{
    if (steps < 1)
        throw Error(ErrorKind::Precondition, "closed loop needs at least one step");
    if (horizon < steps)
        throw Error(ErrorKind::Precondition, "horizon must cover the requested steps");
    Network step = encodeClosedLoop(A, B, policy, closedLoopShift(A, B, policy, box, horizon));
    return stack(step, steps);
}

Network encodeMaxGap(const Network &net, Index a, Index b, Index ood, const Vector &lowerShift)
{
    const Index m = net.outputDim();
    if (a < 0 || b < 0 || ood < 0 || a >= m || b >= m || ood >= m)
        throw Error(ErrorKind::Dimension, "max-gap output index out of range");
    if (a == b || a == ood || b == ood)
        throw Error(ErrorKind::Precondition, "max-gap indices must be distinct");
    if (lowerShift.size() != m)
        throw Error(ErrorKind::Dimension, "lower shift must have one entry per network output");
    if (!std::isfinite(lowerShift[b]) || !std::isfinite(lowerShift[ood]))
        throw Error(ErrorKind::NonFinite, "non-finite max-gap shift");

    const double Mb = lowerShift[b] - kShiftSlack;
    const double Mood = lowerShift[ood] - kShiftSlack;

    // [y_a - y_b, y_b - Mb, y_ood - Mood] -> ReLU -> r0 + r1 + Mb - r2 - Mood
    Matrix G1 = Matrix::Zero(3, m);
    G1(0, a) = 1.0;
    G1(0, b) = -1.0;
    G1(1, b) = 1.0;
    G1(2, ood) = 1.0;
    Vector g1(3);
    g1 << 0.0, -Mb, -Mood;

    Matrix G2(1, 3);
    G2 << 1.0, 1.0, -1.0;
    Vector g2(1);
    g2 << Mb - Mood;

    std::vector<AffineLayer> layers = net.layers();
    layers.back() = fuseAffine(layers.back(), AffineLayer(std::move(G1), std::move(g1)));
    layers.emplace_back(std::move(G2), std::move(g2));
    return Network(std::move(layers));
}

Vector outputLowerBounds(const Network &net, const InputBox &box)
{
    return intervalPropagate(net, box).lo(net.numLayers());
}

} // namespace invprop
