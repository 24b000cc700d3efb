#pragma once

// Shared fixtures and reference implementations for the C++ tests.

#include "invprop/apps.hpp"
#include "invprop/oracle.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace testing {

using namespace invprop;

#ifndef INVPROP_DATA_DIR
#define INVPROP_DATA_DIR "data"
#endif

inline std::string dataPath(const std::string &rel)
{
    return std::string(INVPROP_DATA_DIR) + "/" + rel;
}

inline Vector vec(std::initializer_list<double> v)
{
    Vector out(static_cast<Index>(v.size()));
    Index k = 0;
    for (double x : v)
        out[k++] = x;
    return out;
}

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows)
{
    const Index r = static_cast<Index>(rows.size());
    const Index c = static_cast<Index>(rows.begin()->size());
    Matrix m(r, c);
    Index i = 0;
    for (const auto &row : rows) {
        Index j = 0;
        for (double x : row)
            m(i, j++) = x;
        ++i;
    }
    return m;
}

// 1 -> 2 -> 1: y = relu(x) + relu(x + 1).
inline Network toyNet()
{
    return Network({AffineLayer(mat({{1.0}, {1.0}}), vec({0.0, 1.0})), AffineLayer(mat({{1.0, 1.0}}), vec({0.0}))});
}

inline InputBox toyBox()
{
    return InputBox(vec({-2.0}), vec({2.0}));
}

// 1 <= y <= 1.02
inline OutputSet toyOutSet()
{
    return OutputSet(mat({{-1.0}, {1.0}}), vec({1.0, -1.02}));
}

struct Rng
{
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed)
        : eng(seed)
    {
    }
    double normal()
    {
        return std::normal_distribution<double>(0.0, 1.0)(eng);
    }
    double uniform(double a = 0.0, double b = 1.0)
    {
        return std::uniform_real_distribution<double>(a, b)(eng);
    }
    int integer(int a, int b)
    {
        return std::uniform_int_distribution<int>(a, b)(eng);
    }
    Matrix gaussian(Index r, Index c, double scale)
    {
        Matrix m(r, c);
        for (Index i = 0; i < r; ++i)
            for (Index j = 0; j < c; ++j)
                m(i, j) = scale * normal();
        return m;
    }
    Vector gaussian(Index n, double scale)
    {
        Vector v(n);
        for (Index i = 0; i < n; ++i)
            v[i] = scale * normal();
        return v;
    }
    Vector inBox(const InputBox &box)
    {
        Vector x(box.dim());
        for (Index i = 0; i < box.dim(); ++i)
            x[i] = uniform(box.lo[i], box.hi[i]);
        return x;
    }
    Vector unit(Index n)
    {
        Vector v = gaussian(n, 1.0);
        return v / v.norm();
    }
};

inline Network randomNet(Rng &rng, const std::vector<Index> &widths, double biasScale = 0.3)
{
    std::vector<AffineLayer> layers;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k)
        layers.emplace_back(rng.gaussian(widths[k + 1], widths[k], 1.0 / std::sqrt(double(widths[k]))),
                            rng.gaussian(widths[k + 1], biasScale));
    return Network(std::move(layers));
}

inline InputBox unitBox(Index n)
{
    return InputBox(Vector::Constant(n, -1.0), Vector::Constant(n, 1.0));
}

// Rows through a random feasible point's output, loosened a little, so the
// preimage is non-empty but small.
inline OutputSet feasibleOutSet(Rng &rng, const Network &net, const InputBox &box, int rows)
{
    const Vector y = net.forward(rng.inBox(box));
    Matrix H = rng.gaussian(rows, net.outputDim(), 1.0);
    Vector d = -H * y;
    for (Index k = 0; k < rows; ++k)
        d[k] -= 0.05 * rng.uniform();
    return OutputSet(std::move(H), std::move(d));
}

struct Instance
{
    Network net;
    InputBox box;
    OutputSet outSet;
    std::size_t unstable = 0;
};

// Small 2-3 input instances the exact oracle can solve (<= 14 unstable).
inline std::vector<Instance> oracleInstances(std::uint64_t seed, int count, std::size_t minUnstable = 2)
{
    Rng rng(seed);
    std::vector<Instance> out;
    for (int k = 0; static_cast<int>(out.size()) < count; ++k) {
        const Index n0 = 2 + k % 2;
        const Index h1 = 4 + k % 3;
        const Index h2 = 4 + (k / 3) % 3;
        const Index no = 1 + k % 2;
        Network net = randomNet(rng, {n0, h1, h2, no});
        const InputBox box = unitBox(n0);
        OutputSet outSet = feasibleOutSet(rng, net, box, 1 + k % 3);
        std::size_t unstable = 0;
        try {
            unstable = prepareOracle(net, box).unstable.size();
        } catch (const Error &) {
            continue;
        }
        if (unstable < minUnstable)
            continue;
        out.push_back({std::move(net), box, std::move(outSet), unstable});
    }
    return out;
}

/// Textbook CROWN lower bound of sign * x(layer)_j using the given bounds for
/// every layer below, written independently of the dual engine. Lower ReLU
/// relaxation alpha = [u >= -l], upper relaxation the chord.
inline double crownLower(const Network &net, const BoundStore &store, int layer, Index j, double sign)
{
    Eigen::RowVectorXd lambda = Eigen::RowVectorXd::Zero(net.width(layer));
    lambda[j] = sign;
    double constant = 0.0;
    for (int i = layer; i >= 1; --i) {
        const AffineLayer &aff = net.affine(i);
        constant += lambda.dot(aff.bias);
        Eigen::RowVectorXd post = lambda * aff.weights;
        if (i == 1) {
            for (Index m = 0; m < post.size(); ++m)
                constant += post[m] >= 0 ? post[m] * store.lo(0)[m] : post[m] * store.hi(0)[m];
            return constant;
        }
        // Through relu of layer i-1.
        Eigen::RowVectorXd next(post.size());
        for (Index m = 0; m < post.size(); ++m) {
            const double l = store.lo(i - 1)[m];
            const double u = store.hi(i - 1)[m];
            if (l >= 0) {
                next[m] = post[m];
            } else if (u <= 0) {
                next[m] = 0.0;
            } else if (post[m] >= 0) {
                next[m] = u >= -l ? post[m] : 0.0;
            } else {
                const double s = u / (u - l);
                next[m] = post[m] * s;
                constant -= post[m] * s * l;
            }
        }
        lambda = next;
    }
    return constant;
}

// Reference RSIP: layer by layer, an interval step from the (already
// tightened) layer below, then CROWN.
inline BoundStore crownStore(const Network &net, const InputBox &box)
{
    BoundStore s = intervalPropagate(net, box);
    for (int i = 1; i <= net.numLayers(); ++i) {
        const AffineLayer &aff = net.affine(i);
        Vector lo = s.lo(i - 1), hi = s.hi(i - 1);
        if (i > 1) {
            lo = lo.cwiseMax(0.0);
            hi = hi.cwiseMax(0.0);
        }
        for (Index j = 0; j < net.width(i); ++j) {
            double a = aff.bias[j], b = aff.bias[j];
            for (Index m = 0; m < lo.size(); ++m) {
                const double w = aff.weights(j, m);
                a += w >= 0 ? w * lo[m] : w * hi[m];
                b += w >= 0 ? w * hi[m] : w * lo[m];
            }
            s.tighten(i, j, a, b);
        }
        if (i >= 2)
            for (Index j = 0; j < net.width(i); ++j)
                s.tighten(i, j, crownLower(net, s, i, j, 1.0), -crownLower(net, s, i, j, -1.0));
    }
    return s;
}

// Interval + backward bounds on the folded network (what the solver starts from).
inline BoundStore foldedStore(const Network &folded, const InputBox &box)
{
    return rsipInit(folded, intervalPropagate(folded, box));
}

// Random interior dual point: alpha in [lo, 1 - lo], gamma in [lo, gmax].
inline DualState randomDual(Rng &rng, const Network &folded, bool withGamma, double lo = 0.0, double gmax = 1.0)
{
    DualState d = DualState::initial(folded, withGamma, 0.5, 0.0);
    for (auto &a : d.alpha)
        for (Index j = 0; j < a.size(); ++j)
            a[j] = rng.uniform(lo, 1.0 - lo);
    for (Index k = 0; k < d.gamma.size(); ++k)
        d.gamma[k] = rng.uniform(lo, gmax);
    return d;
}

inline double minOverSamples(const std::vector<Vector> &xs, const Vector &c)
{
    double best = std::numeric_limits<double>::infinity();
    for (const auto &x : xs)
        best = std::min(best, c.dot(x));
    return best;
}

} // namespace testing
