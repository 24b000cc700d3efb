#include "invprop/oracle.hpp"

#include "invprop/geometry.hpp"

#include <fmt/format.h>

#include <limits>

namespace invprop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

DenseLP boxLp(const InputBox &box, const Vector &c)
{
    DenseLP lp(box.dim());
    lp.objective = c;
    lp.lower = box.lo;
    lp.upper = box.hi;
    return lp;
}

void popRows(DenseLP &lp, Index count)
{
    const Index m = lp.numRows() - count;
    lp.A.conservativeResize(m, Eigen::NoChange);
    lp.rhs.conservativeResize(m);
    lp.senses.resize(static_cast<std::size_t>(m));
}

// Sign constraint on the pre-activation row . v + offset for a fixed phase.
void addPhase(DenseLP &lp, const Vector &row, double offset, bool active)
{
    if (active)
        lp.addRow(row, RowSense::Ge, -offset);
    else
        lp.addRow(row, RowSense::Le, -offset);
}

Index addOutputRows(DenseLP &lp, const OutputSet &outSet, const Matrix &P, const Vector &p)
{
    const Matrix G = outSet.H * P;
    const Vector g = outSet.H * p + outSet.d;
    for (Index k = 0; k < G.rows(); ++k)
        lp.addRow(G.row(k).transpose(), RowSense::Le, -g[k]);
    return G.rows();
}

class Enumerator
{
public:
    Enumerator(const OracleSetup &setup, const OutputSet &outSet, const Vector &c, bool collect)
        : _s(setup)
        , _out(outSet)
        , _c(c)
        , _collect(collect)
        , _lp(boxLp(setup.box, c))
    {
    }

    MilpResult run()
    {
        const Network &net = _s.net;
        _pattern.active.clear();
        if (net.numLayers() == 1) {
            leaf(net.affine(1).weights, net.affine(1).bias);
        } else {
            Matrix post(net.width(1), net.inputDim());
            Vector postOff(net.width(1));
            descend(1, 0, net.affine(1).weights, net.affine(1).bias, post, postOff);
        }
        return std::move(_result);
    }

private:
    LpResult solve()
    {
        ++_result.lpSolves;
        LpResult r = lpSolve(_lp);
        if (r.status == LpStatus::IterationLimit || r.status == LpStatus::Unbounded)
            throw Error(ErrorKind::Numerical, fmt::format("pattern LP ended with status {}", to_string(r.status)));
        return r;
    }

    bool worthExploring()
    {
        const LpResult r = solve();
        if (r.status != LpStatus::Optimal)
            return false;
        return _collect || _result.empty || r.value < _result.value;
    }

    void leaf(const Matrix &P, const Vector &p)
    {
        const Index added = addOutputRows(_lp, _out, P, p);
        const LpResult r = solve();
        if (r.status == LpStatus::Optimal) {
            if (_collect)
                _result.feasiblePatterns.push_back(_pattern);
            if (_result.empty || r.value < _result.value) {
                _result.empty = false;
                _result.value = r.value;
                _result.argmin = r.x;
            }
        }
        popRows(_lp, added);
    }

    // Layer i pre-activation is P v + p; post rows [0, j) are filled.
    void descend(int i, Index j, const Matrix &P, const Vector &p, Matrix &post, Vector &postOff)
    {
        const Network &net = _s.net;
        if (j == net.width(i)) {
            const auto &next = net.affine(i + 1);
            const Matrix nP = next.weights * post;
            const Vector np = next.weights * postOff + next.bias;
            if (i + 1 == net.numLayers()) {
                leaf(nP, np);
                return;
            }
            Matrix nPost(net.width(i + 1), net.inputDim());
            Vector nPostOff(net.width(i + 1));
            descend(i + 1, 0, nP, np, nPost, nPostOff);
            return;
        }
        const Phase phase = _s.cls.at(i, j);
        if (phase != Phase::Unstable) {
            // Sign is implied by the bounds over the whole box.
            const bool active = phase == Phase::Active;
            post.row(j) = active ? Eigen::RowVectorXd(P.row(j)) : Eigen::RowVectorXd::Zero(P.cols());
            postOff[j] = active ? p[j] : 0.0;
            descend(i, j + 1, P, p, post, postOff);
            return;
        }
        for (bool active : {true, false}) {
            addPhase(_lp, P.row(j).transpose(), p[j], active);
            _pattern.active.push_back(active);
            if (worthExploring()) {
                post.row(j) = active ? Eigen::RowVectorXd(P.row(j)) : Eigen::RowVectorXd::Zero(P.cols());
                postOff[j] = active ? p[j] : 0.0;
                descend(i, j + 1, P, p, post, postOff);
            }
            _pattern.active.pop_back();
            popRows(_lp, 1);
        }
    }

    const OracleSetup &_s;
    const OutputSet &_out;
    Vector _c;
    bool _collect;
    DenseLP _lp;
    ActivationPattern _pattern;
    MilpResult _result;
};

} // namespace

OracleSetup prepareOracle(const Network &net, const InputBox &box, int maxUnstable)
{
    OracleSetup s{net, box, BoundStore(), NeuronClass(), {}};
    s.store = rsipInit(net, intervalPropagate(net, box));
    s.cls = classify(s.store);
    for (int i = 1; i < net.numLayers(); ++i)
        for (Index j = 0; j < net.width(i); ++j)
            if (s.cls.at(i, j) == Phase::Unstable)
                s.unstable.push_back({i, j});
    if (static_cast<int>(s.unstable.size()) > maxUnstable)
        throw Error(ErrorKind::Budget,
                    fmt::format("{} unstable neurons exceed the oracle budget of {}", s.unstable.size(), maxUnstable));
    return s;
}

ActivationPattern patternOf(const OracleSetup &setup, const Vector &x)
{
    std::vector<Vector> pre;
    setup.net.forward(x, pre);
    ActivationPattern pat;
    for (const auto &n : setup.unstable)
        pat.active.push_back(pre[static_cast<std::size_t>(n.layer)][n.index] >= 0.0);
    return pat;
}

LpResult patternLp(const OracleSetup &setup, const OutputSet &outSet, const ActivationPattern &pattern, const Vector &c)
{
    if (pattern.active.size() != setup.unstable.size())
        throw Error(ErrorKind::Dimension, "pattern length does not match the unstable-neuron count");
    const Network &net = setup.net;
    DenseLP lp = boxLp(setup.box, c);
    Matrix P = net.affine(1).weights;
    Vector p = net.affine(1).bias;
    std::size_t k = 0;
    for (int i = 1; i < net.numLayers(); ++i) {
        Matrix post(P.rows(), P.cols());
        Vector postOff(P.rows());
        for (Index j = 0; j < net.width(i); ++j) {
            const Phase phase = setup.cls.at(i, j);
            bool active = phase == Phase::Active;
            if (phase == Phase::Unstable) {
                active = pattern.active[k++];
                addPhase(lp, P.row(j).transpose(), p[j], active);
            }
            post.row(j) = active ? Eigen::RowVectorXd(P.row(j)) : Eigen::RowVectorXd::Zero(P.cols());
            postOff[j] = active ? p[j] : 0.0;
        }
        P = net.affine(i + 1).weights * post;
        p = net.affine(i + 1).weights * postOff + net.affine(i + 1).bias;
    }
    addOutputRows(lp, outSet, P, p);
    return lpSolve(lp);
}

MilpResult exactMinMilp(const Network &net,
                        const InputBox &box,
                        const OutputSet &outSet,
                        const Vector &c,
                        bool collectPatterns,
                        int maxUnstable)
{
    if (c.size() != net.inputDim())
        throw Error(ErrorKind::Dimension, "objective dimension does not match the network input");
    if (outSet.outputDim() != net.outputDim())
        throw Error(ErrorKind::Dimension, "output set does not match the network output");
    const OracleSetup setup = prepareOracle(net, box, maxUnstable);
    Enumerator e(setup, outSet, c, collectPatterns);
    return e.run();
}

LpResult exactLpRelaxation(const Network &net,
                           const BoundStore &store,
                           const OutputSet &outSet,
                           const LinearObjective &obj,
                           bool useOutputConstraint)
{
    const Network folded = foldOutputConstraints(net, outSet);
    if (!store.sameShape(folded))
        throw Error(ErrorKind::Dimension, "bounds do not match the folded network");
    obj.validate(folded);
    const NeuronClass cls = classify(store);
    const int L = folded.numLayers();
    const Index n0 = folded.inputDim();

    std::vector<NeuronRef> unstable;
    for (int i = 1; i < L; ++i)
        for (Index j = 0; j < folded.width(i); ++j)
            if (cls.at(i, j) == Phase::Unstable)
                unstable.push_back({i, j});
    const Index nv = n0 + static_cast<Index>(unstable.size());

    DenseLP lp(nv);
    lp.lower.head(n0) = store.lo(0);
    lp.upper.head(n0) = store.hi(0);
    for (Index k = n0; k < nv; ++k)
        lp.lower[k] = 0.0;

    // Pre-activations as E v + e per layer.
    std::vector<Matrix> E(static_cast<std::size_t>(L + 1));
    std::vector<Vector> e(static_cast<std::size_t>(L + 1));
    Matrix post = Matrix::Zero(n0, nv);
    post.leftCols(n0).setIdentity();
    Vector postOff = Vector::Zero(n0);
    Index next = n0;
    for (int i = 1; i <= L; ++i) {
        const auto si = static_cast<std::size_t>(i);
        E[si] = folded.affine(i).weights * post;
        e[si] = folded.affine(i).weights * postOff + folded.affine(i).bias;
        if (i == L)
            break;
        post = Matrix::Zero(folded.width(i), nv);
        postOff = Vector::Zero(folded.width(i));
        for (Index j = 0; j < folded.width(i); ++j) {
            switch (cls.at(i, j)) {
            case Phase::Active:
                post.row(j) = E[si].row(j);
                postOff[j] = e[si][j];
                break;
            case Phase::Inactive:
                break;
            case Phase::Unstable: {
                const Index v = next++;
                post(j, v) = 1.0;
                const double l = store.lo(i)[j];
                const double u = store.hi(i)[j];
                Vector row = -E[si].row(j).transpose();
                row[v] += 1.0;
                lp.addRow(row, RowSense::Ge, e[si][j]);
                Vector tri = -u * E[si].row(j).transpose();
                tri[v] += u - l;
                lp.addRow(tri, RowSense::Le, u * e[si][j] - u * l);
                break;
            }
            }
        }
    }

    double constant = 0.0;
    lp.objective.head(n0) = obj.input;
    for (const auto &t : obj.terms) {
        const auto si = static_cast<std::size_t>(t.layer);
        lp.objective += t.coeff * E[si].row(t.index).transpose();
        constant += t.coeff * e[si][t.index];
    }
    if (useOutputConstraint) {
        const auto sL = static_cast<std::size_t>(L);
        for (Index k = 0; k < folded.width(L); ++k)
            lp.addRow(E[sL].row(k).transpose(), RowSense::Le, -e[sL][k]);
    }

    LpResult r = lpSolve(lp);
    if (r.status == LpStatus::Optimal)
        r.value += constant;
    else if (r.status == LpStatus::Infeasible)
        r.value = kInf;
    return r;
}

std::vector<Vector> sampleFeasible(const Network &net,
                                   const InputBox &box,
                                   const OutputSet &outSet,
                                   std::uint64_t n,
                                   std::uint64_t seed,
                                   int threads)
{
    if (box.dim() != net.inputDim())
        throw Error(ErrorKind::Dimension, "box dimension does not match the network");
    std::vector<std::vector<Vector>> shards(kSampleShards);
    forEachSample(box, n, seed, threads, [&](int s, const Vector &x) {
        if (outSet.satisfied(net.forward(x), 1e-9))
            shards[static_cast<std::size_t>(s)].push_back(x);
    });
    std::vector<Vector> out;
    for (auto &s : shards)
        for (auto &x : s)
            out.push_back(std::move(x));
    return out;
}

} // namespace invprop
