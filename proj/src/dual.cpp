#include "invprop/dual.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace invprop {

LinearObjective LinearObjective::direction(const Vector &c)
{
    LinearObjective obj;
    obj.input = c;
    return obj;
}

LinearObjective LinearObjective::neuron(const Network &net, int layer, Index j, double sign)
{
    if (layer < 0 || layer > net.numLayers())
        throw Error(ErrorKind::Dimension, fmt::format("layer {} out of range", layer));
    if (j < 0 || j >= net.width(layer))
        throw Error(ErrorKind::Dimension, fmt::format("neuron {} out of range for layer {}", j, layer));
    LinearObjective obj;
    obj.input = Vector::Zero(net.inputDim());
    if (layer == 0)
        obj.input[j] = sign;
    else
        obj.terms.push_back({layer, j, sign});
    return obj;
}

int LinearObjective::topLayer() const
{
    int top = 0;
    for (const auto &t : terms)
        top = std::max(top, t.layer);
    return top;
}

bool LinearObjective::isZero() const
{
    if (!input.isZero(0.0))
        return false;
    return std::all_of(terms.begin(), terms.end(), [](const SparseTerm &t) { return t.coeff == 0.0; });
}

void LinearObjective::validate(const Network &net) const
{
    if (input.size() != net.inputDim())
        throw Error(ErrorKind::Dimension,
                    fmt::format("objective has {} input coefficients, network has {} inputs", input.size(), net.inputDim()));
    for (const auto &t : terms) {
        if (t.layer < 1 || t.layer > net.numLayers())
            throw Error(ErrorKind::Dimension, fmt::format("objective term on invalid layer {}", t.layer));
        if (t.index < 0 || t.index >= net.width(t.layer))
            throw Error(ErrorKind::Dimension, fmt::format("objective term on invalid neuron {}", t.index));
    }
    if (!allFinite(input))
        throw Error(ErrorKind::NonFinite, "objective has non-finite coefficients");
}

LinearObjective LinearObjective::scaled(double s) const
{
    LinearObjective out = *this;
    out.input *= s;
    for (auto &t : out.terms)
        t.coeff *= s;
    return out;
}

DualState DualState::initial(const Network &folded, bool withGamma, double alphaInit, double gammaInit)
{
    DualState dual;
    dual.alpha.resize(static_cast<std::size_t>(folded.numLayers()));
    for (int i = 1; i < folded.numLayers(); ++i)
        dual.alpha[static_cast<std::size_t>(i)] = Vector::Constant(folded.width(i), alphaInit);
    if (withGamma)
        dual.gamma = Vector::Constant(folded.outputDim(), gammaInit);
    dual.project();
    return dual;
}

void DualState::project()
{
    for (auto &a : alpha)
        a = a.cwiseMax(0.0).cwiseMin(1.0);
    gamma = gamma.cwiseMax(0.0);
}

DualState closedFormAlpha(const Network &folded, const BoundStore &store, bool withGamma)
{
    DualState dual = DualState::initial(folded, withGamma, 0.0, 0.0);
    for (int i = 1; i < folded.numLayers(); ++i) {
        auto &a = dual.alpha[static_cast<std::size_t>(i)];
        for (Index j = 0; j < a.size(); ++j)
            a[j] = store.hi(i)[j] >= -store.lo(i)[j] ? 1.0 : 0.0;
    }
    return dual;
}

DualEvaluator::DualEvaluator(const Network &folded, const BoundStore &store, const NeuronClass &cls)
    : _net(folded)
    , _store(store)
    , _cls(cls)
{
    if (!store.sameShape(folded))
        throw Error(ErrorKind::Dimension, "bound store does not match the network");
    if (cls.version != store.version())
        throw Error(ErrorKind::StaleClassification, "neuron classification is older than the bound store");

    const int L = folded.numLayers();
    const auto n = static_cast<std::size_t>(L + 1);
    _slope.assign(n, Vector());
    _intercept.assign(n, Vector());
    _nu.assign(n, Vector());
    _nuHat.assign(n, Vector());
    _nuBar.assign(n, Vector());
    for (int i = 1; i <= L; ++i) {
        const auto w = folded.width(i);
        _nu[static_cast<std::size_t>(i)] = Vector::Zero(w);
        _nuHat[static_cast<std::size_t>(i)] = Vector::Zero(w);
        _nuBar[static_cast<std::size_t>(i)] = Vector::Zero(w);
        if (i == L)
            continue;
        Vector slope = Vector::Zero(w);
        Vector intercept = Vector::Zero(w);
        for (Index j = 0; j < w; ++j) {
            if (cls.at(i, j) != Phase::Unstable)
                continue;
            const double l = store.lo(i)[j];
            const double u = store.hi(i)[j];
            slope[j] = u / (u - l);
            intercept[j] = u * l / (u - l);
        }
        _slope[static_cast<std::size_t>(i)] = std::move(slope);
        _intercept[static_cast<std::size_t>(i)] = std::move(intercept);
    }
}

void DualEvaluator::addTerms(const LinearObjective &obj, int layer, Vector &nu) const
{
    for (const auto &t : obj.terms)
        if (t.layer == layer)
            nu[t.index] -= t.coeff;
}

double DualEvaluator::backward(const LinearObjective &obj, const DualState &dual)
{
    const int L = _net.numLayers();
    if (dual.hasGamma()) {
        if (dual.gamma.size() != _net.outputDim())
            throw Error(ErrorKind::Dimension, "gamma must have one entry per folded output constraint");
        _top = L;
    } else {
        _top = obj.topLayer();
    }

    if (_top >= 1) {
        auto &top = _nu[static_cast<std::size_t>(_top)];
        if (_top == L && dual.hasGamma())
            top = -dual.gamma;
        else
            top.setZero();
        addTerms(obj, _top, top);

        for (int i = _top - 1; i >= 1; --i) {
            const auto si = static_cast<std::size_t>(i);
            auto &nuHat = _nuHat[si];
            auto &nu = _nu[si];
            nuHat.noalias() = _net.affine(i + 1).weights.transpose() * _nu[si + 1];
            const auto &phases = _cls.phases[si];
            const auto &alpha = dual.alpha[si];
            const auto &slope = _slope[si];
            for (Index j = 0; j < nu.size(); ++j) {
                switch (phases[static_cast<std::size_t>(j)]) {
                case Phase::Active:
                    nu[j] = nuHat[j];
                    break;
                case Phase::Inactive:
                    nu[j] = 0.0;
                    break;
                case Phase::Unstable:
                    nu[j] = nuHat[j] >= 0.0 ? slope[j] * nuHat[j] : alpha[j] * nuHat[j];
                    break;
                }
            }
            addTerms(obj, i, nu);
        }
        _a.noalias() = obj.input - _net.affine(1).weights.transpose() * _nu[1];
    } else {
        _a = obj.input;
    }

    const Vector &l0 = _store.lo(0);
    const Vector &u0 = _store.hi(0);
    double g = 0.0;
    for (Index k = 0; k < _a.size(); ++k)
        g += _a[k] >= 0.0 ? _a[k] * l0[k] : _a[k] * u0[k];
    for (int i = 1; i <= _top; ++i)
        g -= _nu[static_cast<std::size_t>(i)].dot(_net.affine(i).bias);
    for (int i = 1; i < _top; ++i) {
        const auto si = static_cast<std::size_t>(i);
        const auto &phases = _cls.phases[si];
        const auto &nuHat = _nuHat[si];
        const auto &intercept = _intercept[si];
        for (Index j = 0; j < nuHat.size(); ++j)
            if (phases[static_cast<std::size_t>(j)] == Phase::Unstable && nuHat[j] >= 0.0)
                g += intercept[j] * nuHat[j];
    }
    if (!std::isfinite(g))
        throw Error(ErrorKind::Numerical, "dual bound evaluated to a non-finite value");
    return g;
}

double DualEvaluator::value(const LinearObjective &obj, const DualState &dual, DualTrace *trace)
{
    const double g = backward(obj, dual);
    if (trace) {
        const int L = _net.numLayers();
        trace->topLayer = _top;
        trace->bound = g;
        trace->inputCoeff = _a;
        trace->nu.assign(static_cast<std::size_t>(L + 1), Vector());
        trace->nuHat.assign(static_cast<std::size_t>(L), Vector());
        for (int i = 1; i <= L; ++i)
            trace->nu[static_cast<std::size_t>(i)] =
                i <= _top ? _nu[static_cast<std::size_t>(i)] : Vector(Vector::Zero(_net.width(i)));
        for (int i = 1; i < L; ++i)
            trace->nuHat[static_cast<std::size_t>(i)] =
                i < _top ? _nuHat[static_cast<std::size_t>(i)] : Vector(Vector::Zero(_net.width(i)));
    }
    return g;
}

double DualEvaluator::valueAndGradient(const LinearObjective &obj, const DualState &dual, DualGradient &grad)
{
    const double g = backward(obj, dual);
    const int L = _net.numLayers();

    grad.alpha.resize(dual.alpha.size());
    for (std::size_t i = 0; i < dual.alpha.size(); ++i)
        grad.alpha[i] = Vector::Zero(dual.alpha[i].size());
    grad.gamma = Vector::Zero(dual.gamma.size());
    if (_top == 0)
        return g;

    const Vector &l0 = _store.lo(0);
    const Vector &u0 = _store.hi(0);
    Vector aBar(_a.size());
    for (Index k = 0; k < _a.size(); ++k)
        aBar[k] = _a[k] >= 0.0 ? l0[k] : u0[k];

    _nuBar[1].noalias() = -_net.affine(1).weights * aBar;
    _nuBar[1] -= _net.affine(1).bias;
    for (int i = 1; i < _top; ++i) {
        const auto si = static_cast<std::size_t>(i);
        const auto &phases = _cls.phases[si];
        const auto &nuHat = _nuHat[si];
        const auto &nuBar = _nuBar[si];
        const auto &alpha = dual.alpha[si];
        auto &alphaBar = grad.alpha[si];
        _nuHatBar.resize(nuHat.size());
        for (Index j = 0; j < nuHat.size(); ++j) {
            switch (phases[static_cast<std::size_t>(j)]) {
            case Phase::Active:
                _nuHatBar[j] = nuBar[j];
                break;
            case Phase::Inactive:
                _nuHatBar[j] = 0.0;
                break;
            case Phase::Unstable:
                if (nuHat[j] >= 0.0) {
                    _nuHatBar[j] = _slope[si][j] * nuBar[j] + _intercept[si][j];
                } else {
                    _nuHatBar[j] = alpha[j] * nuBar[j];
                    alphaBar[j] = nuBar[j] * nuHat[j];
                }
                break;
            }
        }
        _nuBar[si + 1].noalias() = _net.affine(i + 1).weights * _nuHatBar;
        _nuBar[si + 1] -= _net.affine(i + 1).bias;
    }
    if (_top == L && dual.hasGamma())
        grad.gamma = -_nuBar[static_cast<std::size_t>(L)];
    return g;
}

DualTrace evalG(const Network &folded,
                const BoundStore &store,
                const NeuronClass &cls,
                const LinearObjective &obj,
                const DualState &dual)
{
    obj.validate(folded);
    DualEvaluator evaluator(folded, store, cls);
    DualTrace trace;
    evaluator.value(obj, dual, &trace);
    return trace;
}

DualGradient gradG(const Network &folded,
                   const BoundStore &store,
                   const NeuronClass &cls,
                   const LinearObjective &obj,
                   const DualState &dual)
{
    obj.validate(folded);
    DualEvaluator evaluator(folded, store, cls);
    DualGradient grad;
    evaluator.valueAndGradient(obj, dual, grad);
    return grad;
}

} // namespace invprop
