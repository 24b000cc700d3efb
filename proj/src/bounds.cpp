#include "invprop/bounds.hpp"

#include "invprop/dual.hpp"
#include "invprop/parallel.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <memory>

namespace invprop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Post-activation range of layer i (identity on the input layer).
void activationRange(const BoundStore &store, int i, Vector &lo, Vector &hi)
{
    lo = store.lo(i);
    hi = store.hi(i);
    if (i > 0) {
        lo = lo.cwiseMax(0.0);
        hi = hi.cwiseMax(0.0);
    }
}

void intervalLayer(const AffineLayer &layer, const Vector &lo, const Vector &hi, Vector &outLo, Vector &outHi)
{
    const Vector mid = 0.5 * (lo + hi);
    const Vector rad = 0.5 * (hi - lo);
    const Vector c = layer.weights * mid + layer.bias;
    const Vector r = layer.weights.cwiseAbs() * rad;
    outLo = c - r;
    outHi = c + r;
}

nlohmann::json vecJson(const Vector &v)
{
    auto arr = nlohmann::json::array();
    for (Index k = 0; k < v.size(); ++k) {
        if (std::isfinite(v[k]))
            arr.push_back(v[k]);
        else
            arr.push_back(v[k] > 0 ? "inf" : "-inf");
    }
    return arr;
}

Vector vecFromJson(const nlohmann::json &arr)
{
    if (!arr.is_array())
        throw Error(ErrorKind::Parse, "bound layer must be an array");
    Vector v(static_cast<Index>(arr.size()));
    for (std::size_t k = 0; k < arr.size(); ++k) {
        const auto &e = arr[k];
        if (e.is_number())
            v[static_cast<Index>(k)] = e.get<double>();
        else if (e.is_string() && e.get<std::string>() == "inf")
            v[static_cast<Index>(k)] = kInf;
        else if (e.is_string() && e.get<std::string>() == "-inf")
            v[static_cast<Index>(k)] = -kInf;
        else
            throw Error(ErrorKind::Parse, "bound entries must be numbers or \"inf\"/\"-inf\"");
    }
    return v;
}

} // namespace

BoundStore::BoundStore(const Network &net, const InputBox &box)
{
    if (box.dim() != net.inputDim())
        throw Error(ErrorKind::Dimension,
                    fmt::format("box has dimension {}, network expects {}", box.dim(), net.inputDim()));
    if (!allFinite(box.lo) || !allFinite(box.hi))
        throw Error(ErrorKind::NonFinite, "input box must be finite");
    const auto n = static_cast<std::size_t>(net.numLayers() + 1);
    _lo.resize(n);
    _hi.resize(n);
    _lo[0] = box.lo;
    _hi[0] = box.hi;
    for (int i = 1; i <= net.numLayers(); ++i) {
        _lo[static_cast<std::size_t>(i)] = Vector::Constant(net.width(i), -kInf);
        _hi[static_cast<std::size_t>(i)] = Vector::Constant(net.width(i), kInf);
    }
}

bool BoundStore::tightenLower(int i, Index j, double value)
{
    auto &lo = _lo[static_cast<std::size_t>(i)];
    if (!(value > lo[j]))
        return false;
    lo[j] = value;
    ++_version;
    if (value > hi(i)[j] + kInfeasibleTol)
        _infeasible = true;
    return true;
}

bool BoundStore::tightenUpper(int i, Index j, double value)
{
    auto &hi = _hi[static_cast<std::size_t>(i)];
    if (!(value < hi[j]))
        return false;
    hi[j] = value;
    ++_version;
    if (lo(i)[j] > value + kInfeasibleTol)
        _infeasible = true;
    return true;
}

void BoundStore::intersect(const BoundStore &other)
{
    if (other.numLayers() != numLayers())
        throw Error(ErrorKind::Dimension, "cannot intersect bound stores of different depth");
    for (int i = 0; i <= numLayers(); ++i)
        intersectLayer(i, other.lo(i), other.hi(i));
    if (other.infeasible() && !_infeasible)
        markInfeasible();
}

void BoundStore::intersectLayer(int i, const Vector &lower, const Vector &upper)
{
    if (lower.size() != width(i) || upper.size() != width(i))
        throw Error(ErrorKind::Dimension, fmt::format("layer {} bounds have the wrong width", i));
    for (Index j = 0; j < width(i); ++j) {
        tightenLower(i, j, lower[j]);
        tightenUpper(i, j, upper[j]);
    }
}

double BoundStore::widthSum(int i) const
{
    return (hi(i) - lo(i)).sum();
}

bool BoundStore::allFiniteBounds() const
{
    for (std::size_t i = 0; i < _lo.size(); ++i)
        if (!_lo[i].allFinite() || !_hi[i].allFinite())
            return false;
    return true;
}

bool BoundStore::sameShape(const Network &net) const
{
    if (numLayers() != net.numLayers())
        return false;
    for (int i = 0; i <= net.numLayers(); ++i)
        if (width(i) != net.width(i) || hi(i).size() != net.width(i))
            return false;
    return true;
}

Index NeuronClass::unstableCount() const
{
    Index n = 0;
    for (std::size_t i = 1; i < phases.size(); ++i)
        n += unstableCount(static_cast<int>(i));
    return n;
}

Index NeuronClass::unstableCount(int layer) const
{
    Index n = 0;
    for (Phase p : phases[static_cast<std::size_t>(layer)])
        n += p == Phase::Unstable ? 1 : 0;
    return n;
}

Phase classifyNeuron(double lo, double hi)
{
    if (hi <= 0.0)
        return Phase::Inactive;
    if (lo >= 0.0)
        return Phase::Active;
    return Phase::Unstable;
}

NeuronClass classify(const BoundStore &store)
{
    NeuronClass cls;
    const int L = store.numLayers();
    cls.phases.resize(static_cast<std::size_t>(std::max(L, 1)));
    for (int i = 1; i < L; ++i) {
        auto &layer = cls.phases[static_cast<std::size_t>(i)];
        layer.resize(static_cast<std::size_t>(store.width(i)));
        for (Index j = 0; j < store.width(i); ++j)
            layer[static_cast<std::size_t>(j)] = classifyNeuron(store.lo(i)[j], store.hi(i)[j]);
    }
    cls.version = store.version();
    return cls;
}

BoundStore intervalPropagate(const Network &net, const InputBox &box)
{
    BoundStore store(net, box);
    Vector lo, hi, outLo, outHi;
    for (int i = 1; i <= net.numLayers(); ++i) {
        activationRange(store, i - 1, lo, hi);
        intervalLayer(net.affine(i), lo, hi, outLo, outHi);
        store.intersectLayer(i, outLo, outHi);
    }
    return store;
}

BoundStore rsipInit(const Network &net, const BoundStore &store, int threads)
{
    if (!store.sameShape(net))
        throw Error(ErrorKind::Dimension, "bound store does not match the network");
    BoundStore out = store;
    Vector lo, hi, outLo, outHi;
    for (int i = 1; i <= net.numLayers() && !out.infeasible(); ++i) {
        activationRange(out, i - 1, lo, hi);
        intervalLayer(net.affine(i), lo, hi, outLo, outHi);
        out.intersectLayer(i, outLo, outHi);
        if (i == 1 || out.infeasible())
            continue; // first layer is exact under interval arithmetic

        const NeuronClass cls = classify(out);
        const DualState dual = closedFormAlpha(net, out, false);
        const Index w = net.width(i);
        Vector newLo(w), newHi(w);
        const int workers = workerCount(static_cast<std::size_t>(w), threads);
        std::vector<std::unique_ptr<DualEvaluator>> evals;
        for (int k = 0; k < workers; ++k)
            evals.push_back(std::make_unique<DualEvaluator>(net, out, cls));
        parallelFor(static_cast<std::size_t>(w), workers, [&](std::size_t jj, int worker) {
            const auto j = static_cast<Index>(jj);
            auto &ev = *evals[static_cast<std::size_t>(worker)];
            newLo[j] = ev.value(LinearObjective::neuron(net, i, j, 1.0), dual);
            newHi[j] = -ev.value(LinearObjective::neuron(net, i, j, -1.0), dual);
        });
        out.intersectLayer(i, newLo, newHi);
    }
    return out;
}

nlohmann::json toJson(const BoundStore &store)
{
    nlohmann::json j;
    j["lo"] = nlohmann::json::array();
    j["hi"] = nlohmann::json::array();
    for (int i = 0; i <= store.numLayers(); ++i) {
        j["lo"].push_back(vecJson(store.lo(i)));
        j["hi"].push_back(vecJson(store.hi(i)));
    }
    j["infeasible"] = store.infeasible();
    return j;
}

BoundStore boundStoreFromJson(const nlohmann::json &j)
{
    if (!j.is_object() || !j.contains("lo") || !j.contains("hi"))
        throw Error(ErrorKind::Parse, "bound store needs \"lo\" and \"hi\"");
    const auto &lo = j.at("lo");
    const auto &hi = j.at("hi");
    if (!lo.is_array() || !hi.is_array() || lo.size() != hi.size() || lo.empty())
        throw Error(ErrorKind::Parse, "bound store \"lo\" and \"hi\" must be equal-length layer arrays");

    // Build through a trivial network of matching widths so the store is
    // allocated the normal way, then tighten to the stored values.
    std::vector<AffineLayer> layers;
    Vector prev = vecFromJson(lo[0]);
    Index prevWidth = prev.size();
    for (std::size_t i = 1; i < lo.size(); ++i) {
        const Index w = static_cast<Index>(lo[i].size());
        layers.emplace_back(Matrix::Zero(w, prevWidth), Vector::Zero(w));
        prevWidth = w;
    }
    if (layers.empty())
        throw Error(ErrorKind::Parse, "bound store needs at least one layer beyond the input");
    const Network shape(std::move(layers));
    BoundStore store(shape, InputBox(vecFromJson(lo[0]), vecFromJson(hi[0])));
    for (std::size_t i = 1; i < lo.size(); ++i)
        store.intersectLayer(static_cast<int>(i), vecFromJson(lo[i]), vecFromJson(hi[i]));
    if (j.value("infeasible", false) && !store.infeasible())
        store.markInfeasible();
    return store;
}

} // namespace invprop
