#pragma once

#include "invprop/bounds.hpp"

#include <vector>

namespace invprop {

/// Coefficient on the pre-activation x(layer)_index, layer in [1, L].
struct SparseTerm
{
    int layer = 0;
    Index index = 0;
    double coeff = 0.0;
};

/// Objective c(0)^T x(0) + sum_i c(i)^T x(i) to be lower-bounded.
struct LinearObjective
{
    Vector input;
    std::vector<SparseTerm> terms;

    static LinearObjective direction(const Vector &c);
    // sign = +1 lower-bounds the neuron, -1 lower-bounds its negation.
    static LinearObjective neuron(const Network &net, int layer, Index j, double sign);

    int topLayer() const;
    bool isZero() const;
    void validate(const Network &net) const;
    LinearObjective scaled(double s) const;
};

/// Optimisable dual variables. alpha[i] spans the full width of hidden layer i
/// but only entries of unstable neurons are live. An empty gamma means the
/// output constraint is not used (gamma fixed at zero).
struct DualState
{
    std::vector<Vector> alpha;
    Vector gamma;

    static DualState initial(const Network &folded, bool withGamma, double alphaInit, double gammaInit);
    void project();
    bool hasGamma() const
    {
        return gamma.size() > 0;
    }
};

/// nu(i) for i in [1, L], nu_hat(i) for i in [1, L-1], the input-layer
/// coefficient c(0) - W(1)^T nu(1), and the resulting bound g.
struct DualTrace
{
    std::vector<Vector> nu;
    std::vector<Vector> nuHat;
    Vector inputCoeff;
    double bound = 0.0;
    int topLayer = 0;
};

struct DualGradient
{
    std::vector<Vector> alpha;
    Vector gamma;
};

/// Evaluates the dual bound g(alpha, gamma) and its subgradient on a network
/// whose last layer already has the output constraint folded in (so the
/// constraint reads x(L) <= 0 and nu(L) = -gamma).
///
/// Slopes u/(u-l) and intercepts u*l/(u-l) are precomputed from the store,
/// so one evaluator serves every objective of a sweep.
class DualEvaluator
{
public:
    DualEvaluator(const Network &folded, const BoundStore &store, const NeuronClass &cls);

    double value(const LinearObjective &obj, const DualState &dual, DualTrace *trace = nullptr);
    double valueAndGradient(const LinearObjective &obj, const DualState &dual, DualGradient &grad);

    const Network &network() const
    {
        return _net;
    }
    const BoundStore &store() const
    {
        return _store;
    }
    const NeuronClass &classes() const
    {
        return _cls;
    }

private:
    double backward(const LinearObjective &obj, const DualState &dual);
    void addTerms(const LinearObjective &obj, int layer, Vector &nu) const;

    const Network &_net;
    const BoundStore &_store;
    const NeuronClass &_cls;
    std::vector<Vector> _slope;
    std::vector<Vector> _intercept;

    int _top = 0;
    std::vector<Vector> _nu;
    std::vector<Vector> _nuHat;
    Vector _a;
    std::vector<Vector> _nuBar;
    Vector _nuHatBar;
};

DualTrace evalG(const Network &folded,
                const BoundStore &store,
                const NeuronClass &cls,
                const LinearObjective &obj,
                const DualState &dual);

DualGradient gradG(const Network &folded,
                   const BoundStore &store,
                   const NeuronClass &cls,
                   const LinearObjective &obj,
                   const DualState &dual);

/// alpha = 1 where u >= -l, else 0: the closed-form slope used by the
/// backward-pass initialisation.
DualState closedFormAlpha(const Network &folded, const BoundStore &store, bool withGamma);

} // namespace invprop
