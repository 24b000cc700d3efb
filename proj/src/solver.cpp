#include "invprop/solver.hpp"

#include "invprop/parallel.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <memory>

namespace invprop {

namespace {

constexpr double kRho = 0.99;
constexpr double kEps = 1e-12;

void rmsStep(Vector &x, Vector &sq, const Vector &g, double lr, double correction)
{
    sq = kRho * sq + (1.0 - kRho) * g.cwiseAbs2();
    for (Index k = 0; k < x.size(); ++k) {
        if (g[k] == 0.0)
            continue;
        x[k] += lr * g[k] / (std::sqrt(sq[k] / correction) + kEps);
    }
}

std::vector<std::unique_ptr<DualEvaluator>>
makeEvaluators(int workers, const Network &net, const BoundStore &store, const NeuronClass &cls)
{
    std::vector<std::unique_ptr<DualEvaluator>> evals;
    for (int k = 0; k < workers; ++k)
        evals.push_back(std::make_unique<DualEvaluator>(net, store, cls));
    return evals;
}

} // namespace

void OptimizerConfig::validate() const
{
    auto bad = [](const std::string &what) { throw Error(ErrorKind::Precondition, "config: " + what); };
    if (iters < 0)
        bad("iters must be >= 0");
    if (!(lr > 0.0) || !std::isfinite(lr))
        bad("lr must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0))
        bad("lr_decay must be in (0, 1]");
    if (!(tolerance >= 0.0))
        bad("tolerance must be >= 0");
    if (max_sweeps < 1)
        bad("max_sweeps must be >= 1");
    if (!(alpha_init >= 0.0 && alpha_init <= 1.0))
        bad("alpha_init must be in [0, 1]");
    if (!(gamma_init >= 0.0) || !std::isfinite(gamma_init))
        bad("gamma_init must be >= 0");
    if (check_every < 0)
        bad("check_every must be >= 0");
    if (threads < 0)
        bad("threads must be >= 0");
}

OptimizerConfig configFromJson(const nlohmann::json &j)
{
    if (!j.is_object())
        throw Error(ErrorKind::Parse, "config must be a JSON object");
    OptimizerConfig cfg;
    try {
        cfg.iters = j.value("iters", cfg.iters);
        cfg.lr = j.value("lr", cfg.lr);
        cfg.lr_decay = j.value("lr_decay", cfg.lr_decay);
        cfg.tolerance = j.value("tolerance", cfg.tolerance);
        cfg.max_sweeps = j.value("max_sweeps", cfg.max_sweeps);
        cfg.alpha_init = j.value("alpha_init", cfg.alpha_init);
        cfg.gamma_init = j.value("gamma_init", cfg.gamma_init);
        cfg.check_every = j.value("check_every", cfg.check_every);
        cfg.threads = j.value("threads", cfg.threads);
        cfg.use_output_constraint = j.value("use_output_constraint", cfg.use_output_constraint);
        cfg.optimize_stable = j.value("optimize_stable", cfg.optimize_stable);
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::Parse, fmt::format("config: {}", e.what()));
    }
    cfg.validate();
    return cfg;
}

nlohmann::json toJson(const OptimizerConfig &cfg)
{
    // threads is left out on purpose: results do not depend on it.
    return {{"iters", cfg.iters},
            {"lr", cfg.lr},
            {"lr_decay", cfg.lr_decay},
            {"tolerance", cfg.tolerance},
            {"max_sweeps", cfg.max_sweeps},
            {"alpha_init", cfg.alpha_init},
            {"gamma_init", cfg.gamma_init},
            {"check_every", cfg.check_every},
            {"use_output_constraint", cfg.use_output_constraint},
            {"optimize_stable", cfg.optimize_stable}};
}

double optimizeBound(DualEvaluator &ev,
                     const LinearObjective &obj,
                     const OptimizerConfig &cfg,
                     AscentState &state,
                     int iters)
{
    if (!state.initialized) {
        state.dual =
            DualState::initial(ev.network(), cfg.use_output_constraint, cfg.alpha_init, cfg.gamma_init);
        state.sqAlpha.clear();
        for (const auto &a : state.dual.alpha)
            state.sqAlpha.push_back(Vector::Zero(a.size()));
        state.sqGamma = Vector::Zero(state.dual.gamma.size());
        state.step = 0;
        state.initialized = true;
    }

    DualState &dual = state.dual;
    DualGradient grad;
    double best = -std::numeric_limits<double>::infinity();
    DualState bestDual = dual;
    for (int it = 0; it < iters; ++it) {
        const double g = ev.valueAndGradient(obj, dual, grad);
        if (g > best) {
            best = g;
            bestDual = dual;
        }
        const double lr = cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(state.step / 10));
        const double correction = 1.0 - std::pow(kRho, static_cast<double>(state.step + 1));
        for (std::size_t i = 0; i < dual.alpha.size(); ++i)
            rmsStep(dual.alpha[i], state.sqAlpha[i], grad.alpha[i], lr, correction);
        if (dual.hasGamma())
            rmsStep(dual.gamma, state.sqGamma, grad.gamma, lr, correction);
        dual.project();
        ++state.step;
    }
    const double last = ev.value(obj, dual);
    if (last > best) {
        best = last;
        bestDual = dual;
    }
    dual = std::move(bestDual);
    return best;
}

AscentState closedFormStart(const DualEvaluator &ev, const OptimizerConfig &cfg)
{
    AscentState state;
    state.dual = closedFormAlpha(ev.network(), ev.store(), cfg.use_output_constraint);
    for (const auto &a : state.dual.alpha)
        state.sqAlpha.push_back(Vector::Zero(a.size()));
    state.sqGamma = Vector::Zero(state.dual.gamma.size());
    state.initialized = true;
    return state;
}

double optimizeBestOfTwo(DualEvaluator &ev,
                         const LinearObjective &obj,
                         const OptimizerConfig &cfg,
                         AscentState &state,
                         int iters)
{
    const double first = optimizeBound(ev, obj, cfg, state, iters);
    AscentState second = closedFormStart(ev, cfg);
    const double other = optimizeBound(ev, obj, cfg, second, iters);
    if (other > first) {
        state = std::move(second);
        return other;
    }
    return first;
}

double optimizeBound(const Network &folded,
                     const BoundStore &store,
                     const LinearObjective &obj,
                     const OptimizerConfig &cfg,
                     DualState *dualOut)
{
    obj.validate(folded);
    const NeuronClass cls = classify(store);
    DualEvaluator ev(folded, store, cls);
    AscentState state;
    const double bound = optimizeBestOfTwo(ev, obj, cfg, state, cfg.iters);
    if (dualOut)
        *dualOut = state.dual;
    return bound;
}

PreimageSolver::PreimageSolver(const Network &net, const OutputSet &outSet, const InputBox &box, OptimizerConfig cfg)
    : _folded(foldOutputConstraints(net, outSet))
    , _cfg(cfg)
{
    _cfg.validate();
    _withGamma = _cfg.use_output_constraint && outSet.rows() > 0;
    _cfg.use_output_constraint = _withGamma;
    _store = intervalPropagate(_folded, box);
    initBounds();
}

PreimageSolver::PreimageSolver(const Network &net,
                               const OutputSet &outSet,
                               const InputBox &box,
                               const BoundStore &warm,
                               OptimizerConfig cfg)
    : _folded(foldOutputConstraints(net, outSet))
    , _cfg(cfg)
{
    _cfg.validate();
    _withGamma = _cfg.use_output_constraint && outSet.rows() > 0;
    _cfg.use_output_constraint = _withGamma;
    if (!warm.sameShape(_folded))
        throw Error(ErrorKind::Dimension, "warm-start bounds do not match the folded network");
    _store = intervalPropagate(_folded, box);
    _store.intersect(warm);
    initBounds();
}

void PreimageSolver::initBounds()
{
    const int L = _folded.numLayers();
    if (!_store.infeasible())
        _store = rsipInit(_folded, _store, _cfg.threads);
    if (_withGamma)
        for (Index k = 0; k < _folded.width(L); ++k)
            _store.tightenUpper(L, k, 0.0);
    _states.assign(static_cast<std::size_t>(L + 1), {});
    for (int i = 0; i <= L; ++i)
        _states[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(2 * _folded.width(i)));
    _frozen.assign(static_cast<std::size_t>(L + 1), false);
}

void PreimageSolver::freezeLayer(int i)
{
    if (i < 0 || i > _folded.numLayers())
        throw Error(ErrorKind::Dimension, fmt::format("cannot freeze layer {}", i));
    _frozen[static_cast<std::size_t>(i)] = true;
}

void PreimageSolver::importLayer(int i, const Vector &lo, const Vector &hi)
{
    if (i < 1 || i > _folded.numLayers())
        throw Error(ErrorKind::Dimension, fmt::format("cannot import bounds into layer {}", i));
    if (lo.size() != _folded.width(i) || hi.size() != _folded.width(i))
        throw Error(ErrorKind::Dimension, fmt::format("imported bounds for layer {} have the wrong width", i));
    _store.intersectLayer(i, lo, hi);
    freezeLayer(i);
}

void PreimageSolver::track(const std::vector<Vector> &directions, const std::vector<double> &floor)
{
    if (!floor.empty() && floor.size() != directions.size())
        throw Error(ErrorKind::Dimension, "one floor value per direction expected");
    _halfspaces.clear();
    _hsStates.assign(directions.size(), AscentState());
    for (std::size_t k = 0; k < directions.size(); ++k) {
        const Vector &c = directions[k];
        if (c.size() != _folded.inputDim())
            throw Error(ErrorKind::Dimension, "direction dimension does not match the network input");
        if (!c.allFinite() || c.isZero(0.0))
            throw Error(ErrorKind::Precondition, "directions must be finite and nonzero");
        const double lb = floor.empty() ? -std::numeric_limits<double>::infinity() : floor[k];
        _halfspaces.push_back({c, lb});
    }
    refineHalfspaces(0);
}

void PreimageSolver::refineHalfspaces(int iters, bool restart)
{
    if (_halfspaces.empty() || _store.infeasible())
        return;
    const NeuronClass cls = classify(_store);
    const int workers = workerCount(_halfspaces.size(), _cfg.threads);
    auto evals = makeEvaluators(workers, _folded, _store, cls);
    std::vector<double> found(_halfspaces.size());
    parallelFor(_halfspaces.size(), workers, [&](std::size_t k, int w) {
        const auto obj = LinearObjective::direction(_halfspaces[k].c);
        DualEvaluator &ev = *evals[static_cast<std::size_t>(w)];
        found[k] = restart ? optimizeBestOfTwo(ev, obj, _cfg, _hsStates[k], iters)
                           : optimizeBound(ev, obj, _cfg, _hsStates[k], iters);
    });
    for (std::size_t k = 0; k < _halfspaces.size(); ++k)
        _halfspaces[k].lb = std::max(_halfspaces[k].lb, found[k]);
}

void PreimageSolver::sweepLayer(int layer)
{
    if (_frozen[static_cast<std::size_t>(layer)])
        return;
    const int L = _folded.numLayers();
    const bool hidden = layer >= 1 && layer < L;
    const bool upperToo = !(layer == L && _withGamma);

    struct Job
    {
        Index j;
        int sense;
    };
    std::vector<Job> jobs;
    for (Index j = 0; j < _folded.width(layer); ++j) {
        if (hidden && !_cfg.optimize_stable &&
            classifyNeuron(_store.lo(layer)[j], _store.hi(layer)[j]) != Phase::Unstable)
            continue;
        jobs.push_back({j, 0});
        if (upperToo)
            jobs.push_back({j, 1});
    }
    if (jobs.empty())
        return;

    // Every objective of the layer sees the same snapshot.
    const BoundStore snapshot = _store;
    const NeuronClass cls = classify(snapshot);
    const int workers = workerCount(jobs.size(), _cfg.threads);
    auto evals = makeEvaluators(workers, _folded, snapshot, cls);
    auto &states = _states[static_cast<std::size_t>(layer)];
    std::vector<double> found(jobs.size());
    parallelFor(jobs.size(), workers, [&](std::size_t k, int w) {
        const Job &job = jobs[k];
        const double sign = job.sense == 0 ? 1.0 : -1.0;
        const auto obj = LinearObjective::neuron(_folded, layer, job.j, sign);
        auto &state = states[static_cast<std::size_t>(2 * job.j + job.sense)];
        found[k] = optimizeBound(*evals[static_cast<std::size_t>(w)], obj, _cfg, state, _cfg.iters);
    });
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        if (jobs[k].sense == 0)
            _store.tightenLower(layer, jobs[k].j, found[k]);
        else
            _store.tightenUpper(layer, jobs[k].j, -found[k]);
    }
}

SweepRecord PreimageSolver::record(double improvement) const
{
    SweepRecord rec;
    rec.sweep = _sweeps;
    for (int i = 0; i <= _folded.numLayers(); ++i)
        rec.widthSums.push_back(_store.widthSum(i));
    for (const auto &h : _halfspaces)
        rec.halfspaceLbs.push_back(h.lb);
    rec.improvement = improvement;
    return rec;
}

bool PreimageSolver::tightenAll()
{
    if (_store.infeasible()) {
        _converged = true;
        return true;
    }
    const int L = _folded.numLayers();
    auto totalWidth = [&] {
        double s = 0.0;
        for (int i = 0; i <= L; ++i)
            s += _store.widthSum(i);
        return s;
    };
    for (int sweep = 0; sweep < _cfg.max_sweeps; ++sweep) {
        std::vector<double> before;
        for (const auto &h : _halfspaces)
            before.push_back(h.lb);
        const double widthBefore = totalWidth();

        for (int i = L; i >= 0 && !_store.infeasible(); --i)
            sweepLayer(i);
        ++_sweeps;
        if (_store.infeasible()) {
            _history.push_back(record(0.0));
            _converged = true;
            return true;
        }
        refineHalfspaces(_cfg.check_every);

        double improvement = 0.0;
        double scale = 0.0;
        // Deep nets can need a few sweeps before the input planes move, so
        // the intermediate widths have to stall as well.
        const double widthAfter = totalWidth();
        const bool widthsStalled = widthBefore - widthAfter <= _cfg.tolerance * std::max(1.0, widthAfter);
        if (!_halfspaces.empty()) {
            for (std::size_t k = 0; k < _halfspaces.size(); ++k) {
                const double lb = _halfspaces[k].lb;
                if (std::isfinite(before[k]))
                    improvement += lb - before[k];
                else if (std::isfinite(lb))
                    improvement = std::numeric_limits<double>::infinity();
                if (std::isfinite(lb))
                    scale += std::abs(lb);
            }
        } else {
            improvement = widthBefore - widthAfter;
            scale = widthAfter;
        }
        _history.push_back(record(improvement));
        if (widthsStalled && improvement <= _cfg.tolerance * std::max(1.0, scale)) {
            _converged = true;
            return true;
        }
    }
    _converged = false;
    return false;
}

std::vector<HalfSpace> PreimageSolver::boundHalfspaces(int iters)
{
    refineHalfspaces(iters < 0 ? _cfg.iters : iters, true);
    return _halfspaces;
}

double PreimageSolver::lowerBound(const LinearObjective &obj)
{
    obj.validate(_folded);
    const NeuronClass cls = classify(_store);
    DualEvaluator ev(_folded, _store, cls);
    AscentState state;
    return optimizeBestOfTwo(ev, obj, _cfg, state, _cfg.iters);
}

TightenResult tightenAll(const Network &net, const OutputSet &outSet, const InputBox &box, const OptimizerConfig &cfg)
{
    PreimageSolver solver(net, outSet, box, cfg);
    TightenResult out;
    out.converged = solver.tightenAll();
    out.store = solver.store();
    out.history = solver.history();
    return out;
}

std::vector<HalfSpace> boundHalfspaces(const Network &net,
                                       const OutputSet &outSet,
                                       const InputBox &box,
                                       const std::vector<Vector> &directions,
                                       const OptimizerConfig &cfg)
{
    PreimageSolver solver(net, outSet, box, cfg);
    solver.track(directions);
    solver.tightenAll();
    return solver.boundHalfspaces();
}

} // namespace invprop
