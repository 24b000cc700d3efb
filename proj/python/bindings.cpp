#include "invprop/apps.hpp"
#include "invprop/oracle.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace invprop;

namespace {

// Reports cross the boundary as JSON text; the Python side parses them.
std::string dumped(const nlohmann::json &j)
{
    return j.dump();
}

OptimizerConfig configFrom(const py::object &cfg)
{
    if (cfg.is_none())
        return {};
    if (py::isinstance<py::str>(cfg))
        return configFromJson(nlohmann::json::parse(cfg.cast<std::string>()));
    return cfg.cast<OptimizerConfig>();
}

RunOptions options(int planes, int branches, std::uint64_t samples, std::uint64_t seed, int finalIters)
{
    RunOptions o;
    o.planes = planes;
    o.branches = branches;
    o.samples = samples;
    o.seed = seed;
    o.finalIters = finalIters;
    return o;
}

} // namespace

PYBIND11_MODULE(_invprop, m)
{
    m.doc() = "Preimage over-approximation of ReLU networks (native core)";

    static py::exception<Error> exc(m, "InvpropError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p)
                std::rethrow_exception(p);
        } catch (const Error &e) {
            py::set_error(exc, e.what());
        }
    });

    py::class_<Network>(m, "Network")
        .def(py::init([](const std::vector<std::pair<Matrix, Vector>> &layers) {
                 std::vector<AffineLayer> ls;
                 for (const auto &[W, b] : layers)
                     ls.emplace_back(W, b);
                 return Network(std::move(ls));
             }),
             py::arg("layers"))
        .def_property_readonly("input_dim", &Network::inputDim)
        .def_property_readonly("output_dim", &Network::outputDim)
        .def_property_readonly("num_layers", &Network::numLayers)
        .def("forward", py::overload_cast<const Vector &>(&Network::forward, py::const_), py::arg("x"))
        .def("layers", [](const Network &n) {
            std::vector<std::pair<Matrix, Vector>> out;
            for (const auto &l : n.layers())
                out.emplace_back(l.weights, l.bias);
            return out;
        })
        .def("to_json", [](const Network &n) { return dumped(toJson(n)); });

    py::class_<OutputSet>(m, "OutputSet")
        .def(py::init<Matrix, Vector>(), py::arg("H"), py::arg("d"))
        .def_readonly("H", &OutputSet::H)
        .def_readonly("d", &OutputSet::d)
        .def("satisfied", &OutputSet::satisfied, py::arg("y"), py::arg("tol") = 0.0);

    py::class_<InputBox>(m, "InputBox")
        .def(py::init<Vector, Vector>(), py::arg("lo"), py::arg("hi"))
        .def_readonly("lo", &InputBox::lo)
        .def_readonly("hi", &InputBox::hi);

    py::class_<OptimizerConfig>(m, "OptimizerConfig")
        .def(py::init<>())
        .def_readwrite("iters", &OptimizerConfig::iters)
        .def_readwrite("lr", &OptimizerConfig::lr)
        .def_readwrite("lr_decay", &OptimizerConfig::lr_decay)
        .def_readwrite("tolerance", &OptimizerConfig::tolerance)
        .def_readwrite("max_sweeps", &OptimizerConfig::max_sweeps)
        .def_readwrite("alpha_init", &OptimizerConfig::alpha_init)
        .def_readwrite("gamma_init", &OptimizerConfig::gamma_init)
        .def_readwrite("check_every", &OptimizerConfig::check_every)
        .def_readwrite("threads", &OptimizerConfig::threads)
        .def_readwrite("use_output_constraint", &OptimizerConfig::use_output_constraint);

    m.def("load_network", &loadNetwork, py::arg("path"));
    m.def("load_output_set", &loadOutputSet, py::arg("path"));
    m.def("load_box", &loadBox, py::arg("path"));
    m.def("fold_output_constraints", &foldOutputConstraints, py::arg("net"), py::arg("out_set"));
    m.def("stack", &stack, py::arg("net"), py::arg("steps"));
    m.def("encode_closed_loop",
          py::overload_cast<const Matrix &, const Matrix &, const Network &, const InputBox &>(&encodeClosedLoop),
          py::arg("A"), py::arg("B"), py::arg("policy"), py::arg("box"));
    m.def("max_gap_network", &maxGapNetwork, py::arg("net"), py::arg("box"), py::arg("indices"));

    m.def(
        "interval_bounds",
        [](const Network &net, const InputBox &box, bool rsip) {
            BoundStore s = intervalPropagate(net, box);
            if (rsip)
                s = rsipInit(net, s);
            std::vector<std::pair<Vector, Vector>> out;
            for (int i = 0; i <= net.numLayers(); ++i)
                out.emplace_back(s.lo(i), s.hi(i));
            return out;
        },
        py::arg("net"), py::arg("box"), py::arg("rsip") = true,
        "Per-layer (lo, hi) pre-activation bounds, layer 0 being the box.");

    m.def(
        "tighten",
        [](const Network &net, const OutputSet &outSet, const InputBox &box, const py::object &cfg) {
            const TightenResult r = tightenAll(net, outSet, box, configFrom(cfg));
            std::vector<std::pair<Vector, Vector>> out;
            for (int i = 0; i <= net.numLayers(); ++i)
                out.emplace_back(r.store.lo(i), r.store.hi(i));
            return py::make_tuple(out, r.store.infeasible(), r.converged);
        },
        py::arg("net"), py::arg("out_set"), py::arg("box"), py::arg("config") = py::none(),
        "Iteratively tightened bounds on the folded network: (layers, infeasible, converged).");

    m.def(
        "bound_halfspaces",
        [](const Network &net, const OutputSet &outSet, const InputBox &box, const std::vector<Vector> &dirs,
           const py::object &cfg) {
            std::vector<double> lbs;
            for (const auto &h : boundHalfspaces(net, outSet, box, dirs, configFrom(cfg)))
                lbs.push_back(h.lb);
            return lbs;
        },
        py::arg("net"), py::arg("out_set"), py::arg("box"), py::arg("directions"), py::arg("config") = py::none());

    m.def("gen_directions_2d", &genDirections2d, py::arg("k"));
    m.def("gen_directions_box", &genDirectionsBox, py::arg("d"));

    m.def(
        "exact_min",
        [](const Network &net, const InputBox &box, const OutputSet &outSet, const Vector &c) -> py::object {
            MilpResult r;
            {
                py::gil_scoped_release nogil;
                r = exactMinMilp(net, box, outSet, c);
            }
            if (r.empty)
                return py::none();
            return py::float_(r.value);
        },
        py::arg("net"), py::arg("box"), py::arg("out_set"), py::arg("c"),
        "min c.x over the exact preimage, or None when it is empty.");

    m.def(
        "preimage",
        [](const Network &net, const OutputSet &outSet, const InputBox &box, const py::object &cfg, int planes,
           int branches, std::uint64_t samples, std::uint64_t seed, int finalIters) {
            const OptimizerConfig c = configFrom(cfg);
            const RunOptions o = options(planes, branches, samples, seed, finalIters);
            std::string rep;
            {
                py::gil_scoped_release nogil;
                rep = dumped(runPreimage(net, outSet, box, c, o).report);
            }
            return rep;
        },
        py::arg("net"), py::arg("out_set"), py::arg("box"), py::arg("config") = py::none(), py::arg("planes") = 0,
        py::arg("branches") = 1, py::arg("samples") = 100000, py::arg("seed") = 0, py::arg("final_iters") = -1);

    m.def(
        "reach",
        [](const Matrix &A, const Matrix &B, const Network &policy, const OutputSet &obstacle, const InputBox &box,
           int steps, const py::object &cfg, int planes, std::uint64_t samples, std::uint64_t seed) {
            const OptimizerConfig c = configFrom(cfg);
            const RunOptions o = options(planes, 1, samples, seed, -1);
            std::string rep;
            {
                py::gil_scoped_release nogil;
                rep = dumped(runReach({A, B}, policy, obstacle, box, steps, c, o).report);
            }
            return rep;
        },
        py::arg("A"), py::arg("B"), py::arg("policy"), py::arg("obstacle"), py::arg("box"), py::arg("steps"),
        py::arg("config") = py::none(), py::arg("planes") = 0, py::arg("samples") = 100000, py::arg("seed") = 0);

    m.def(
        "robust",
        [](const Network &net, const InputBox &box, Index label, const py::object &cfg, std::uint64_t samples,
           std::uint64_t seed) {
            const OptimizerConfig c = configFrom(cfg);
            const RunOptions o = options(0, 1, samples, seed, -1);
            std::string rep;
            {
                py::gil_scoped_release nogil;
                rep = dumped(runRobust(net, box, label, c, o).report);
            }
            return rep;
        },
        py::arg("net"), py::arg("box"), py::arg("label") = 0, py::arg("config") = py::none(),
        py::arg("samples") = 100000, py::arg("seed") = 0);

    m.def(
        "recheck",
        [](const std::string &report, std::uint64_t samples, std::uint64_t seed) {
            const RecheckResult r = recheckReport(nlohmann::json::parse(report), samples, seed, 1);
            return py::dict(py::arg("samples") = r.samples, py::arg("feasible") = r.feasible,
                            py::arg("outside") = r.outside, py::arg("ok") = r.ok());
        },
        py::arg("report"), py::arg("samples") = 100000, py::arg("seed") = 1);
}
