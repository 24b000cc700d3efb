#include "../support.hpp"

#include <doctest.h>

using namespace testing;

TEST_CASE("tighten_all: toy net recovers the [0, 0.01] layer-1 bound")
{
    PreimageSolver solver(toyNet(), toyOutSet(), toyBox(), OptimizerConfig{});
    solver.track(genDirectionsBox(1));
    CHECK(solver.tightenAll());
    const BoundStore &s = solver.store();
    CHECK(s.lo(1)[0] >= -1e-3);
    CHECK(s.hi(1)[0] <= 0.01 + 1e-3);
    CHECK(s.lo(1)[0] <= 0.0 + 1e-9);
    CHECK(s.hi(1)[0] >= 0.01 - 1e-9);

    const auto hs = solver.boundHalfspaces();
    REQUIRE(hs.size() == 2);
    CHECK(std::abs(hs[0].lb - 0.0) <= 1e-3);
    CHECK(hs[0].lb <= 1e-9);
    CHECK(std::abs(hs[1].lb + 0.01) <= 1e-3);
    CHECK(hs[1].lb <= -0.01 + 1e-9);
}

TEST_CASE("tighten_all: without the output constraint the toy bound stays at the box")
{
    OptimizerConfig cfg;
    cfg.use_output_constraint = false;
    const TightenResult r = tightenAll(toyNet(), toyOutSet(), toyBox(), cfg);
    CHECK(r.store.lo(1)[0] == doctest::Approx(-2.0));
    CHECK(r.store.hi(1)[0] == doctest::Approx(2.0));
}

TEST_CASE("tighten_all: trivial output set leaves backward bounds unchanged")
{
    Rng rng(1);
    for (int k = 0; k < 5; ++k) {
        const Network net = randomNet(rng, {2, 8, 2});
        const OutputSet everything(Matrix::Zero(1, 2), Vector::Zero(1));
        const InputBox box = unitBox(2);
        const BoundStore ref = foldedStore(foldOutputConstraints(net, everything), box);
        const TightenResult r = tightenAll(net, everything, box, OptimizerConfig{});
        for (int i = 0; i < net.numLayers(); ++i) {
            CHECK((r.store.lo(i) - ref.lo(i)).cwiseAbs().maxCoeff() <= 1e-9);
            CHECK((r.store.hi(i) - ref.hi(i)).cwiseAbs().maxCoeff() <= 1e-9);
        }
    }
}

TEST_CASE("bound_halfspaces: positive homogeneity and soundness on samples")
{
    Rng rng(2);
    for (int k = 0; k < 5; ++k) {
        const Network net = randomNet(rng, {2, 8, 8, 2});
        const InputBox box = unitBox(2);
        const OutputSet os = feasibleOutSet(rng, net, box, 2);
        const std::vector<Vector> dirs = genDirections2d(8);
        std::vector<Vector> doubled;
        for (const auto &c : dirs)
            doubled.push_back(2.0 * c);

        PreimageSolver solver(net, os, box, OptimizerConfig{});
        solver.track(dirs);
        solver.tightenAll();
        const auto hs = solver.boundHalfspaces();
        const Network &folded = solver.folded();
        const NeuronClass cls = classify(solver.store());
        for (std::size_t d = 0; d < dirs.size(); ++d) {
            // shared alpha, gamma rescaled with the objective: g scales exactly
            DualState dual;
            const double lb1 =
                optimizeBound(folded, solver.store(), LinearObjective::direction(dirs[d]), OptimizerConfig{}, &dual);
            dual.gamma *= 2.0;
            const double lb2 = evalG(folded, solver.store(), cls, LinearObjective::direction(doubled[d]), dual).bound;
            CHECK(std::abs(lb2 - 2.0 * lb1) <= 1e-9 * std::max(1.0, std::abs(lb1)));
        }

        const auto xs = sampleFeasible(net, box, os, 100000, 1 + k);
        REQUIRE(!xs.empty());
        for (const auto &h : hs)
            CHECK(h.lb <= minOverSamples(xs, h.c) + 1e-6);
    }
}

TEST_CASE("tighten_all: widths never grow across sweeps")
{
    Rng rng(3);
    const Network net = randomNet(rng, {2, 10, 10, 10, 1});
    const InputBox box = unitBox(2);
    const OutputSet os = feasibleOutSet(rng, net, box, 1);
    PreimageSolver solver(net, os, box, OptimizerConfig{});
    solver.track(genDirections2d(8));
    solver.tightenAll();
    const auto &h = solver.history();
    REQUIRE(h.size() >= 1);
    for (std::size_t s = 1; s < h.size(); ++s)
        for (std::size_t i = 0; i < h[s].widthSums.size(); ++i)
            CHECK(h[s].widthSums[i] <= h[s - 1].widthSums[i] + 1e-12);
    for (std::size_t s = 1; s < h.size(); ++s)
        for (std::size_t d = 0; d < h[s].halfspaceLbs.size(); ++d)
            CHECK(h[s].halfspaceLbs[d] >= h[s - 1].halfspaceLbs[d]);
}

TEST_CASE("tighten_all: unreachable output set raises the infeasibility flag")
{
    // relu(x) + relu(x + 1) >= 0 everywhere, so y <= -1 is empty
    PreimageSolver solver(toyNet(), OutputSet(mat({{1.0}}), vec({1.0})), toyBox(), OptimizerConfig{});
    CHECK(solver.tightenAll());
    CHECK(solver.infeasible());
}

TEST_CASE("serial and parallel sweeps agree")
{
    Rng rng(4);
    const Network net = randomNet(rng, {2, 8, 8, 2});
    const InputBox box = unitBox(2);
    const OutputSet os = feasibleOutSet(rng, net, box, 2);
    std::vector<std::vector<HalfSpace>> runs;
    for (int threads : {1, 3}) {
        OptimizerConfig cfg;
        cfg.threads = threads;
        runs.push_back(boundHalfspaces(net, os, box, genDirections2d(12), cfg));
    }
    for (std::size_t d = 0; d < runs[0].size(); ++d)
        CHECK(std::abs(runs[0][d].lb - runs[1][d].lb) <= 1e-12);
}

TEST_CASE("config: JSON round trip and validation")
{
    const OptimizerConfig cfg = configFromJson(nlohmann::json::parse(
        R"({"iters":200,"lr":0.1,"lr_decay":0.98,"tolerance":1e-4,"max_sweeps":50,"alpha_init":0.5,"gamma_init":0.025,"check_every":10})"));
    CHECK(cfg.iters == 200);
    CHECK(cfg.gamma_init == 0.025);
    CHECK(configFromJson(toJson(cfg)).max_sweeps == 50);
    CHECK_THROWS_AS(configFromJson(nlohmann::json::parse(R"({"iters":-1})")), Error);
    CHECK_THROWS_AS(configFromJson(nlohmann::json::parse(R"({"alpha_init":2})")), Error);
}
