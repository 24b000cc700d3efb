#include "invprop/branch.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <deque>
#include <optional>

namespace invprop {

namespace {

struct Work
{
    BranchNode node;
    BoundStore store;
};

bool lexLess(const InputBox &a, const InputBox &b)
{
    for (Index i = 0; i < a.dim(); ++i)
        if (a.lo[i] != b.lo[i])
            return a.lo[i] < b.lo[i];
    for (Index i = 0; i < a.dim(); ++i)
        if (a.hi[i] != b.hi[i])
            return a.hi[i] < b.hi[i];
    return false;
}

Work solveNode(const Network &net,
               const OutputSet &outSet,
               const InputBox &box,
               const std::vector<Vector> &directions,
               const OptimizerConfig &cfg,
               const Work *parent,
               int finalIters)
{
    Work w;
    w.node.box = box;
    w.node.tightened = box;
    w.node.depth = parent ? parent->node.depth + 1 : 0;
    if (intervalInfeasible(net, outSet, box)) {
        w.node.status = NodeStatus::PrunedInfeasible;
        w.node.converged = true;
        return w;
    }
    std::optional<PreimageSolver> solver;
    std::vector<double> floor;
    if (parent) {
        solver.emplace(net, outSet, box, parent->store, cfg);
        for (const auto &h : parent->node.halfspaces)
            floor.push_back(h.lb);
    } else {
        solver.emplace(net, outSet, box, cfg);
    }
    solver->track(directions, floor);
    w.node.converged = solver->tightenAll();
    w.node.sweeps = solver->sweeps();
    w.node.history = solver->history();
    if (solver->infeasible()) {
        w.node.status = NodeStatus::PrunedInfeasible;
        return w;
    }
    w.node.halfspaces = solver->boundHalfspaces(finalIters);
    w.node.status = NodeStatus::Done;
    w.store = solver->store();
    w.node.tightened = w.store.inputBox();
    return w;
}

} // namespace

const char *to_string(NodeStatus s) noexcept
{
    switch (s) {
    case NodeStatus::Pending: return "pending";
    case NodeStatus::Done: return "done";
    case NodeStatus::PrunedInfeasible: return "pruned-infeasible";
    }
    return "unknown";
}

std::pair<InputBox, InputBox> split(const InputBox &box, Index dim, double s)
{
    if (dim < 0 || dim >= box.dim())
        throw Error(ErrorKind::Dimension, fmt::format("split dimension {} out of range", dim));
    if (!(box.lo[dim] < s && s < box.hi[dim]))
        throw Error(ErrorKind::Precondition,
                    fmt::format("split point {} not inside ({}, {})", s, box.lo[dim], box.hi[dim]));
    InputBox a = box, b = box;
    a.hi[dim] = s;
    b.lo[dim] = s;
    return {a, b};
}

Index widestDimension(const InputBox &box)
{
    Index best = 0;
    for (Index i = 1; i < box.dim(); ++i)
        if (box.hi[i] - box.lo[i] > box.hi[best] - box.lo[best])
            best = i;
    return best;
}

bool intervalInfeasible(const Network &net, const OutputSet &outSet, const InputBox &box)
{
    const Network folded = foldOutputConstraints(net, outSet);
    const Vector lo = intervalPropagate(folded, box).lo(folded.numLayers());
    return (lo.array() > kInfeasibleTol).any();
}

BranchResult branchAndBound(const Network &net,
                            const OutputSet &outSet,
                            const InputBox &box,
                            const std::vector<Vector> &directions,
                            const OptimizerConfig &cfg,
                            int maxBranches,
                            int finalIters)
{
    if (maxBranches < 1)
        throw Error(ErrorKind::Precondition, "max_branches must be >= 1");

    std::deque<Work> live;
    std::vector<Work> closed;
    auto place = [&](Work w) {
        if (w.node.status == NodeStatus::PrunedInfeasible)
            closed.push_back(std::move(w));
        else
            live.push_back(std::move(w));
    };
    place(solveNode(net, outSet, box, directions, cfg, nullptr, finalIters));

    while (static_cast<int>(live.size() + closed.size()) < maxBranches && !live.empty()) {
        Work parent = std::move(live.front());
        live.pop_front();
        const Index dim = widestDimension(parent.node.box);
        const double lo = parent.node.box.lo[dim];
        const double hi = parent.node.box.hi[dim];
        const double mid = 0.5 * (lo + hi);
        if (!(lo < mid && mid < hi)) {
            closed.push_back(std::move(parent));
            continue;
        }
        auto [a, b] = split(parent.node.box, dim, mid);
        place(solveNode(net, outSet, a, directions, cfg, &parent, finalIters));
        place(solveNode(net, outSet, b, directions, cfg, &parent, finalIters));
    }
    for (auto &w : live)
        closed.push_back(std::move(w));

    BranchResult result;
    std::sort(closed.begin(), closed.end(), [](const Work &x, const Work &y) { return lexLess(x.node.box, y.node.box); });
    result.allPruned = true;
    for (auto &w : closed) {
        if (w.node.status == NodeStatus::Done) {
            result.allPruned = false;
            result.set.leaves.push_back({w.node.tightened, w.node.halfspaces});
        }
        if (!w.node.converged)
            result.budgetExhausted = true;
        result.leaves.push_back(std::move(w.node));
    }
    return result;
}

} // namespace invprop
