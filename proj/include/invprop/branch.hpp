#pragma once

#include "invprop/solver.hpp"

#include <utility>
#include <vector>

namespace invprop {

enum class NodeStatus { Pending, Done, PrunedInfeasible };

const char *to_string(NodeStatus s) noexcept;

struct BranchNode
{
    // Region owned by this node; leaves tile the root box.
    InputBox box;
    // Input bounds after tightening (subset of box); used for the union.
    InputBox tightened;
    NodeStatus status = NodeStatus::Pending;
    std::vector<HalfSpace> halfspaces;
    int depth = 0;
    int sweeps = 0;
    bool converged = false;
    std::vector<SweepRecord> history;
};

// Children share the face x[dim] = s.
std::pair<InputBox, InputBox> split(const InputBox &box, Index dim, double s);

// Widest dimension (lowest index on ties).
Index widestDimension(const InputBox &box);

// True when interval bounds show some row H_k y + d_k > 0 on the whole box.
bool intervalInfeasible(const Network &net, const OutputSet &outSet, const InputBox &box);

struct BranchResult
{
    PolytopeUnion set;
    // Leaves in lexicographic box order, pruned ones included.
    std::vector<BranchNode> leaves;
    bool allPruned = false;
    bool budgetExhausted = false;
};

/// Breadth-first input splitting at the widest-dimension midpoint until
/// maxBranches leaves exist. Every node is solved; children start from the
/// parent's bounds and certified half-space values.
BranchResult branchAndBound(const Network &net,
                            const OutputSet &outSet,
                            const InputBox &box,
                            const std::vector<Vector> &directions,
                            const OptimizerConfig &cfg,
                            int maxBranches,
                            int finalIters = -1);

} // namespace invprop
