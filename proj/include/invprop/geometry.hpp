#pragma once

#include "invprop/network.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace invprop {

/// c^T x >= lb.
struct HalfSpace
{
    Vector c;
    double lb = 0.0;

    bool contains(const Vector &x, double tol = 1e-9) const
    {
        return c.dot(x) >= lb - tol;
    }
};

struct PolytopeLeaf
{
    InputBox box;
    std::vector<HalfSpace> halfspaces;

    bool contains(const Vector &x, double tol = 1e-9) const;
};

/// Union over leaves of (box intersected with the leaf's half-spaces).
struct PolytopeUnion
{
    std::vector<PolytopeLeaf> leaves;

    bool empty() const
    {
        return leaves.empty();
    }
    bool contains(const Vector &x, double tol = 1e-9) const;
};

std::vector<Vector> genDirections2d(int k);
std::vector<Vector> genDirectionsBox(Index d);

/// Number of independent sampler streams. Fixed so results do not depend on
/// the worker count.
inline constexpr int kSampleShards = 64;

/// Calls fn(shard, x) for n uniform samples from the box, split over
/// kSampleShards deterministic streams derived from the seed. fn may be
/// called concurrently for different shards.
void forEachSample(const InputBox &box,
                   std::uint64_t n,
                   std::uint64_t seed,
                   int threads,
                   const std::function<void(int, const Vector &)> &fn);

struct RatioEstimate
{
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
    std::uint64_t inSet = 0;
    std::uint64_t feasible = 0;
    // Feasible samples the set fails to contain; nonzero means unsound.
    std::uint64_t feasibleOutside = 0;
    bool empiricallyEmpty = false;
    double ratio = 0.0;
    // Binomial standard error of the ratio (delta method, shared samples).
    double sigma = 0.0;
};

RatioEstimate approxRatio(const PolytopeUnion &set,
                          const Network &net,
                          const OutputSet &outSet,
                          const InputBox &box,
                          std::uint64_t samples,
                          std::uint64_t seed,
                          int threads = 1);

/// Convex polygon of box intersected with the half-spaces (2D only), in
/// counter-clockwise order; empty if the intersection is empty.
std::vector<Vector> clipPolygon(const InputBox &box, const std::vector<HalfSpace> &halfspaces);

struct SvgScene
{
    InputBox view;
    // Several sets share one panel (e.g. one per time step).
    std::vector<const PolytopeUnion *> sets;
    std::vector<Vector> points;
    std::optional<InputBox> obstacle;
    std::string title;
};

std::string renderSvg(const SvgScene &scene);

/// One row per half-space: leaf,c_1,...,c_d,lb
std::string halfspacesCsv(const PolytopeUnion &set);

} // namespace invprop
