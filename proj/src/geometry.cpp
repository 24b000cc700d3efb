#include "invprop/geometry.hpp"

#include "invprop/parallel.hpp"

#include <fmt/format.h>

#include <atomic>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace invprop {

bool PolytopeLeaf::contains(const Vector &x, double tol) const
{
    if (!box.contains(x, tol))
        return false;
    for (const auto &h : halfspaces)
        if (!h.contains(x, tol))
            return false;
    return true;
}

bool PolytopeUnion::contains(const Vector &x, double tol) const
{
    for (const auto &leaf : leaves) {
        if (leaf.box.dim() != x.size())
            throw Error(ErrorKind::Dimension, "point dimension does not match the polytope union");
        if (leaf.contains(x, tol))
            return true;
    }
    return false;
}

std::vector<Vector> genDirections2d(int k)
{
    if (k < 1)
        throw Error(ErrorKind::Precondition, "need at least one direction");
    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
        // Exact values on the axes so k = 4 gives clean unit vectors.
        const int q = 4 * j;
        Vector v(2);
        if (q % k == 0) {
            switch ((q / k) % 4) {
            case 0: v << 1.0, 0.0; break;
            case 1: v << 0.0, 1.0; break;
            case 2: v << -1.0, 0.0; break;
            default: v << 0.0, -1.0; break;
            }
        } else {
            const double a = 2.0 * std::numbers::pi * j / k;
            v << std::cos(a), std::sin(a);
        }
        out.push_back(v);
    }
    return out;
}

std::vector<Vector> genDirectionsBox(Index d)
{
    if (d < 1)
        throw Error(ErrorKind::Precondition, "dimension must be positive");
    std::vector<Vector> out;
    for (Index i = 0; i < d; ++i) {
        out.push_back(Vector::Unit(d, i));
        out.push_back(-Vector::Unit(d, i));
    }
    return out;
}

void forEachSample(const InputBox &box,
                   std::uint64_t n,
                   std::uint64_t seed,
                   int threads,
                   const std::function<void(int, const Vector &)> &fn)
{
    parallelFor(kSampleShards, threads, [&](std::size_t s, int) {
        const auto shard = static_cast<std::uint64_t>(s);
        const std::uint64_t begin = n * shard / kSampleShards;
        const std::uint64_t end = n * (shard + 1) / kSampleShards;
        std::seed_seq seq{static_cast<std::uint32_t>(seed),
                          static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(shard)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Vector x(box.dim());
        for (std::uint64_t k = begin; k < end; ++k) {
            for (Index i = 0; i < box.dim(); ++i)
                x[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * unit(rng);
            fn(static_cast<int>(s), x);
        }
    });
}

RatioEstimate approxRatio(const PolytopeUnion &set,
                          const Network &net,
                          const OutputSet &outSet,
                          const InputBox &box,
                          std::uint64_t samples,
                          std::uint64_t seed,
                          int threads)
{
    if (samples < 1)
        throw Error(ErrorKind::Precondition, "need at least one sample");
    if (box.dim() != net.inputDim())
        throw Error(ErrorKind::Dimension, "box dimension does not match the network");
    struct Counts
    {
        std::uint64_t in = 0, feas = 0, outside = 0;
    };
    std::vector<Counts> shards(kSampleShards);
    forEachSample(box, samples, seed, threads, [&](int s, const Vector &x) {
        auto &c = shards[static_cast<std::size_t>(s)];
        const bool in = set.contains(x);
        const bool feas = outSet.satisfied(net.forward(x), 1e-9);
        c.in += in;
        c.feas += feas;
        c.outside += feas && !in;
    });
    RatioEstimate r;
    r.samples = samples;
    r.seed = seed;
    for (const auto &c : shards) {
        r.inSet += c.in;
        r.feasible += c.feas;
        r.feasibleOutside += c.outside;
    }
    if (r.feasible == 0) {
        r.empiricallyEmpty = true;
        return r;
    }
    const double n = static_cast<double>(samples);
    const double pIn = static_cast<double>(r.inSet) / n;
    const double pF = static_cast<double>(r.feasible) / n;
    r.ratio = pIn / pF;
    // Feasible samples are (nearly) a subset of the set, so the ratio is
    // 1 / P(feasible | in set); binomial error on that conditional.
    const double q = std::min(1.0, pF / std::max(pIn, pF));
    const double m = std::max(1.0, static_cast<double>(r.inSet));
    r.sigma = r.ratio * std::sqrt(std::max(0.0, (1.0 - q) / (q * m)));
    return r;
}

std::vector<Vector> clipPolygon(const InputBox &box, const std::vector<HalfSpace> &halfspaces)
{
    if (box.dim() != 2)
        throw Error(ErrorKind::Dimension, "polygon clipping is 2D only");
    std::vector<Vector> poly;
    poly.emplace_back(Vector{{box.lo[0], box.lo[1]}});
    poly.emplace_back(Vector{{box.hi[0], box.lo[1]}});
    poly.emplace_back(Vector{{box.hi[0], box.hi[1]}});
    poly.emplace_back(Vector{{box.lo[0], box.hi[1]}});
    for (const auto &h : halfspaces) {
        if (poly.empty())
            break;
        std::vector<Vector> next;
        for (std::size_t k = 0; k < poly.size(); ++k) {
            const Vector &p = poly[k];
            const Vector &q = poly[(k + 1) % poly.size()];
            const double fp = h.c.dot(p) - h.lb;
            const double fq = h.c.dot(q) - h.lb;
            if (fp >= 0.0)
                next.push_back(p);
            if ((fp >= 0.0) != (fq >= 0.0)) {
                const double t = fp / (fp - fq);
                next.push_back(p + t * (q - p));
            }
        }
        poly = std::move(next);
    }
    return poly;
}

std::string renderSvg(const SvgScene &scene)
{
    if (scene.view.dim() != 2)
        throw Error(ErrorKind::Dimension, "SVG scenes are 2D only");
    const double size = 600.0;
    const double margin = 40.0;
    const double sx = (size - 2 * margin) / std::max(1e-12, scene.view.hi[0] - scene.view.lo[0]);
    const double sy = (size - 2 * margin) / std::max(1e-12, scene.view.hi[1] - scene.view.lo[1]);
    auto px = [&](double x) { return margin + (x - scene.view.lo[0]) * sx; };
    auto py = [&](double y) { return size - margin - (y - scene.view.lo[1]) * sy; };

    std::ostringstream out;
    out << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{0}" viewBox="0 0 {0} {0}">)",
                       size)
        << "\n";
    out << fmt::format(R"(<rect x="0" y="0" width="{0}" height="{0}" fill="white"/>)", size) << "\n";
    out << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#888"/>)",
                       margin, margin, size - 2 * margin, size - 2 * margin)
        << "\n";
    if (!scene.title.empty())
        out << fmt::format(R"(<text x="{}" y="24" font-family="sans-serif" font-size="14">{}</text>)", margin,
                           scene.title)
            << "\n";
    out << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="10">{:.3g}</text>)", margin,
                       size - margin + 14, scene.view.lo[0])
        << "\n";
    out << fmt::format(R"(<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{:.3g}</text>)",
                       size - margin, size - margin + 14, scene.view.hi[0])
        << "\n";

    if (scene.obstacle) {
        const auto &o = *scene.obstacle;
        out << fmt::format(R"(<rect x="{:.3f}" y="{:.3f}" width="{:.3f}" height="{:.3f}" fill="#e33" fill-opacity="0.35" stroke="#a00"/>)",
                           px(o.lo[0]), py(o.hi[1]), (o.hi[0] - o.lo[0]) * sx, (o.hi[1] - o.lo[1]) * sy)
            << "\n";
    }
    for (const auto &p : scene.points)
        out << fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="1" fill="#36c"/>)", px(p[0]), py(p[1])) << "\n";
    for (const PolytopeUnion *set : scene.sets) {
        for (const auto &leaf : set->leaves) {
            const auto poly = clipPolygon(leaf.box, leaf.halfspaces);
            if (poly.size() < 3)
                continue;
            out << R"(<polygon fill="none" stroke="#093" stroke-width="1.5" points=")";
            for (std::size_t k = 0; k < poly.size(); ++k)
                out << (k ? " " : "") << fmt::format("{:.3f},{:.3f}", px(poly[k][0]), py(poly[k][1]));
            out << "\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

std::string halfspacesCsv(const PolytopeUnion &set)
{
    std::ostringstream out;
    const Index d = set.leaves.empty() ? 0 : set.leaves.front().box.dim();
    out << "leaf";
    for (Index i = 0; i < d; ++i)
        out << ",c_" << (i + 1);
    out << ",lb\n";
    for (std::size_t l = 0; l < set.leaves.size(); ++l) {
        for (const auto &h : set.leaves[l].halfspaces) {
            out << l;
            for (Index i = 0; i < h.c.size(); ++i)
                out << fmt::format(",{:.17g}", h.c[i]);
            out << fmt::format(",{:.17g}\n", h.lb);
        }
    }
    return out.str();
}

} // namespace invprop
