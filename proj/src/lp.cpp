#include "invprop/lp.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace invprop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-10;

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// x_j = offset + y_pos - y_neg with y >= 0; unused columns are -1.
struct VarMap
{
    double offset = 0.0;
    Index pos = -1;
    Index neg = -1;
};

class Simplex
{
public:
    Simplex(Tableau t, std::vector<Index> basis, int maxIter)
        : T(std::move(t))
        , basis(std::move(basis))
        , maxIter(maxIter)
    {
    }

    // Sets the reduced-cost row from raw costs c (size N) and the basis.
    void price(const Vector &c)
    {
        const Index N = T.cols() - 1;
        cost = Vector::Zero(N + 1);
        cost.head(N) = c;
        for (Index i = 0; i < T.rows(); ++i) {
            const double cb = c[basis[static_cast<std::size_t>(i)]];
            if (cb != 0.0)
                cost -= cb * T.row(i).transpose();
        }
    }

    // Returns Optimal, Unbounded or IterationLimit. Columns >= allowed never enter.
    LpStatus run(Index allowed)
    {
        const Index N = T.cols() - 1;
        while (true) {
            Index enter = -1;
            for (Index j = 0; j < allowed; ++j) {
                if (cost[j] < -kCostTol) {
                    enter = j;
                    break;
                }
            }
            if (enter < 0)
                return LpStatus::Optimal;
            Index leave = -1;
            double best = kInf;
            for (Index i = 0; i < T.rows(); ++i) {
                const double a = T(i, enter);
                if (a <= kPivotTol)
                    continue;
                const double ratio = T(i, N) / a;
                const bool tie = leave >= 0 && std::abs(ratio - best) <= 1e-12 &&
                                 basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)];
                if (leave < 0 || ratio < best - 1e-12 || tie) {
                    best = std::min(best, ratio);
                    leave = i;
                }
            }
            if (leave < 0)
                return LpStatus::Unbounded;
            if (iterations >= maxIter)
                return LpStatus::IterationLimit;
            pivot(leave, enter);
            ++iterations;
        }
    }

    void pivot(Index p, Index q)
    {
        T.row(p) /= T(p, q);
        for (Index i = 0; i < T.rows(); ++i) {
            if (i == p)
                continue;
            const double f = T(i, q);
            if (f != 0.0)
                T.row(i) -= f * T.row(p);
        }
        const double f = cost[q];
        if (f != 0.0)
            cost -= f * T.row(p).transpose();
        basis[static_cast<std::size_t>(p)] = q;
    }

    void dropRow(Index r)
    {
        const Index m = T.rows();
        for (Index i = r; i + 1 < m; ++i) {
            T.row(i) = T.row(i + 1);
            basis[static_cast<std::size_t>(i)] = basis[static_cast<std::size_t>(i + 1)];
        }
        T.conservativeResize(m - 1, Eigen::NoChange);
        basis.pop_back();
    }

    Tableau T;
    std::vector<Index> basis;
    Vector cost;
    int maxIter;
    int iterations = 0;
};

} // namespace

DenseLP::DenseLP(Index numVars)
    : objective(Vector::Zero(numVars))
    , A(0, numVars)
    , rhs(0)
    , lower(Vector::Constant(numVars, -kInf))
    , upper(Vector::Constant(numVars, kInf))
{
}

void DenseLP::addRow(const Vector &a, RowSense sense, double b)
{
    if (a.size() != numVars())
        throw Error(ErrorKind::Dimension, "row length does not match the variable count");
    A.conservativeResize(A.rows() + 1, Eigen::NoChange);
    A.row(A.rows() - 1) = a.transpose();
    rhs.conservativeResize(rhs.size() + 1);
    rhs[rhs.size() - 1] = b;
    senses.push_back(sense);
}

void DenseLP::validate() const
{
    const Index n = numVars();
    if (A.cols() != n || lower.size() != n || upper.size() != n)
        throw Error(ErrorKind::Dimension, "LP dimensions are inconsistent");
    if (rhs.size() != A.rows() || static_cast<Index>(senses.size()) != A.rows())
        throw Error(ErrorKind::Dimension, "LP row data is inconsistent");
    if (!objective.allFinite() || !A.allFinite() || !rhs.allFinite())
        throw Error(ErrorKind::NonFinite, "LP data must be finite");
    for (Index j = 0; j < n; ++j) {
        if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] == kInf || upper[j] == -kInf)
            throw Error(ErrorKind::NonFinite, fmt::format("variable {} has invalid bounds", j));
    }
}

const char *to_string(LpStatus s) noexcept
{
    switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration-limit";
    }
    return "unknown";
}

LpResult lpSolve(const DenseLP &lp, int maxIterations)
{
    lp.validate();
    const Index n = lp.numVars();

    LpResult result;
    for (Index j = 0; j < n; ++j) {
        if (lp.lower[j] > lp.upper[j]) {
            result.status = LpStatus::Infeasible;
            return result;
        }
    }

    // Substitute variables so every column is nonnegative.
    std::vector<VarMap> vars(static_cast<std::size_t>(n));
    Index ny = 0;
    struct BoundRow
    {
        Index col;
        double ub;
    };
    std::vector<BoundRow> boundRows;
    for (Index j = 0; j < n; ++j) {
        auto &v = vars[static_cast<std::size_t>(j)];
        const double l = lp.lower[j], u = lp.upper[j];
        if (std::isfinite(l)) {
            v.offset = l;
            v.pos = ny++;
            if (std::isfinite(u))
                boundRows.push_back({v.pos, u - l});
        } else if (std::isfinite(u)) {
            v.offset = u;
            v.neg = ny++;
        } else {
            v.pos = ny++;
            v.neg = ny++;
        }
    }

    const Index mRows = lp.numRows() + static_cast<Index>(boundRows.size());
    Matrix rows = Matrix::Zero(mRows, ny);
    Vector b(mRows);
    std::vector<RowSense> sense(static_cast<std::size_t>(mRows));
    for (Index r = 0; r < lp.numRows(); ++r) {
        double shift = 0.0;
        for (Index j = 0; j < n; ++j) {
            const double a = lp.A(r, j);
            if (a == 0.0)
                continue;
            const auto &v = vars[static_cast<std::size_t>(j)];
            shift += a * v.offset;
            if (v.pos >= 0)
                rows(r, v.pos) += a;
            if (v.neg >= 0)
                rows(r, v.neg) -= a;
        }
        b[r] = lp.rhs[r] - shift;
        sense[static_cast<std::size_t>(r)] = lp.senses[static_cast<std::size_t>(r)];
    }
    for (std::size_t k = 0; k < boundRows.size(); ++k) {
        const Index r = lp.numRows() + static_cast<Index>(k);
        rows(r, boundRows[k].col) = 1.0;
        b[r] = boundRows[k].ub;
        sense[static_cast<std::size_t>(r)] = RowSense::Le;
    }
    for (Index r = 0; r < mRows; ++r) {
        if (b[r] < 0.0) {
            rows.row(r) *= -1.0;
            b[r] = -b[r];
            auto &s = sense[static_cast<std::size_t>(r)];
            if (s == RowSense::Le)
                s = RowSense::Ge;
            else if (s == RowSense::Ge)
                s = RowSense::Le;
        }
    }

    // Columns: y | slack/surplus | artificial | rhs
    Index nSlack = 0, nArt = 0;
    for (auto s : sense) {
        nSlack += s != RowSense::Eq;
        nArt += s != RowSense::Le;
    }
    const Index firstSlack = ny;
    const Index firstArt = ny + nSlack;
    const Index N = firstArt + nArt;
    Tableau T = Tableau::Zero(mRows, N + 1);
    std::vector<Index> basis(static_cast<std::size_t>(mRows));
    Index slack = firstSlack, art = firstArt;
    for (Index r = 0; r < mRows; ++r) {
        T.row(r).head(ny) = rows.row(r);
        T(r, N) = b[r];
        switch (sense[static_cast<std::size_t>(r)]) {
        case RowSense::Le:
            T(r, slack) = 1.0;
            basis[static_cast<std::size_t>(r)] = slack++;
            break;
        case RowSense::Ge:
            T(r, slack++) = -1.0;
            T(r, art) = 1.0;
            basis[static_cast<std::size_t>(r)] = art++;
            break;
        case RowSense::Eq:
            T(r, art) = 1.0;
            basis[static_cast<std::size_t>(r)] = art++;
            break;
        }
    }

    Simplex sx(std::move(T), std::move(basis), maxIterations);
    if (nArt > 0) {
        Vector c1 = Vector::Zero(N);
        c1.tail(nArt).setOnes();
        sx.price(c1);
        const LpStatus st = sx.run(N);
        result.iterations = sx.iterations;
        if (st == LpStatus::IterationLimit) {
            result.status = st;
            return result;
        }
        const double infeas = -sx.cost[N];
        if (infeas > 1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
            result.status = LpStatus::Infeasible;
            return result;
        }
        // Drive remaining artificials out of the basis or drop their rows.
        for (Index i = sx.T.rows() - 1; i >= 0; --i) {
            if (sx.basis[static_cast<std::size_t>(i)] < firstArt)
                continue;
            Index q = -1;
            for (Index j = 0; j < firstArt; ++j) {
                if (std::abs(sx.T(i, j)) > kPivotTol) {
                    q = j;
                    break;
                }
            }
            if (q >= 0)
                sx.pivot(i, q);
            else
                sx.dropRow(i);
        }
    }

    Vector c2 = Vector::Zero(N);
    for (Index j = 0; j < n; ++j) {
        const auto &v = vars[static_cast<std::size_t>(j)];
        const double c = lp.objective[j];
        if (v.pos >= 0)
            c2[v.pos] += c;
        if (v.neg >= 0)
            c2[v.neg] -= c;
    }
    sx.price(c2);
    const LpStatus st = sx.run(firstArt);
    result.iterations = sx.iterations;
    if (st != LpStatus::Optimal) {
        result.status = st;
        return result;
    }

    Vector y = Vector::Zero(N);
    for (Index i = 0; i < sx.T.rows(); ++i)
        y[sx.basis[static_cast<std::size_t>(i)]] = sx.T(i, N);
    result.x.resize(n);
    for (Index j = 0; j < n; ++j) {
        const auto &v = vars[static_cast<std::size_t>(j)];
        double x = v.offset;
        if (v.pos >= 0)
            x += y[v.pos];
        if (v.neg >= 0)
            x -= y[v.neg];
        result.x[j] = x;
    }
    result.value = lp.objective.dot(result.x);
    result.status = LpStatus::Optimal;
    return result;
}

double lpViolation(const DenseLP &lp, const Vector &x)
{
    double worst = 0.0;
    for (Index r = 0; r < lp.numRows(); ++r) {
        const double ax = lp.A.row(r).dot(x);
        double v = 0.0;
        switch (lp.senses[static_cast<std::size_t>(r)]) {
        case RowSense::Le: v = ax - lp.rhs[r]; break;
        case RowSense::Ge: v = lp.rhs[r] - ax; break;
        case RowSense::Eq: v = std::abs(ax - lp.rhs[r]); break;
        }
        worst = std::max(worst, v);
    }
    for (Index j = 0; j < x.size(); ++j) {
        worst = std::max(worst, lp.lower[j] - x[j]);
        worst = std::max(worst, x[j] - lp.upper[j]);
    }
    return worst;
}

} // namespace invprop
