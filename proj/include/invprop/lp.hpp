#pragma once

#include "invprop/common.hpp"

#include <string>
#include <vector>

namespace invprop {

enum class RowSense { Le, Ge, Eq };

/// minimize c^T x  s.t.  A x (<=|>=|=) rhs,  lower <= x <= upper.
/// Bounds may be infinite.
struct DenseLP
{
    Vector objective;
    Matrix A;
    std::vector<RowSense> senses;
    Vector rhs;
    Vector lower;
    Vector upper;

    explicit DenseLP(Index numVars = 0);

    Index numVars() const
    {
        return objective.size();
    }
    Index numRows() const
    {
        return A.rows();
    }
    void addRow(const Vector &a, RowSense sense, double b);
    void validate() const;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char *to_string(LpStatus s) noexcept;

struct LpResult
{
    LpStatus status = LpStatus::Infeasible;
    double value = 0.0;
    Vector x;
    int iterations = 0;
};

/// Two-phase dense tableau simplex with Bland's rule.
LpResult lpSolve(const DenseLP &lp, int maxIterations = 100000);

// Largest constraint or bound violation of x.
double lpViolation(const DenseLP &lp, const Vector &x);

} // namespace invprop
