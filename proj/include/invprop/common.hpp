#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace invprop {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class ErrorKind {
    Parse,
    Dimension,
    NonFinite,
    Precondition,
    StaleClassification,
    Numerical,
    Budget,
};

const char *to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(what)
        , _kind(kind)
    {
    }

    ErrorKind kind() const noexcept
    {
        return _kind;
    }

private:
    ErrorKind _kind;
};

template <typename Derived>
bool allFinite(const Eigen::DenseBase<Derived> &m)
{
    return m.allFinite();
}

// [x]_+ and [x]_- with [x]_- = max(-x, 0), so x = [x]_+ - [x]_-.
inline double positivePart(double x)
{
    return x > 0.0 ? x : 0.0;
}

inline double negativePart(double x)
{
    return x < 0.0 ? -x : 0.0;
}

} // namespace invprop
