#pragma once
#include <stdexcept>
#include <string>

namespace ds2p {

// Invalid arguments, dimension mismatches, bad configuration.
class ParameterError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// A computation could not produce a valid result (degenerate data,
// infeasible subproblem, non-convergence).
class ComputeError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

class ConvergenceError : public ComputeError
{
public:
    ConvergenceError(const std::string& what, double last_estimate)
        : ComputeError(what), last_estimate_(last_estimate) {}

    double last_estimate() const noexcept { return last_estimate_; }

private:
    double last_estimate_;
};

class DegenerateColumnError : public ComputeError
{
public:
    DegenerateColumnError(const std::string& what, long column)
        : ComputeError(what), column_(column) {}

    long column() const noexcept { return column_; }

private:
    long column_;
};

class InfeasibleError : public ComputeError
{
public:
    InfeasibleError(const std::string& what, double residual_floor)
        : ComputeError(what), residual_floor_(residual_floor) {}

    double residual_floor() const noexcept { return residual_floor_; }

private:
    double residual_floor_;
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw ParameterError(msg);
}

} // namespace detail
} // namespace ds2p
