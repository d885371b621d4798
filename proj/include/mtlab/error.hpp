#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition (bad domain, alpha too large, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// An iterative method stopped before reaching its tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double last_residual, int iterations)
        : Error(what), last_residual_(last_residual), iterations_(iterations) {}

    double last_residual() const noexcept { return last_residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double last_residual_;
    int iterations_;
};

/// exp() argument exceeded the guard; carries the location of the blow-up.
class OverflowError : public Error {
public:
    OverflowError(const std::string& what, std::size_t triangle, double max_abs_u)
        : Error(what), triangle_(triangle), max_abs_u_(max_abs_u) {}

    std::size_t triangle() const noexcept { return triangle_; }
    double max_abs_u() const noexcept { return max_abs_u_; }

private:
    std::size_t triangle_;
    double max_abs_u_;
};

}  // namespace mtlab
