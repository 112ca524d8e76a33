#pragma once

#include <stdexcept>
#include <string>

namespace dnls {

/// Invalid input or configuration (bad parameter, malformed state, rejected config).
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure at runtime: solver non-convergence, overflow, residual check failure.
/// Carries the failing time / iteration when known.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double time = -1.0, long iteration = -1,
                            double residual = -1.0)
        : std::runtime_error(what), time(time), iteration(iteration), residual(residual) {}

    double time;
    long iteration;
    double residual;
};

}  // namespace dnls
