#pragma once

#include <stdexcept>
#include <string>

namespace tomo {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes, labels or geometries of two operands disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A geometry description violates one of its invariants.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// An argument lies outside the mathematical domain of an operation
/// (log of a non-positive entry, division by zero, negative weight, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A function or operator was asked for something it does not provide,
/// e.g. the gradient of a non-smooth function.
class CapabilityError : public Error {
public:
    using Error::Error;
};

/// An iterative estimate failed to converge; carries the best value found.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double best_estimate)
        : Error(what), best_estimate_(best_estimate) {}

    double best_estimate() const noexcept { return best_estimate_; }

private:
    double best_estimate_;
};

/// File-level failures: unreadable paths, truncated payloads, bad checksums.
class IoError : public Error {
public:
    using Error::Error;
};

/// Invalid pipeline configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace tomo
