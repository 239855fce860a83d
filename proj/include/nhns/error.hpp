#pragma once

#include <stdexcept>
#include <string>

namespace nhns {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fields living on different grids, or arrays of the wrong size.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function (log of a negative, etc.).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Point outside the computational domain.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Courant condition violated; carries the offending Courant number.
class CflError : public PreconditionError {
public:
    CflError(const std::string& what, double courant)
        : PreconditionError(what), courant_(courant) {}
    double courant() const noexcept { return courant_; }

private:
    double courant_;
};

/// Iterative solver hit its iteration cap; carries the final relative residual.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : Error(what), residual_(residual), iterations_(iterations) {}
    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// A discrete invariant (density or temperature bound) was breached beyond tolerance.
class InvariantError : public Error {
public:
    using Error::Error;
};

/// A simulation step failed; records the simulated time of the failure.
class SimulationError : public Error {
public:
    SimulationError(double time, const std::string& what) : Error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Initial data for which the theorem constants are undefined.
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration; `key()` names the offending configuration key.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace nhns
