#pragma once

#include <stdexcept>
#include <string>

namespace lqgent {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or precondition violated by the caller.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Overflow/underflow or otherwise non-finite intermediate values.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Mechanical instability (g <= -Omega0/4) or a diverging simulation.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// Feedback configuration cannot reach every state.
class ControllabilityError : public Error {
 public:
  using Error::Error;
};

/// A matrix equation has no admissible (stabilizing / unique) solution.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Iterative solve stopped with the residual above tolerance.
class ConvergenceError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// Broken internal invariant.
class InternalError : public Error {
 public:
  using Error::Error;
};

/// Every cell of a sweep failed.
class SweepError : public Error {
 public:
  using Error::Error;
};

/// Configuration document could not be parsed or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Output file could not be written or input file could not be read.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace lqgent
