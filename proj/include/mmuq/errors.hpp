#pragma once

#include <stdexcept>
#include <string>

namespace mmuq {

/// Base class for failures of a numerical procedure on valid inputs
/// (as opposed to std::invalid_argument, which signals a caller bug).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No walker start with finite posterior was found within the retry budget.
class InitializationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Every proposal of an ensemble run was rejected.
class DegenerateChainError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// All prior draws had zero likelihood, or every model has zero prior mass.
class EvidenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Maximum likelihood search did not produce a finite optimum.
class OptimizationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Quadrature grid does not resolve the integrand.
class GridResolutionError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Response function returned a non-finite value.
class ResponseError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Malformed input file.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mmuq
