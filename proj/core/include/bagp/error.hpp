#pragma once

#include <stdexcept>
#include <string>

namespace bagp {

/// Precondition on a scalar or vector argument was violated.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two model structures are incompatible (e.g. bases that are not nested).
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A factorization, solver or sampler failed to produce a usable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// User-supplied data or configuration is malformed or out of range.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text input (CSV, JSON) could not be parsed.
class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace bagp
