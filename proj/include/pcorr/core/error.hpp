#pragma once

#include <stdexcept>
#include <string>

namespace pcorr {

/// Base of every error raised by the library. Plain `Error` instances signal
/// runtime failures (non-finite activations, I/O trouble mid-run).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something invalid: bad arguments, malformed files,
/// inconsistent shapes. The CLI maps these to a distinct exit code.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace pcorr
