#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trunc_ellipse {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model, generator or partition at construction time.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation (|rho| >= 1, x < 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Operation not defined for the given generator kind.
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

/// A required integral is not finite or could not be evaluated.
class IntegrationError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-support input data.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t row)
      : Error(what), row_(row) {}

  /// Zero-based row (or one-based line, for file parsing) of the offending record.
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

}  // namespace trunc_ellipse
