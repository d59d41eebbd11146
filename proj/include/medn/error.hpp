#pragma once

#include <stdexcept>
#include <string>

namespace medn {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix extents that do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid solver, quadrature or training configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, mismatched or unreadable input data and files.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown (non-finite values, too few usable measurements).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace medn
