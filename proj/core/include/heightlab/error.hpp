#pragma once

#include <stdexcept>
#include <string>

namespace heightlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument or configuration value was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data is malformed, inconsistent, or insufficient (bad magic,
/// grid mismatch, empty evaluation set).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public DataError {
 public:
  using DataError::DataError;
};

/// A numerical guard tripped: degenerate geometry, divergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace heightlab
