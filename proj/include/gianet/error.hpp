#pragma once

#include <stdexcept>
#include <string>

namespace gianet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes or an operation applied outside its domain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-supplied configuration (bad flags, out-of-range hyperparameters).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Base for everything that goes wrong while reading or writing files.
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

class BadMagicError : public DataError {
 public:
  using DataError::DataError;
};

class TruncatedError : public DataError {
 public:
  using DataError::DataError;
};

/// Header fields that contradict each other (e.g. odd Bayer dimensions).
class InconsistentError : public DataError {
 public:
  using DataError::DataError;
};

/// Raised when training produces a non-finite loss or parameter.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace gianet
