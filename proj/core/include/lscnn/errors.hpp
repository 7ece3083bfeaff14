#pragma once

#include <stdexcept>

namespace lscnn {

// Base class for all library failures. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid tensor shapes, dimension mismatches, out-of-range slices.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid parameters or configuration (bad values, unknown keys, missing paths).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Dataset problems: empty splits, unreadable inputs, missing prerequisites.
class DataError : public Error {
 public:
  using Error::Error;
};

// Numeric failures: NaN loss, degenerate batch variance.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed files: bad magic, truncation, digest mismatch.
class FormatError : public Error {
 public:
  using Error::Error;
};

// API misuse: backward without a cached forward, and similar.
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace lscnn
