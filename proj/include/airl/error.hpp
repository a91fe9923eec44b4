#pragma once

#include <stdexcept>
#include <string>

namespace airl {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input whose geometry makes the operation undefined (zero rows, zero variance).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Finite-difference oracle could not evaluate the function.
class OracleError : public Error {
 public:
  using Error::Error;
};

// Malformed file (checkpoint, config, csv).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace airl
