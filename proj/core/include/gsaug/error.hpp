#pragma once

#include <stdexcept>
#include <string>

namespace gsaug {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, missing, or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/inf losses, non-finite gradients, impossible probability events.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsaug
