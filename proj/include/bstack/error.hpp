#pragma once

#include <stdexcept>
#include <string>

namespace bstack {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, unknown columns, inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A sampler run or refit failed its convergence checks.
class DiagnosticsError : public Error {
 public:
  using Error::Error;
};

}  // namespace bstack
