#pragma once

#include <stdexcept>
#include <string>

namespace bohmlab {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A caller violated an operation precondition (grid mismatch, bad argument).
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// A state or grid cannot represent the requested physics without aliasing.
/// The message names the violated bound.
class ResolutionError : public PreconditionError {
public:
  using PreconditionError::PreconditionError;
};

/// A numerical guard tripped while a computation was running.
class NumericalGuardError : public Error {
public:
  using Error::Error;
};

/// A configuration value failed validation. `key()` is the dotted path.
class ConfigError : public Error {
public:
  ConfigError(std::string key, const std::string& message)
      : Error(key + ": " + message), key_(std::move(key)), detail_(message) {}

  const std::string& key() const noexcept { return key_; }
  const std::string& detail() const noexcept { return detail_; }

private:
  std::string key_;
  std::string detail_;
};

} // namespace bohmlab
