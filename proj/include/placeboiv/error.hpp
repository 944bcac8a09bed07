#pragma once

#include <stdexcept>
#include <string>

namespace placeboiv {

/// Base class for every failure the library reports by exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  /// Short stable name used by the CLI ("DegenerateInstrument", ...).
  virtual const char* name() const noexcept { return "Error"; }
};

/// An instrument's sample covariance with its target is numerically zero.
class DegenerateInstrument : public Error {
 public:
  explicit DegenerateInstrument(std::string covariance)
      : Error("degenerate instrument: |" + covariance + "| is below the degeneracy tolerance"),
        covariance_(std::move(covariance)) {}
  const char* name() const noexcept override { return "DegenerateInstrument"; }
  /// Which covariance degenerated, e.g. "cov(Q,M)".
  const std::string& covariance() const noexcept { return covariance_; }

 private:
  std::string covariance_;
};

class EmptyArm : public Error {
 public:
  explicit EmptyArm(const std::string& what) : Error("empty arm: " + what) {}
  const char* name() const noexcept override { return "EmptyArm"; }
};

class RankDeficient : public Error {
 public:
  explicit RankDeficient(const std::string& what) : Error("rank deficient design: " + what) {}
  const char* name() const noexcept override { return "RankDeficient"; }
};

class ProfileTooNarrow : public Error {
 public:
  explicit ProfileTooNarrow(const std::string& side)
      : Error("p-value profile never crosses alpha on the " + side + " side") {}
  const char* name() const noexcept override { return "ProfileTooNarrow"; }
};

/// Malformed input text (CSV rows, numbers, missing columns).
class ParseError : public Error {
 public:
  using Error::Error;
  const char* name() const noexcept override { return "ParseError"; }
};

/// A configuration or plan document is invalid. `pointer` is a JSON pointer
/// to the offending field.
class ConfigError : public Error {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : Error(pointer + ": " + message), pointer_(std::move(pointer)) {}
  const char* name() const noexcept override { return "ConfigError"; }
  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

/// A parameter point has a nonzero loading the scenario requires to be zero.
class ConstraintViolation : public ConfigError {
 public:
  using ConfigError::ConfigError;
  const char* name() const noexcept override { return "ConstraintViolation"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  const char* name() const noexcept override { return "IoError"; }
};

}  // namespace placeboiv
