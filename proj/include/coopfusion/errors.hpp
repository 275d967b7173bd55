#pragma once

#include <stdexcept>
#include <string>

namespace coopfusion {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidModelError : public Error {
 public:
  using Error::Error;
};

class InvalidArgumentError : public Error {
 public:
  using Error::Error;
};

/// Singular innovation covariance or similar numeric breakdown.
class NumericalFailureError : public Error {
 public:
  using Error::Error;
};

/// Joint-event enumeration would exceed the configured cap.
class CombinatorialOverflowError : public Error {
 public:
  using Error::Error;
};

class FrameRejectedError : public Error {
 public:
  using Error::Error;
};

class DegenerateFitError : public Error {
 public:
  using Error::Error;
};

class UndefinedRSquaredError : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario config, model file, or sample CSV.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Log replay failure. Carries the 1-based line number when known.
class ReplayError : public Error {
 public:
  ReplayError(const std::string& what, long line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  long line() const { return line_; }

 private:
  long line_;
};

}  // namespace coopfusion
