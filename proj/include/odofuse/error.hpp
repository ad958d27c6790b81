#pragma once

#include <stdexcept>
#include <string>

namespace odofuse {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration or parameter combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (traces, series lengths, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A matrix expected to be symmetric positive definite is not.
class NotSpdError : public Error {
 public:
  using Error::Error;
};

/// An estimator window contains no absolute (GPS) fix at all.
class NoAbsoluteFixError : public Error {
 public:
  using Error::Error;
};

/// A requested window anchor falls outside the trace.
class WindowError : public Error {
 public:
  using Error::Error;
};

/// File contents do not match the expected schema.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A timestamp cannot be snapped onto the sampling grid.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// An iterative computation failed to converge.
class DiagnosticError : public Error {
 public:
  using Error::Error;
};

}  // namespace odofuse
