#pragma once

#include <stdexcept>
#include <string>

namespace nars {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed space, candidate, config or pool text. Carries the 1-based line
/// (0 when unknown) and the offending field name.
class ParseError : public Error {
 public:
  ParseError(const std::string &what, int line = 0, std::string field = {})
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        field_(std::move(field)) {}

  int line() const noexcept { return line_; }
  const std::string &field() const noexcept { return field_; }

 private:
  int line_;
  std::string field_;
};

/// A range whose low bound exceeds its high bound, or a non-positive step.
class RangeError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// A value that lies off its parameter grid, or a broken shared-group tie.
class ValidationError : public Error {
 public:
  ValidationError(std::string parameter, const std::string &what)
      : Error(parameter + ": " + what), parameter_(std::move(parameter)) {}

  const std::string &parameter() const noexcept { return parameter_; }

 private:
  std::string parameter_;
};

/// Mismatched vector/layer dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A statistic that is undefined for the given input (e.g. rank correlation of
/// a constant series).
class UndefinedResultError : public Error {
 public:
  using Error::Error;
};

/// Evaluator-plugin wire protocol violations.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace nars
