#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace norst {

/// Base for failures that come from the numerics rather than from bad input.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficient : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NoConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The restricted projection Psi_T is too close to singular to solve for the
/// missing entries. Usually means too many entries of the column are missing.
class IllConditioned : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotSkewSymmetric : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ZeroMatrix : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One or more config fields are out of range. `fields()` lists
/// "section.key: problem" lines.
class ConfigInvalid : public std::invalid_argument {
 public:
  explicit ConfigInvalid(std::vector<std::string> fields)
      : std::invalid_argument(join(fields)), fields_(std::move(fields)) {}
  const std::vector<std::string>& fields() const noexcept { return fields_; }

 private:
  static std::string join(const std::vector<std::string>& f) {
    std::string out = "invalid config";
    for (const auto& s : f) out += "\n  " + s;
    return out;
  }
  std::vector<std::string> fields_;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  long line() const noexcept { return line_; }

 private:
  long line_;
};

}  // namespace norst
