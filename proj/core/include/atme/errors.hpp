#pragma once

#include <stdexcept>
#include <string>

namespace atme {

/// Input data violates a precondition (non-binary treatment, missing
/// values, empty arm, ...). Maps to CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure during estimation (rank deficiency, separation,
/// degenerate variance, ...). Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace atme
