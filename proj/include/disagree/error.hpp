#pragma once

#include <stdexcept>
#include <string>

namespace disagree {

/// Raised for malformed inputs, unknown labels and other caller errors.
/// The CLI maps it to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numeric invariant breaks (NaN/Inf in parameters or gradients).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace disagree
