#pragma once

#include <stdexcept>
#include <string>

namespace tmd {

/// Operands tagged with different Hilbert-space bases.
class BasisMismatch : public std::invalid_argument {
 public:
  explicit BasisMismatch(const std::string& what)
      : std::invalid_argument("basis mismatch: " + what) {}
};

/// Eigensolver failure, leakage above threshold, singular matrices and the like.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scenario or CLI input rejected before any computation starts.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace tmd
