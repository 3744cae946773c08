#pragma once

#include <stdexcept>
#include <string>

namespace mcsgm {

// Chain whose second eigenvalue magnitude is (numerically) 1: reducible or
// periodic, so it never mixes to the uniform stationary distribution.
class ChainNotMixingError : public std::runtime_error {
 public:
  explicit ChainNotMixingError(const std::string& what) : std::runtime_error(what) {}
};

// Transition matrix outside the supported class (numerically defective,
// or a spectrum without the constants needed by the requested quantity).
class UnsupportedMatrixError : public std::runtime_error {
 public:
  explicit UnsupportedMatrixError(const std::string& what) : std::runtime_error(what) {}
};

// Operation asked of a family that does not meet its preconditions
// (non-convex where convexity is required, non-smooth where smoothness is).
class UnsupportedFamilyError : public std::runtime_error {
 public:
  explicit UnsupportedFamilyError(const std::string& what) : std::runtime_error(what) {}
};

// An inner full-batch solver failed to reach its required tolerance.
class OracleNotConvergedError : public std::runtime_error {
 public:
  explicit OracleNotConvergedError(const std::string& what) : std::runtime_error(what) {}
};

// Step size / schedule violates the precondition of the quantity being
// computed (e.g. eta > 2/L for a smooth-case bound).
class InvalidConfigurationError : public std::runtime_error {
 public:
  explicit InvalidConfigurationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mcsgm
