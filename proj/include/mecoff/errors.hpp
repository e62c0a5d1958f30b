#pragma once

#include <stdexcept>
#include <string>

namespace mecoff {

/// Raised when a caller breaks a documented precondition (bad state, bad action, shape mismatch).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

/// Raised for malformed or out-of-range configuration data.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by numerical solvers that fail to converge or hit a size guard.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mecoff
