#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mf {

/// Malformed or out-of-range configuration (grid extents, job files).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of an operation was violated by the caller.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The pair potential cannot be evaluated where it is needed.
class PotentialDomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested energy lies at or below the ground state, or no admissible
/// configuration could be found.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative method stopped without meeting its tolerance.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), residual_history_(std::move(history)) {}

  const std::vector<double>& residual_history() const noexcept { return residual_history_; }

 private:
  std::vector<double> residual_history_;
};

}  // namespace mf
