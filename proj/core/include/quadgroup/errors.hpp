#pragma once

#include <stdexcept>

namespace quadgroup {

/// Numerical failure (non-convergence, infeasibility after escalation).
/// Distinct from std::invalid_argument so callers can map validation
/// problems and solver problems to different exit codes.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace quadgroup
