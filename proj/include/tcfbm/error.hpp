#pragma once

#include <stdexcept>
#include <string>

namespace tcfbm {

/** @brief Argument outside the documented domain of an operation. */
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/** @brief An iterative method failed its own stopping criterion. */
struct NonConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/** @brief Covariance matrix not numerically positive definite. */
struct CholeskyError : std::runtime_error {
  CholeskyError(std::size_t pivot, double value)
      : std::runtime_error("covariance not positive definite at pivot " + std::to_string(pivot) +
                           " (value " + std::to_string(value) + ")"),
        pivot(pivot), value(value) {}
  std::size_t pivot;
  double value;
};

/** @brief Query past the simulated horizon of a path. */
struct RangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

/** @brief Explicit ODE step control could not meet its tolerance. */
struct StepRejectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/** @brief Discretized coupling did not close the gap by the horizon. */
struct CouplingFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/** @brief Numerical check of a regime hypothesis failed. */
struct HypothesisViolation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/** @brief Expectation deemed infinite (raised by refusing operations). */
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DomainError(what);
}

}  // namespace tcfbm
