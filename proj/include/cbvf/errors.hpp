#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace cbvf {

/// Invalid construction parameters or experiment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A query point lies outside the grid on a non-periodic axis.
class OutOfDomainError : public std::out_of_range {
 public:
  OutOfDomainError(std::size_t axis, double coordinate, double lo, double hi);

  std::size_t axis() const { return axis_; }

 private:
  std::size_t axis_;
};

/// A function produced NaN or Inf at a state; the offending state is kept.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(const std::string& what, Eigen::VectorXd state);

  const Eigen::VectorXd& state() const { return state_; }

 private:
  Eigen::VectorXd state_;
};

/// Numerical integration of the dynamics left the finite range.
class IntegrationError : public NonFiniteError {
 public:
  using NonFiniteError::NonFiniteError;
};

/// The dynamic-programming iteration produced a non-finite value.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t iteration, const std::string& detail);

  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

/// No admissible input satisfies the barrier constraint (strict filter mode).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Formats a state vector as "(a, b, c)" for diagnostics.
std::string format_state(const Eigen::VectorXd& x);

}  // namespace cbvf
