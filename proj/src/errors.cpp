#include "cbvf/errors.hpp"

#include <sstream>

namespace cbvf {

namespace {

std::string out_of_domain_message(std::size_t axis, double coordinate, double lo, double hi) {
  std::ostringstream os;
  os << "query outside grid on axis " << axis << ": " << coordinate << " not in [" << lo << ", "
     << hi << "]";
  return os.str();
}

}  // namespace

OutOfDomainError::OutOfDomainError(std::size_t axis, double coordinate, double lo, double hi)
    : std::out_of_range(out_of_domain_message(axis, coordinate, lo, hi)), axis_(axis) {}

NonFiniteError::NonFiniteError(const std::string& what, Eigen::VectorXd state)
    : std::runtime_error(what + " at state " + format_state(state)), state_(std::move(state)) {}

DivergenceError::DivergenceError(std::size_t iteration, const std::string& detail)
    : std::runtime_error("solver diverged at iteration " + std::to_string(iteration) + ": " +
                         detail),
      iteration_(iteration) {}

std::string format_state(const Eigen::VectorXd& x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i > 0) os << ", ";
    os << x[i];
  }
  os << ')';
  return os.str();
}

}  // namespace cbvf
