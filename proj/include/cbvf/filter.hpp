#pragma once

#include <filesystem>
#include <functional>
#include <memory>

#include "cbvf/cbf.hpp"
#include "cbvf/dynamics.hpp"
#include "cbvf/errors.hpp"
#include "cbvf/grid.hpp"

namespace cbvf {

enum class InfeasibilityMode { LeastViolating, Error };

/// Data of the minimally invasive safety filter
///   min |u - u_nom|_R^2  s.t.  Lf + Lg u + gamma * B >= 0,  u in box.
struct FilterProblem {
  FilterProblem(std::shared_ptr<const ValueField> field, ControlAffineSystem system,
                double gamma_online = 5.0, Mat weight = Mat(),
                InfeasibilityMode mode = InfeasibilityMode::LeastViolating);

  std::shared_ptr<const ValueField> field;
  ControlAffineSystem system;
  double gamma_online;
  Mat weight;  ///< R; identity when constructed empty
  InfeasibilityMode mode;
  /// Optional earlier snapshot; when set, dB/dt by finite difference is added
  /// to Lf.
  std::shared_ptr<const ValueField> earlier;
};

struct LieDerivatives {
  double value = 0.0;
  double lf = 0.0;
  Vec lg;
};

/// Value, L_f B and L_g B at x from the interpolated field and its
/// central-difference gradient.
LieDerivatives lie_derivatives(const FilterProblem& problem, const Vec& x);

struct FilterResult {
  Vec u_star;
  double constraint_value = 0.0;  ///< Lf + Lg u* + gamma * B
  bool active = false;
  bool feasible = true;
};

/// Box-constrained QP with one linear constraint `lg . u >= rhs`, solved
/// exactly by enumerating active sets. `u_nom` is clamped to the box first.
/// `offset` is Lf + gamma*B so that constraint_value = offset + lg . u.
FilterResult solve_filter_qp(const Vec& u_nom, const Vec& lg, double offset, const Vec& lo,
                             const Vec& hi, const Mat& weight, InfeasibilityMode mode);

FilterResult filter(const FilterProblem& problem, const Vec& x, const Vec& u_nom);

/// Range of s = Lg . u over feasible inputs: [max(lo, threshold), hi], or
/// empty when the threshold exceeds the achievable maximum.
struct FeasibleInterval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty = false;
};

FeasibleInterval feasible_interval(const LieDerivatives& lie, const Vec& input_lo,
                                   const Vec& input_hi, double gamma);

/// True when every input feasible at rate gamma_low is also feasible at
/// gamma_high (gamma_low <= gamma_high).
bool gamma_monotonicity_check(const FilterProblem& problem, const Vec& x, double gamma_low,
                              double gamma_high);

using Policy = std::function<Vec(const Vec&)>;

/// Integration blow-up during a closed-loop run; keeps what was simulated.
class SimulationError : public IntegrationError {
 public:
  SimulationError(const IntegrationError& cause, Trajectory partial)
      : IntegrationError(cause), partial_(std::move(partial)) {}

  const Trajectory& partial() const { return partial_; }

 private:
  Trajectory partial_;
};

/// Zero-order-hold closed loop with the filter in the loop. Stops early (and
/// flags `exited_domain`) when the state leaves the field's grid.
Trajectory simulate(const FilterProblem& problem, const ScalarStateFunction& constraint,
                    const Vec& x0, const Policy& nominal, double dt, double horizon);

/// Columns t, x0.., u0.., value, ell, active, feasible. The final row carries
/// the filtered input at the last state, which is not applied.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory,
                          std::size_t input_dim);

}  // namespace cbvf
