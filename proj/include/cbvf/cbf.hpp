#pragma once

#include <string_view>
#include <vector>

#include "cbvf/dynamics.hpp"
#include "cbvf/grid.hpp"
#include "cbvf/lqr.hpp"

namespace cbvf {

enum class Provenance { Constraint, AnalyticCbf, LyapunovCbf, BackupCbf };

std::string_view to_string(Provenance p);

/// A scalar function of state: a constraint function l or a candidate CBF h.
/// `conservative` marks candidates whose safe set must lie inside {l >= 0}.
struct ScalarStateFunction {
  StateFunction evaluate;
  Provenance provenance = Provenance::Constraint;
  bool conservative = false;

  double operator()(const Vec& x) const { return evaluate(x); }
};

/// l(v, z) = z - T_h v.
ScalarStateFunction acc_constraint(double look_ahead);

/// h(v, z) = z - T_h v - (v0 - v)^2 / (2 cd g).
ScalarStateFunction acc_analytic_cbf(const AccParams& params);

/// l(x, y, .) = ((x - cx)/a)^2 + ((y - cy)/b)^2 - 1.
ScalarStateFunction ellipse_constraint(const Eigen::Vector2d& center,
                                       const Eigen::Vector2d& semi_axes);

/// l(y, ...) = min(y - floor, ceiling - y) on state component `axis`.
ScalarStateFunction slab_constraint(std::size_t axis, double floor, double ceiling);

struct LyapunovCbf {
  ScalarStateFunction function;
  Linearization linearization;
  LqrSolution lqr;
  Mat P;                 ///< closed-loop Lyapunov matrix
  Mat closed_loop_q;     ///< Q + K^T R K
  double lyapunov_residual = 0.0;
  double level = 0.0;    ///< the constant c in h = c - V
};

/// h(x) = c - (x - xbar)^T P (x - xbar), P from the LQR-closed linearization
/// about `operating_point` at its least-squares trim input.
LyapunovCbf lyapunov_cbf(const ControlAffineSystem& system, const Vec& operating_point,
                         const Mat& Q, const Mat& R, double level);

struct BackupPolicySpec {
  std::function<Vec(const Vec&)> policy;
  double horizon = 1.0;
  StateFunction backup_set;  ///< 0-superlevel set is the backup set
  double eval_dt = 0.01;
};

/// The two terms combined by `backup_cbf` at one state.
struct BackupValue {
  double path_min = 0.0;  ///< min of l over the sampled rollout, start included
  double terminal = 0.0;  ///< backup_set at the end of the horizon
  double value() const { return std::min(path_min, terminal); }
};

BackupValue evaluate_backup(const ControlAffineSystem& system, const BackupPolicySpec& spec,
                            const ScalarStateFunction& constraint, const Vec& x);

/// Policy evaluation of the backup controller on every node.
ValueField backup_cbf(const ControlAffineSystem& system, const BackupPolicySpec& spec,
                      const ScalarStateFunction& constraint, const Grid& grid);

/// Clipped-LQR backup controller about the upright pendulum equilibrium and a
/// Lyapunov sublevel backup set {x^T P x <= level}.
struct PendulumBackup {
  BackupPolicySpec spec;
  LqrSolution lqr;
  double level = 0.0;
};

PendulumBackup pendulum_lqr_backup(const ControlAffineSystem& pendulum, double horizon,
                                   double eval_dt, double level);

std::vector<bool> zero_superlevel_set(const ValueField& field);

/// Number of nodes with value >= 0.
std::size_t safe_node_count(const ValueField& field);

/// Nodes where h >= 0 but l < 0 (violations of C_h within {l >= 0}).
std::size_t sign_consistency_violations(const ValueField& candidate, const ValueField& constraint);

}  // namespace cbvf
