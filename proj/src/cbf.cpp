#include "cbvf/cbf.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <Eigen/Dense>

#include "cbvf/errors.hpp"
#include "cbvf/parallel.hpp"

namespace cbvf {

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Constraint: return "constraint";
    case Provenance::AnalyticCbf: return "analytic-cbf";
    case Provenance::LyapunovCbf: return "lyapunov-cbf";
    case Provenance::BackupCbf: return "backup-cbf";
  }
  return "unknown";
}

ScalarStateFunction acc_constraint(double look_ahead) {
  if (!(look_ahead > 0.0)) throw ConfigError("look-ahead time must be positive");
  return {[look_ahead](const Vec& x) { return x[1] - look_ahead * x[0]; }, Provenance::Constraint};
}

ScalarStateFunction acc_analytic_cbf(const AccParams& p) {
  if (!(p.cd > 0.0) || !(p.gravity > 0.0)) throw ConfigError("cd and gravity must be positive");
  const double brake = 2.0 * p.cd * p.gravity;
  return {[p, brake](const Vec& x) {
            const double dv = p.lead_speed - x[0];
            return x[1] - p.look_ahead * x[0] - dv * dv / brake;
          },
          Provenance::AnalyticCbf, true};
}

ScalarStateFunction ellipse_constraint(const Eigen::Vector2d& center,
                                       const Eigen::Vector2d& semi_axes) {
  if (!(semi_axes[0] > 0.0) || !(semi_axes[1] > 0.0)) {
    throw ConfigError("ellipse semi-axes must be positive");
  }
  return {[center, semi_axes](const Vec& x) {
            const double u = (x[0] - center[0]) / semi_axes[0];
            const double v = (x[1] - center[1]) / semi_axes[1];
            return u * u + v * v - 1.0;
          },
          Provenance::Constraint};
}

ScalarStateFunction slab_constraint(std::size_t axis, double floor, double ceiling) {
  if (!(ceiling > floor)) throw ConfigError("slab ceiling must exceed floor");
  const auto i = static_cast<Eigen::Index>(axis);
  return {[i, floor, ceiling](const Vec& x) { return std::min(x[i] - floor, ceiling - x[i]); },
          Provenance::Constraint};
}

LyapunovCbf lyapunov_cbf(const ControlAffineSystem& system, const Vec& operating_point,
                         const Mat& Q, const Mat& R, double level) {
  if (!(level > 0.0)) throw ConfigError("Lyapunov CBF level must be positive");
  const auto n = static_cast<Eigen::Index>(system.state_dim());
  if (operating_point.size() != n) throw ConfigError("operating point has wrong dimension");
  if (Q.rows() != n || Q.cols() != n) throw ConfigError("Q must be state_dim square");
  Eigen::SelfAdjointEigenSolver<Mat> q_eig(0.5 * (Q + Q.transpose()));
  if (q_eig.eigenvalues().minCoeff() < -1e-12) throw ConfigError("Q must be positive semidefinite");

  LyapunovCbf out;
  out.level = level;
  out.linearization = linearize(system, operating_point, trim_input(system, operating_point));
  const Mat& A = out.linearization.A;
  const Mat& B = out.linearization.B;
  out.lqr = solve_lqr(A, B, Q, R);
  const Mat closed = A + B * out.lqr.K;
  out.closed_loop_q = Q + out.lqr.K.transpose() * R * out.lqr.K;
  out.P = solve_lyapunov(closed, out.closed_loop_q);
  out.lyapunov_residual =
      (closed.transpose() * out.P + out.P * closed + out.closed_loop_q).norm() /
      out.closed_loop_q.norm();
  if (out.lyapunov_residual > 1e-8) {
    throw std::runtime_error("Lyapunov residual " + std::to_string(out.lyapunov_residual) +
                             " above tolerance");
  }
  Eigen::LLT<Mat> p_llt(out.P);
  if (p_llt.info() != Eigen::Success) throw std::runtime_error("Lyapunov matrix is not positive definite");

  const Mat P = out.P;
  const Vec center = operating_point;
  // Periodic components use the shortest arc so V is continuous on the circle.
  auto wrapper = std::make_shared<ControlAffineSystem>(system);
  out.function = {[P, center, wrapper, level](const Vec& x) {
                    const Vec d = wrapper->difference(x, center);
                    return level - d.dot(P * d);
                  },
                  Provenance::LyapunovCbf};
  return out;
}

BackupValue evaluate_backup(const ControlAffineSystem& system, const BackupPolicySpec& spec,
                            const ScalarStateFunction& constraint, const Vec& x0) {
  if (!(spec.horizon > 0.0) || !(spec.eval_dt > 0.0)) {
    throw ConfigError("backup horizon and evaluation step must be positive");
  }
  BackupValue out;
  Vec x = x0;
  out.path_min = constraint(x);
  double t = 0.0;
  while (t < spec.horizon) {
    const double dt = std::min(spec.eval_dt, spec.horizon - t);
    const Vec u = system.clamp_input(spec.policy(x));
    try {
      x = step_rk4(system, x, u, dt);
    } catch (const IntegrationError&) {
      throw IntegrationError("backup rollout blew up from node", x0);
    }
    t += dt;
    if (spec.horizon - t < 1e-12 * spec.horizon) t = spec.horizon;
    out.path_min = std::min(out.path_min, constraint(x));
  }
  out.terminal = spec.backup_set(x);
  if (!std::isfinite(out.path_min) || !std::isfinite(out.terminal)) {
    throw NonFiniteError("backup evaluation is not finite", x0);
  }
  return out;
}

ValueField backup_cbf(const ControlAffineSystem& system, const BackupPolicySpec& spec,
                      const ScalarStateFunction& constraint, const Grid& grid) {
  std::vector<double> values(grid.size());
  parallel_for(grid.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      values[i] = evaluate_backup(system, spec, constraint, grid.node(i)).value();
    }
  });
  return ValueField(grid, std::move(values), 0.0);
}

PendulumBackup pendulum_lqr_backup(const ControlAffineSystem& pendulum, double horizon,
                                   double eval_dt, double level) {
  const Vec upright = Vec::Zero(2);
  const Linearization lin = linearize(pendulum, upright, Vec::Zero(1));
  PendulumBackup out;
  out.lqr = solve_lqr(lin.A, lin.B, Mat::Identity(2, 2), Mat::Identity(1, 1));
  const Mat P = out.lqr.P;
  const Mat K = out.lqr.K;
  if (!(level > 0.0)) {
    // Half the largest sublevel set on which the LQR input stays unsaturated.
    const double u_max = std::min(-pendulum.input_lo()[0], pendulum.input_hi()[0]);
    const double gain = (K * P.inverse() * K.transpose())(0, 0);
    level = 0.5 * u_max * u_max / gain;
  }
  out.level = level;
  const ControlAffineSystem sys = pendulum;
  out.spec.policy = [K, sys](const Vec& x) { return sys.clamp_input(K * x); };
  out.spec.horizon = horizon;
  out.spec.eval_dt = eval_dt;
  out.spec.backup_set = [P, level](const Vec& x) { return level - x.dot(P * x); };
  return out;
}

std::vector<bool> zero_superlevel_set(const ValueField& field) {
  std::vector<bool> mask(field.values.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = field.values[i] >= 0.0;
  return mask;
}

std::size_t safe_node_count(const ValueField& field) {
  return static_cast<std::size_t>(
      std::count_if(field.values.begin(), field.values.end(), [](double v) { return v >= 0.0; }));
}

std::size_t sign_consistency_violations(const ValueField& candidate,
                                        const ValueField& constraint) {
  if (!candidate.grid.same_layout(constraint.grid)) {
    throw ConfigError("candidate and constraint fields live on different grids");
  }
  std::size_t bad = 0;
  for (std::size_t i = 0; i < candidate.values.size(); ++i) {
    if (candidate.values[i] >= 0.0 && constraint.values[i] < 0.0) ++bad;
  }
  return bad;
}

}  // namespace cbvf
