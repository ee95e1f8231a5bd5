#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cbvf/grid.hpp"

namespace cbvf {

/// A state component that lives on a circle; wrapped into [lo, hi).
struct PeriodicComponent {
  std::size_t index = 0;
  double lo = 0.0;
  double hi = 0.0;
};

/// x' = f(x) + g(x) u with u in a box.
class ControlAffineSystem {
 public:
  using DriftFn = std::function<Vec(const Vec&)>;
  using ActuationFn = std::function<Mat(const Vec&)>;

  ControlAffineSystem(std::string name, std::size_t state_dim, std::size_t input_dim,
                      DriftFn drift, ActuationFn actuation, Vec input_lo, Vec input_hi,
                      std::vector<PeriodicComponent> periodic = {});

  const std::string& name() const { return name_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t input_dim() const { return input_dim_; }
  const Vec& input_lo() const { return input_lo_; }
  const Vec& input_hi() const { return input_hi_; }
  const std::vector<PeriodicComponent>& periodic() const { return periodic_; }

  Vec drift(const Vec& x) const;
  Mat actuation(const Vec& x) const;
  Vec rate(const Vec& x, const Vec& u) const { return drift(x) + actuation(x) * u; }

  Vec clamp_input(const Vec& u) const;
  bool input_in_box(const Vec& u, double tol = 0.0) const;

  /// Wraps periodic components into their principal range.
  Vec wrap(Vec x) const;

  /// Difference a - b with periodic components taken as the shortest arc.
  Vec difference(const Vec& a, const Vec& b) const;

 private:
  std::string name_;
  std::size_t state_dim_;
  std::size_t input_dim_;
  DriftFn drift_;
  ActuationFn actuation_;
  Vec input_lo_;
  Vec input_hi_;
  std::vector<PeriodicComponent> periodic_;
};

/// Samples f and g on every node; throws on non-finite output. Returns the
/// largest axis-aligned difference quotient of f and g between neighbouring
/// nodes (a finite Lipschitz estimate on the grid).
double validate_on_grid(const ControlAffineSystem& system, const Grid& grid);

/// Classical RK4 with u held over the step. Inputs outside the box are
/// clamped (with a logged warning); periodic components are wrapped.
Vec step_rk4(const ControlAffineSystem& system, const Vec& x, const Vec& u, double dt);

struct StepRecord {
  double value = 0.0;
  double ell = 0.0;
  bool active = false;
  bool feasible = true;
};

/// Closed-loop rollout. `inputs[k]` is applied on [times[k], times[k+1]).
/// `annotations` has one record per state.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs;
  std::vector<StepRecord> annotations;
  Vec terminal_input;  ///< filtered input at the last state, not applied
  bool exited_domain = false;
};

// Benchmark systems.

struct AccParams {
  double mass = 1650.0;
  double f0 = 0.1;
  double f1 = 5.0;
  double f2 = 0.25;
  double gravity = 9.81;
  double cd = 0.3;
  double lead_speed = 14.0;
  double desired_speed = 24.0;
  double look_ahead = 1.8;

  double friction(double v) const { return f0 * v * v + f1 * v + f2; }
  double max_force() const { return mass * cd * gravity; }
  static AccParams frictionless();
};

/// State (v, z): v' = (u - F_r(v)) / m, z' = v0 - v.
ControlAffineSystem acc_system(const AccParams& params);

/// State (x, y, theta): heading rate is the input, |u| <= 0.5.
ControlAffineSystem dubins_system(double speed);

struct QuadrotorParams {
  double mass = 1.0;
  double arm = 0.3;
  double inertia = 0.0225;
  double gravity = 9.81;
  double max_thrust = 0.75 * 1.0 * 9.81;
};

/// Vertical/attitude planar quadrotor (y, v_y, phi, omega) with per-rotor
/// thrust inputs in [0, max_thrust].
ControlAffineSystem planar_quadrotor_system(const QuadrotorParams& params);

struct PendulumParams {
  double mass = 1.0;
  double length = 1.0;
  double gravity = 9.81;
  double max_torque = 1.5;
};

/// State (theta, omega), theta = 0 upright: omega' = g/l sin(theta) + u/(m l^2).
ControlAffineSystem inverted_pendulum_system(const PendulumParams& params);

}  // namespace cbvf
