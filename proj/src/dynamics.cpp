#include "cbvf/dynamics.hpp"

#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "cbvf/errors.hpp"

namespace cbvf {

ControlAffineSystem::ControlAffineSystem(std::string name, std::size_t state_dim,
                                         std::size_t input_dim, DriftFn drift,
                                         ActuationFn actuation, Vec input_lo, Vec input_hi,
                                         std::vector<PeriodicComponent> periodic)
    : name_(std::move(name)),
      state_dim_(state_dim),
      input_dim_(input_dim),
      drift_(std::move(drift)),
      actuation_(std::move(actuation)),
      input_lo_(std::move(input_lo)),
      input_hi_(std::move(input_hi)),
      periodic_(std::move(periodic)) {
  if (state_dim_ == 0 || input_dim_ == 0) throw ConfigError("system dimensions must be positive");
  if (static_cast<std::size_t>(input_lo_.size()) != input_dim_ ||
      static_cast<std::size_t>(input_hi_.size()) != input_dim_) {
    throw ConfigError("input bounds must have input_dim entries");
  }
  for (std::size_t i = 0; i < input_dim_; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (!(input_lo_[ii] <= input_hi_[ii])) {
      throw ConfigError("input channel " + std::to_string(i) + " has lo > hi");
    }
  }
  for (const auto& p : periodic_) {
    if (p.index >= state_dim_ || !(p.hi > p.lo)) throw ConfigError("bad periodic component");
  }
}

Vec ControlAffineSystem::drift(const Vec& x) const { return drift_(x); }
Mat ControlAffineSystem::actuation(const Vec& x) const { return actuation_(x); }

Vec ControlAffineSystem::clamp_input(const Vec& u) const {
  return u.cwiseMax(input_lo_).cwiseMin(input_hi_);
}

bool ControlAffineSystem::input_in_box(const Vec& u, double tol) const {
  return ((u - input_lo_).array() >= -tol).all() && ((input_hi_ - u).array() >= -tol).all();
}

Vec ControlAffineSystem::wrap(Vec x) const {
  for (const auto& p : periodic_) {
    const auto i = static_cast<Eigen::Index>(p.index);
    const double period = p.hi - p.lo;
    double v = std::fmod(x[i] - p.lo, period);
    if (v < 0.0) v += period;
    x[i] = p.lo + v;
    if (x[i] >= p.hi) x[i] = p.lo;
  }
  return x;
}

Vec ControlAffineSystem::difference(const Vec& a, const Vec& b) const {
  Vec d = a - b;
  for (const auto& p : periodic_) {
    const auto i = static_cast<Eigen::Index>(p.index);
    const double period = p.hi - p.lo;
    d[i] = std::remainder(d[i], period);
  }
  return d;
}

double validate_on_grid(const ControlAffineSystem& system, const Grid& grid) {
  if (grid.dim() != system.state_dim()) {
    throw ConfigError("grid dimension " + std::to_string(grid.dim()) +
                      " does not match system state dimension " +
                      std::to_string(system.state_dim()));
  }
  const std::size_t n = system.state_dim();
  std::vector<Vec> drift(grid.size());
  std::vector<Mat> act(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec x = grid.node(i);
    drift[i] = system.drift(x);
    act[i] = system.actuation(x);
    if (static_cast<std::size_t>(drift[i].size()) != n ||
        static_cast<std::size_t>(act[i].rows()) != n ||
        static_cast<std::size_t>(act[i].cols()) != system.input_dim()) {
      throw ConfigError("system " + system.name() + " returned wrongly shaped f or g");
    }
    if (!drift[i].allFinite() || !act[i].allFinite()) {
      throw NonFiniteError("system " + system.name() + " has non-finite f or g", x);
    }
  }
  double lipschitz = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t j = grid.neighbor(i, k, +1);
      if (j == Grid::npos) continue;
      const double h = grid.spacing(k);
      const double q = std::max((drift[j] - drift[i]).cwiseAbs().maxCoeff(),
                                (act[j] - act[i]).cwiseAbs().maxCoeff()) /
                       h;
      lipschitz = std::max(lipschitz, q);
    }
  }
  if (!std::isfinite(lipschitz)) {
    throw ConfigError("system " + system.name() + " has unbounded difference quotients");
  }
  return lipschitz;
}

Vec step_rk4(const ControlAffineSystem& system, const Vec& x, const Vec& u_in, double dt) {
  if (!(dt > 0.0)) throw ConfigError("integration step must be positive");
  Vec u = u_in;
  if (!system.input_in_box(u)) {
    spdlog::warn("input {} outside box of {}; clamped", format_state(u), system.name());
    u = system.clamp_input(u);
  }
  const Vec k1 = system.rate(x, u);
  const Vec k2 = system.rate(x + 0.5 * dt * k1, u);
  const Vec k3 = system.rate(x + 0.5 * dt * k2, u);
  const Vec k4 = system.rate(x + dt * k3, u);
  Vec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw IntegrationError("RK4 step produced a non-finite state", next);
  return system.wrap(std::move(next));
}

AccParams AccParams::frictionless() {
  AccParams p;
  p.f0 = p.f1 = p.f2 = 0.0;
  return p;
}

ControlAffineSystem acc_system(const AccParams& p) {
  if (!(p.mass > 0.0)) throw ConfigError("ACC mass must be positive");
  if (!(p.look_ahead > 0.0)) throw ConfigError("ACC look-ahead time must be positive");
  if (!(p.gravity > 0.0) || !(p.cd > 0.0) || !(p.lead_speed > 0.0)) {
    throw ConfigError("ACC gravity, cd and lead speed must be positive");
  }
  if (p.f0 < 0.0 || p.f1 < 0.0 || p.f2 < 0.0) {
    throw ConfigError("ACC friction coefficients must be non-negative");
  }
  if (!(p.lead_speed < p.desired_speed)) {
    throw ConfigError("ACC lead speed must be below the desired speed");
  }
  const double bound = p.max_force();
  Vec lo(1), hi(1);
  lo << -bound;
  hi << bound;
  return ControlAffineSystem(
      "acc", 2, 1,
      [p](const Vec& x) {
        Vec f(2);
        f << -p.friction(x[0]) / p.mass, p.lead_speed - x[0];
        return f;
      },
      [p](const Vec&) {
        Mat g(2, 1);
        g << 1.0 / p.mass, 0.0;
        return g;
      },
      lo, hi);
}

ControlAffineSystem dubins_system(double speed) {
  if (!(speed > 0.0)) throw ConfigError("Dubins speed must be positive");
  Vec lo(1), hi(1);
  lo << -0.5;
  hi << 0.5;
  return ControlAffineSystem(
      "dubins", 3, 1,
      [speed](const Vec& x) {
        Vec f(3);
        f << speed * std::cos(x[2]), speed * std::sin(x[2]), 0.0;
        return f;
      },
      [](const Vec&) {
        Mat g = Mat::Zero(3, 1);
        g(2, 0) = 1.0;
        return g;
      },
      lo, hi, {{2, -std::numbers::pi, std::numbers::pi}});
}

ControlAffineSystem planar_quadrotor_system(const QuadrotorParams& p) {
  if (!(p.mass > 0.0) || !(p.arm > 0.0) || !(p.inertia > 0.0) || !(p.max_thrust > 0.0) ||
      !(p.gravity > 0.0)) {
    throw ConfigError("quadrotor mass, arm, inertia, gravity and thrust limit must be positive");
  }
  Vec lo = Vec::Zero(2);
  Vec hi = Vec::Constant(2, p.max_thrust);
  return ControlAffineSystem(
      "quadrotor", 4, 2,
      [p](const Vec& x) {
        Vec f(4);
        f << x[1], -p.gravity, x[3], 0.0;
        return f;
      },
      [p](const Vec& x) {
        const double c = std::cos(x[2]) / p.mass;
        const double torque = p.arm / p.inertia;
        Mat g = Mat::Zero(4, 2);
        g(1, 0) = c;
        g(1, 1) = c;
        g(3, 0) = -torque;
        g(3, 1) = torque;
        return g;
      },
      lo, hi, {{2, -std::numbers::pi, std::numbers::pi}});
}

ControlAffineSystem inverted_pendulum_system(const PendulumParams& p) {
  if (!(p.mass > 0.0) || !(p.length > 0.0) || !(p.max_torque > 0.0) || !(p.gravity > 0.0)) {
    throw ConfigError("pendulum mass, length, gravity and torque limit must be positive");
  }
  Vec lo(1), hi(1);
  lo << -p.max_torque;
  hi << p.max_torque;
  return ControlAffineSystem(
      "pendulum", 2, 1,
      [p](const Vec& x) {
        Vec f(2);
        f << x[1], p.gravity / p.length * std::sin(x[0]);
        return f;
      },
      [p](const Vec&) {
        Mat g(2, 1);
        g << 0.0, 1.0 / (p.mass * p.length * p.length);
        return g;
      },
      lo, hi);
}

}  // namespace cbvf
