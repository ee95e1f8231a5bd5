#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "cbvf/dynamics.hpp"
#include "cbvf/errors.hpp"

using namespace cbvf;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ControlAffineSystem integrator() {
  return ControlAffineSystem(
      "integrator", 1, 1, [](const Vec&) { return Vec::Zero(1); },
      [](const Vec&) { return Mat::Identity(1, 1); }, vec({-1}), vec({1}));
}

}  // namespace

TEST(Rk4, StaticSystemDoesNotMove) {
  const ControlAffineSystem s(
      "static", 2, 1, [](const Vec&) { return Vec::Zero(2); }, [](const Vec&) { return Mat::Zero(2, 1); },
      vec({-1}), vec({1}));
  const Vec x = vec({0.3, -2.0});
  for (double dt : {1e-3, 0.5, 10.0}) EXPECT_EQ(step_rk4(s, x, vec({0.7}), dt), x);
}

TEST(Rk4, ConstantRateIsExact) {
  EXPECT_EQ(step_rk4(integrator(), vec({0}), vec({1}), 0.1)[0], 0.1);
}

TEST(Rk4, DubinsStraightLine) {
  const Vec x = step_rk4(dubins_system(1.0), vec({0, 0, 0}), vec({0}), 0.5);
  EXPECT_NEAR(x[0], 0.5, 1e-12);
  EXPECT_NEAR(x[1], 0.0, 1e-12);
  EXPECT_NEAR(x[2], 0.0, 1e-12);
}

TEST(Rk4, InputsOutsideTheBoxAreClamped) {
  EXPECT_DOUBLE_EQ(step_rk4(integrator(), vec({0}), vec({5}), 0.1)[0], 0.1);
}

TEST(Rk4, NonPositiveStepThrows) {
  EXPECT_THROW(step_rk4(integrator(), vec({0}), vec({0}), 0.0), ConfigError);
}

TEST(Rk4, BlowUpThrowsIntegrationError) {
  const ControlAffineSystem s(
      "blowup", 1, 1, [](const Vec& x) { return Vec::Constant(1, x[0] * x[0] * x[0]); },
      [](const Vec&) { return Mat::Zero(1, 1); }, vec({-1}), vec({1}));
  EXPECT_THROW(step_rk4(s, vec({1e120}), vec({0}), 1.0), IntegrationError);
}

TEST(Rk4, FourthOrderConvergence) {
  const ControlAffineSystem p = inverted_pendulum_system(PendulumParams{});
  const Vec x0 = vec({0.2, 0.0});
  const Vec u = vec({0.5});
  const auto run = [&](double dt) {
    Vec x = x0;
    const int steps = static_cast<int>(std::lround(1.0 / dt));
    for (int k = 0; k < steps; ++k) x = step_rk4(p, x, u, dt);
    return x;
  };
  const Vec reference = run(1.0 / 4096);
  const double e1 = (run(0.05) - reference).norm();
  const double e2 = (run(0.025) - reference).norm();
  const double ratio = e1 / e2;
  EXPECT_GE(ratio, 8.0);
  EXPECT_LE(ratio, 32.0);
}

TEST(Rk4, PeriodicComponentStaysInRange) {
  const ControlAffineSystem d = dubins_system(1.0);
  Vec x = vec({0, 0, 3.0});
  for (int k = 0; k < 200; ++k) {
    x = step_rk4(d, x, vec({0.5}), 0.1);
    EXPECT_GE(x[2], -std::numbers::pi);
    EXPECT_LT(x[2], std::numbers::pi);
  }
}

TEST(Wrap, DifferenceTakesShortestArc) {
  const ControlAffineSystem d = dubins_system(1.0);
  const Vec a = vec({0, 0, 3.1});
  const Vec b = vec({0, 0, -3.1});
  EXPECT_NEAR(d.difference(a, b)[2], 6.2 - 2 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(d.wrap(vec({0, 0, 2 * std::numbers::pi + 0.25}))[2], 0.25, 1e-12);
}

TEST(Acc, ZeroRelativeSpeedStopsGap) {
  const AccParams p;
  const ControlAffineSystem s = acc_system(p);
  EXPECT_EQ(s.rate(vec({p.lead_speed, 50}), vec({300}))[1], 0.0);
}

TEST(Acc, FrictionlessBoundAttained) {
  const AccParams p = AccParams::frictionless();
  const ControlAffineSystem s = acc_system(p);
  EXPECT_DOUBLE_EQ(s.input_hi()[0], p.mass * p.cd * p.gravity);
  EXPECT_NEAR(s.rate(vec({10, 50}), s.input_hi())[0], p.cd * p.gravity, 1e-12);
}

TEST(Acc, DefaultFrictionByHand) {
  const ControlAffineSystem s = acc_system(AccParams{});
  // F_r(20) = 0.1 * 400 + 5 * 20 + 0.25 = 140.25
  const Vec r = s.rate(vec({20, 40}), vec({0}));
  EXPECT_NEAR(r[0], -140.25 / 1650.0, 1e-15);
  EXPECT_EQ(r[1], -6.0);
}

TEST(Acc, RejectsLeadFasterThanDesired) {
  AccParams p;
  p.lead_speed = 30;
  EXPECT_THROW(acc_system(p), ConfigError);
}

TEST(Dubins, HeadingRates) {
  const ControlAffineSystem d = dubins_system(2.0);
  const Vec r0 = d.rate(vec({0, 0, 0}), vec({0}));
  EXPECT_DOUBLE_EQ(r0[0], 2.0);
  EXPECT_DOUBLE_EQ(r0[1], 0.0);
  const Vec r1 = d.rate(vec({0, 0, std::numbers::pi / 2}), vec({0}));
  EXPECT_NEAR(r1[0], 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(r1[1], 2.0);
  Vec x = vec({0, 0, 0});
  for (int k = 0; k < 10; ++k) x = step_rk4(d, x, vec({0.5}), 0.1);
  EXPECT_NEAR(x[2], 0.5, 1e-12);
}

TEST(Quadrotor, HoverFreeFallAndTorque) {
  const QuadrotorParams p;
  const ControlAffineSystem q = planar_quadrotor_system(p);
  const double hover = p.mass * p.gravity / 2;
  const Vec r = q.rate(vec({1, 0, 0, 0}), vec({hover, hover}));
  EXPECT_NEAR(r[1], 0.0, 1e-12);
  EXPECT_NEAR(r[3], 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(q.rate(vec({1, 0, 0.3, 0}), vec({0, 0}))[1], -p.gravity);
  EXPECT_NEAR(q.rate(vec({1, 0, 0, 0}), vec({0, p.max_thrust}))[3], p.max_thrust * p.arm / p.inertia, 1e-12);
}

TEST(Pendulum, EquilibriumAndGravity) {
  const PendulumParams p;
  const ControlAffineSystem s = inverted_pendulum_system(p);
  EXPECT_EQ(s.rate(vec({0, 0}), vec({0})).norm(), 0.0);
  EXPECT_NEAR(s.rate(vec({std::numbers::pi / 2, 0}), vec({0}))[1], p.gravity / p.length, 1e-12);
  const double theta = 0.4;
  EXPECT_NEAR(s.rate(vec({theta, 0}), s.input_hi())[1],
              p.gravity / p.length * std::sin(theta) + p.max_torque / (p.mass * p.length * p.length),
              1e-12);
}

TEST(ControlAffinity, RateIsAffineInInput) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unit(0, 1);
  const std::vector<ControlAffineSystem> systems = {
      acc_system(AccParams{}), dubins_system(1.0), planar_quadrotor_system(QuadrotorParams{}),
      inverted_pendulum_system(PendulumParams{})};
  for (const ControlAffineSystem& s : systems) {
    for (int trial = 0; trial < 200; ++trial) {
      Vec x(s.state_dim());
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = -3 + 6 * unit(rng);
      Vec u1(s.input_dim()), u2(s.input_dim());
      for (Eigen::Index i = 0; i < u1.size(); ++i) {
        const double lo = s.input_lo()[i], hi = s.input_hi()[i];
        u1[i] = lo + (hi - lo) * unit(rng);
        u2[i] = lo + (hi - lo) * unit(rng);
      }
      const double lambda = unit(rng);
      const Vec lhs = s.rate(x, lambda * u1 + (1 - lambda) * u2);
      const Vec rhs = lambda * s.rate(x, u1) + (1 - lambda) * s.rate(x, u2);
      EXPECT_LE((lhs - rhs).norm(), 1e-12 * std::max(1.0, rhs.norm())) << s.name();
    }
  }
}

TEST(ValidateOnGrid, FiniteLipschitzEstimate) {
  const Grid g({-1, -2}, {1, 2}, {11, 11}, {false, false});
  const double lip = validate_on_grid(inverted_pendulum_system(PendulumParams{}), g);
  EXPECT_GT(lip, 0.0);
  EXPECT_TRUE(std::isfinite(lip));
  const Grid wrong({0}, {1}, {3}, {false});
  EXPECT_THROW(validate_on_grid(inverted_pendulum_system(PendulumParams{}), wrong), ConfigError);
}
