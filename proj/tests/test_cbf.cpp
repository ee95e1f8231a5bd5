#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cbvf/cbf.hpp"
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

TEST(AccConstraint, Examples) {
  const ScalarStateFunction l = acc_constraint(1.8);
  EXPECT_EQ(l(vec({0, 0})), 0.0);
  EXPECT_NEAR(l(vec({10, 18})), 0.0, 1e-14);
  EXPECT_NEAR(l(vec({10, 20})), 2.0, 1e-14);
  EXPECT_EQ(l.provenance, Provenance::Constraint);
}

TEST(AccAnalytic, Examples) {
  const AccParams p;
  const ScalarStateFunction h = acc_analytic_cbf(p);
  EXPECT_NEAR(h(vec({p.lead_speed, 40})), 40 - p.look_ahead * p.lead_speed, 1e-12);
  EXPECT_NEAR(h(vec({p.lead_speed, p.look_ahead * p.lead_speed})), 0.0, 1e-12);
  // 40 - 36 - 36 / 5.886
  EXPECT_NEAR(h(vec({20, 40})), 4.0 - 36.0 / (2 * 0.3 * 9.81), 1e-12);
  EXPECT_TRUE(h.conservative);
  EXPECT_EQ(h.provenance, Provenance::AnalyticCbf);
}

TEST(Ellipse, Examples) {
  const ScalarStateFunction l = ellipse_constraint({1, 2}, {1.5, 1.0});
  EXPECT_EQ(l(vec({1, 2, 0.3})), -1.0);
  EXPECT_NEAR(l(vec({2.5, 2, -1.0})), 0.0, 1e-15);
  EXPECT_NEAR(l(vec({1 + 30, 2, 0})) + 1, 4 * (l(vec({1 + 15, 2, 0})) + 1), 1e-9);
  EXPECT_THROW(ellipse_constraint({0, 0}, {0, 1}), ConfigError);
}

TEST(Slab, Examples) {
  const ScalarStateFunction l = slab_constraint(0, 0.5, 3.5);
  EXPECT_EQ(l(vec({2, 9, 9, 9})), 1.5);
  EXPECT_EQ(l(vec({0.5, 0, 0, 0})), 0.0);
  EXPECT_EQ(l(vec({4, 0, 0, 0})), -0.5);
}

TEST(Lyapunov, ScalarIntegratorGivesUnitP) {
  // K = -1 for Q = R = 1, so Q + K^T R K = 2 and 2 * (-1) * P = -2.
  const LyapunovCbf c = lyapunov_cbf(integrator(), vec({0.3}), Mat::Identity(1, 1), Mat::Identity(1, 1), 2.0);
  EXPECT_NEAR(c.lqr.K(0, 0), -1.0, 1e-9);
  EXPECT_NEAR(c.P(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(c.function(vec({0.3})), 2.0, 1e-12);
  EXPECT_NEAR(c.function(vec({1.3})), 1.0, 1e-9);
}

TEST(Lyapunov, QuadrotorProperties) {
  const ControlAffineSystem q = planar_quadrotor_system(QuadrotorParams{});
  const Vec point = vec({2, 0, 0, 0});
  const LyapunovCbf c = lyapunov_cbf(q, point, Mat::Identity(4, 4), Mat::Identity(2, 2), 3.0);
  EXPECT_NEAR(c.function(point), 3.0, 1e-12);
  EXPECT_LE(c.lyapunov_residual, 1e-8);
  const Mat Acl = c.linearization.A + c.linearization.B * c.lqr.K;
  EXPECT_LE((Acl.transpose() * c.P + c.P * Acl + c.closed_loop_q).norm() / c.closed_loop_q.norm(), 1e-8);
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 50; ++trial) {
    Vec dir(4);
    for (Eigen::Index i = 0; i < 4; ++i) dir[i] = n(rng);
    // Unit length keeps the angle offset inside one period.
    dir.normalize();
    double previous = c.function(point);
    for (double s = 0.1; s < 2; s += 0.1) {
      const double v = c.function(point + s * dir);
      EXPECT_LT(v, previous);
      previous = v;
    }
  }
  EXPECT_THROW(lyapunov_cbf(q, point, Mat::Identity(4, 4), Mat::Identity(2, 2), 0.0), ConfigError);
}

TEST(Backup, SafeFixedPoint) {
  BackupPolicySpec spec;
  spec.policy = [](const Vec&) { return vec({0}); };
  spec.horizon = 1.0;
  spec.backup_set = [](const Vec& x) { return 0.5 - std::abs(x[0]); };
  const ScalarStateFunction l = slab_constraint(0, -1, 1);
  const BackupValue v = evaluate_backup(integrator(), spec, l, vec({0.2}));
  EXPECT_DOUBLE_EQ(v.path_min, 0.8);
  EXPECT_DOUBLE_EQ(v.terminal, 0.3);
  EXPECT_DOUBLE_EQ(v.value(), 0.3);
}

TEST(Backup, RolloutLeavingConstraintIsNegative) {
  BackupPolicySpec spec;
  spec.policy = [](const Vec&) { return vec({1}); };
  spec.horizon = 2.0;
  spec.backup_set = [](const Vec&) { return 10.0; };
  const ScalarStateFunction l = slab_constraint(0, -1, 1);
  const BackupValue v = evaluate_backup(integrator(), spec, l, vec({0.5}));
  EXPECT_NEAR(v.path_min, -1.5, 1e-12);
  EXPECT_LT(v.value(), 0.0);
}

TEST(Backup, PendulumUprightIsConstant) {
  const ControlAffineSystem p = inverted_pendulum_system(PendulumParams{});
  const PendulumBackup b = pendulum_lqr_backup(p, 2.0, 0.01, 0.0);
  const ScalarStateFunction l = slab_constraint(0, -0.5, 0.5);
  const BackupValue v = evaluate_backup(p, b.spec, l, vec({0, 0}));
  EXPECT_DOUBLE_EQ(v.value(), std::min(l(vec({0, 0})), b.spec.backup_set(vec({0, 0}))));
  EXPECT_GT(b.level, 0.0);
}

TEST(Backup, PathMinNonIncreasingInHorizon) {
  const ControlAffineSystem p = inverted_pendulum_system(PendulumParams{});
  const ScalarStateFunction l = slab_constraint(0, -0.5, 0.5);
  const Grid g({-1, -2}, {1, 2}, {21, 21}, {false, false});
  std::vector<double> previous(g.size(), INFINITY);
  for (double horizon : {0.1, 0.2, 0.5, 1.0}) {
    const PendulumBackup b = pendulum_lqr_backup(p, horizon, 0.01, 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double v = evaluate_backup(p, b.spec, l, g.node(i)).path_min;
      EXPECT_LE(v, previous[i] + 1e-12);
      previous[i] = v;
    }
  }
}

TEST(Backup, PendulumFieldIsSignConsistent) {
  const ControlAffineSystem p = inverted_pendulum_system(PendulumParams{});
  const ScalarStateFunction l = slab_constraint(0, -0.5, 0.5);
  const Grid g({-1, -2}, {1, 2}, {41, 41}, {false, false});
  const PendulumBackup b = pendulum_lqr_backup(p, 0.5, 0.01, 0.0);
  const ValueField h = backup_cbf(p, b.spec, l, g);
  EXPECT_EQ(sign_consistency_violations(h, sample(g, l.evaluate)), 0u);
  EXPECT_GT(safe_node_count(h), 0u);
}

TEST(Masks, Examples) {
  const Grid g({-3, -3, 0}, {3, 3, 1}, {13, 13, 3}, {false, false, false});
  const ValueField positive = sample(g, [](const Vec&) { return 0.5; });
  for (bool b : zero_superlevel_set(positive)) EXPECT_TRUE(b);

  const ScalarStateFunction e = ellipse_constraint({0, 0}, {1.5, 1.0});
  const ValueField ell = sample(g, e.evaluate);
  const std::vector<bool> mask = zero_superlevel_set(ell);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(mask[i], e(g.node(i)) >= 0.0);

  const ScalarStateFunction s = slab_constraint(0, -2, 2);
  const ValueField slab = sample(g, s.evaluate);
  const ValueField both = sample(g, [&](const Vec& x) { return std::min(e(x), s(x)); });
  const std::vector<bool> ms = zero_superlevel_set(slab);
  const std::vector<bool> mb = zero_superlevel_set(both);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(mb[i], mask[i] && ms[i]);
  EXPECT_EQ(safe_node_count(positive), g.size());
}

TEST(Masks, SignConsistencyCountsViolations) {
  const Grid g({0}, {1}, {4}, {false});
  const ValueField h(g, {1, -1, 1, 0});
  const ValueField l(g, {1, 1, -1, -2});
  EXPECT_EQ(sign_consistency_violations(h, l), 2u);
}
