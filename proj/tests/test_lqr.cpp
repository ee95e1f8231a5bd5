#include <cmath>

#include <gtest/gtest.h>

#include "cbvf/errors.hpp"
#include "cbvf/lqr.hpp"

using namespace cbvf;

TEST(Lqr, DoubleIntegratorClosedForm) {
  Mat A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  const LqrSolution s = solve_lqr(A, B, Mat::Identity(2, 2), Mat::Identity(1, 1));
  const double r3 = std::sqrt(3.0);
  Mat P(2, 2);
  P << r3, 1, 1, r3;
  EXPECT_LE((s.P - P).norm(), 1e-8);
  EXPECT_NEAR(s.K(0, 0), -1.0, 1e-8);
  EXPECT_NEAR(s.K(0, 1), -r3, 1e-8);
  EXPECT_LE(s.riccati_residual, 1e-10);
}

TEST(Lqr, ScalarIntegrator) {
  const LqrSolution s = solve_lqr(Mat::Zero(1, 1), Mat::Identity(1, 1), Mat::Identity(1, 1),
                                  Mat::Identity(1, 1));
  EXPECT_NEAR(s.P(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(s.K(0, 0), -1.0, 1e-10);
}

TEST(Lqr, UnstabilizableThrows) {
  Mat A(2, 2), B(2, 1);
  A << 1, 0, 0, 2;
  B << 1, 0;
  EXPECT_FALSE(is_stabilizable(A, B));
  EXPECT_THROW(solve_lqr(A, B, Mat::Identity(2, 2), Mat::Identity(1, 1)), ConfigError);
}

TEST(Lqr, StableUncontrolledModeIsStabilizable) {
  Mat A(2, 2), B(2, 1);
  A << 1, 0, 0, -2;
  B << 1, 0;
  EXPECT_TRUE(is_stabilizable(A, B));
}

TEST(Lyapunov, ScalarEquation) {
  // 2 * (-1) * P = -2
  EXPECT_NEAR(solve_lyapunov(-Mat::Identity(1, 1), 2 * Mat::Identity(1, 1))(0, 0), 1.0, 1e-14);
}

TEST(Lyapunov, ResidualOnRandomHurwitz) {
  Mat A(3, 3);
  A << -2, 1, 0, 0, -1, 3, 0.5, 0, -4;
  const Mat Q = Mat::Identity(3, 3);
  const Mat P = solve_lyapunov(A, Q);
  EXPECT_LE((A.transpose() * P + P * A + Q).norm() / Q.norm(), 1e-10);
  EXPECT_LE((P - P.transpose()).norm(), 1e-12);
}

TEST(Linearize, PendulumAboutUpright) {
  const ControlAffineSystem p = inverted_pendulum_system(PendulumParams{});
  const Vec x = Vec::Zero(2);
  const Vec u = trim_input(p, x);
  EXPECT_NEAR(u[0], 0.0, 1e-12);
  const Linearization lin = linearize(p, x, u);
  Mat A(2, 2), B(2, 1);
  A << 0, 1, 9.81, 0;
  B << 0, 1;
  EXPECT_LE((lin.A - A).norm(), 1e-6);
  EXPECT_LE((lin.B - B).norm(), 1e-9);
}

TEST(Linearize, QuadrotorHoverTrim) {
  const QuadrotorParams params;
  const ControlAffineSystem q = planar_quadrotor_system(params);
  Vec x(4);
  x << 2, 0, 0, 0;
  const Vec u = trim_input(q, x);
  EXPECT_NEAR(u[0], params.mass * params.gravity / 2, 1e-9);
  EXPECT_NEAR(u[1], params.mass * params.gravity / 2, 1e-9);
  Vec moving(4);
  moving << 2, 1, 0, 0;
  EXPECT_THROW(trim_input(q, moving), ConfigError);
}
