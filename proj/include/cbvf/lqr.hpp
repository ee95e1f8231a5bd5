#pragma once

#include "cbvf/dynamics.hpp"

namespace cbvf {

struct Linearization {
  Mat A;
  Mat B;
  Vec state;
  Vec trim_input;
};

/// Least-squares trim input: argmin_u |f(x) + g(x) u|. Throws ConfigError when
/// the residual is not small, i.e. `x` is not an equilibrium for any u.
Vec trim_input(const ControlAffineSystem& system, const Vec& x, double tol = 1e-8);

/// Central finite-difference Jacobians of f(x) + g(x) u about (x, u).
Linearization linearize(const ControlAffineSystem& system, const Vec& x, const Vec& u,
                        double step = 1e-6);

/// Solves A^T P + P A = -Q by vectorisation. A is assumed Hurwitz.
Mat solve_lyapunov(const Mat& A, const Mat& Q);

/// PBH test: every eigenvalue with non-negative real part is controllable.
bool is_stabilizable(const Mat& A, const Mat& B, double tol = 1e-9);

struct LqrSolution {
  Mat K;  ///< u = K x stabilises A + B K
  Mat P;  ///< stabilising solution of the continuous Riccati equation
  double riccati_residual = 0.0;
  int iterations = 0;
};

/// Continuous-time LQR by Newton-Kleinman iteration, seeded with a Bass
/// stabilising gain. Iterates until the relative Riccati residual is below
/// `tol`.
LqrSolution solve_lqr(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, double tol = 1e-10,
                      int max_iterations = 100);

}  // namespace cbvf
