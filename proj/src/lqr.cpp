#include "cbvf/lqr.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "cbvf/errors.hpp"

namespace cbvf {

namespace {

// Solves M X + X M^T = C for square M via the Kronecker form.
Mat solve_sylvester_symmetric(const Mat& M, const Mat& C) {
  const Eigen::Index n = M.rows();
  const Mat I = Mat::Identity(n, n);
  Mat K = Mat::Zero(n * n, n * n);
  // vec(M X) = (I kron M) vec(X);  vec(X M^T) = (M kron I) vec(X).
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) += I(i, j) * M + M(i, j) * I;
    }
  }
  const Eigen::Map<const Vec> c(C.data(), n * n);
  Eigen::FullPivLU<Mat> lu(K);
  if (!lu.isInvertible()) throw ConfigError("Lyapunov equation is singular");
  Vec x = lu.solve(c);
  Mat X = Eigen::Map<Mat>(x.data(), n, n);
  return 0.5 * (X + X.transpose());
}

double riccati_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& Rinv, const Mat& P) {
  const Mat res = A.transpose() * P + P * A - P * B * Rinv * B.transpose() * P + Q;
  const double scale = std::max({1.0, Q.norm(), (A.transpose() * P).norm()});
  return res.norm() / scale;
}

}  // namespace

Vec trim_input(const ControlAffineSystem& system, const Vec& x, double tol) {
  const Vec f = system.drift(x);
  const Mat g = system.actuation(x);
  const Vec u = g.completeOrthogonalDecomposition().solve(-f);
  const double residual = (f + g * u).norm();
  if (residual > tol * std::max(1.0, f.norm())) {
    throw ConfigError("state " + format_state(x) + " is not an equilibrium of " + system.name() +
                      " for any input");
  }
  return u;
}

Linearization linearize(const ControlAffineSystem& system, const Vec& x, const Vec& u,
                        double step) {
  const auto n = static_cast<Eigen::Index>(system.state_dim());
  const auto m = static_cast<Eigen::Index>(system.input_dim());
  Linearization lin{Mat(n, n), Mat(n, m), x, u};
  for (Eigen::Index j = 0; j < n; ++j) {
    Vec xp = x, xm = x;
    xp[j] += step;
    xm[j] -= step;
    lin.A.col(j) = (system.rate(xp, u) - system.rate(xm, u)) / (2.0 * step);
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    Vec up = u, um = u;
    up[j] += step;
    um[j] -= step;
    lin.B.col(j) = (system.rate(x, up) - system.rate(x, um)) / (2.0 * step);
  }
  return lin;
}

Mat solve_lyapunov(const Mat& A, const Mat& Q) {
  if (A.rows() != A.cols() || Q.rows() != A.rows() || Q.cols() != A.cols()) {
    throw ConfigError("Lyapunov equation dimensions disagree");
  }
  return solve_sylvester_symmetric(A.transpose(), -Q);
}

bool is_stabilizable(const Mat& A, const Mat& B, double tol) {
  const Eigen::Index n = A.rows();
  Eigen::ComplexEigenSolver<Mat> eig(A);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = eig.eigenvalues()[i];
    if (lambda.real() < -tol) continue;
    Eigen::MatrixXcd pbh(n, n + B.cols());
    pbh.leftCols(n) = A.cast<std::complex<double>>() -
                      lambda * Eigen::MatrixXcd::Identity(n, n);
    pbh.rightCols(B.cols()) = B.cast<std::complex<double>>();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
    const auto& s = svd.singularValues();
    if (s[n - 1] <= tol * std::max(1.0, s[0])) return false;
  }
  return true;
}

LqrSolution solve_lqr(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, double tol,
                      int max_iterations) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != B.cols() || R.cols() != B.cols()) {
    throw ConfigError("LQR matrix dimensions disagree");
  }
  Eigen::LLT<Mat> r_llt(R);
  if (r_llt.info() != Eigen::Success) throw ConfigError("LQR input weight must be positive definite");
  if (!is_stabilizable(A, B)) throw ConfigError("linearization is not stabilizable");
  const Mat Rinv = r_llt.solve(Mat::Identity(R.rows(), R.cols()));

  // Bass seed: with beta above the spectral radius, W solving
  // (A + beta I) W + W (A + beta I)^T = 2 B B^T gives A - B B^T W^{-1} Hurwitz.
  const double beta = A.norm() + 1.0;
  const Mat shifted = A + beta * Mat::Identity(n, n);
  const Mat W = solve_sylvester_symmetric(shifted, 2.0 * B * B.transpose());
  Eigen::FullPivLU<Mat> w_lu(W);
  if (!w_lu.isInvertible()) throw ConfigError("linearization is not controllable; no LQR seed");
  Mat K = -B.transpose() * w_lu.inverse();

  LqrSolution sol;
  for (int it = 1; it <= max_iterations; ++it) {
    const Mat closed = A + B * K;
    sol.P = solve_lyapunov(closed, Q + K.transpose() * R * K);
    K = -Rinv * B.transpose() * sol.P;
    sol.riccati_residual = riccati_residual(A, B, Q, Rinv, sol.P);
    sol.iterations = it;
    if (sol.riccati_residual <= tol) break;
  }
  if (!(sol.riccati_residual <= tol)) {
    throw ConfigError("Riccati iteration did not converge (residual " +
                      std::to_string(sol.riccati_residual) + ")");
  }
  sol.K = K;
  return sol;
}

}  // namespace cbvf
