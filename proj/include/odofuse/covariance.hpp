#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "odofuse/error.hpp"
#include "odofuse/noise.hpp"

namespace odofuse {

/// Parameters of one covariance window: N GPS fixes on one side, phase d
/// (0 <= d <= lambda; the forward side uses lambda - d_i), ratio lambda and
/// the sensor noise.
struct WindowSpec {
  int n_fixes = 1;
  int phase = 0;
  int lambda = 1;
  NoiseSpec noise;

  void validate() const {
    if (n_fixes < 1) throw ConfigError("window: N must be >= 1");
    if (lambda < 1) throw ConfigError("window: lambda must be >= 1");
    if (phase < 0 || phase > lambda) throw ConfigError("window: phase must be in [0, lambda]");
    if (noise.sigma_gps_m <= 0.0) {
      throw ConfigError("window: covariance construction requires sigma_gps > 0");
    }
  }
};

/// Drift-accumulation pattern shared by the window covariances:
/// entry(a,b) = d + lambda*(min(a,b) - 1) with 1-based a, b.
inline Eigen::MatrixXd build_a(int n_fixes, int phase, int lambda) {
  Eigen::MatrixXd a(n_fixes, n_fixes);
  for (int row = 0; row < n_fixes; ++row) {
    for (int col = 0; col < n_fixes; ++col) {
      a(row, col) = phase + lambda * std::min(row, col);
    }
  }
  return a;
}

/// Covariance of the backward single-fix estimators:
/// sigma_gps^2 * (I_N + r * A_N(d)).
inline Eigen::MatrixXd build_sigma_minus(const WindowSpec& spec) {
  spec.validate();
  const int n = spec.n_fixes;
  return spec.noise.var_gps() *
         (Eigen::MatrixXd::Identity(n, n) + spec.noise.ratio() * build_a(n, spec.phase, spec.lambda));
}

/// Covariance of the forward single-fix estimators:
/// sigma_gps^2 * (I_N + r * A_N(lambda - d)).
inline Eigen::MatrixXd build_sigma_plus(const WindowSpec& spec) {
  spec.validate();
  const int n = spec.n_fixes;
  return spec.noise.var_gps() *
         (Eigen::MatrixXd::Identity(n, n) +
          spec.noise.ratio() * build_a(n, spec.lambda - spec.phase, spec.lambda));
}

/// 2N x 2N block-diagonal covariance of the stacked backward/forward
/// estimators; the cross blocks are exactly zero (the two sides use
/// disjoint error terms).
inline Eigen::MatrixXd build_sigma_pp(const WindowSpec& spec) {
  const int n = spec.n_fixes;
  Eigen::MatrixXd full = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  full.topLeftCorner(n, n) = build_sigma_minus(spec);
  full.bottomRightCorner(n, n) = build_sigma_plus(spec);
  return full;
}

/// Solves M*v = rhs for symmetric positive definite M by Cholesky
/// factorization. Throws NotSpdError on a non-positive pivot; no
/// regularization is attempted.
inline Eigen::VectorXd spd_solve(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs) {
  const long n = m.rows();
  if (m.cols() != n || rhs.size() != n) {
    throw InputError("spd_solve: dimension mismatch");
  }
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (long j = 0; j < n; ++j) {
    const double d = m(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NotSpdError("spd_solve: non-positive pivot at index " + std::to_string(j));
    }
    l(j, j) = std::sqrt(d);
    for (long i = j + 1; i < n; ++i) {
      l(i, j) = (m(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  Eigen::VectorXd y(n);
  for (long i = 0; i < n; ++i) {
    y(i) = (rhs(i) - l.row(i).head(i).dot(y.head(i))) / l(i, i);
  }
  Eigen::VectorXd x(n);
  for (long i = n - 1; i >= 0; --i) {
    x(i) = (y(i) - l.col(i).tail(n - i - 1).dot(x.tail(n - i - 1))) / l(i, i);
  }
  return x;
}

/// w' * M * w.
inline double quad_form(const Eigen::VectorXd& w, const Eigen::MatrixXd& m) {
  return w.dot(m * w);
}

}  // namespace odofuse
