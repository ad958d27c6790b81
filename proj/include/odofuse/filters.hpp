#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "odofuse/covariance.hpp"
#include "odofuse/error.hpp"
#include "odofuse/noise.hpp"
#include "odofuse/trace.hpp"

namespace odofuse {

/// Fixed blending pair of the recursive filter, w1 + w2 = 1.
struct AsymptoticWeights {
  double w1 = 1.0;
  double w2 = 0.0;
};

/// Variance-optimal blending pair in the long-run limit:
/// w1 = (lambda*r + 2 - sqrt(lambda*r*(lambda*r + 4))) / 2.
inline AsymptoticWeights optimal_asymptotic_weights(double r, int lambda) {
  if (r < 0 || lambda < 1) throw ConfigError("asymptotic weights: need r >= 0, lambda >= 1");
  const double lr = lambda * r;
  const double w1 = (lr + 2.0 - std::sqrt(lr * (lr + 4.0))) / 2.0;
  return AsymptoticWeights{w1, 1.0 - w1};
}

/// Long-run variance of the recursive filter at GPS epochs:
/// sigma_od^2 * (lambda*w1^2 + w2^2/r) / (1 - w1^2).
inline double asymptotic_variance(const AsymptoticWeights& w, int lambda, const NoiseSpec& noise) {
  const double r = noise.ratio();
  if (r <= 0) throw ConfigError("asymptotic variance: requires r > 0");
  return noise.var_od() * (lambda * w.w1 * w.w1 + (w.w2 * w.w2) / r) / (1.0 - w.w1 * w.w1);
}

enum class WeightKind { truncated, optimal };

/// Weight vector over the window's single-fix estimators. For the optimal
/// kind, c is the constraint constant (1/c is the estimator variance).
struct WindowWeights {
  WeightKind kind = WeightKind::truncated;
  Eigen::VectorXd values;
  double c = 0.0;
};

/// Geometric window weights: w_j = w2*w1^(j-1) for j < N, w_N = w1^(N-1).
/// They telescope to exactly one.
inline WindowWeights truncated_weights(int n_fixes, const AsymptoticWeights& w) {
  if (n_fixes < 1) throw ConfigError("truncated weights: N must be >= 1");
  WindowWeights out;
  out.kind = WeightKind::truncated;
  out.values.resize(n_fixes);
  double pow_w1 = 1.0;
  for (int j = 0; j < n_fixes; ++j) {
    out.values(j) = w.w2 * pow_w1;
    if (j + 1 < n_fixes) pow_w1 *= w.w1;
  }
  out.values(n_fixes - 1) = pow_w1;
  return out;
}

/// Closed-form variance of the truncated filter at phase d:
/// sigma_gps^2 * [ ((1-w1)^2 + 2 w1^(2N-1) (1-w1)) / (1-w1^2)
///               + r (d + lambda (w1^2 - w1^(2N)) / (1-w1^2)) ].
inline double variance_truncated(int n_fixes, int phase, int lambda, const NoiseSpec& noise) {
  if (n_fixes < 1) throw ConfigError("variance: N must be >= 1");
  const double r = noise.ratio();
  const AsymptoticWeights w = optimal_asymptotic_weights(r, lambda);
  const double w1 = w.w1;
  const double w1_2n = std::pow(w1, 2 * n_fixes);
  const double denom = 1.0 - w1 * w1;
  const double unit_term = ((1.0 - w1) * (1.0 - w1) + 2.0 * (w1_2n / w1) * (1.0 - w1)) / denom;
  const double drift_term = r * (phase + lambda * (w1 * w1 - w1_2n) / denom);
  return noise.var_gps() * (unit_term + drift_term);
}

/// Minimum-variance weights over the window: solves Sigma^- v = 1,
/// c = 1' v, weights = v / c; the estimator variance is 1/c.
inline WindowWeights optimal_window_weights(const Eigen::MatrixXd& sigma_minus) {
  const long n = sigma_minus.rows();
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
  const Eigen::VectorXd v = spd_solve(sigma_minus, ones);
  WindowWeights out;
  out.kind = WeightKind::optimal;
  out.c = ones.dot(v);
  out.values = v / out.c;
  return out;
}

/// Per-epoch estimates of one estimator over a trace.
struct EstimateSeries {
  std::string kind;             ///< estimator tag ("rt_opt", "kf", ...)
  int window = 0;               ///< requested N (0 when not applicable)
  std::vector<double> xhat_m;   ///< length n+1
  std::vector<double> var_m2;   ///< analytic variance, empty when unavailable
  std::vector<int> n_minus;     ///< effective backward fixes per epoch (empty if n/a)
  std::vector<int> n_plus;      ///< effective forward fixes per epoch
  bool degraded_init = false;   ///< initialized without a t0 GPS fix
};

struct PointEstimate {
  double xhat_m = 0.0;
  double var_m2 = 0.0;
  int n_minus = 0;
  int n_plus = 0;
};

/// Single-fix dead-reckoned estimator anchored at the j-th fix at or
/// before epoch i: y_gps(anchor) + y_od(t_i) - y_od(anchor).
inline double backward_estimate(const SensorTrace& trace, long i, int j) {
  const long anchor = gps_index_before(i, trace.grid.lambda, j);
  if (anchor < 0) throw WindowError("backward window exceeds trace start");
  return trace.gps_at(anchor / trace.grid.lambda) + trace.odometer_m[i] - trace.odometer_m[anchor];
}

/// Thread-safe cache of optimal window weights keyed by (N, phase).
class OptimalWeightTable {
 public:
  OptimalWeightTable(const NoiseSpec& noise, int lambda) : noise_(noise), lambda_(lambda) {}

  const WindowWeights& at(int n_fixes, int phase) const {
    const auto key = std::make_pair(n_fixes, phase);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      WindowSpec spec{n_fixes, phase, lambda_, noise_};
      it = cache_.emplace(key, optimal_window_weights(build_sigma_minus(spec))).first;
    }
    return it->second;
  }

 private:
  NoiseSpec noise_;
  int lambda_;
  mutable std::mutex mutex_;
  mutable std::map<std::pair<int, int>, WindowWeights> cache_;
};

namespace detail {

inline double initial_estimate(const SensorTrace& trace, bool* degraded) {
  if (trace.t0_fix && trace.has_fix(0)) {
    if (degraded) *degraded = false;
    return trace.gps_m[0];
  }
  if (degraded) *degraded = true;
  return trace.odometer_m[0];
}

}  // namespace detail

/// Recursive fixed-gain filter: dead-reckons through odometer increments and
/// blends each available GPS fix with weight w2. Initialized from the t0 fix
/// when present, from y_od(t0) otherwise. A missing mid-trip fix falls back
/// to the dead-reckoning branch.
inline EstimateSeries filter_recursive(const SensorTrace& trace, const AsymptoticWeights& w,
                                       const NoiseSpec& noise) {
  trace.validate();
  if (trace.odometer_m.empty()) throw InputError("recursive filter: empty trace");
  const long n = trace.grid.n;
  EstimateSeries series;
  series.kind = "rt_inf";
  series.xhat_m.resize(n + 1);
  series.var_m2.resize(n + 1);
  bool degraded = false;
  double xhat = detail::initial_estimate(trace, &degraded);
  series.degraded_init = degraded;
  double var = degraded ? 0.0 : noise.var_gps();
  series.xhat_m[0] = xhat;
  series.var_m2[0] = var;
  for (long i = 1; i <= n; ++i) {
    const double od_inc = trace.odometer_m[i] - trace.odometer_m[i - 1];
    xhat += od_inc;
    var += noise.var_od();
    if (trace.grid.is_gps_epoch(i) && trace.has_fix(i / trace.grid.lambda)) {
      xhat = w.w1 * xhat + w.w2 * trace.gps_m[i / trace.grid.lambda];
      var = w.w1 * w.w1 * var + w.w2 * w.w2 * noise.var_gps();
    }
    series.xhat_m[i] = xhat;
    series.var_m2[i] = var;
  }
  return series;
}

/// Truncated filter at one epoch: geometric-weight combination of the
/// n_eff = min(N, available) most recent backward estimators.
inline PointEstimate filter_truncated_at(const SensorTrace& trace, const NoiseSpec& noise, long i,
                                         int n_fixes) {
  if (n_fixes < 1) throw ConfigError("truncated filter: N must be >= 1");
  const int avail = trace.backward_fixes(i);
  if (avail == 0) throw NoAbsoluteFixError("truncated filter: no GPS fix at or before epoch");
  const int n_eff = std::min(n_fixes, avail);
  const AsymptoticWeights w = optimal_asymptotic_weights(noise.ratio(), trace.grid.lambda);
  const WindowWeights weights = truncated_weights(n_eff, w);
  double xhat = 0.0;
  for (int j = 1; j <= n_eff; ++j) {
    xhat += weights.values(j - 1) * backward_estimate(trace, i, j);
  }
  PointEstimate out;
  out.xhat_m = xhat;
  out.var_m2 = variance_truncated(n_eff, gps_phase(i, trace.grid.lambda), trace.grid.lambda, noise);
  out.n_minus = n_eff;
  return out;
}

/// Minimum-variance filter at one epoch; variance is 1/c for the effective
/// window.
inline PointEstimate filter_optimal_at(const SensorTrace& trace, const NoiseSpec& noise, long i,
                                       int n_fixes, const OptimalWeightTable* table = nullptr) {
  if (n_fixes < 1) throw ConfigError("optimal filter: N must be >= 1");
  const int avail = trace.backward_fixes(i);
  if (avail == 0) throw NoAbsoluteFixError("optimal filter: no GPS fix at or before epoch");
  const int n_eff = std::min(n_fixes, avail);
  const int d = gps_phase(i, trace.grid.lambda);
  OptimalWeightTable local(noise, trace.grid.lambda);
  const OptimalWeightTable& weights_from = table ? *table : local;
  const WindowWeights& weights = weights_from.at(n_eff, d);
  double xhat = 0.0;
  for (int j = 1; j <= n_eff; ++j) {
    xhat += weights.values(j - 1) * backward_estimate(trace, i, j);
  }
  PointEstimate out;
  out.xhat_m = xhat;
  out.var_m2 = 1.0 / weights.c;
  out.n_minus = n_eff;
  return out;
}

namespace detail {

template <typename PointFn>
EstimateSeries windowed_series(const SensorTrace& trace, const std::string& kind, int n_fixes,
                               PointFn&& point) {
  trace.validate();
  const long n = trace.grid.n;
  EstimateSeries series;
  series.kind = kind;
  series.window = n_fixes;
  series.xhat_m.resize(n + 1);
  series.var_m2.resize(n + 1);
  series.n_minus.resize(n + 1);
  series.n_plus.resize(n + 1);
  for (long i = 0; i <= n; ++i) {
    const PointEstimate p = point(i);
    series.xhat_m[i] = p.xhat_m;
    series.var_m2[i] = p.var_m2;
    series.n_minus[i] = p.n_minus;
    series.n_plus[i] = p.n_plus;
  }
  return series;
}

}  // namespace detail

inline EstimateSeries filter_truncated_series(const SensorTrace& trace, const NoiseSpec& noise,
                                              int n_fixes) {
  return detail::windowed_series(trace, "rt_trunc", n_fixes, [&](long i) {
    return filter_truncated_at(trace, noise, i, n_fixes);
  });
}

inline EstimateSeries filter_optimal_series(const SensorTrace& trace, const NoiseSpec& noise,
                                            int n_fixes,
                                            const OptimalWeightTable* table = nullptr) {
  OptimalWeightTable local(noise, trace.grid.lambda);
  const OptimalWeightTable* use = table ? table : &local;
  return detail::windowed_series(trace, "rt_opt", n_fixes, [&](long i) {
    return filter_optimal_at(trace, noise, i, n_fixes, use);
  });
}

}  // namespace odofuse
