#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "odofuse/covariance.hpp"
#include "odofuse/filters.hpp"
#include "odofuse/trace.hpp"

namespace odofuse {

/// How a smoother treats window slots that fall outside the trace.
/// - shrink: the side's window shrinks to the available fixes and the
///   weights are recomputed for the smaller window; at the last GPS epoch
///   the smoother degrades to the real-time filter.
/// - anchor: out-of-range anchor epochs are clamped to the nearest
///   available fix (the boundary fix is reused for the missing slots) while
///   the weights stay those of the nominal full window. This matches how
///   the reference results behave near the ends of a trip, where the
///   reported accuracy visibly degrades.
enum class BoundaryPolicy { shrink, anchor };

/// Single-fix estimator anchored at the j-th fix strictly after epoch i:
/// y_gps(anchor) - (y_od(anchor) - y_od(t_i)).
inline double forward_estimate(const SensorTrace& trace, long i, int j) {
  const long anchor = gps_index_after(i, trace.grid.lambda, j);
  if (anchor > trace.grid.n) throw WindowError("forward window exceeds trace end");
  return trace.gps_at(anchor / trace.grid.lambda) -
         (trace.odometer_m[anchor] - trace.odometer_m[i]);
}

/// Thm-4-style forward variance:
/// sigma_gps^2 * [ ((1-w1)^2 + 2 w1^(2N-1)(1-w1)) / (1-w1^2)
///               + r (lambda (1 - w1^(2N)) / (1-w1^2) - d) ].
inline double variance_truncated_forward(int n_fixes, int phase, int lambda,
                                         const NoiseSpec& noise) {
  if (n_fixes < 1) throw ConfigError("variance: N must be >= 1");
  const double r = noise.ratio();
  const double w1 = optimal_asymptotic_weights(r, lambda).w1;
  const double w1_2n = std::pow(w1, 2 * n_fixes);
  const double denom = 1.0 - w1 * w1;
  const double unit_term = ((1.0 - w1) * (1.0 - w1) + 2.0 * (w1_2n / w1) * (1.0 - w1)) / denom;
  const double drift_term = r * (lambda * (1.0 - w1_2n) / denom - phase);
  return noise.var_gps() * (unit_term + drift_term);
}

/// Large-window limit of the two-sided smoother variance at phase 0.
inline double asymptotic_pp_variance(const NoiseSpec& noise, int lambda) {
  const double r = noise.ratio();
  if (r <= 0) throw ConfigError("pp asymptotic variance: requires r > 0");
  const double w1 = optimal_asymptotic_weights(r, lambda).w1;
  const double denom = 1.0 - w1 * w1;
  const double unit_term = (1.0 - w1) * (1.0 - w1) / denom;
  const double v_minus = noise.var_gps() * (unit_term + r * lambda * w1 * w1 / denom);
  const double v_plus = noise.var_gps() * (unit_term + r * lambda / denom);
  return v_minus * v_plus / (v_minus + v_plus);
}

/// The 2N single-fix estimators around one epoch, sides independently
/// clamped to the fixes that exist.
struct SmootherWindow {
  Eigen::VectorXd backward;  ///< length n_minus
  Eigen::VectorXd forward;   ///< length n_plus
  int n_minus = 0;
  int n_plus = 0;
};

inline SmootherWindow backward_forward_estimates(const SensorTrace& trace, long i, int n_fixes) {
  if (n_fixes < 1) throw ConfigError("smoother window: N must be >= 1");
  SmootherWindow win;
  win.n_minus = std::min(n_fixes, trace.backward_fixes(i));
  win.n_plus = std::min(n_fixes, trace.forward_fixes(i));
  if (win.n_minus == 0 && win.n_plus == 0) {
    throw NoAbsoluteFixError("smoother window: no GPS fix on either side");
  }
  win.backward.resize(win.n_minus);
  for (int j = 1; j <= win.n_minus; ++j) win.backward(j - 1) = backward_estimate(trace, i, j);
  win.forward.resize(win.n_plus);
  for (int j = 1; j <= win.n_plus; ++j) win.forward(j - 1) = forward_estimate(trace, i, j);
  return win;
}

namespace detail {

/// First and last available GPS fix indices of a trace.
inline std::pair<long, long> fix_range(const SensorTrace& trace) {
  long first = -1, last = -1;
  for (long j = 0; j <= trace.grid.m; ++j) {
    if (trace.has_fix(j)) {
      if (first < 0) first = j;
      last = j;
    }
  }
  if (first < 0) throw NoAbsoluteFixError("trace has no GPS fix");
  return {first, last};
}

/// Window estimates under the anchor policy: anchor fix indices are clamped
/// into [first, last], duplicating the boundary fix.
inline Eigen::VectorXd anchored_side(const SensorTrace& trace, long i, int n_fixes, bool backward,
                                     long first_fix, long last_fix) {
  const int lambda = trace.grid.lambda;
  Eigen::VectorXd vals(n_fixes);
  for (int j = 1; j <= n_fixes; ++j) {
    long raw = backward ? gps_index_before(i, lambda, j) : gps_index_after(i, lambda, j);
    const long fix = std::clamp(raw / lambda, first_fix, last_fix);
    const long anchor = fix * lambda;
    vals(j - 1) = trace.gps_at(fix) + trace.odometer_m[i] - trace.odometer_m[anchor];
  }
  return vals;
}

}  // namespace detail

/// Cache of two-sided minimum-variance weights keyed by
/// (n_minus, n_plus, phase). The stacked covariance is block diagonal, so
/// the weights come from one solve per side.
class PpWeightTable {
 public:
  struct Entry {
    Eigen::VectorXd backward;
    Eigen::VectorXd forward;
    double c = 0.0;
  };

  PpWeightTable(const NoiseSpec& noise, int lambda) : noise_(noise), lambda_(lambda) {}

  const Entry& at(int n_minus, int n_plus, int phase) const {
    const auto key = std::make_tuple(n_minus, n_plus, phase);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      Entry e;
      double c = 0.0;
      if (n_minus > 0) {
        WindowSpec spec{n_minus, phase, lambda_, noise_};
        const Eigen::VectorXd v =
            spd_solve(build_sigma_minus(spec), Eigen::VectorXd::Ones(n_minus));
        e.backward = v;
        c += v.sum();
      }
      if (n_plus > 0) {
        WindowSpec spec{n_plus, phase, lambda_, noise_};
        const Eigen::VectorXd v = spd_solve(build_sigma_plus(spec), Eigen::VectorXd::Ones(n_plus));
        e.forward = v;
        c += v.sum();
      }
      e.c = c;
      e.backward /= c;
      e.forward /= c;
      it = cache_.emplace(key, std::move(e)).first;
    }
    return it->second;
  }

 private:
  NoiseSpec noise_;
  int lambda_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<int, int, int>, Entry> cache_;
};

/// Minimum-variance smoother at one epoch. With block_solve = false the
/// weights come from one solve of the full 2N x 2N stacked covariance
/// instead of the per-side solves; both paths are algebraically identical
/// and the slow one is kept as a cross-check.
inline PointEstimate smoother_optimal_at(const SensorTrace& trace, const NoiseSpec& noise, long i,
                                         int n_fixes, BoundaryPolicy policy = BoundaryPolicy::shrink,
                                         const PpWeightTable* table = nullptr,
                                         bool block_solve = true) {
  if (n_fixes < 1) throw ConfigError("optimal smoother: N must be >= 1");
  const int d = gps_phase(i, trace.grid.lambda);
  PpWeightTable local(noise, trace.grid.lambda);
  const PpWeightTable& weights_from = table ? *table : local;

  int n_minus = 0, n_plus = 0;
  Eigen::VectorXd backward, forward;
  if (policy == BoundaryPolicy::shrink) {
    const SmootherWindow win = backward_forward_estimates(trace, i, n_fixes);
    n_minus = win.n_minus;
    n_plus = win.n_plus;
    backward = win.backward;
    forward = win.forward;
  } else {
    const auto [first_fix, last_fix] = detail::fix_range(trace);
    n_minus = n_plus = n_fixes;
    backward = detail::anchored_side(trace, i, n_fixes, true, first_fix, last_fix);
    forward = detail::anchored_side(trace, i, n_fixes, false, first_fix, last_fix);
  }

  PointEstimate out;
  out.n_minus = n_minus;
  out.n_plus = n_plus;
  if (!block_solve && n_minus == n_plus && n_minus > 0) {
    WindowSpec spec{n_minus, d, trace.grid.lambda, noise};
    const Eigen::MatrixXd sigma = build_sigma_pp(spec);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(2 * n_minus);
    const Eigen::VectorXd v = spd_solve(sigma, ones);
    const double c = ones.dot(v);
    Eigen::VectorXd stacked(2 * n_minus);
    stacked << backward, forward;
    out.xhat_m = stacked.dot(v) / c;
    out.var_m2 = 1.0 / c;
    return out;
  }
  const PpWeightTable::Entry& e = weights_from.at(n_minus, n_plus, d);
  out.xhat_m = (n_minus > 0 ? e.backward.dot(backward) : 0.0) +
               (n_plus > 0 ? e.forward.dot(forward) : 0.0);
  out.var_m2 = 1.0 / e.c;
  return out;
}

/// Two-sided truncated smoother at one epoch: geometric weights on each
/// side, sides blended by inverse variance; the returned variance is the
/// harmonic combination of the side variances.
inline PointEstimate smoother_asymptotic_at(const SensorTrace& trace, const NoiseSpec& noise,
                                            long i, int n_fixes,
                                            BoundaryPolicy policy = BoundaryPolicy::shrink) {
  if (n_fixes < 1) throw ConfigError("asymptotic smoother: N must be >= 1");
  const int lambda = trace.grid.lambda;
  const int d = gps_phase(i, lambda);
  const AsymptoticWeights w = optimal_asymptotic_weights(noise.ratio(), lambda);

  int n_minus = 0, n_plus = 0;
  Eigen::VectorXd backward, forward;
  if (policy == BoundaryPolicy::shrink) {
    const SmootherWindow win = backward_forward_estimates(trace, i, n_fixes);
    n_minus = win.n_minus;
    n_plus = win.n_plus;
    backward = win.backward;
    forward = win.forward;
  } else {
    const auto [first_fix, last_fix] = detail::fix_range(trace);
    n_minus = n_plus = n_fixes;
    backward = detail::anchored_side(trace, i, n_fixes, true, first_fix, last_fix);
    forward = detail::anchored_side(trace, i, n_fixes, false, first_fix, last_fix);
  }

  PointEstimate out;
  out.n_minus = n_minus;
  out.n_plus = n_plus;
  const double x_back = n_minus > 0 ? truncated_weights(n_minus, w).values.dot(backward) : 0.0;
  const double x_fwd = n_plus > 0 ? truncated_weights(n_plus, w).values.dot(forward) : 0.0;
  if (n_minus == 0) {
    out.xhat_m = x_fwd;
    out.var_m2 = variance_truncated_forward(n_plus, d, lambda, noise);
    return out;
  }
  if (n_plus == 0) {
    out.xhat_m = x_back;
    out.var_m2 = variance_truncated(n_minus, d, lambda, noise);
    return out;
  }
  const double v_minus = variance_truncated(n_minus, d, lambda, noise);
  const double v_plus = variance_truncated_forward(n_plus, d, lambda, noise);
  const double w_back = v_plus / (v_minus + v_plus);
  out.xhat_m = w_back * x_back + (1.0 - w_back) * x_fwd;
  out.var_m2 = v_minus * v_plus / (v_minus + v_plus);
  return out;
}

inline EstimateSeries smoother_optimal_series(const SensorTrace& trace, const NoiseSpec& noise,
                                              int n_fixes,
                                              BoundaryPolicy policy = BoundaryPolicy::shrink,
                                              const PpWeightTable* table = nullptr) {
  PpWeightTable local(noise, trace.grid.lambda);
  const PpWeightTable* use = table ? table : &local;
  return detail::windowed_series(trace, "pp_opt", n_fixes, [&](long i) {
    return smoother_optimal_at(trace, noise, i, n_fixes, policy, use);
  });
}

inline EstimateSeries smoother_asymptotic_series(const SensorTrace& trace, const NoiseSpec& noise,
                                                 int n_fixes,
                                                 BoundaryPolicy policy = BoundaryPolicy::shrink) {
  return detail::windowed_series(trace, "pp_inf", n_fixes, [&](long i) {
    return smoother_asymptotic_at(trace, noise, i, n_fixes, policy);
  });
}

}  // namespace odofuse
