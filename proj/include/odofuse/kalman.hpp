#pragma once

#include <cmath>
#include <vector>

#include "odofuse/error.hpp"
#include "odofuse/filters.hpp"
#include "odofuse/trace.hpp"

namespace odofuse {

/// Scalar filter state: position estimate, error variance and last gain.
struct KalmanState {
  double xhat_m = 0.0;
  double p_m2 = 0.0;
  double gain = 0.0;
};

struct KalmanResult {
  EstimateSeries series;
  std::vector<double> gain_at_fix;  ///< gain applied at each GPS update, by fix index
};

/// Prior variance used when no t0 GPS fix is available.
inline constexpr double kKalmanFallbackPrior = 1e6;

/// Scalar odometer-driven filter: predicts with the odometer increment at
/// every epoch (P grows by sigma_od^2) and updates at each available GPS
/// fix with gain K = P/(P + sigma_gps^2). Initialized from the t0 fix with
/// P = sigma_gps^2, or from y_od(t0) with a large prior when absent.
inline KalmanResult kalman_filter(const SensorTrace& trace, const NoiseSpec& noise) {
  trace.validate();
  if (trace.odometer_m.empty()) throw InputError("kalman: empty trace");
  const long n = trace.grid.n;
  KalmanResult result;
  EstimateSeries& series = result.series;
  series.kind = "kf";
  series.xhat_m.resize(n + 1);
  series.var_m2.resize(n + 1);

  KalmanState state;
  if (trace.t0_fix && trace.has_fix(0)) {
    state.xhat_m = trace.gps_m[0];
    state.p_m2 = noise.var_gps();
  } else {
    state.xhat_m = trace.odometer_m[0];
    state.p_m2 = kKalmanFallbackPrior;
    series.degraded_init = true;
  }
  series.xhat_m[0] = state.xhat_m;
  series.var_m2[0] = state.p_m2;

  for (long i = 1; i <= n; ++i) {
    state.xhat_m += trace.odometer_m[i] - trace.odometer_m[i - 1];
    state.p_m2 += noise.var_od();
    if (trace.grid.is_gps_epoch(i) && trace.has_fix(i / trace.grid.lambda)) {
      state.gain = state.p_m2 / (state.p_m2 + noise.var_gps());
      state.xhat_m += state.gain * (trace.gps_m[i / trace.grid.lambda] - state.xhat_m);
      state.p_m2 *= 1.0 - state.gain;
      result.gain_at_fix.push_back(state.gain);
    }
    series.xhat_m[i] = state.xhat_m;
    series.var_m2[i] = state.p_m2;
  }
  return result;
}

/// Fixed point of the gain recursion for the lambda-predict / one-update
/// cycle: q = (lambda*r + sqrt(lambda*r*(lambda*r + 4))) / 2,
/// K = q / (q + 1). Equals the asymptotic GPS weight w2.
inline double steady_state_gain(const NoiseSpec& noise, int lambda) {
  if (lambda < 1) throw ConfigError("steady state gain: lambda must be >= 1");
  const double lr = lambda * noise.ratio();
  const double q = (lr + std::sqrt(lr * (lr + 4.0))) / 2.0;
  return q / (q + 1.0);
}

}  // namespace odofuse
