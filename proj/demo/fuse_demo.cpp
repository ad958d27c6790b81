// Simulates a short trip, runs the recursive filter, the optimal window
// filter and the optimal smoother over it, and prints the error of each at
// a few epochs.

#include <cstdio>

#include "odofuse/filters.hpp"
#include "odofuse/kalman.hpp"
#include "odofuse/smoothers.hpp"

int main() {
  using namespace odofuse;
  const TimeGrid grid = make_time_grid(10.0, 1.0, 60.0);
  const NoiseSpec noise = make_noise(0.05, 3.0);
  const Trajectory traj = constant_speed_trajectory(grid, 800.0);
  const SensorTrace trace = simulate_sensors(traj, noise, grid, 7);

  const AsymptoticWeights w = optimal_asymptotic_weights(noise.ratio(), grid.lambda);
  const EstimateSeries recursive = filter_recursive(trace, w, noise);
  const EstimateSeries optimal = filter_optimal_series(trace, noise, 10);
  const EstimateSeries smoothed = smoother_optimal_series(trace, noise, 10);
  const KalmanResult kf = kalman_filter(trace, noise);

  std::printf("%8s %12s %12s %12s %12s\n", "time_s", "rt_inf_err", "rt_opt_err", "pp_opt_err",
              "kf_err");
  for (long i = 0; i <= grid.n; i += 100) {
    const double truth = traj.positions_m[i];
    std::printf("%8.1f %12.3f %12.3f %12.3f %12.3f\n", grid.time_of(i),
                recursive.xhat_m[i] - truth, optimal.xhat_m[i] - truth,
                smoothed.xhat_m[i] - truth, kf.series.xhat_m[i] - truth);
  }
  std::printf("asymptotic std-dev: %.3f m\n",
              std::sqrt(asymptotic_variance(w, grid.lambda, noise)));
  return 0;
}
