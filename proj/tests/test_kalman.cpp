#include "odofuse/kalman.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "odofuse/filters.hpp"
#include "odofuse/trace.hpp"

using namespace odofuse;

namespace {

const NoiseSpec kNoise = make_noise(0.05, 3.0);
constexpr int kLambda = 10;

SensorTrace make_trace(double horizon_s, const NoiseSpec& noise, std::uint64_t seed) {
  const TimeGrid grid = make_time_grid(10.0, 1.0, horizon_s);
  return simulate_sensors(constant_speed_trajectory(grid, 13.0 * horizon_s), noise, grid, seed);
}

}  // namespace

TEST(Kalman, ZeroNoiseIsExact) {
  const SensorTrace trace = make_trace(30.0, make_noise(0.0, 0.0), 1);
  const KalmanResult kf = kalman_filter(trace, kNoise);
  for (long i = 0; i <= trace.grid.n; ++i) {
    ASSERT_NEAR(kf.series.xhat_m[i], trace.truth->positions_m[i], 1e-9);
  }
}

// with a noiseless odometer the covariance stops growing between fixes and
// the gain at the j-th update is exactly 1/(j+1)
TEST(Kalman, NoProcessNoiseGainDecays) {
  const NoiseSpec noise = make_noise(0.0, 3.0);
  const SensorTrace trace = make_trace(30.0, noise, 5);
  const KalmanResult kf = kalman_filter(trace, noise);
  ASSERT_EQ(kf.gain_at_fix.size(), static_cast<std::size_t>(trace.grid.m));
  for (std::size_t j = 0; j < kf.gain_at_fix.size(); ++j) {
    ASSERT_NEAR(kf.gain_at_fix[j], 1.0 / static_cast<double>(j + 2), 1e-12);
  }
  // P is flat between fixes
  EXPECT_DOUBLE_EQ(kf.series.var_m2[11], kf.series.var_m2[15]);
}

TEST(Kalman, MissingT0FixFallsBack) {
  SensorTrace trace = make_trace(30.0, kNoise, 5);
  trace.t0_fix = false;
  const KalmanResult kf = kalman_filter(trace, kNoise);
  EXPECT_TRUE(kf.series.degraded_init);
  EXPECT_DOUBLE_EQ(kf.series.var_m2[0], kKalmanFallbackPrior);
  EXPECT_DOUBLE_EQ(kf.series.xhat_m[0], trace.odometer_m[0]);
}

TEST(SteadyStateGain, EqualsAsymptoticGpsWeight) {
  for (double r : {1e-6, 1e-4, 2.7777777777777778e-4, 0.01, 0.1, 1.0, 10.0}) {
    for (int lambda : {1, 2, 5, 10, 50}) {
      const NoiseSpec noise = make_noise(std::sqrt(r) * 3.0, 3.0);
      const double k_inf = steady_state_gain(noise, lambda);
      const double w2 = optimal_asymptotic_weights(noise.ratio(), lambda).w2;
      ASSERT_NEAR(k_inf, w2, 1e-12) << "r=" << r << " lambda=" << lambda;
    }
  }
  EXPECT_DOUBLE_EQ(steady_state_gain(make_noise(0.0, 3.0), 10), 0.0);
}

// the running gain approaches the fixed point; the recursion itself is the
// oracle (gap 2.5e-6 at fix 100, first below 1e-6 at fix 109)
TEST(SteadyStateGain, RunningGainConverges) {
  const SensorTrace trace = make_trace(150.0, kNoise, 9);
  const KalmanResult kf = kalman_filter(trace, kNoise);
  const double k_inf = steady_state_gain(kNoise, kLambda);
  ASSERT_GE(kf.gain_at_fix.size(), 120u);
  EXPECT_LT(std::abs(kf.gain_at_fix[99] - k_inf), 1e-5);
  EXPECT_LT(std::abs(kf.gain_at_fix[108] - k_inf), 1e-6);
  for (std::size_t j = 1; j < kf.gain_at_fix.size(); ++j) {
    ASSERT_LE(std::abs(kf.gain_at_fix[j] - k_inf), std::abs(kf.gain_at_fix[j - 1] - k_inf));
  }
}

TEST(Kalman, CovarianceFixedPoint) {
  const SensorTrace trace = make_trace(150.0, kNoise, 9);
  const KalmanResult kf = kalman_filter(trace, kNoise);
  const double k_inf = steady_state_gain(kNoise, kLambda);
  const double fixed_point = kNoise.var_gps() * k_inf;
  // P at GPS epochs decreases monotonically toward sigma_gps^2 * K_inf
  double prev = kf.series.var_m2[0];
  for (long j = 1; j <= trace.grid.m; ++j) {
    const double p = kf.series.var_m2[j * kLambda];
    ASSERT_LE(p, prev + 1e-15);
    prev = p;
  }
  EXPECT_NEAR(kf.series.var_m2[trace.grid.n], fixed_point, 1e-6);
}

// the Kalman estimate at a GPS epoch coincides with the minimum-variance
// window filter using every fix up to that epoch
TEST(Kalman, EqualsFullWindowOptimalFilter) {
  const SensorTrace trace = make_trace(120.0, kNoise, 31);
  const KalmanResult kf = kalman_filter(trace, kNoise);
  OptimalWeightTable table(kNoise, kLambda);
  for (long j : {0L, 1L, 2L, 5L, 10L, 25L, 60L, 120L}) {
    const long i = j * kLambda;
    const int full = static_cast<int>(j) + 1;
    const PointEstimate p = filter_optimal_at(trace, kNoise, i, full, &table);
    ASSERT_NEAR(kf.series.xhat_m[i], p.xhat_m, 1e-8) << "fix " << j;
    ASSERT_NEAR(kf.series.var_m2[i], p.var_m2, 1e-8) << "fix " << j;
  }
}
