#include "odofuse/filters.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "odofuse/covariance.hpp"
#include "odofuse/trace.hpp"

using namespace odofuse;

namespace {

const NoiseSpec kNoise = make_noise(0.05, 3.0);
constexpr int kLambda = 10;

// independent objective for the asymptotic weight: the long-run variance as
// a function of the GPS-retention weight w, minimized by grid search
double phi(double w, double r, int lambda, double var_od) {
  return var_od * (lambda * w * w + (1.0 - w) * (1.0 - w) / r) / (1.0 - w * w);
}

double grid_search_w1(double r, int lambda, double step) {
  double best_w = 0.0, best_val = std::numeric_limits<double>::infinity();
  for (double w = step; w < 1.0; w += step) {
    const double val = phi(w, r, lambda, 0.0025);
    if (val < best_val) {
      best_val = val;
      best_w = w;
    }
  }
  return best_w;
}

SensorTrace noisy_trace(double horizon_s = 30.0, std::uint64_t seed = 3) {
  const TimeGrid grid = make_time_grid(10.0, 1.0, horizon_s);
  return simulate_sensors(constant_speed_trajectory(grid, 13.0 * horizon_s), kNoise, grid, seed);
}

SensorTrace clean_trace(double horizon_s = 30.0) {
  const TimeGrid grid = make_time_grid(10.0, 1.0, horizon_s);
  return simulate_sensors(constant_speed_trajectory(grid, 13.0 * horizon_s),
                          make_noise(0.0, 0.0), grid, 1);
}

}  // namespace

TEST(AsymptoticWeights, NoiselessOdometerKeepsDeadReckoning) {
  const AsymptoticWeights w = optimal_asymptotic_weights(0.0, kLambda);
  EXPECT_DOUBLE_EQ(w.w1, 1.0);
  EXPECT_DOUBLE_EQ(w.w2, 0.0);
}

TEST(AsymptoticWeights, MatchesGridSearch) {
  const double r = kNoise.ratio();
  const AsymptoticWeights w = optimal_asymptotic_weights(r, kLambda);
  EXPECT_NEAR(w.w1, 0.94866596, 1e-7);
  EXPECT_NEAR(w.w1, grid_search_w1(r, kLambda, 1e-7), 1e-6);
  EXPECT_DOUBLE_EQ(w.w1 + w.w2, 1.0);
}

TEST(AsymptoticWeights, MatchesGridSearchAtLambdaRFour) {
  const double r = 0.4;  // lambda*r = 4
  const AsymptoticWeights w = optimal_asymptotic_weights(r, kLambda);
  EXPECT_NEAR(w.w1, (6.0 - std::sqrt(32.0)) / 2.0, 1e-12);
  EXPECT_NEAR(w.w1, grid_search_w1(r, kLambda, 1e-6), 1e-5);
}

TEST(AsymptoticWeights, ObjectiveIsConvex) {
  const double r = kNoise.ratio();
  const double h = 1e-3;
  for (double w = h; w + h < 1.0; w += h) {
    const double second_diff = phi(w - h, r, kLambda, 0.0025) - 2.0 * phi(w, r, kLambda, 0.0025) +
                               phi(w + h, r, kLambda, 0.0025);
    ASSERT_GT(second_diff, 0.0) << "w=" << w;
  }
}

TEST(AsymptoticVariance, PaperOperatingPoint) {
  const AsymptoticWeights w = optimal_asymptotic_weights(kNoise.ratio(), kLambda);
  EXPECT_NEAR(std::sqrt(asymptotic_variance(w, kLambda, kNoise)), 0.68, 0.005);
}

TEST(AsymptoticVariance, RawGpsLimit) {
  const AsymptoticWeights w{0.0, 1.0};
  EXPECT_NEAR(asymptotic_variance(w, kLambda, kNoise), kNoise.var_gps(), 1e-12);
}

// ensemble variance of the recursive filter far into the trip matches the
// closed form, for optimal and non-optimal weights alike
TEST(AsymptoticVariance, MatchesRecursiveFilterEnsemble) {
  const TimeGrid grid = make_time_grid(10.0, 1.0, 250.0);
  const Trajectory traj = constant_speed_trajectory(grid, 3300.0);
  constexpr int kDraws = 10000;
  for (const AsymptoticWeights w :
       {optimal_asymptotic_weights(kNoise.ratio(), kLambda), AsymptoticWeights{0.9, 0.1}}) {
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < kDraws; ++s) {
      const SensorTrace trace = simulate_sensors(traj, kNoise, grid, substream_seed(21, s));
      const EstimateSeries series = filter_recursive(trace, w, kNoise);
      const double e = series.xhat_m[grid.n] - traj.positions_m[grid.n];
      sum += e;
      sum_sq += e * e;
    }
    const double mean = sum / kDraws;
    const double var = sum_sq / kDraws - mean * mean;
    const double expected = asymptotic_variance(w, kLambda, kNoise);
    EXPECT_NEAR(var, expected, 0.05 * expected) << "w1=" << w.w1;
  }
}

TEST(FilterRecursive, ZeroNoiseIsExact) {
  const SensorTrace trace = clean_trace();
  const AsymptoticWeights w = optimal_asymptotic_weights(kNoise.ratio(), kLambda);
  const EstimateSeries series = filter_recursive(trace, w, kNoise);
  for (long i = 0; i <= trace.grid.n; ++i) {
    ASSERT_NEAR(series.xhat_m[i], trace.truth->positions_m[i], 1e-9);
  }
}

TEST(FilterRecursive, ZeroW1TracksGps) {
  const SensorTrace trace = noisy_trace();
  const EstimateSeries series = filter_recursive(trace, AsymptoticWeights{0.0, 1.0}, kNoise);
  for (long j = 0; j <= trace.grid.m; ++j) {
    ASSERT_DOUBLE_EQ(series.xhat_m[j * kLambda], trace.gps_m[j]);
  }
}

TEST(FilterRecursive, EqualsFullWindowTruncated) {
  const SensorTrace trace = noisy_trace(60.0, 17);
  const AsymptoticWeights w = optimal_asymptotic_weights(kNoise.ratio(), kLambda);
  const EstimateSeries series = filter_recursive(trace, w, kNoise);
  for (long i = 0; i <= trace.grid.n; ++i) {
    const int full = static_cast<int>(i / kLambda) + 1;
    const PointEstimate p = filter_truncated_at(trace, kNoise, i, full);
    ASSERT_NEAR(series.xhat_m[i], p.xhat_m, 1e-9) << "i=" << i;
    ASSERT_EQ(p.n_minus, full);
  }
}

TEST(TruncatedWeights, SmallWindows) {
  const AsymptoticWeights w = optimal_asymptotic_weights(kNoise.ratio(), kLambda);
  const WindowWeights w1 = truncated_weights(1, w);
  ASSERT_EQ(w1.values.size(), 1);
  EXPECT_DOUBLE_EQ(w1.values(0), 1.0);

  const WindowWeights w2 = truncated_weights(2, w);
  EXPECT_DOUBLE_EQ(w2.values(0), w.w2);
  EXPECT_DOUBLE_EQ(w2.values(1), w.w1);

  const WindowWeights w40 = truncated_weights(40, w);
  EXPECT_NEAR(w40.values.sum(), 1.0, 1e-12);
}

TEST(VarianceTruncated, MatchesQuadraticForm) {
  for (int n = 1; n <= 50; ++n) {
    const AsymptoticWeights w = optimal_asymptotic_weights(kNoise.ratio(), kLambda);
    const Eigen::VectorXd weights = truncated_weights(n, w).values;
    for (int d = 0; d <= kLambda; ++d) {
      const Eigen::MatrixXd sigma = build_sigma_minus(WindowSpec{n, d, kLambda, kNoise});
      ASSERT_NEAR(variance_truncated(n, d, kLambda, kNoise), quad_form(weights, sigma), 1e-10)
          << "N=" << n << " d=" << d;
    }
  }
}

TEST(VarianceTruncated, ConvergesAtPaperThreshold) {
  const AsymptoticWeights w = optimal_asymptotic_weights(kNoise.ratio(), kLambda);
  const double limit = std::sqrt(asymptotic_variance(w, kLambda, kNoise));
  const double gap40 = std::sqrt(variance_truncated(40, 0, kLambda, kNoise)) - limit;
  const double gap39 = std::sqrt(variance_truncated(39, 0, kLambda, kNoise)) - limit;
  EXPECT_LE(gap40, 0.1);
  EXPECT_GT(gap39, 0.1);
}

TEST(VarianceTruncated, PeriodicInEpoch) {
  for (long i = 0; i < 40; ++i) {
    EXPECT_DOUBLE_EQ(variance_truncated(7, gps_phase(i, kLambda), kLambda, kNoise),
                     variance_truncated(7, gps_phase(i + kLambda, kLambda), kLambda, kNoise));
  }
}

TEST(OptimalWindowWeights, ScalarWindow) {
  const Eigen::MatrixXd sigma = build_sigma_minus(WindowSpec{1, 0, kLambda, kNoise});
  const WindowWeights w = optimal_window_weights(sigma);
  ASSERT_EQ(w.values.size(), 1);
  EXPECT_DOUBLE_EQ(w.values(0), 1.0);
  EXPECT_NEAR(w.c, 1.0 / sigma(0, 0), 1e-15);
}

// brute-force oracle: N=2 weights constrained to w2 = 1 - w1, scanned at
// 1e-6 resolution
TEST(OptimalWindowWeights, MatchesBruteForceAtN2) {
  const Eigen::MatrixXd sigma = build_sigma_minus(WindowSpec{2, 0, kLambda, kNoise});
  double best_w = 0.0, best_val = std::numeric_limits<double>::infinity();
  for (double w = 0.0; w <= 1.0; w += 1e-6) {
    Eigen::Vector2d v(w, 1.0 - w);
    const double val = v.dot(sigma * v);
    if (val < best_val) {
      best_val = val;
      best_w = w;
    }
  }
  const WindowWeights w = optimal_window_weights(sigma);
  EXPECT_NEAR(w.values(0), best_w, 1e-4);
  EXPECT_NEAR(1.0 / w.c, best_val, 1e-8);
}

TEST(OptimalWindowWeights, SumToOneAndBeatTruncated) {
  for (int n : {1, 2, 5, 10, 20, 40}) {
    for (int d = 0; d < kLambda; ++d) {
      const WindowWeights w =
          optimal_window_weights(build_sigma_minus(WindowSpec{n, d, kLambda, kNoise}));
      ASSERT_NEAR(w.values.sum(), 1.0, 1e-12);
      ASSERT_LE(1.0 / w.c, variance_truncated(n, d, kLambda, kNoise) + 1e-12);
    }
  }
}

TEST(OptimalWindowWeights, VarianceMonotoneInN) {
  for (int d : {0, 3, 9}) {
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 1; n <= 40; ++n) {
      const WindowWeights w =
          optimal_window_weights(build_sigma_minus(WindowSpec{n, d, kLambda, kNoise}));
      const double var = 1.0 / w.c;
      ASSERT_LE(var, prev + 1e-14) << "N=" << n << " d=" << d;
      prev = var;
    }
  }
}

TEST(FilterTruncated, SingleFixAtGpsEpochIsRawGps) {
  const SensorTrace trace = noisy_trace();
  const PointEstimate p = filter_truncated_at(trace, kNoise, 20, 1);
  EXPECT_DOUBLE_EQ(p.xhat_m, trace.gps_m[2]);
}

TEST(FilterTruncated, ZeroNoiseIsExact) {
  const SensorTrace trace = clean_trace();
  for (int n : {1, 3, 10}) {
    for (long i : {0L, 7L, 150L, trace.grid.n}) {
      ASSERT_NEAR(filter_truncated_at(trace, kNoise, i, n).xhat_m, trace.truth->positions_m[i],
                  1e-9);
    }
  }
}

TEST(FilterTruncated, ClampsToAvailableFixes) {
  const SensorTrace trace = noisy_trace();
  const PointEstimate p = filter_truncated_at(trace, kNoise, 35, 40);
  EXPECT_EQ(p.n_minus, 4);  // fixes at epochs 30, 20, 10, 0
  EXPECT_DOUBLE_EQ(p.var_m2, variance_truncated(4, 5, kLambda, kNoise));
}

TEST(FilterTruncated, NoFixIsAnError) {
  SensorTrace trace = noisy_trace();
  trace.t0_fix = false;
  EXPECT_THROW(filter_truncated_at(trace, kNoise, 5, 3), NoAbsoluteFixError);
}

TEST(FilterOptimal, ZeroNoiseIsExact) {
  const SensorTrace trace = clean_trace();
  for (long i : {0L, 12L, 200L, trace.grid.n}) {
    ASSERT_NEAR(filter_optimal_at(trace, kNoise, i, 10).xhat_m, trace.truth->positions_m[i], 1e-9);
  }
}

TEST(FilterOptimal, VarianceIsInverseConstraintConstant) {
  const SensorTrace trace = noisy_trace();
  const PointEstimate p = filter_optimal_at(trace, kNoise, 25, 2);
  const WindowWeights w = optimal_window_weights(build_sigma_minus(WindowSpec{2, 5, kLambda, kNoise}));
  EXPECT_DOUBLE_EQ(p.var_m2, 1.0 / w.c);
}

TEST(FilterSeries, RecordEffectiveWindows) {
  const SensorTrace trace = noisy_trace();
  const EstimateSeries series = filter_optimal_series(trace, kNoise, 40);
  EXPECT_EQ(series.n_minus[5], 1);
  EXPECT_EQ(series.n_minus[25], 3);
  EXPECT_EQ(series.window, 40);
}
