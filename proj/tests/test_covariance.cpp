#include "odofuse/covariance.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "odofuse/trace.hpp"

using namespace odofuse;

namespace {

const NoiseSpec kNoise = make_noise(0.05, 3.0);

}  // namespace

TEST(BuildA, SmallCases) {
  const Eigen::MatrixXd a1 = build_a(1, 4, 10);
  EXPECT_DOUBLE_EQ(a1(0, 0), 4.0);

  const Eigen::MatrixXd a2 = build_a(2, 0, 10);
  EXPECT_DOUBLE_EQ(a2(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(a2(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(a2(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(a2(1, 1), 10.0);

  const Eigen::MatrixXd a3 = build_a(3, 4, 10);
  Eigen::MatrixXd expected(3, 3);
  expected << 4, 4, 4, 4, 14, 14, 4, 14, 24;
  EXPECT_TRUE(a3 == expected);
}

// A_N(d) = d*H_N + lambda*Delta_N with H all ones and Delta(a,b) = min(a,b)-1,
// and Delta_N = C_1 + ... + C_{N-1} where C_k has ones on rows/cols > k.
TEST(BuildA, DecompositionIdentities) {
  const int lambda = 10;
  for (int n = 1; n <= 50; ++n) {
    Eigen::MatrixXd delta(n, n);
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) delta(a, b) = std::min(a, b);
    }
    Eigen::MatrixXd delta_from_c = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
      Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
      c.bottomRightCorner(n - k, n - k).setOnes();
      delta_from_c += c;
    }
    ASSERT_TRUE(delta == delta_from_c) << "N=" << n;
    const Eigen::MatrixXd h = Eigen::MatrixXd::Ones(n, n);
    for (int d = 0; d <= lambda; ++d) {
      ASSERT_TRUE(build_a(n, d, lambda) == d * h + lambda * delta) << "N=" << n << " d=" << d;
    }
  }
}

TEST(SigmaMinus, SmallCases) {
  const Eigen::MatrixXd s1 = build_sigma_minus(WindowSpec{1, 0, 10, kNoise});
  EXPECT_NEAR(s1(0, 0), 9.0, 1e-12);
  const Eigen::MatrixXd s2 = build_sigma_minus(WindowSpec{1, 5, 10, kNoise});
  EXPECT_NEAR(s2(0, 0), 9.0125, 1e-12);
}

TEST(SigmaMinus, EntryFormulas) {
  const int lambda = 10, d = 3, n = 6;
  const Eigen::MatrixXd s = build_sigma_minus(WindowSpec{n, d, lambda, kNoise});
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double expected = (a == b ? kNoise.var_gps() : 0.0) +
                              (d + std::min(a, b) * lambda) * kNoise.var_od();
      EXPECT_NEAR(s(a, b), expected, 1e-12);
    }
  }
}

TEST(SigmaPlus, MatchesMinusAtFullPhase) {
  for (int n : {1, 3, 8}) {
    const Eigen::MatrixXd plus = build_sigma_plus(WindowSpec{n, 0, 10, kNoise});
    const Eigen::MatrixXd minus = build_sigma_minus(WindowSpec{n, 10, 10, kNoise});
    EXPECT_TRUE(plus == minus) << "N=" << n;
  }
}

TEST(SigmaPp, BlockDiagonal) {
  const WindowSpec spec{3, 5, 10, kNoise};
  const Eigen::MatrixXd full = build_sigma_pp(spec);
  ASSERT_EQ(full.rows(), 6);
  EXPECT_TRUE(full.topLeftCorner(3, 3) == build_sigma_minus(spec));
  EXPECT_TRUE(full.bottomRightCorner(3, 3) == build_sigma_plus(spec));
  EXPECT_TRUE(full.topRightCorner(3, 3).isZero(0.0));
  EXPECT_TRUE(full.bottomLeftCorner(3, 3).isZero(0.0));

  const Eigen::MatrixXd one = build_sigma_pp(WindowSpec{1, 0, 10, kNoise});
  EXPECT_NEAR(one(0, 0), build_sigma_minus(WindowSpec{1, 0, 10, kNoise})(0, 0), 1e-15);
  EXPECT_NEAR(one(1, 1), build_sigma_plus(WindowSpec{1, 0, 10, kNoise})(0, 0), 1e-15);
  EXPECT_DOUBLE_EQ(one(0, 1), 0.0);
}

// Monte-Carlo oracle: empirical covariance of the stacked single-fix
// estimators (x-_1, x-_2, x+_1, x+_2) at an epoch with phase d = 5 matches
// the constructed 4x4 covariance.
TEST(SigmaPp, MatchesEmpiricalCovariance) {
  const TimeGrid grid = make_time_grid(10.0, 1.0, 5.0);  // n=50
  const Trajectory traj = constant_speed_trajectory(grid, 100.0);
  const long i = 25;  // d=5; backward anchors 20,10; forward 30,40
  constexpr int kDraws = 200000;
  Eigen::Vector4d mean = Eigen::Vector4d::Zero();
  Eigen::Matrix4d moment = Eigen::Matrix4d::Zero();
  for (int s = 0; s < kDraws; ++s) {
    const SensorTrace t = simulate_sensors(traj, kNoise, grid, substream_seed(11, s));
    Eigen::Vector4d v;
    v(0) = t.gps_m[2] + t.odometer_m[i] - t.odometer_m[20];
    v(1) = t.gps_m[1] + t.odometer_m[i] - t.odometer_m[10];
    v(2) = t.gps_m[3] - (t.odometer_m[30] - t.odometer_m[i]);
    v(3) = t.gps_m[4] - (t.odometer_m[40] - t.odometer_m[i]);
    mean += v;
    moment += v * v.transpose();
  }
  mean /= kDraws;
  const Eigen::Matrix4d cov = moment / kDraws - mean * mean.transpose();
  const Eigen::MatrixXd expected = build_sigma_pp(WindowSpec{2, 5, 10, kNoise});
  const double scale = expected.diagonal().maxCoeff();
  EXPECT_LT((cov - expected).cwiseAbs().maxCoeff(), 0.01 * scale);
}

TEST(SpdSolve, SmallSystems) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd rhs(3);
  rhs << 1, -2, 5;
  EXPECT_TRUE(spd_solve(eye, rhs) == rhs);

  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(2, 2);
  diag(0, 0) = 4;
  diag(1, 1) = 9;
  Eigen::VectorXd b(2);
  b << 8, 18;
  const Eigen::VectorXd v = spd_solve(diag, b);
  EXPECT_DOUBLE_EQ(v(0), 2.0);
  EXPECT_DOUBLE_EQ(v(1), 2.0);
}

TEST(SpdSolve, RandomSpdResidual) {
  std::mt19937_64 engine(5);
  std::normal_distribution<double> unit(0.0, 1.0);
  const int n = 20;
  Eigen::MatrixXd g(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) g(a, b) = unit(engine);
  }
  const Eigen::MatrixXd m = g * g.transpose() + Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs(n);
  for (int a = 0; a < n; ++a) rhs(a) = unit(engine);
  const Eigen::VectorXd v = spd_solve(m, rhs);
  EXPECT_LE((m * v - rhs).norm() / rhs.norm(), 1e-10);
}

TEST(SpdSolve, RejectsNonSpd) {
  Eigen::MatrixXd indefinite(2, 2);
  indefinite << 1, 2, 2, 1;
  Eigen::VectorXd rhs(2);
  rhs << 1, 1;
  EXPECT_THROW(spd_solve(indefinite, rhs), NotSpdError);

  Eigen::MatrixXd negative = -Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(spd_solve(negative, rhs), NotSpdError);
  EXPECT_THROW(spd_solve(indefinite, Eigen::VectorXd::Ones(3)), InputError);
}

// every covariance this library builds factors cleanly up to N = 100
TEST(SpdSolve, CovariancesFactorUpTo100) {
  for (int n : {1, 10, 50, 100}) {
    for (int d : {0, 5, 10}) {
      const WindowSpec spec{n, d, 10, kNoise};
      EXPECT_NO_THROW(spd_solve(build_sigma_minus(spec), Eigen::VectorXd::Ones(n)));
      EXPECT_NO_THROW(spd_solve(build_sigma_plus(spec), Eigen::VectorXd::Ones(n)));
      EXPECT_NO_THROW(spd_solve(build_sigma_pp(spec), Eigen::VectorXd::Ones(2 * n)));
    }
  }
}

TEST(WindowSpec, Validation) {
  EXPECT_THROW(build_sigma_minus(WindowSpec{0, 0, 10, kNoise}), ConfigError);
  EXPECT_THROW(build_sigma_minus(WindowSpec{1, 11, 10, kNoise}), ConfigError);
  EXPECT_THROW(build_sigma_minus(WindowSpec{1, 0, 10, make_noise(0.05, 0.0)}), ConfigError);
}
