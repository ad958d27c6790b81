#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "odofuse/error.hpp"
#include "odofuse/noise.hpp"
#include "odofuse/time_grid.hpp"

namespace odofuse {

/// Curvilinear abscissae x(t_i), length n+1, x(t0) = 0 by convention.
struct Trajectory {
  std::vector<double> positions_m;

  long size() const { return static_cast<long>(positions_m.size()); }
};

/// Straight-line drive: total distance covered at constant speed.
inline Trajectory constant_speed_trajectory(const TimeGrid& grid, double distance_m) {
  Trajectory traj;
  traj.positions_m.resize(grid.n + 1);
  for (long i = 0; i <= grid.n; ++i) {
    traj.positions_m[i] = distance_m * static_cast<double>(i) / static_cast<double>(grid.n);
  }
  return traj;
}

/// Synchronized sensor readings on a TimeGrid. Odometer is dense (n+1
/// values); GPS is sparse, one slot per GPS epoch j (epoch index j*lambda),
/// with NaN marking a missing fix. Slot 0 is governed by t0_fix.
struct SensorTrace {
  TimeGrid grid;
  std::vector<double> odometer_m;  ///< length n+1
  std::vector<double> gps_m;       ///< length m+1, NaN = missing fix
  bool t0_fix = true;
  std::optional<Trajectory> truth;
  std::optional<std::uint64_t> seed;

  bool has_fix(long j) const {
    if (j < 0 || j > grid.m) return false;
    if (j == 0 && !t0_fix) return false;
    return !std::isnan(gps_m[static_cast<std::size_t>(j)]);
  }

  /// GPS value of fix j (epoch j*lambda). Throws if absent.
  double gps_at(long j) const {
    if (j < 0 || j > grid.m) {
      throw WindowError("gps fix index " + std::to_string(j) + " outside [0, m]");
    }
    if (!has_fix(j)) {
      throw InputError("gps fix " + std::to_string(j) + " is missing");
    }
    return gps_m[static_cast<std::size_t>(j)];
  }

  /// Number of consecutively available fixes at epochs <= i, counting down
  /// from the most recent one (stops at the first hole).
  int backward_fixes(long i) const {
    long j = i / grid.lambda;
    int count = 0;
    while (j >= 0 && has_fix(j)) {
      ++count;
      --j;
    }
    return count;
  }

  /// Number of consecutively available fixes at epochs > i, counting up
  /// from the first one after i (stops at the first hole).
  int forward_fixes(long i) const {
    long j = i / grid.lambda + 1;
    int count = 0;
    while (j <= grid.m && has_fix(j)) {
      ++count;
      ++j;
    }
    return count;
  }

  void validate() const {
    if (static_cast<long>(odometer_m.size()) != grid.n + 1) {
      throw InputError("trace: odometer length must be n+1");
    }
    if (static_cast<long>(gps_m.size()) != grid.m + 1) {
      throw InputError("trace: gps slot count must be m+1");
    }
    if (truth && truth->size() != grid.n + 1) {
      throw InputError("trace: truth length must be n+1");
    }
  }
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for simulation substream `index` of a master seed. Substreams are
/// independent of evaluation order, so Monte-Carlo batches parallelize.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master + 0x9E3779B97F4A7C15ULL * (index + 1));
}

/// Draws the observation model over a known trajectory:
///   y_od(t_i)  = x(t_i) - x(t0) + sum_{k<=i} e_od,k,  e_od ~ N(0, sigma_od^2)
///   y_gps(t_j') = x(t_j') + e_gps,j,                  e_gps ~ N(0, sigma_gps^2)
/// with odometer and GPS errors independent. Deterministic given seed; the
/// t0 fix is always generated.
inline SensorTrace simulate_sensors(const Trajectory& traj, const NoiseSpec& noise,
                                    const TimeGrid& grid, std::uint64_t seed) {
  if (traj.size() != grid.n + 1) {
    throw ConfigError("simulate: trajectory length must be n+1");
  }
  if (traj.positions_m[0] != 0.0) {
    throw ConfigError("simulate: trajectory must start at x(t0) = 0");
  }
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> unit(0.0, 1.0);

  SensorTrace trace;
  trace.grid = grid;
  trace.seed = seed;
  trace.t0_fix = true;
  trace.odometer_m.resize(grid.n + 1);
  trace.odometer_m[0] = 0.0;
  double drift = 0.0;
  for (long i = 1; i <= grid.n; ++i) {
    drift += noise.sigma_od_m * unit(engine);
    trace.odometer_m[i] = traj.positions_m[i] - traj.positions_m[0] + drift;
  }
  trace.gps_m.resize(grid.m + 1);
  for (long j = 0; j <= grid.m; ++j) {
    trace.gps_m[j] = traj.positions_m[j * grid.lambda] + noise.sigma_gps_m * unit(engine);
  }
  trace.truth = traj;
  return trace;
}

}  // namespace odofuse
