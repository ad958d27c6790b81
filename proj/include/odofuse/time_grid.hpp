#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "odofuse/error.hpp"

namespace odofuse {

/// Sampling structure shared by all estimators: n odometer epochs and
/// m GPS epochs after t0, with integer frequency ratio lambda = n/m.
/// Epoch times are t_i = i*T/n.
struct TimeGrid {
  long n = 0;        ///< odometer epochs after t0
  long m = 0;        ///< GPS epochs after t0
  int lambda = 1;    ///< f_od / f_gps, positive integer
  double horizon_s = 0.0;
  double f_od_hz = 0.0;
  double f_gps_hz = 0.0;

  double time_of(long epoch) const { return epoch * horizon_s / static_cast<double>(n); }
  double dt() const { return horizon_s / static_cast<double>(n); }
  bool is_gps_epoch(long epoch) const { return epoch % lambda == 0; }
};

/// Builds a grid from sampling frequencies and a horizon. The frequency
/// ratio must be a positive integer and the horizon must hold a whole
/// number of GPS periods.
inline TimeGrid make_time_grid(double f_od_hz, double f_gps_hz, double horizon_s) {
  if (f_od_hz <= 0 || f_gps_hz <= 0 || horizon_s <= 0) {
    throw ConfigError("time grid: frequencies and horizon must be positive");
  }
  const double ratio = f_od_hz / f_gps_hz;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
    throw ConfigError("time grid: f_od/f_gps must be a positive integer, got " +
                      std::to_string(ratio));
  }
  const int lambda = static_cast<int>(rounded);
  const double m_real = f_gps_hz * horizon_s;
  const double m_rounded = std::round(m_real);
  if (m_rounded < 1.0 || std::abs(m_real - m_rounded) > 1e-9 * m_rounded) {
    throw ConfigError("time grid: horizon must span a whole number of GPS periods");
  }
  TimeGrid g;
  g.m = static_cast<long>(m_rounded);
  g.lambda = lambda;
  g.n = g.m * lambda;
  g.horizon_s = horizon_s;
  g.f_od_hz = f_od_hz;
  g.f_gps_hz = f_gps_hz;
  return g;
}

/// Builds a grid directly from epoch counts.
inline TimeGrid make_time_grid_counts(long n, int lambda, double horizon_s) {
  if (n <= 0 || lambda < 1 || horizon_s <= 0) {
    throw ConfigError("time grid: counts and horizon must be positive");
  }
  if (n % lambda != 0) {
    throw ConfigError("time grid: n must be a multiple of lambda");
  }
  TimeGrid g;
  g.n = n;
  g.m = n / lambda;
  g.lambda = lambda;
  g.horizon_s = horizon_s;
  g.f_od_hz = n / horizon_s;
  g.f_gps_hz = g.m / horizon_s;
  return g;
}

/// d_i = i - lambda*floor(i/lambda): odometer steps since the most recent
/// GPS epoch at or before epoch i.
inline int gps_phase(long i, int lambda) { return static_cast<int>(i % lambda); }

/// Epoch of the j-th GPS fix at or before epoch i (j >= 1):
/// g-_i(j) = lambda*floor(i/lambda) - lambda*(j-1). May be negative when the
/// window extends past the start of the trace.
inline long gps_index_before(long i, int lambda, int j) {
  return lambda * (i / lambda) - static_cast<long>(lambda) * (j - 1);
}

/// Epoch of the j-th GPS fix strictly after epoch i (j >= 1):
/// g+_i(j) = lambda*floor(i/lambda) + lambda*j. May exceed the trace length.
inline long gps_index_after(long i, int lambda, int j) {
  return lambda * (i / lambda) + static_cast<long>(lambda) * j;
}

}  // namespace odofuse
