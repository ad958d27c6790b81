#pragma once

#include "odofuse/error.hpp"

namespace odofuse {

/// Sensor error model: one odometer increment error and one GPS fix error,
/// both centered Gaussian. Zero deviations are allowed (noise-free
/// simulation); operations that build covariance matrices additionally
/// require sigma_gps > 0.
struct NoiseSpec {
  double sigma_od_m = 0.0;   ///< odometer per-step error std-dev [m]
  double sigma_gps_m = 0.0;  ///< GPS error std-dev [m]

  /// Variance ratio r = sigma_od^2 / sigma_gps^2 (0 when both are 0).
  double ratio() const {
    if (sigma_gps_m == 0.0) {
      if (sigma_od_m == 0.0) return 0.0;
      throw ConfigError("noise: ratio undefined for sigma_gps = 0, sigma_od > 0");
    }
    return (sigma_od_m * sigma_od_m) / (sigma_gps_m * sigma_gps_m);
  }

  double var_od() const { return sigma_od_m * sigma_od_m; }
  double var_gps() const { return sigma_gps_m * sigma_gps_m; }
};

inline NoiseSpec make_noise(double sigma_od_m, double sigma_gps_m) {
  if (sigma_od_m < 0 || sigma_gps_m < 0) {
    throw ConfigError("noise: standard deviations must be nonnegative");
  }
  return NoiseSpec{sigma_od_m, sigma_gps_m};
}

}  // namespace odofuse
