#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "odofuse/filters.hpp"
#include "odofuse/kalman.hpp"
#include "odofuse/smoothers.hpp"
#include "odofuse/trace.hpp"

namespace odofuse {

enum class EstimatorKind {
  odometer,       ///< raw dead reckoning y_od
  gps,            ///< raw GPS fix (defined at GPS epochs only)
  rt_recursive,   ///< fixed-gain recursive filter
  rt_truncated,   ///< geometric-weight window filter
  rt_optimal,     ///< minimum-variance window filter
  pp_asymptotic,  ///< two-sided geometric-weight smoother
  pp_optimal,     ///< two-sided minimum-variance smoother
  kalman,         ///< scalar Kalman baseline
};

inline bool estimator_is_windowed(EstimatorKind kind) {
  return kind == EstimatorKind::rt_truncated || kind == EstimatorKind::rt_optimal ||
         kind == EstimatorKind::pp_asymptotic || kind == EstimatorKind::pp_optimal;
}

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::kalman;
  int window = 0;  ///< N for windowed kinds

  std::string tag() const {
    switch (kind) {
      case EstimatorKind::odometer: return "odometer";
      case EstimatorKind::gps: return "gps";
      case EstimatorKind::rt_recursive: return "rt_inf";
      case EstimatorKind::rt_truncated: return "rt_trunc_N" + std::to_string(window);
      case EstimatorKind::rt_optimal: return "rt_opt_N" + std::to_string(window);
      case EstimatorKind::pp_asymptotic: return "pp_inf_N" + std::to_string(window);
      case EstimatorKind::pp_optimal: return "pp_opt_N" + std::to_string(window);
      case EstimatorKind::kalman: return "kf";
    }
    return "unknown";
  }

  void validate() const {
    if (estimator_is_windowed(kind) && window < 1) {
      throw ConfigError("estimator " + tag() + ": window N must be >= 1");
    }
  }
};

/// Parses "kf", "rt_opt:20", "pp_inf:36", ... into a spec.
inline EstimatorSpec parse_estimator(const std::string& text) {
  std::string name = text;
  int window = 0;
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    name = text.substr(0, colon);
    try {
      window = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("estimator '" + text + "': bad window");
    }
  }
  EstimatorSpec spec;
  spec.window = window;
  if (name == "odometer") spec.kind = EstimatorKind::odometer;
  else if (name == "gps") spec.kind = EstimatorKind::gps;
  else if (name == "rt_inf") spec.kind = EstimatorKind::rt_recursive;
  else if (name == "rt_trunc") spec.kind = EstimatorKind::rt_truncated;
  else if (name == "rt_opt") spec.kind = EstimatorKind::rt_optimal;
  else if (name == "pp_inf") spec.kind = EstimatorKind::pp_asymptotic;
  else if (name == "pp_opt") spec.kind = EstimatorKind::pp_optimal;
  else if (name == "kf") spec.kind = EstimatorKind::kalman;
  else throw ConfigError("unknown estimator '" + text + "'");
  spec.validate();
  return spec;
}

/// Root mean square of the componentwise differences.
inline double rmse(std::span<const double> estimates, std::span<const double> truth) {
  if (estimates.size() != truth.size()) throw InputError("rmse: length mismatch");
  if (estimates.empty()) throw InputError("rmse: empty input");
  double sum = 0.0;
  for (std::size_t k = 0; k < estimates.size(); ++k) {
    const double e = estimates[k] - truth[k];
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(estimates.size()));
}

struct BiasVariance {
  double bias_m = 0.0;
  double variance_m2 = 0.0;
};

/// Sample bias and population variance of an ensemble of estimates of one
/// scalar truth. With the population convention, mean squared error equals
/// bias^2 + variance exactly.
inline BiasVariance bias_variance(std::span<const double> estimates, double truth) {
  if (estimates.empty()) throw InputError("bias_variance: empty ensemble");
  double sum = 0.0, sum_sq = 0.0;
  for (const double est : estimates) {
    const double e = est - truth;
    sum += e;
    sum_sq += e * e;
  }
  const double s = static_cast<double>(estimates.size());
  BiasVariance out;
  out.bias_m = sum / s;
  out.variance_m2 = sum_sq / s - out.bias_m * out.bias_m;
  return out;
}

enum class ThresholdFamily { rt_optimal, rt_truncated, pp_optimal, pp_truncated };

/// Smallest N whose phase-0 standard deviation is within `criterion_m` of
/// the family's large-window limit.
inline int find_threshold_N(ThresholdFamily family, const NoiseSpec& noise, int lambda,
                            double criterion_m = 0.1) {
  constexpr int kMaxN = 10000;
  const AsymptoticWeights w = optimal_asymptotic_weights(noise.ratio(), lambda);
  const double limit = (family == ThresholdFamily::rt_optimal ||
                        family == ThresholdFamily::rt_truncated)
                           ? asymptotic_variance(w, lambda, noise)
                           : asymptotic_pp_variance(noise, lambda);
  const double limit_std = std::sqrt(limit);
  OptimalWeightTable rt_table(noise, lambda);
  PpWeightTable pp_table(noise, lambda);
  for (int n = 1; n <= kMaxN; ++n) {
    double var = 0.0;
    switch (family) {
      case ThresholdFamily::rt_optimal: var = 1.0 / rt_table.at(n, 0).c; break;
      case ThresholdFamily::rt_truncated: var = variance_truncated(n, 0, lambda, noise); break;
      case ThresholdFamily::pp_optimal: var = 1.0 / pp_table.at(n, n, 0).c; break;
      case ThresholdFamily::pp_truncated: {
        const double vm = variance_truncated(n, 0, lambda, noise);
        const double vp = variance_truncated_forward(n, 0, lambda, noise);
        var = vm * vp / (vm + vp);
        break;
      }
    }
    if (std::abs(std::sqrt(var) - limit_std) < criterion_m) return n;
  }
  throw DiagnosticError("threshold search did not converge by N = 10000");
}

struct ExperimentConfig {
  TimeGrid grid;
  NoiseSpec noise;
  double distance_m = 4000.0;
  int sims = 100;
  std::uint64_t seed = 1;
  std::vector<EstimatorSpec> roster;
  BoundaryPolicy pp_boundary = BoundaryPolicy::anchor;
  std::vector<long> report_epochs;  ///< empty: all GPS epochs

  void validate() const {
    if (sims < 1) throw ConfigError("experiment: sims must be >= 1");
    if (roster.empty()) throw ConfigError("experiment: roster is empty");
    for (const auto& spec : roster) spec.validate();
    for (long e : report_epochs) {
      if (e < 0 || e > grid.n) throw ConfigError("experiment: report epoch outside trace");
    }
  }
};

struct EstimatorReport {
  EstimatorSpec spec;
  std::string tag;
  std::vector<double> rmse_m;      ///< per report epoch (NaN where undefined)
  std::vector<double> bias_m;
  std::vector<double> variance_m2;
  std::vector<int> n_minus;        ///< effective window metadata per epoch
  std::vector<int> n_plus;
  double mean_rmse_m = 0.0;        ///< over defined epochs
  double max_rmse_m = 0.0;
};

struct RmseReport {
  std::vector<long> epochs;
  std::vector<double> times_s;
  std::vector<EstimatorReport> estimators;
  int sims = 0;
  std::uint64_t seed = 0;
};

namespace detail {

struct SharedTables {
  std::shared_ptr<OptimalWeightTable> rt;
  std::shared_ptr<PpWeightTable> pp;
};

/// Estimates of one roster entry at the report epochs for one trace.
inline void evaluate_estimator(const EstimatorSpec& spec, const SensorTrace& trace,
                               const NoiseSpec& noise, const std::vector<long>& epochs,
                               BoundaryPolicy pp_boundary, const SharedTables& tables,
                               std::vector<double>& out) {
  const int lambda = trace.grid.lambda;
  out.resize(epochs.size());
  switch (spec.kind) {
    case EstimatorKind::odometer:
      for (std::size_t k = 0; k < epochs.size(); ++k) out[k] = trace.odometer_m[epochs[k]];
      return;
    case EstimatorKind::gps:
      for (std::size_t k = 0; k < epochs.size(); ++k) {
        const long i = epochs[k];
        out[k] = (i % lambda == 0 && trace.has_fix(i / lambda))
                     ? trace.gps_m[i / lambda]
                     : std::numeric_limits<double>::quiet_NaN();
      }
      return;
    case EstimatorKind::rt_recursive: {
      const EstimateSeries series =
          filter_recursive(trace, optimal_asymptotic_weights(noise.ratio(), lambda), noise);
      for (std::size_t k = 0; k < epochs.size(); ++k) out[k] = series.xhat_m[epochs[k]];
      return;
    }
    case EstimatorKind::kalman: {
      const KalmanResult kf = kalman_filter(trace, noise);
      for (std::size_t k = 0; k < epochs.size(); ++k) out[k] = kf.series.xhat_m[epochs[k]];
      return;
    }
    case EstimatorKind::rt_truncated:
      for (std::size_t k = 0; k < epochs.size(); ++k) {
        out[k] = filter_truncated_at(trace, noise, epochs[k], spec.window).xhat_m;
      }
      return;
    case EstimatorKind::rt_optimal:
      for (std::size_t k = 0; k < epochs.size(); ++k) {
        out[k] = filter_optimal_at(trace, noise, epochs[k], spec.window, tables.rt.get()).xhat_m;
      }
      return;
    case EstimatorKind::pp_optimal:
      for (std::size_t k = 0; k < epochs.size(); ++k) {
        out[k] = smoother_optimal_at(trace, noise, epochs[k], spec.window, pp_boundary,
                                     tables.pp.get())
                     .xhat_m;
      }
      return;
    case EstimatorKind::pp_asymptotic:
      for (std::size_t k = 0; k < epochs.size(); ++k) {
        out[k] = smoother_asymptotic_at(trace, noise, epochs[k], spec.window, pp_boundary).xhat_m;
      }
      return;
  }
  throw ConfigError("evaluate: unknown estimator kind");
}

/// Window metadata at the report epochs (trace-independent for simulated
/// traces, which carry every fix).
inline void window_metadata(const EstimatorSpec& spec, const TimeGrid& grid,
                            BoundaryPolicy pp_boundary, const std::vector<long>& epochs,
                            std::vector<int>& n_minus, std::vector<int>& n_plus) {
  if (!estimator_is_windowed(spec.kind)) return;
  n_minus.resize(epochs.size());
  n_plus.resize(epochs.size());
  const bool two_sided =
      spec.kind == EstimatorKind::pp_asymptotic || spec.kind == EstimatorKind::pp_optimal;
  for (std::size_t k = 0; k < epochs.size(); ++k) {
    const long i = epochs[k];
    const int back_avail = static_cast<int>(i / grid.lambda + 1);
    const int fwd_avail = static_cast<int>(grid.m - i / grid.lambda);
    if (two_sided && pp_boundary == BoundaryPolicy::anchor) {
      n_minus[k] = spec.window;
      n_plus[k] = spec.window;
    } else {
      n_minus[k] = std::min(spec.window, back_avail);
      n_plus[k] = two_sided ? std::min(spec.window, fwd_avail) : 0;
    }
  }
}

}  // namespace detail

/// Runs the seeded simulation experiment: for every simulation substream,
/// draws a fresh trace and evaluates every roster estimator at the report
/// epochs; accumulates squared errors into per-epoch RMSE, bias and
/// variance. Simulations run on worker threads in fixed-size chunks merged
/// in index order, so the report is identical for any thread count.
inline RmseReport run_monte_carlo(const ExperimentConfig& config, int threads = 0) {
  config.validate();
  const TimeGrid& grid = config.grid;
  const Trajectory truth = constant_speed_trajectory(grid, config.distance_m);

  std::vector<long> epochs = config.report_epochs;
  if (epochs.empty()) {
    epochs.resize(grid.m + 1);
    for (long j = 0; j <= grid.m; ++j) epochs[j] = j * grid.lambda;
  }
  const std::size_t n_epochs = epochs.size();
  const std::size_t n_est = config.roster.size();

  detail::SharedTables tables;
  tables.rt = std::make_shared<OptimalWeightTable>(config.noise, grid.lambda);
  tables.pp = std::make_shared<PpWeightTable>(config.noise, grid.lambda);

  constexpr int kChunk = 8;
  const int n_chunks = (config.sims + kChunk - 1) / kChunk;
  // per chunk, per estimator, per epoch: sum of errors and squared errors
  std::vector<std::vector<double>> chunk_sum(n_chunks), chunk_sum_sq(n_chunks);
  std::atomic<int> next_chunk{0};
  std::mutex failure_mutex;
  std::optional<std::pair<int, std::string>> failure;

  auto worker = [&]() {
    std::vector<double> estimates;
    for (;;) {
      const int chunk = next_chunk.fetch_add(1);
      if (chunk >= n_chunks) return;
      auto& sum = chunk_sum[chunk];
      auto& sum_sq = chunk_sum_sq[chunk];
      sum.assign(n_est * n_epochs, 0.0);
      sum_sq.assign(n_est * n_epochs, 0.0);
      const int sim_lo = chunk * kChunk;
      const int sim_hi = std::min(config.sims, sim_lo + kChunk);
      for (int sim = sim_lo; sim < sim_hi; ++sim) {
        {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (failure && failure->first < sim) return;
        }
        const SensorTrace trace =
            simulate_sensors(truth, config.noise, grid, substream_seed(config.seed, sim));
        for (std::size_t e = 0; e < n_est; ++e) {
          try {
            detail::evaluate_estimator(config.roster[e], trace, config.noise, epochs,
                                       config.pp_boundary, tables, estimates);
          } catch (const Error& err) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure || sim < failure->first) {
              failure = {sim, "estimator " + config.roster[e].tag() + " failed on simulation " +
                                  std::to_string(sim) + ": " + err.what()};
            }
            return;
          }
          for (std::size_t k = 0; k < n_epochs; ++k) {
            const double err = estimates[k] - truth.positions_m[epochs[k]];
            sum[e * n_epochs + k] += err;
            sum_sq[e * n_epochs + k] += err * err;
          }
        }
      }
    }
  };

  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp(n_threads, 1, n_chunks);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) throw InputError(failure->second);

  // ordered merge keeps the report independent of the thread count
  std::vector<double> sum(n_est * n_epochs, 0.0), sum_sq(n_est * n_epochs, 0.0);
  for (int chunk = 0; chunk < n_chunks; ++chunk) {
    for (std::size_t k = 0; k < n_est * n_epochs; ++k) {
      sum[k] += chunk_sum[chunk][k];
      sum_sq[k] += chunk_sum_sq[chunk][k];
    }
  }

  RmseReport report;
  report.sims = config.sims;
  report.seed = config.seed;
  report.epochs = epochs;
  report.times_s.resize(n_epochs);
  for (std::size_t k = 0; k < n_epochs; ++k) report.times_s[k] = grid.time_of(epochs[k]);
  const double s = static_cast<double>(config.sims);
  for (std::size_t e = 0; e < n_est; ++e) {
    EstimatorReport er;
    er.spec = config.roster[e];
    er.tag = er.spec.tag();
    er.rmse_m.resize(n_epochs);
    er.bias_m.resize(n_epochs);
    er.variance_m2.resize(n_epochs);
    double mean_acc = 0.0, max_acc = 0.0;
    std::size_t defined = 0;
    for (std::size_t k = 0; k < n_epochs; ++k) {
      const double mse = sum_sq[e * n_epochs + k] / s;
      const double bias = sum[e * n_epochs + k] / s;
      er.rmse_m[k] = std::sqrt(mse);
      er.bias_m[k] = bias;
      er.variance_m2[k] = mse - bias * bias;
      if (!std::isnan(er.rmse_m[k])) {
        mean_acc += er.rmse_m[k];
        max_acc = std::max(max_acc, er.rmse_m[k]);
        ++defined;
      }
    }
    er.mean_rmse_m = defined ? mean_acc / static_cast<double>(defined)
                             : std::numeric_limits<double>::quiet_NaN();
    er.max_rmse_m = defined ? max_acc : std::numeric_limits<double>::quiet_NaN();
    detail::window_metadata(er.spec, grid, config.pp_boundary, epochs, er.n_minus, er.n_plus);
    report.estimators.push_back(std::move(er));
  }
  return report;
}

}  // namespace odofuse
