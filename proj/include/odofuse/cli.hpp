#pragma once

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "odofuse/config.hpp"
#include "odofuse/csv_io.hpp"
#include "odofuse/evaluation.hpp"
#include "odofuse/version.hpp"

namespace odofuse::cli {

/// Relative output paths are placed under $ODOFUSE_OUTPUT_DIR when set.
inline std::string resolve_out_path(const std::string& path) {
  namespace fs = std::filesystem;
  if (path.empty() || fs::path(path).is_absolute()) return path;
  if (const char* dir = std::getenv("ODOFUSE_OUTPUT_DIR"); dir && *dir) {
    return (fs::path(dir) / path).string();
  }
  return path;
}

inline std::string join_argv(int argc, const char* const* argv) {
  std::string joined;
  for (int i = 0; i < argc; ++i) {
    if (i) joined += ' ';
    joined += argv[i];
  }
  return joined;
}

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open input file: " + path);
  return is;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open output file: " + path);
  return os;
}

inline ConfigMap load_config(const std::string& name_or_path) {
  if (auto preset = config_preset(name_or_path)) return *preset;
  std::ifstream is(name_or_path);
  if (!is) throw ConfigError("config '" + name_or_path + "' is neither a preset nor a file");
  return parse_config_text(is);
}

struct NoiseFlags {
  double sigma_od = -1.0;
  double sigma_gps = -1.0;
};

}  // namespace detail

inline int dispatch(int argc, const char* const* argv) {
  CLI::App app{"odometer/GPS moving fixed-interval position filters and smoothers"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  const std::string command_line = join_argv(argc, argv);

  // --- simulate ---
  auto* sim_cmd = app.add_subcommand("simulate", "simulate a sensor trace and write it as CSV");
  std::string sim_config = "paper-sim";
  std::string sim_out = "trace.csv";
  detail::NoiseFlags sim_noise;
  double sim_f_od = -1, sim_f_gps = -1, sim_duration = -1, sim_distance = -1;
  int sim_lambda = 0;
  std::int64_t sim_seed = -1;
  sim_cmd->add_option("--config,-c", sim_config, "preset name or config file");
  sim_cmd->add_option("--sigma-od", sim_noise.sigma_od, "odometer step error std-dev [m]");
  sim_cmd->add_option("--sigma-gps", sim_noise.sigma_gps, "GPS error std-dev [m]");
  sim_cmd->add_option("--f-od", sim_f_od, "odometer rate [Hz]");
  sim_cmd->add_option("--f-gps", sim_f_gps, "GPS rate [Hz]");
  sim_cmd->add_option("--lambda", sim_lambda, "frequency ratio (sets f_gps = f_od/lambda)");
  sim_cmd->add_option("--duration", sim_duration, "trip duration [s]");
  sim_cmd->add_option("--distance", sim_distance, "trip length [m]");
  sim_cmd->add_option("--seed", sim_seed, "RNG seed");
  sim_cmd->add_option("--out,-o", sim_out, "output trace CSV path");

  // --- estimate ---
  auto* est_cmd = app.add_subcommand("estimate", "run one estimator over a trace");
  std::string est_trace, est_od, est_gps, est_truth, est_estimator, est_boundary = "shrink";
  std::string est_out = "estimate.csv";
  detail::NoiseFlags est_noise;
  int est_lambda = 0;
  est_cmd->add_option("--trace,-t", est_trace, "input trace CSV (from simulate or ingest)");
  est_cmd->add_option("--odometer", est_od, "raw odometer log (time_s,y_od_m)");
  est_cmd->add_option("--gps", est_gps, "raw GPS log (time_s,y_gps_m)");
  est_cmd->add_option("--truth", est_truth, "reference positions (time_s,truth_m)");
  est_cmd->add_option("--lambda", est_lambda, "frequency ratio for raw log ingestion");
  est_cmd->add_option("--estimator,-e", est_estimator,
                      "odometer|gps|rt_inf|rt_trunc:N|rt_opt:N|pp_inf:N|pp_opt:N|kf")
      ->required();
  est_cmd->add_option("--sigma-od", est_noise.sigma_od, "odometer step error std-dev [m]");
  est_cmd->add_option("--sigma-gps", est_noise.sigma_gps, "GPS error std-dev [m]");
  est_cmd->add_option("--pp-boundary", est_boundary, "smoother boundary policy: shrink|anchor");
  est_cmd->add_option("--out,-o", est_out, "output estimate CSV path");

  // --- evaluate ---
  auto* eval_cmd = app.add_subcommand("evaluate", "Monte-Carlo RMSE study over simulated traces");
  std::string eval_config = "paper-sim";
  std::string eval_out = "report.csv";
  int eval_sims = 0, eval_threads = 0;
  std::int64_t eval_seed = -1;
  bool eval_bias_cols = false;
  eval_cmd->add_option("--config,-c", eval_config, "preset name or config file");
  eval_cmd->add_option("--sims", eval_sims, "number of simulations");
  eval_cmd->add_option("--seed", eval_seed, "master seed");
  eval_cmd->add_option("--threads", eval_threads, "worker threads (0 = hardware)");
  eval_cmd->add_flag("--bias-variance", eval_bias_cols, "emit per-epoch bias/variance columns");
  eval_cmd->add_option("--out,-o", eval_out, "output report CSV path");

  // --- thresholds ---
  auto* thr_cmd = app.add_subcommand("thresholds",
                                     "window sizes where each family reaches its asymptote");
  double thr_sigma_od = 0.05, thr_sigma_gps = 3.0, thr_criterion = 0.1;
  int thr_lambda = 10;
  thr_cmd->add_option("--sigma-od", thr_sigma_od, "odometer step error std-dev [m]");
  thr_cmd->add_option("--sigma-gps", thr_sigma_gps, "GPS error std-dev [m]");
  thr_cmd->add_option("--lambda", thr_lambda, "frequency ratio");
  thr_cmd->add_option("--criterion", thr_criterion, "std-dev gap criterion [m]");

  // --- variance ---
  auto* var_cmd = app.add_subcommand("variance", "tabulate analytic variances vs N and phase");
  double var_sigma_od = 0.05, var_sigma_gps = 3.0;
  int var_lambda = 10, var_nmax = 40;
  std::string var_out;
  var_cmd->add_option("--sigma-od", var_sigma_od, "odometer step error std-dev [m]");
  var_cmd->add_option("--sigma-gps", var_sigma_gps, "GPS error std-dev [m]");
  var_cmd->add_option("--lambda", var_lambda, "frequency ratio");
  var_cmd->add_option("--nmax", var_nmax, "largest window size");
  var_cmd->add_option("--out,-o", var_out, "output CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    if (sim_cmd->parsed()) {
      ConfigMap map = detail::load_config(sim_config);
      if (sim_noise.sigma_od >= 0) map["sigma_od"] = format_double(sim_noise.sigma_od);
      if (sim_noise.sigma_gps >= 0) map["sigma_gps"] = format_double(sim_noise.sigma_gps);
      if (sim_f_od > 0) map["f_od"] = format_double(sim_f_od);
      if (sim_f_gps > 0) map["f_gps"] = format_double(sim_f_gps);
      if (sim_lambda > 0) {
        const double f_od = detail::config_double(map, "f_od");
        map["f_gps"] = format_double(f_od / sim_lambda);
      }
      if (sim_duration > 0) map["duration_s"] = format_double(sim_duration);
      if (sim_distance > 0) map["distance_m"] = format_double(sim_distance);
      if (sim_seed >= 0) map["seed"] = std::to_string(sim_seed);
      map["sims"] = "1";
      if (map.find("estimators") == map.end()) map["estimators"] = "kf";
      const ExperimentConfig config = build_experiment_config(map);
      const Trajectory traj = constant_speed_trajectory(config.grid, config.distance_m);
      const SensorTrace trace = simulate_sensors(traj, config.noise, config.grid, config.seed);
      Manifest manifest = base_manifest();
      manifest.set("command", command_line);
      manifest.set("sigma_od", format_double(config.noise.sigma_od_m));
      manifest.set("sigma_gps", format_double(config.noise.sigma_gps_m));
      auto os = detail::open_output(resolve_out_path(sim_out));
      write_trace_csv(os, trace, manifest);
      std::cout << "wrote trace (" << trace.grid.n + 1 << " epochs) to "
                << resolve_out_path(sim_out) << '\n';
      return 0;
    }

    if (est_cmd->parsed()) {
      SensorTrace trace;
      NoiseSpec noise{0.0, 0.0};
      bool have_noise = false;
      if (!est_trace.empty()) {
        auto is = detail::open_input(est_trace);
        trace = read_trace_csv(is);
        // noise defaults recorded by simulate
        std::ifstream manifest_probe(est_trace);
        std::string first_line;
        std::getline(manifest_probe, first_line);
        const Manifest m = parse_manifest_line(first_line);
        if (m.get("sigma_od") && m.get("sigma_gps")) {
          noise = make_noise(parse_double(*m.get("sigma_od"), "manifest sigma_od"),
                             parse_double(*m.get("sigma_gps"), "manifest sigma_gps"));
          have_noise = true;
        }
      } else if (!est_od.empty() && !est_gps.empty()) {
        if (est_lambda < 1) throw ConfigError("estimate: raw ingestion requires --lambda");
        auto od_is = detail::open_input(est_od);
        auto gps_is = detail::open_input(est_gps);
        std::optional<std::ifstream> truth_is;
        if (!est_truth.empty()) truth_is.emplace(detail::open_input(est_truth));
        trace = ingest_trace(od_is, gps_is, truth_is ? &*truth_is : nullptr, est_lambda);
      } else {
        throw ConfigError("estimate: provide --trace, or --odometer and --gps");
      }
      if (est_noise.sigma_od >= 0 && est_noise.sigma_gps >= 0) {
        noise = make_noise(est_noise.sigma_od, est_noise.sigma_gps);
        have_noise = true;
      }
      const EstimatorSpec spec = parse_estimator(est_estimator);
      const bool needs_noise =
          spec.kind != EstimatorKind::odometer && spec.kind != EstimatorKind::gps;
      if (needs_noise && !have_noise) {
        throw ConfigError("estimate: --sigma-od and --sigma-gps required (no trace manifest)");
      }
      BoundaryPolicy policy = BoundaryPolicy::shrink;
      if (est_boundary == "anchor") policy = BoundaryPolicy::anchor;
      else if (est_boundary != "shrink") throw ConfigError("estimate: bad --pp-boundary");

      EstimateSeries series;
      const int lambda = trace.grid.lambda;
      switch (spec.kind) {
        case EstimatorKind::odometer:
          series.kind = "odometer";
          series.xhat_m = trace.odometer_m;
          break;
        case EstimatorKind::gps: {
          series.kind = "gps";
          series.xhat_m.assign(trace.grid.n + 1, std::numeric_limits<double>::quiet_NaN());
          for (long j = 0; j <= trace.grid.m; ++j) {
            if (trace.has_fix(j)) series.xhat_m[j * lambda] = trace.gps_m[j];
          }
          break;
        }
        case EstimatorKind::rt_recursive:
          series = filter_recursive(trace, optimal_asymptotic_weights(noise.ratio(), lambda),
                                    noise);
          break;
        case EstimatorKind::rt_truncated:
          series = filter_truncated_series(trace, noise, spec.window);
          break;
        case EstimatorKind::rt_optimal:
          series = filter_optimal_series(trace, noise, spec.window);
          break;
        case EstimatorKind::pp_asymptotic:
          series = smoother_asymptotic_series(trace, noise, spec.window, policy);
          break;
        case EstimatorKind::pp_optimal:
          series = smoother_optimal_series(trace, noise, spec.window, policy);
          break;
        case EstimatorKind::kalman:
          series = kalman_filter(trace, noise).series;
          break;
      }
      Manifest manifest = base_manifest();
      manifest.set("command", command_line);
      auto os = detail::open_output(resolve_out_path(est_out));
      write_estimate_csv(os, series, trace.grid, manifest);
      std::cout << "wrote " << series.kind << " estimates to " << resolve_out_path(est_out)
                << '\n';
      return 0;
    }

    if (eval_cmd->parsed()) {
      ConfigMap map = detail::load_config(eval_config);
      if (eval_sims > 0) map["sims"] = std::to_string(eval_sims);
      if (eval_seed >= 0) map["seed"] = std::to_string(eval_seed);
      const ExperimentConfig config = build_experiment_config(map);
      const RmseReport report = run_monte_carlo(config, eval_threads);
      Manifest manifest = base_manifest();
      manifest.set("command", command_line);
      manifest.set("config", eval_config);
      auto os = detail::open_output(resolve_out_path(eval_out));
      write_report_csv(os, report, manifest, eval_bias_cols);
      std::cout << "estimator,mean_rmse_m,max_rmse_m\n";
      for (const auto& est : report.estimators) {
        std::cout << est.tag << ',' << format_double(est.mean_rmse_m) << ','
                  << format_double(est.max_rmse_m) << '\n';
      }
      std::cout << "wrote report to " << resolve_out_path(eval_out) << '\n';
      return 0;
    }

    if (thr_cmd->parsed()) {
      const NoiseSpec noise = make_noise(thr_sigma_od, thr_sigma_gps);
      std::cout << "rt_opt "
                << find_threshold_N(ThresholdFamily::rt_optimal, noise, thr_lambda, thr_criterion)
                << '\n';
      std::cout << "rt_trunc "
                << find_threshold_N(ThresholdFamily::rt_truncated, noise, thr_lambda,
                                    thr_criterion)
                << '\n';
      std::cout << "pp_opt "
                << find_threshold_N(ThresholdFamily::pp_optimal, noise, thr_lambda, thr_criterion)
                << '\n';
      std::cout << "pp_trunc "
                << find_threshold_N(ThresholdFamily::pp_truncated, noise, thr_lambda,
                                    thr_criterion)
                << '\n';
      return 0;
    }

    if (var_cmd->parsed()) {
      const NoiseSpec noise = make_noise(var_sigma_od, var_sigma_gps);
      OptimalWeightTable rt_table(noise, var_lambda);
      PpWeightTable pp_table(noise, var_lambda);
      std::ostringstream body;
      body << "N,d,rt_trunc_var_m2,rt_opt_var_m2,pp_trunc_var_m2,pp_opt_var_m2\n";
      for (int n = 1; n <= var_nmax; ++n) {
        for (int d = 0; d < var_lambda; ++d) {
          const double vt = variance_truncated(n, d, var_lambda, noise);
          const double vo = 1.0 / rt_table.at(n, d).c;
          const double vp = variance_truncated_forward(n, d, var_lambda, noise);
          const double pp_trunc = vt * vp / (vt + vp);
          const double pp_opt = 1.0 / pp_table.at(n, n, d).c;
          body << n << ',' << d << ',' << format_double(vt) << ',' << format_double(vo) << ','
               << format_double(pp_trunc) << ',' << format_double(pp_opt) << '\n';
        }
      }
      if (var_out.empty()) {
        std::cout << body.str();
      } else {
        auto os = detail::open_output(resolve_out_path(var_out));
        Manifest manifest = base_manifest();
        manifest.set("command", command_line);
        write_manifest(os, manifest);
        os << body.str();
        std::cout << "wrote variance table to " << resolve_out_path(var_out) << '\n';
      }
      return 0;
    }
  } catch (const NotSpdError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const NoAbsoluteFixError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const DiagnosticError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace odofuse::cli
