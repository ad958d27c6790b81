#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "odofuse/error.hpp"
#include "odofuse/evaluation.hpp"
#include "odofuse/trace.hpp"
#include "odofuse/version.hpp"

namespace odofuse {

/// Shortest decimal form that round-trips the exact double.
inline std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& text, const std::string& context) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw FormatError(context + ": bad number '" + text + "'");
  }
  return value;
}

/// Ordered key/value pairs embedded as a comment line at the top of every
/// emitted file, so a run can be replayed exactly.
struct Manifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries) {
      if (k == key) {
        v = value;
        return;
      }
    }
    entries.emplace_back(key, value);
  }

  std::optional<std::string> get(const std::string& key) const {
    for (const auto& [k, v] : entries) {
      if (k == key) return v;
    }
    return std::nullopt;
  }
};

inline Manifest base_manifest() {
  Manifest m;
  m.set("tool", "odofuse");
  m.set("version", kVersion);
  return m;
}

inline void write_manifest(std::ostream& os, const Manifest& manifest) {
  os << "# manifest:";
  for (const auto& [key, value] : manifest.entries) {
    os << ' ' << key << '=';
    if (value.find_first_of(" \t\"") != std::string::npos) {
      os << '"';
      for (char c : value) {
        if (c == '"' || c == '\\') os << '\\';
        os << c;
      }
      os << '"';
    } else {
      os << value;
    }
  }
  os << '\n';
}

inline Manifest parse_manifest_line(const std::string& line) {
  Manifest manifest;
  const std::string prefix = "# manifest:";
  if (line.rfind(prefix, 0) != 0) return manifest;
  std::size_t pos = prefix.size();
  while (pos < line.size()) {
    while (pos < line.size() && line[pos] == ' ') ++pos;
    const std::size_t eq = line.find('=', pos);
    if (eq == std::string::npos) break;
    const std::string key = line.substr(pos, eq - pos);
    pos = eq + 1;
    std::string value;
    if (pos < line.size() && line[pos] == '"') {
      ++pos;
      while (pos < line.size() && line[pos] != '"') {
        if (line[pos] == '\\' && pos + 1 < line.size()) ++pos;
        value += line[pos++];
      }
      ++pos;
    } else {
      const std::size_t space = line.find(' ', pos);
      value = line.substr(pos, space == std::string::npos ? std::string::npos : space - pos);
      pos = space == std::string::npos ? line.size() : space;
    }
    manifest.set(key, value);
  }
  return manifest;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

struct CsvTable {
  Manifest manifest;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

inline CsvTable read_csv(std::istream& is, const std::string& context) {
  CsvTable table;
  std::string line;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# manifest:", 0) == 0) table.manifest = parse_manifest_line(line);
      continue;
    }
    if (!header_seen) {
      table.header = split_csv(line);
      header_seen = true;
      continue;
    }
    table.rows.push_back(split_csv(line));
  }
  if (!header_seen) throw FormatError(context + ": missing header row");
  return table;
}

}  // namespace detail

// --- trace --------------------------------------------------------------

inline void write_trace_csv(std::ostream& os, const SensorTrace& trace, Manifest manifest = {}) {
  if (manifest.entries.empty()) manifest = base_manifest();
  manifest.set("lambda", std::to_string(trace.grid.lambda));
  manifest.set("horizon_s", format_double(trace.grid.horizon_s));
  manifest.set("f_od_hz", format_double(trace.grid.f_od_hz));
  manifest.set("t0_fix", trace.t0_fix ? "1" : "0");
  if (trace.seed) manifest.set("seed", std::to_string(*trace.seed));
  write_manifest(os, manifest);
  os << "epoch,time_s,y_od_m,y_gps_m,truth_m\n";
  for (long i = 0; i <= trace.grid.n; ++i) {
    os << i << ',' << format_double(trace.grid.time_of(i)) << ','
       << format_double(trace.odometer_m[i]) << ',';
    if (trace.grid.is_gps_epoch(i) && trace.has_fix(i / trace.grid.lambda)) {
      os << format_double(trace.gps_m[i / trace.grid.lambda]);
    }
    os << ',';
    if (trace.truth) os << format_double(trace.truth->positions_m[i]);
    os << '\n';
  }
}

inline SensorTrace read_trace_csv(std::istream& is) {
  const detail::CsvTable table = detail::read_csv(is, "trace");
  if (table.header != std::vector<std::string>{"epoch", "time_s", "y_od_m", "y_gps_m", "truth_m"}) {
    throw FormatError("trace: unexpected header");
  }
  if (table.rows.size() < 2) throw FormatError("trace: needs at least two epochs");
  const long n = static_cast<long>(table.rows.size()) - 1;

  int lambda = 0;
  if (const auto v = table.manifest.get("lambda")) {
    lambda = static_cast<int>(parse_double(*v, "trace manifest lambda"));
  } else {
    // infer from spacing of populated GPS cells
    long prev = -1;
    for (const auto& row : table.rows) {
      if (row.size() > 3 && !row[3].empty()) {
        const long epoch = static_cast<long>(parse_double(row[0], "trace epoch"));
        if (prev >= 0) {
          lambda = static_cast<int>(epoch - prev);
          break;
        }
        prev = epoch;
      }
    }
    if (lambda == 0) throw FormatError("trace: cannot infer lambda (add a manifest)");
  }

  double horizon = 0.0;
  if (const auto v = table.manifest.get("horizon_s")) {
    horizon = parse_double(*v, "trace manifest horizon");
  } else {
    horizon = parse_double(table.rows.back()[1], "trace time");
  }

  SensorTrace trace;
  trace.grid = make_time_grid_counts(n, lambda, horizon);
  trace.odometer_m.resize(n + 1);
  trace.gps_m.assign(trace.grid.m + 1, std::numeric_limits<double>::quiet_NaN());
  Trajectory truth;
  bool has_truth = true;
  truth.positions_m.resize(n + 1);
  for (long i = 0; i <= n; ++i) {
    const auto& row = table.rows[i];
    if (row.size() != 5) throw FormatError("trace: row " + std::to_string(i) + " malformed");
    const long epoch = static_cast<long>(parse_double(row[0], "trace epoch"));
    if (epoch != i) throw FormatError("trace: epochs must be contiguous from 0");
    trace.odometer_m[i] = parse_double(row[2], "trace y_od");
    if (!row[3].empty()) {
      if (i % lambda != 0) throw FormatError("trace: GPS value off the GPS grid at epoch " +
                                             std::to_string(i));
      trace.gps_m[i / lambda] = parse_double(row[3], "trace y_gps");
    }
    if (row[4].empty()) {
      has_truth = false;
    } else {
      truth.positions_m[i] = parse_double(row[4], "trace truth");
    }
  }
  trace.t0_fix = !std::isnan(trace.gps_m[0]);
  if (const auto v = table.manifest.get("t0_fix")) trace.t0_fix = (*v == "1") && trace.t0_fix;
  if (has_truth) trace.truth = std::move(truth);
  if (const auto v = table.manifest.get("seed")) {
    trace.seed = static_cast<std::uint64_t>(std::stoull(*v));
  }
  trace.validate();
  return trace;
}

// --- ingestion of raw sensor logs ---------------------------------------

namespace detail {

struct TimedSeries {
  std::vector<double> time_s;
  std::vector<double> value;
};

inline TimedSeries read_timed_csv(std::istream& is, const std::string& context) {
  const CsvTable table = read_csv(is, context);
  if (table.header.size() != 2) throw FormatError(context + ": expected two columns");
  TimedSeries out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != 2) throw FormatError(context + ": row " + std::to_string(r) + " malformed");
    out.time_s.push_back(parse_double(row[0], context + " time"));
    out.value.push_back(parse_double(row[1], context + " value"));
    if (r > 0 && out.time_s[r] <= out.time_s[r - 1]) {
      throw FormatError(context + ": non-monotone timestamp at row " + std::to_string(r));
    }
  }
  if (out.time_s.size() < 2) throw FormatError(context + ": needs at least two rows");
  return out;
}

}  // namespace detail

/// Builds a SensorTrace from separate odometer / GPS logs (columns
/// time_s,value). The odometer defines the grid; GPS timestamps must snap
/// onto epochs that are multiples of lambda within `jitter_tol_s`
/// (default: half an odometer period). A GPS row that cannot be snapped is
/// an alignment error; fixes may be missing (holes), including the t0 fix.
inline SensorTrace ingest_trace(std::istream& odometer_csv, std::istream& gps_csv,
                                std::istream* truth_csv, int lambda,
                                std::optional<double> jitter_tol_s = std::nullopt) {
  if (lambda < 1) throw ConfigError("ingest: lambda must be >= 1");
  const detail::TimedSeries od = detail::read_timed_csv(odometer_csv, "odometer");
  const long n = static_cast<long>(od.time_s.size()) - 1;
  const double dt = (od.time_s.back() - od.time_s.front()) / static_cast<double>(n);
  for (long i = 1; i <= n; ++i) {
    const double step = od.time_s[i] - od.time_s[i - 1];
    if (std::abs(step - dt) > 1e-6 * dt) {
      throw FormatError("odometer: non-uniform sampling at row " + std::to_string(i));
    }
  }
  if (n % lambda != 0) {
    throw FormatError("odometer: row count minus one must be a multiple of lambda; trim the log");
  }

  SensorTrace trace;
  trace.grid = make_time_grid_counts(n, lambda, dt * static_cast<double>(n));
  trace.odometer_m = od.value;
  trace.gps_m.assign(trace.grid.m + 1, std::numeric_limits<double>::quiet_NaN());

  const double tol = jitter_tol_s.value_or(dt / 2.0);
  const double t0 = od.time_s.front();
  const double gps_period = dt * lambda;
  const detail::TimedSeries gps = detail::read_timed_csv(gps_csv, "gps");
  for (std::size_t r = 0; r < gps.time_s.size(); ++r) {
    const double rel = gps.time_s[r] - t0;
    const long j = std::lround(rel / gps_period);
    if (j < 0 || j > trace.grid.m || std::abs(rel - j * gps_period) > tol) {
      throw AlignmentError("gps: row " + std::to_string(r) + " at t=" +
                           format_double(gps.time_s[r]) + " s does not snap to the GPS grid");
    }
    if (!std::isnan(trace.gps_m[j])) {
      throw FormatError("gps: duplicate fix for epoch " + std::to_string(j * lambda));
    }
    trace.gps_m[j] = gps.value[r];
  }
  trace.t0_fix = !std::isnan(trace.gps_m[0]);

  if (truth_csv) {
    const detail::TimedSeries truth = detail::read_timed_csv(*truth_csv, "truth");
    if (static_cast<long>(truth.value.size()) != n + 1) {
      throw FormatError("truth: must match the odometer grid (n+1 rows)");
    }
    trace.truth = Trajectory{truth.value};
  }
  trace.validate();
  return trace;
}

// --- estimate series -----------------------------------------------------

inline void write_estimate_csv(std::ostream& os, const EstimateSeries& series,
                               const TimeGrid& grid, Manifest manifest = {}) {
  if (manifest.entries.empty()) manifest = base_manifest();
  manifest.set("estimator", series.kind);
  if (series.window > 0) manifest.set("window", std::to_string(series.window));
  if (series.degraded_init) manifest.set("degraded_init", "1");
  write_manifest(os, manifest);
  const bool has_var = !series.var_m2.empty();
  const bool has_window = !series.n_minus.empty();
  os << "epoch,time_s,xhat_m,var_m2,n_minus,n_plus\n";
  for (long i = 0; i < static_cast<long>(series.xhat_m.size()); ++i) {
    os << i << ',' << format_double(grid.time_of(i)) << ',' << format_double(series.xhat_m[i])
       << ',';
    if (has_var) os << format_double(series.var_m2[i]);
    os << ',';
    if (has_window) os << series.n_minus[i];
    os << ',';
    if (has_window && !series.n_plus.empty()) os << series.n_plus[i];
    os << '\n';
  }
}

// --- report ---------------------------------------------------------------

inline void write_report_csv(std::ostream& os, const RmseReport& report, Manifest manifest = {},
                             bool bias_variance_columns = false) {
  if (manifest.entries.empty()) manifest = base_manifest();
  manifest.set("sims", std::to_string(report.sims));
  manifest.set("seed", std::to_string(report.seed));
  write_manifest(os, manifest);
  os << "epoch,time_s";
  for (const auto& est : report.estimators) {
    os << ',' << est.tag << "_rmse_m";
    if (bias_variance_columns) {
      os << ',' << est.tag << "_bias_m," << est.tag << "_var_m2";
    }
  }
  os << '\n';
  for (std::size_t k = 0; k < report.epochs.size(); ++k) {
    os << report.epochs[k] << ',' << format_double(report.times_s[k]);
    for (const auto& est : report.estimators) {
      os << ',';
      if (!std::isnan(est.rmse_m[k])) os << format_double(est.rmse_m[k]);
      if (bias_variance_columns) {
        os << ',';
        if (!std::isnan(est.bias_m[k])) os << format_double(est.bias_m[k]);
        os << ',';
        if (!std::isnan(est.variance_m2[k])) os << format_double(est.variance_m2[k]);
      }
    }
    os << '\n';
  }
  os << "# summary,estimator,mean_rmse_m,max_rmse_m\n";
  for (const auto& est : report.estimators) {
    os << "# summary," << est.tag << ',' << format_double(est.mean_rmse_m) << ','
       << format_double(est.max_rmse_m) << '\n';
  }
}

}  // namespace odofuse
