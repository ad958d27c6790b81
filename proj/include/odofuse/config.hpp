#pragma once

#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "odofuse/error.hpp"
#include "odofuse/evaluation.hpp"

namespace odofuse {

/// Flat key=value configuration ('#' comments, blank lines ignored).
using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config_text(std::istream& is) {
  ConfigMap out;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto key_end = key.find_last_not_of(" \t");
    key = key.substr(0, key_end == std::string::npos ? 0 : key_end + 1);
    const auto value_start = value.find_first_not_of(" \t");
    value = value_start == std::string::npos ? "" : value.substr(value_start);
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

/// Built-in experiment presets. "paper-sim" is the full simulation study
/// roster; "paper-rt" and "paper-pp" are its real-time and post-processing
/// subsets.
inline std::optional<ConfigMap> config_preset(const std::string& name) {
  ConfigMap base{
      {"sigma_od", "0.05"}, {"sigma_gps", "3"},   {"f_od", "10"},
      {"f_gps", "1"},       {"duration_s", "300"}, {"distance_m", "4000"},
      {"sims", "100"},      {"seed", "1"},         {"pp_boundary", "anchor"},
  };
  if (name == "paper-sim") {
    base["estimators"] =
        "odometer,gps,rt_inf,rt_trunc:4,rt_trunc:20,rt_trunc:40,"
        "rt_opt:4,rt_opt:20,rt_opt:40,kf,"
        "pp_opt:4,pp_opt:17,pp_opt:36,pp_inf:4,pp_inf:17,pp_inf:36";
    return base;
  }
  if (name == "paper-rt") {
    base["estimators"] =
        "odometer,gps,rt_inf,rt_trunc:4,rt_trunc:20,rt_trunc:40,"
        "rt_opt:4,rt_opt:20,rt_opt:40,kf";
    return base;
  }
  if (name == "paper-pp") {
    base["estimators"] = "odometer,gps,kf,pp_opt:4,pp_opt:17,pp_opt:36,pp_inf:4,pp_inf:17,pp_inf:36";
    return base;
  }
  return std::nullopt;
}

namespace detail {

inline double config_double(const ConfigMap& map, const std::string& key) {
  const auto it = map.find(key);
  if (it == map.end()) throw ConfigError("config: missing key '" + key + "'");
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for '" + key + "': " + it->second);
  }
}

}  // namespace detail

inline std::vector<EstimatorSpec> parse_roster(const std::string& text) {
  std::vector<EstimatorSpec> roster;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) roster.push_back(parse_estimator(item));
  }
  if (roster.empty()) throw ConfigError("config: empty estimator roster");
  return roster;
}

/// Materializes an ExperimentConfig from flat keys (after any overrides).
inline ExperimentConfig build_experiment_config(const ConfigMap& map) {
  ExperimentConfig config;
  config.grid = make_time_grid(detail::config_double(map, "f_od"),
                               detail::config_double(map, "f_gps"),
                               detail::config_double(map, "duration_s"));
  config.noise = make_noise(detail::config_double(map, "sigma_od"),
                            detail::config_double(map, "sigma_gps"));
  config.distance_m = detail::config_double(map, "distance_m");
  config.sims = static_cast<int>(detail::config_double(map, "sims"));
  if (const auto it = map.find("seed"); it != map.end()) {
    config.seed = std::stoull(it->second);
  }
  const auto roster = map.find("estimators");
  if (roster == map.end()) throw ConfigError("config: missing key 'estimators'");
  config.roster = parse_roster(roster->second);
  if (const auto it = map.find("pp_boundary"); it != map.end()) {
    if (it->second == "anchor") config.pp_boundary = BoundaryPolicy::anchor;
    else if (it->second == "shrink") config.pp_boundary = BoundaryPolicy::shrink;
    else throw ConfigError("config: pp_boundary must be 'shrink' or 'anchor'");
  }
  config.validate();
  return config;
}

}  // namespace odofuse
