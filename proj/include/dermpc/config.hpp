// Copyright 2026 The dermpc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file config.hpp
 * @brief Run configuration for the command-line tool.
 *
 * The config file is flat `key = value` text; `#` starts a comment. Relative
 * paths are resolved against the directory holding the config file.
 *
 *   key                     default     meaning
 *   fleet_file              (built-in) DER fleet file, see parse_fleet()
 *   net_demand              -           net-demand CSV
 *   net_demand_column       (2nd col)   value column name
 *   net_demand_scale        1           multiplier to GW (1e-3 for MW)
 *   disturbance             -           disturbance CSV, optional
 *   disturbance_column      (2nd col)
 *   disturbance_scale       1
 *   out_dir                 out         output directory
 *   step_seconds            300         simulation step
 *   tau_hours               24          MPC horizon
 *   shift_minutes           30          receding-horizon shift t_s
 *   kappa_g                 10          generation-deviation weight
 *   duration_hours          168         simulated span
 *   tol                     1e-6        solver eps_primal and eps_dual
 *   max_iter                50000       solver iteration cap
 *   perturb_whole_horizon   false       add the disturbance to the full window
 *   synthetic               false       built-in two-peak data instead of CSVs
 *   synthetic_seed          2020
 *   synthetic_noise_gw      0.2
 *   synthetic_disturbance_gw 0.5
 */
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "dermpc/battery_model.hpp"
#include "dermpc/data_io.hpp"
#include "dermpc/errors.hpp"
#include "dermpc/sim_harness.hpp"

namespace dermpc {

struct RunConfig {
  std::string fleet_file;
  std::string net_demand;
  std::string net_demand_column;
  double net_demand_scale = 1.0;
  std::string disturbance;
  std::string disturbance_column;
  double disturbance_scale = 1.0;
  std::string out_dir = "out";
  int step_seconds = 300;
  double tau_hours = 24.0;
  double shift_minutes = 30.0;
  double kappa_g = 10.0;
  double duration_hours = 168.0;
  double tol = 1e-6;
  int max_iter = 50000;
  bool perturb_whole_horizon = false;
  bool synthetic = false;
  int synthetic_seed = 2020;
  double synthetic_noise_gw = 0.2;
  double synthetic_disturbance_gw = 0.5;
};

/// Values given on the command line; each one set shadows the file.
struct RunOverrides {
  std::optional<std::string> fleet_file, net_demand, disturbance, out_dir;
  std::optional<double> tau_hours, shift_minutes, kappa_g, duration_hours, tol;
  std::optional<int> max_iter;
  std::optional<bool> synthetic, perturb_whole_horizon;
};

inline void apply_overrides(RunConfig& config, const RunOverrides& o) {
  if (o.fleet_file) config.fleet_file = *o.fleet_file;
  if (o.net_demand) config.net_demand = *o.net_demand;
  if (o.disturbance) config.disturbance = *o.disturbance;
  if (o.out_dir) config.out_dir = *o.out_dir;
  if (o.tau_hours) config.tau_hours = *o.tau_hours;
  if (o.shift_minutes) config.shift_minutes = *o.shift_minutes;
  if (o.kappa_g) config.kappa_g = *o.kappa_g;
  if (o.duration_hours) config.duration_hours = *o.duration_hours;
  if (o.tol) config.tol = *o.tol;
  if (o.max_iter) config.max_iter = *o.max_iter;
  if (o.synthetic) config.synthetic = *o.synthetic;
  if (o.perturb_whole_horizon) config.perturb_whole_horizon = *o.perturb_whole_horizon;
}

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw ConfigError(where + ": expected a boolean, got '" + v + "'");
}

inline int parse_int(const std::string& v, const std::string& where) {
  const double d = parse_double(v, where);
  if (d != std::floor(d) || std::abs(d) > 2e9) throw ConfigError(where + ": expected an integer, got '" + v + "'");
  return static_cast<int>(d);
}

inline std::string resolve_path(const std::string& value, const std::filesystem::path& base_dir) {
  if (value.empty()) return value;
  const std::filesystem::path p(value);
  return p.is_absolute() ? value : (base_dir / p).lexically_normal().string();
}

/// Converts a duration to a whole number of steps or throws.
inline int to_steps(double seconds, int step_seconds, const char* what) {
  const double steps = seconds / step_seconds;
  const double rounded = std::round(steps);
  if (!(std::abs(steps - rounded) <= 1e-9 * std::max(1.0, std::abs(steps))))
    throw ConfigError(fmt::format("{} ({} s) is not a whole number of {} s steps", what, seconds, step_seconds));
  return static_cast<int>(rounded);
}

}  // namespace detail

/// Parses config text. Relative paths resolve against `base_dir`.
inline RunConfig parse_run_config(std::istream& in, const std::string& name = "config",
                                  const std::filesystem::path& base_dir = ".") {
  RunConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = detail::trim(detail::strip_comment(line));
    if (body.empty()) continue;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    auto path = [&] { return detail::resolve_path(value, base_dir); };
    auto num = [&] { return detail::parse_double(value, where); };
    auto integer = [&] { return detail::parse_int(value, where); };
    auto flag = [&] { return detail::parse_bool(value, where); };
    if (key == "fleet_file") c.fleet_file = path();
    else if (key == "net_demand") c.net_demand = path();
    else if (key == "net_demand_column") c.net_demand_column = value;
    else if (key == "net_demand_scale") c.net_demand_scale = num();
    else if (key == "disturbance") c.disturbance = path();
    else if (key == "disturbance_column") c.disturbance_column = value;
    else if (key == "disturbance_scale") c.disturbance_scale = num();
    else if (key == "out_dir") c.out_dir = path();
    else if (key == "step_seconds") c.step_seconds = integer();
    else if (key == "tau_hours") c.tau_hours = num();
    else if (key == "shift_minutes") c.shift_minutes = num();
    else if (key == "kappa_g") c.kappa_g = num();
    else if (key == "duration_hours") c.duration_hours = num();
    else if (key == "tol") c.tol = num();
    else if (key == "max_iter") c.max_iter = integer();
    else if (key == "perturb_whole_horizon") c.perturb_whole_horizon = flag();
    else if (key == "synthetic") c.synthetic = flag();
    else if (key == "synthetic_seed") c.synthetic_seed = integer();
    else if (key == "synthetic_noise_gw") c.synthetic_noise_gw = num();
    else if (key == "synthetic_disturbance_gw") c.synthetic_disturbance_gw = num();
    else throw ConfigError(where + ": unknown key '" + key + "'");
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_run_config(in, path, std::filesystem::path(path).parent_path());
}

/// Controller settings implied by the config. Throws ConfigError.
inline MpcConfig mpc_config_from(const RunConfig& c) {
  if (c.step_seconds <= 0) throw ConfigError("step_seconds must be positive");
  MpcConfig m;
  m.horizon_steps = detail::to_steps(c.tau_hours * kSecondsPerHour, c.step_seconds, "tau");
  m.shift_steps = detail::to_steps(c.shift_minutes * 60.0, c.step_seconds, "shift");
  m.kappa_g = c.kappa_g;
  m.step_hours = c.step_seconds / kSecondsPerHour;
  m.validate();
  return m;
}

/// Loads every input the config names and assembles the scenario.
/// Throws ConfigError for bad settings and DataError for bad or missing data.
inline Scenario build_scenario(const RunConfig& c) {
  Scenario sc;
  sc.config = mpc_config_from(c);
  if (!(c.tol > 0.0)) throw ConfigError("tol must be positive");
  if (c.max_iter <= 0) throw ConfigError("max_iter must be positive");
  sc.settings.eps_primal = c.tol;
  sc.settings.eps_dual = c.tol;
  sc.settings.max_iterations = c.max_iter;
  if (!(c.duration_hours > 0.0)) throw ConfigError("duration_hours must be positive");
  sc.duration_steps = detail::to_steps(c.duration_hours * kSecondsPerHour, c.step_seconds, "duration");

  if (c.fleet_file.empty()) {
    sc.fleet = default_fleet();
    for (auto& cls : sc.fleet) cls.beta_hours = c.step_seconds / kSecondsPerHour;
  } else {
    sc.fleet = load_fleet_file(c.fleet_file);
  }
  sc.initial_state = FleetState::zeros(sc.fleet.size());

  if (c.synthetic) {
    if (86400 % c.step_seconds != 0) throw ConfigError("synthetic data needs a step that divides one day");
    const long per_day = 86400 / c.step_seconds;
    SyntheticDemandSpec demand;
    demand.step_seconds = c.step_seconds;
    demand.days = static_cast<int>((sc.required_coverage() + per_day - 1) / per_day);
    demand.noise_gw = c.synthetic_noise_gw;
    demand.day_variation = 0.1;
    demand.seed = static_cast<std::uint64_t>(c.synthetic_seed);
    sc.provider.base = synthetic_net_demand(demand);
    if (c.synthetic_disturbance_gw > 0.0)
      sc.provider.disturbance = synthetic_disturbance(sc.provider.base.size(), c.synthetic_disturbance_gw,
                                                      demand.seed + 1, demand.start_time, c.step_seconds);
  } else {
    if (c.net_demand.empty()) throw ConfigError("no net-demand source: set net_demand or synthetic");
    ColumnSpec spec;
    spec.value_column = c.net_demand_column;
    spec.scale = c.net_demand_scale;
    sc.provider.base = resample(load_csv(c.net_demand, spec), c.step_seconds);
  }
  if (!c.disturbance.empty()) {
    ColumnSpec spec;
    spec.value_column = c.disturbance_column;
    spec.scale = c.disturbance_scale;
    sc.provider.disturbance = resample(load_csv(c.disturbance, spec), c.step_seconds);
  }
  sc.provider.injection_window_steps = sc.config.shift_steps;
  sc.provider.perturb_whole_horizon = c.perturb_whole_horizon;
  sc.validate();
  return sc;
}

}  // namespace dermpc
