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
 * @file battery_model.hpp
 * @brief Generalized (virtual) battery model of a DER aggregation.
 *
 * Each aggregation i is a first-order linear system
 *
 *   x(t+1) = alpha * x(t) - beta * p(t),   |x(t)| <= C,   -eta_minus <= p(t) <= eta_plus
 *
 * with x in GWh and p in GW. p > 0 means the aggregation supplies power to
 * the grid (consumes less than its baseline), which lowers its SoC.
 *
 * The second half of the header derives aggregate limits for a homogeneous
 * population of thermostatically controlled loads (TCLs).
 */
#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dermpc/errors.hpp"

namespace dermpc {

inline constexpr double kSecondsPerHour = 3600.0;

/// Static parameters of one DER aggregation.
struct DerClassParams {
  std::string id;
  double alpha = 1.0;             ///< per-step SoC retention, in [0, 1]
  double beta_hours = 1.0 / 12;   ///< step energy-conversion factor (GW * h = GWh)
  double soc_capacity_gwh = 0.0;  ///< C
  double power_max_gw = 0.0;      ///< eta_plus, max supply above baseline
  double power_min_gw = 0.0;      ///< eta_minus, max consumption above baseline
  double kappa = 0.0;             ///< SoC cost weight

  /// Throws ConfigError naming the first broken invariant.
  void validate() const {
    auto fail = [&](const std::string& what) {
      throw ConfigError("DER class '" + id + "': " + what);
    };
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail("alpha must lie in [0, 1]");
    if (!(beta_hours > 0.0)) fail("beta must be positive");
    if (!(soc_capacity_gwh >= 0.0)) fail("SoC capacity must be nonnegative");
    if (!(power_max_gw >= 0.0)) fail("eta_plus must be nonnegative");
    if (!(power_min_gw >= 0.0)) fail("eta_minus must be nonnegative");
    if (!(kappa >= 0.0)) fail("kappa must be nonnegative");
  }
};

/// SoC of every aggregation at one time step.
struct FleetState {
  std::vector<double> soc_gwh;
  long time_index = 0;

  static FleetState zeros(std::size_t fleet_size) {
    return FleetState{std::vector<double>(fleet_size, 0.0), 0};
  }
};

/// x(t+1) = alpha x(t) - beta p(t). No clamping.
inline double step_soc(const DerClassParams& params, double soc_gwh, double power_gw) {
  return params.alpha * soc_gwh - params.beta_hours * power_gw;
}

inline bool check_state(const DerClassParams& params, double soc_gwh, double tol = 0.0) {
  return std::abs(soc_gwh) <= params.soc_capacity_gwh + tol;
}

inline bool check_power(const DerClassParams& params, double power_gw, double tol = 0.0) {
  return power_gw >= -params.power_min_gw - tol && power_gw <= params.power_max_gw + tol;
}

/// True when every entry of `state` is within its class capacity.
inline bool check_fleet_state(const std::vector<DerClassParams>& fleet, const FleetState& state,
                              double tol = 0.0) {
  if (state.soc_gwh.size() != fleet.size()) return false;
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    if (!check_state(fleet[i], state.soc_gwh[i], tol)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// TCL aggregation limits
// ---------------------------------------------------------------------------

/// Parameters of a homogeneous population of heating TCLs.
struct TclParams {
  double n_devices = 1.0;
  double lambda = 1.0;         ///< per-step thermal factor, becomes alpha
  double gamma = 1.0;          ///< thermal capacitance / COP
  double theta_plus = 0.0;     ///< upper deadband limit
  double theta_minus = 0.0;    ///< lower deadband limit
  double theta_ambient = 0.0;
  double p_on_gw = 0.0;        ///< per-device power while on
  double t_on = 1.0;           ///< stationary on-duration, steps
  double t_off = 1.0;          ///< stationary off-duration, steps

  void validate() const {
    if (!(n_devices >= 1.0)) throw ConfigError("TCL: n_devices must be at least 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("TCL: lambda must lie in [0, 1]");
    if (!(theta_plus >= theta_minus)) throw ConfigError("TCL: theta_plus must not be below theta_minus");
    if (!(t_on >= 0.0 && t_off >= 0.0 && t_on + t_off > 0.0))
      throw ConfigError("TCL: t_on and t_off must be nonnegative with a positive sum");
    if (!(p_on_gw >= 0.0)) throw ConfigError("TCL: p_on_gw must be nonnegative");
  }
};

/// Per-device baseline power P0 = Pm * T_on / (T_on + T_off).
inline double derive_average_power(const TclParams& tcl) {
  if (!(tcl.t_on + tcl.t_off > 0.0)) throw ConfigError("TCL: t_on + t_off must be positive");
  return tcl.p_on_gw * tcl.t_on / (tcl.t_on + tcl.t_off);
}

struct PowerLimits {
  double eta_plus_gw = 0.0;
  double eta_minus_gw = 0.0;
};

/// eta_plus = N P0 (all devices off), eta_minus = N (Pm - P0) (all devices on).
inline PowerLimits derive_power_limits(const TclParams& tcl) {
  const double p0 = derive_average_power(tcl);
  return {tcl.n_devices * p0, tcl.n_devices * (tcl.p_on_gw - p0)};
}

/// C = N (theta_plus - theta_minus) / (2 gamma).
inline double derive_soc_capacity(const TclParams& tcl) {
  if (!(tcl.gamma > 0.0)) throw ConfigError("TCL: gamma must be positive");
  return tcl.n_devices * (tcl.theta_plus - tcl.theta_minus) / (2.0 * tcl.gamma);
}

/// Full generalized-battery record for a TCL population (alpha = lambda).
inline DerClassParams derive_der_class(const TclParams& tcl, std::string id, double beta_hours,
                                       double kappa) {
  tcl.validate();
  const PowerLimits limits = derive_power_limits(tcl);
  DerClassParams out{std::move(id), tcl.lambda, beta_hours, derive_soc_capacity(tcl),
                     limits.eta_plus_gw, limits.eta_minus_gw, kappa};
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::string strip_comment(const std::string& line) {
  const auto hash = line.find('#');
  return hash == std::string::npos ? line : line.substr(0, hash);
}

inline double parse_double(const std::string& token, const std::string& where) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(token, &used);
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse number '" + token + "'");
  }
  if (used != token.size() || !std::isfinite(value))
    throw ConfigError(where + ": cannot parse number '" + token + "'");
  return value;
}

}  // namespace detail

/**
 * Reads a fleet file: one class per line,
 *
 *   id  alpha  beta_seconds  C_gwh  eta_plus_gw  eta_minus_gw  kappa
 *
 * Blank lines and text after '#' are ignored.
 */
inline std::vector<DerClassParams> parse_fleet(std::istream& in, const std::string& name = "fleet") {
  std::vector<DerClassParams> fleet;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = detail::trim(detail::strip_comment(line));
    if (body.empty()) continue;
    std::istringstream fields(body);
    std::vector<std::string> tokens;
    for (std::string tok; fields >> tok;) tokens.push_back(tok);
    const std::string where = name + ":" + std::to_string(line_no);
    if (tokens.size() != 7)
      throw ConfigError(where + ": expected 7 fields (id alpha beta_seconds C eta_plus eta_minus kappa), got " +
                        std::to_string(tokens.size()));
    DerClassParams p;
    p.id = tokens[0];
    p.alpha = detail::parse_double(tokens[1], where);
    p.beta_hours = detail::parse_double(tokens[2], where) / kSecondsPerHour;
    p.soc_capacity_gwh = detail::parse_double(tokens[3], where);
    p.power_max_gw = detail::parse_double(tokens[4], where);
    p.power_min_gw = detail::parse_double(tokens[5], where);
    p.kappa = detail::parse_double(tokens[6], where);
    p.validate();
    fleet.push_back(std::move(p));
  }
  if (fleet.empty()) throw ConfigError(name + ": no DER classes defined");
  return fleet;
}

inline std::vector<DerClassParams> load_fleet_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fleet file '" + path + "'");
  return parse_fleet(in, path);
}

/// Parses `key = value` lines into a TclParams. Unknown keys are rejected.
inline TclParams parse_tcl_params(std::istream& in, const std::string& name = "tcl") {
  TclParams tcl;
  const std::map<std::string, double TclParams::*> fields = {
      {"n_devices", &TclParams::n_devices},     {"lambda", &TclParams::lambda},
      {"gamma", &TclParams::gamma},             {"theta_plus", &TclParams::theta_plus},
      {"theta_minus", &TclParams::theta_minus}, {"theta_ambient", &TclParams::theta_ambient},
      {"p_on_gw", &TclParams::p_on_gw},         {"t_on", &TclParams::t_on},
      {"t_off", &TclParams::t_off},
  };
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
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    tcl.*(it->second) = detail::parse_double(detail::trim(body.substr(eq + 1)), where);
  }
  return tcl;
}

/// The five aggregations used in the California replication study.
inline std::vector<DerClassParams> default_fleet() {
  constexpr double beta = 300.0 / kSecondsPerHour;
  return {
      {"ACs", 0.98, beta, 8.0, 20.0, 30.0, 1.0},
      {"E-WHs", 0.99, beta, 5.0, 4.0, 50.0, 2.0},
      {"bldgs", 0.97, beta, 2.3, 103.0, 3.0, 5.0},
      {"RFGs", 0.96, beta, 5.0, 2.0, 3.0, 5.0},
      {"EVs", 0.99, beta, 50.0, 3.6, 3.6, 2.0},
  };
}

}  // namespace dermpc
