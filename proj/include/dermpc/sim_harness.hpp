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
 * @file sim_harness.hpp
 * @brief Closed-loop experiments, metrics and synthetic scenarios.
 *
 * run() drives an MpcLoop across a scenario and records the realized
 * trajectories. The bulk generator covers whatever net demand the DERs do
 * not: g(t) = l(t) - sum_i p_i(t), with l the realized net demand (forecast
 * plus disturbance) over each applied window. The planner's own g is kept in
 * `planned_generation` and is what the balance metric checks.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "dermpc/battery_model.hpp"
#include "dermpc/data_io.hpp"
#include "dermpc/errors.hpp"
#include "dermpc/mpc_controller.hpp"
#include "dermpc/qp_solver.hpp"

namespace dermpc {

struct Scenario {
  std::vector<DerClassParams> fleet;
  ForecastProvider provider;
  MpcConfig config;
  QpSettings settings;
  long duration_steps = 0;
  FleetState initial_state;

  /// Steps of net demand the run reads: the last window starts at
  /// duration - t_s and spans tau steps.
  long required_coverage() const { return duration_steps - config.shift_steps + config.horizon_steps; }

  void validate() const {
    config.validate();
    if (fleet.empty()) throw ConfigError("scenario fleet is empty");
    for (const auto& cls : fleet) cls.validate();
    if (duration_steps <= 0 || duration_steps % config.shift_steps != 0)
      throw ConfigError(fmt::format("duration ({} steps) must be a positive multiple of t_s ({} steps)",
                                    duration_steps, config.shift_steps));
    if (initial_state.soc_gwh.size() != fleet.size())
      throw ConfigError(fmt::format("initial state has {} entries, fleet has {} classes",
                                    initial_state.soc_gwh.size(), fleet.size()));
    if (!check_fleet_state(fleet, initial_state)) throw ConfigError("initial state outside SoC capacity bounds");
    if (provider.injection_window_steps != config.shift_steps)
      throw ConfigError(fmt::format("disturbance injection window ({} steps) differs from t_s ({} steps)",
                                    provider.injection_window_steps, config.shift_steps));
    if (provider.base.step_seconds != static_cast<int>(std::lround(config.step_hours * kSecondsPerHour)))
      throw ConfigError(fmt::format("net-demand step ({} s) differs from the controller step ({} h)",
                                    provider.base.step_seconds, config.step_hours));
    provider.require_coverage(required_coverage());
  }
};

/// Solver and cost statistics of one MPC iteration.
struct IterationStats {
  long t0 = 0;
  int solver_iterations = 0;
  bool polished = false;
  double objective = 0.0;
  double null_policy_cost = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double complementarity = 0.0;
  double horizon_balance_residual = 0.0;  ///< max over the full planned horizon
  bool window_constant = false;
};

/**
 * Scalar summary of a run. Ramps are per step and per hour; energies are
 * sums of power times the step length. Violation counts use the tolerance
 * 10 * eps_primal.
 */
struct Metrics {
  double steps = 0;
  double mpc_iterations = 0;
  double max_ramp_g_gw_per_step = 0;
  double max_ramp_l_gw_per_step = 0;
  double max_ramp_g_gw_per_hour = 0;
  double max_ramp_l_gw_per_hour = 0;
  double rms_g_deviation_gw = 0;
  double peak_g_gw = 0;
  double peak_l_gw = 0;
  double energy_g_gwh = 0;
  double energy_l_gwh = 0;
  double energy_der_gwh = 0;
  double max_balance_residual_gw = 0;
  double soc_violations = 0;
  double power_violations = 0;
  double soc_saturated_samples = 0;
  double max_soc_utilization = 0;
  double solver_iterations_total = 0;
  double solver_iterations_max = 0;
  double polished_iterations = 0;
  double max_primal_residual = 0;
  double max_dual_residual = 0;
  double max_complementarity = 0;
  double null_policy_dominated = 0;
  double null_policy_strict = 0;
  double nonconstant_windows = 0;

  /// Name-value pairs in a fixed order.
  std::vector<std::pair<std::string, double>> entries() const {
    return {
        {"steps", steps},
        {"mpc_iterations", mpc_iterations},
        {"max_ramp_g_gw_per_step", max_ramp_g_gw_per_step},
        {"max_ramp_l_gw_per_step", max_ramp_l_gw_per_step},
        {"max_ramp_g_gw_per_hour", max_ramp_g_gw_per_hour},
        {"max_ramp_l_gw_per_hour", max_ramp_l_gw_per_hour},
        {"rms_g_deviation_gw", rms_g_deviation_gw},
        {"peak_g_gw", peak_g_gw},
        {"peak_l_gw", peak_l_gw},
        {"energy_g_gwh", energy_g_gwh},
        {"energy_l_gwh", energy_l_gwh},
        {"energy_der_gwh", energy_der_gwh},
        {"max_balance_residual_gw", max_balance_residual_gw},
        {"soc_violations", soc_violations},
        {"power_violations", power_violations},
        {"soc_saturated_samples", soc_saturated_samples},
        {"max_soc_utilization", max_soc_utilization},
        {"solver_iterations_total", solver_iterations_total},
        {"solver_iterations_max", solver_iterations_max},
        {"polished_iterations", polished_iterations},
        {"max_primal_residual", max_primal_residual},
        {"max_dual_residual", max_dual_residual},
        {"max_complementarity", max_complementarity},
        {"null_policy_dominated", null_policy_dominated},
        {"null_policy_strict", null_policy_strict},
        {"nonconstant_windows", nonconstant_windows},
    };
  }
};

struct SimulationResult {
  std::vector<std::string> class_ids;
  std::int64_t start_time = 0;
  int step_seconds = 300;
  std::vector<double> net_demand;                 ///< realized l, length T
  std::vector<double> generation;                 ///< l - sum p, length T
  std::vector<double> planned_generation;         ///< planner's g, length T
  std::vector<std::vector<double>> power;         ///< M x T
  std::vector<std::vector<double>> soc;           ///< M x (T + 1), SoC at the start of each step
  std::vector<IterationStats> iterations;
  Metrics metrics;
};

namespace detail {

inline double max_abs_diff(const std::vector<double>& v) {
  double out = 0.0;
  for (std::size_t k = 1; k < v.size(); ++k) out = std::max(out, std::abs(v[k] - v[k - 1]));
  return out;
}

}  // namespace detail

/// Fills `result.metrics` from the trajectories and iteration stats.
inline Metrics compute_metrics(const SimulationResult& r, const std::vector<DerClassParams>& fleet,
                               double tol) {
  Metrics m;
  const std::size_t n = r.net_demand.size();
  const double dt_hours = r.step_seconds / kSecondsPerHour;
  m.steps = static_cast<double>(n);
  m.mpc_iterations = static_cast<double>(r.iterations.size());
  m.max_ramp_g_gw_per_step = detail::max_abs_diff(r.generation);
  m.max_ramp_l_gw_per_step = detail::max_abs_diff(r.net_demand);
  m.max_ramp_g_gw_per_hour = m.max_ramp_g_gw_per_step / dt_hours;
  m.max_ramp_l_gw_per_hour = m.max_ramp_l_gw_per_step / dt_hours;

  double mean_g = 0.0;
  for (double g : r.generation) mean_g += g;
  mean_g /= static_cast<double>(std::max<std::size_t>(n, 1));
  double ss = 0.0;
  m.peak_g_gw = -std::numeric_limits<double>::infinity();
  m.peak_l_gw = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n; ++t) {
    ss += (r.generation[t] - mean_g) * (r.generation[t] - mean_g);
    m.peak_g_gw = std::max(m.peak_g_gw, r.generation[t]);
    m.peak_l_gw = std::max(m.peak_l_gw, r.net_demand[t]);
    m.energy_g_gwh += r.generation[t] * dt_hours;
    m.energy_l_gwh += r.net_demand[t] * dt_hours;
    double der = 0.0;
    for (const auto& p : r.power) der += p[t];
    m.energy_der_gwh += der * dt_hours;
    m.max_balance_residual_gw =
        std::max(m.max_balance_residual_gw, std::abs(r.net_demand[t] - r.planned_generation[t] - der));
  }
  m.rms_g_deviation_gw = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(n, 1)));

  for (std::size_t i = 0; i < fleet.size(); ++i) {
    const double cap = fleet[i].soc_capacity_gwh;
    for (double x : r.soc[i]) {
      if (!check_state(fleet[i], x, tol)) ++m.soc_violations;
      if (std::abs(std::abs(x) - cap) <= tol) ++m.soc_saturated_samples;
      if (cap > 0.0) m.max_soc_utilization = std::max(m.max_soc_utilization, std::abs(x) / cap);
    }
    for (double p : r.power[i])
      if (!check_power(fleet[i], p, tol)) ++m.power_violations;
  }

  for (const auto& it : r.iterations) {
    m.solver_iterations_total += it.solver_iterations;
    m.solver_iterations_max = std::max(m.solver_iterations_max, static_cast<double>(it.solver_iterations));
    if (it.polished) ++m.polished_iterations;
    m.max_primal_residual = std::max(m.max_primal_residual, it.primal_residual);
    m.max_dual_residual = std::max(m.max_dual_residual, it.dual_residual);
    m.max_complementarity = std::max(m.max_complementarity, it.complementarity);
    if (it.objective <= it.null_policy_cost + tol * (1.0 + std::abs(it.null_policy_cost))) ++m.null_policy_dominated;
    if (!it.window_constant) {
      ++m.nonconstant_windows;
      if (it.objective < it.null_policy_cost) ++m.null_policy_strict;
    }
  }
  return m;
}

/// Called after each MPC iteration with the state and forecast it planned from.
using IterationObserver =
    std::function<void(const FleetState& start, const std::vector<double>& window, const MpcStepResult& step)>;

/// Runs duration / t_s receding-horizon iterations. Deterministic.
inline SimulationResult run(const Scenario& scenario, const IterationObserver& observer = {}) {
  scenario.validate();
  const std::size_t m = scenario.fleet.size();
  const int ts = scenario.config.shift_steps;
  const long iterations = scenario.duration_steps / ts;

  SimulationResult r;
  for (const auto& cls : scenario.fleet) r.class_ids.push_back(cls.id);
  r.start_time = scenario.provider.base.start_time;
  r.step_seconds = scenario.provider.base.step_seconds;
  r.power.assign(m, {});
  r.soc.assign(m, {});
  const auto steps = static_cast<std::size_t>(scenario.duration_steps);
  r.net_demand.reserve(steps);
  r.generation.reserve(steps);
  r.planned_generation.reserve(steps);
  for (std::size_t i = 0; i < m; ++i) {
    r.power[i].reserve(steps);
    r.soc[i].reserve(steps + 1);
  }

  FleetState initial = scenario.initial_state;
  initial.time_index = 0;
  MpcLoop loop(scenario.fleet, scenario.config, scenario.settings, initial);
  std::vector<double> last_window;
  const WindowSource source = [&](long t0, int tau) {
    last_window = scenario.provider.window(t0, tau);
    return last_window;
  };

  for (long k = 0; k < iterations; ++k) {
    MpcStepResult step;
    const FleetState start = loop.state();
    try {
      step = loop.step(source);
    } catch (const SolverError& e) {
      throw SolverError(fmt::format("MPC iteration {}: {}", k, e.what()));
    }
    if (observer) observer(start, last_window, step);
    const auto [lo, hi] = std::minmax_element(last_window.begin(), last_window.end());
    const QpSolution& sol = step.plan.solution;
    r.iterations.push_back({step.t0, sol.iterations, sol.polished, step.plan.objective, step.null_policy_cost,
                            sol.primal_residual, sol.dual_residual, sol.complementarity,
                            step.plan.balance_residual, *lo == *hi});
    for (int t = 0; t < ts; ++t) {
      const auto tt = static_cast<std::size_t>(t);
      double der = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        der += step.power[i][tt];
        r.power[i].push_back(step.power[i][tt]);
        r.soc[i].push_back(step.soc[i][tt]);
      }
      r.net_demand.push_back(step.net_demand[tt]);
      r.generation.push_back(step.net_demand[tt] - der);
      r.planned_generation.push_back(step.generation[tt]);
    }
  }
  for (std::size_t i = 0; i < m; ++i) r.soc[i].push_back(loop.state().soc_gwh[i]);
  r.metrics = compute_metrics(r, scenario.fleet, 10.0 * scenario.settings.eps_primal);
  return r;
}

/// Same scenario with every eta forced to zero.
inline Scenario with_ders_disabled(Scenario scenario) {
  for (auto& cls : scenario.fleet) {
    cls.power_max_gw = 0.0;
    cls.power_min_gw = 0.0;
  }
  return scenario;
}

/// Same scenario with every C and eta multiplied by `factor`.
inline Scenario with_flexibility_scaled(Scenario scenario, double factor) {
  for (auto& cls : scenario.fleet) {
    cls.soc_capacity_gwh *= factor;
    cls.power_max_gw *= factor;
    cls.power_min_gw *= factor;
  }
  for (auto& x : scenario.initial_state.soc_gwh) x *= factor;
  return scenario;
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

struct MetricDelta {
  std::string name;
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0;  ///< b - a
  double ratio = 0.0;  ///< b / a, NaN when a == 0
};

struct ComparisonReport {
  std::vector<MetricDelta> metrics;
  double ramp_reduction_percent = 0.0;  ///< 100 (1 - ramp_g(b) / ramp_g(a))

  const MetricDelta& at(const std::string& name) const {
    for (const auto& d : metrics)
      if (d.name == name) return d;
    throw std::out_of_range("no metric named '" + name + "'");
  }
};

/// Metric differences of `b` relative to `a` (typically a = baseline).
inline ComparisonReport compare(const SimulationResult& a, const SimulationResult& b) {
  if (a.net_demand.size() != b.net_demand.size())
    throw std::invalid_argument(fmt::format("cannot compare runs of {} and {} steps", a.net_demand.size(),
                                            b.net_demand.size()));
  ComparisonReport report;
  const auto ea = a.metrics.entries(), eb = b.metrics.entries();
  for (std::size_t k = 0; k < ea.size(); ++k) {
    const double va = ea[k].second, vb = eb[k].second;
    report.metrics.push_back({ea[k].first, va, vb, vb - va,
                              va == 0.0 ? std::numeric_limits<double>::quiet_NaN() : vb / va});
  }
  const double ramp_a = a.metrics.max_ramp_g_gw_per_step;
  report.ramp_reduction_percent = ramp_a == 0.0 ? 0.0 : 100.0 * (1.0 - b.metrics.max_ramp_g_gw_per_step / ramp_a);
  return report;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

/// Wide CSV: time, l, g, one power column and one SoC column per class.
inline void write_trajectories_csv(std::ostream& out, const SimulationResult& r) {
  out << "timestamp,net_demand_gw,generation_gw";
  for (const auto& id : r.class_ids) out << ",p_" << id << "_gw";
  for (const auto& id : r.class_ids) out << ",x_" << id << "_gwh";
  out << '\n';
  for (std::size_t t = 0; t < r.net_demand.size(); ++t) {
    out << format_timestamp(r.start_time + static_cast<std::int64_t>(t) * r.step_seconds);
    out << fmt::format(",{},{}", r.net_demand[t], r.generation[t]);
    for (const auto& p : r.power) out << fmt::format(",{}", p[t]);
    for (const auto& x : r.soc) out << fmt::format(",{}", x[t]);
    out << '\n';
  }
}

/// `key = value` lines in Metrics::entries() order.
inline void write_metrics(std::ostream& out, const Metrics& metrics) {
  for (const auto& [name, value] : metrics.entries()) out << name << " = " << fmt::format("{}", value) << '\n';
}

inline void write_trajectories_csv(const std::string& path, const SimulationResult& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_trajectories_csv(out, r);
}

inline void write_metrics(const std::string& path, const Metrics& metrics) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_metrics(out, metrics);
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// 2020-08-14T00:00:00Z, the default start of synthetic series.
inline constexpr std::int64_t kSyntheticStart = 1597363200;

/// Two-peak daily net demand: a morning peak, a midday solar trough and a
/// steep evening peak.
struct SyntheticDemandSpec {
  int days = 1;
  int step_seconds = 300;
  std::int64_t start_time = kSyntheticStart;
  double base_gw = 24.0;
  double morning_peak_gw = 4.0;
  double solar_dip_gw = 6.0;
  double evening_peak_gw = 10.0;
  double peak_scale = 1.0;     ///< multiplies every peak and dip
  double day_variation = 0.0;  ///< relative day-to-day amplitude spread
  double noise_gw = 0.0;       ///< uniform sample noise half-width
  std::uint64_t seed = 1;
};

namespace detail {

/// Uniform [0, 1) from 53 random bits; identical on every platform.
inline double unit_uniform(std::mt19937_64& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

inline double bump(double hour, double centre, double width) {
  const double z = (hour - centre) / width;
  return std::exp(-0.5 * z * z);
}

}  // namespace detail

inline ForecastSeries synthetic_net_demand(const SyntheticDemandSpec& spec) {
  if (spec.days <= 0 || spec.step_seconds <= 0 || 86400 % spec.step_seconds != 0)
    throw ConfigError("synthetic demand needs positive days and a step dividing one day");
  std::mt19937_64 engine(spec.seed);
  const int per_day = 86400 / spec.step_seconds;
  ForecastSeries s{spec.start_time, spec.step_seconds, {}};
  s.values_gw.reserve(static_cast<std::size_t>(spec.days) * per_day);
  for (int d = 0; d < spec.days; ++d) {
    const double day_scale = 1.0 + spec.day_variation * (2.0 * detail::unit_uniform(engine) - 1.0);
    const double a = spec.peak_scale * day_scale;
    for (int k = 0; k < per_day; ++k) {
      const double hour = k * spec.step_seconds / kSecondsPerHour;
      double v = spec.base_gw + a * (spec.morning_peak_gw * detail::bump(hour, 8.0, 1.5) -
                                     spec.solar_dip_gw * detail::bump(hour, 13.0, 2.5) +
                                     spec.evening_peak_gw * detail::bump(hour, 19.5, 1.8));
      if (spec.noise_gw > 0.0) v += spec.noise_gw * (2.0 * detail::unit_uniform(engine) - 1.0);
      s.values_gw.push_back(v);
    }
  }
  return s;
}

/// Mean-reverting random walk standing in for a balancing-reserve signal.
inline ForecastSeries synthetic_disturbance(std::size_t samples, double amplitude_gw, std::uint64_t seed,
                                            std::int64_t start_time = kSyntheticStart, int step_seconds = 300) {
  std::mt19937_64 engine(seed);
  ForecastSeries s{start_time, step_seconds, {}};
  s.values_gw.reserve(samples);
  double v = 0.0;
  for (std::size_t k = 0; k < samples; ++k) {
    v = 0.95 * v + 0.3 * amplitude_gw * (2.0 * detail::unit_uniform(engine) - 1.0);
    s.values_gw.push_back(v);
  }
  return s;
}

/// Knobs of the built-in scenarios.
struct SyntheticScenarioSpec {
  int simulated_days = 7;
  int horizon_steps = 288;
  int shift_steps = 6;
  double kappa_g = 10.0;
  double noise_gw = 0.2;
  double day_variation = 0.1;
  double disturbance_gw = 0.5;  ///< 0 disables the disturbance
  double peak_scale = 1.0;
  std::uint64_t seed = 2020;
};

/// Built-in fleet on synthetic data with one extra day for the last horizon.
inline Scenario synthetic_scenario(const SyntheticScenarioSpec& spec) {
  Scenario sc;
  sc.fleet = default_fleet();
  sc.config.horizon_steps = spec.horizon_steps;
  sc.config.shift_steps = spec.shift_steps;
  sc.config.kappa_g = spec.kappa_g;
  sc.duration_steps = static_cast<long>(spec.simulated_days) * 288;
  const long needed = sc.duration_steps - spec.shift_steps + spec.horizon_steps;

  SyntheticDemandSpec demand;
  demand.days = static_cast<int>((needed + 287) / 288);
  demand.noise_gw = spec.noise_gw;
  demand.day_variation = spec.day_variation;
  demand.peak_scale = spec.peak_scale;
  demand.seed = spec.seed;
  sc.provider.base = synthetic_net_demand(demand);
  if (spec.disturbance_gw > 0.0)
    sc.provider.disturbance = synthetic_disturbance(sc.provider.base.size(), spec.disturbance_gw, spec.seed + 1);
  sc.provider.injection_window_steps = spec.shift_steps;
  sc.initial_state = FleetState::zeros(sc.fleet.size());
  return sc;
}

/// Seven days at five-minute steps, tau = 24 h, t_s = 30 min, with disturbance.
inline Scenario replication_scenario() { return synthetic_scenario({}); }

/// One noise-free two-peak day without disturbance.
inline Scenario two_peak_day_scenario() {
  SyntheticScenarioSpec spec;
  spec.simulated_days = 1;
  spec.noise_gw = 0.0;
  spec.day_variation = 0.0;
  spec.disturbance_gw = 0.0;
  return synthetic_scenario(spec);
}

/// The two-peak day with every peak and dip scaled by 1.5, enough to drive
/// some classes to their SoC limits.
inline Scenario stress_scenario() {
  SyntheticScenarioSpec spec;
  spec.simulated_days = 1;
  spec.noise_gw = 0.0;
  spec.day_variation = 0.0;
  spec.disturbance_gw = 0.0;
  spec.peak_scale = 1.5;
  return synthetic_scenario(spec);
}

}  // namespace dermpc
