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
 * @file mpc_controller.hpp
 * @brief Finite-horizon DER allocation QP and the receding-horizon loop.
 *
 * Over a window of tau steps starting at t0 the controller solves
 *
 *   min  sum_{t<tau} [ 1/2 kappa_g (g(t) - lbar)^2 + sum_i 1/2 kappa_i x_i(t)^2 ]
 *   s.t. l(t) = g(t) + sum_i p_i(t)                      t = 0..tau-1
 *        x_i(t+1) = alpha_i x_i(t) - beta_i p_i(t)       t = 0..tau-1
 *        x_i(0) = current SoC
 *        -C_i <= x_i(t) <= C_i                          t = 1..tau
 *        -eta_minus_i <= p_i(t) <= eta_plus_i
 *
 * where lbar is the mean of the window (or a fixed override). There is no
 * terminal cost; x_i(tau) is constrained but not penalized. x_i(0) carries no
 * box of its own: it is pinned to the current state, which is checked
 * against the capacity before the QP is built.
 *
 * Variable ordering (stable, zero-based):
 *   [ g(0..tau-1) | p_1(0..tau-1) ... p_M(..) | x_1(0..tau) ... x_M(0..tau) ]
 * Equality row ordering:
 *   [ balance(0..tau-1) | dynamics_1(0..tau-1) ... dynamics_M | initial_1 ... initial_M ]
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "dermpc/battery_model.hpp"
#include "dermpc/errors.hpp"
#include "dermpc/qp_solver.hpp"

namespace dermpc {

struct MpcConfig {
  int horizon_steps = 288;  ///< tau
  int shift_steps = 6;      ///< t_s
  double kappa_g = 10.0;
  double step_hours = 1.0 / 12;
  std::optional<double> lbar_override;  ///< fixed lbar instead of the window mean

  void validate() const {
    if (!(shift_steps > 0 && shift_steps <= horizon_steps))
      throw ConfigError(fmt::format("shift must satisfy 0 < t_s <= tau (got t_s = {} steps, tau = {} steps)",
                                    shift_steps, horizon_steps));
    if (!(kappa_g >= 0.0)) throw ConfigError("kappa_g must be nonnegative");
    if (!(step_hours > 0.0)) throw ConfigError("step_hours must be positive");
    if (lbar_override && !std::isfinite(*lbar_override)) throw ConfigError("lbar override must be finite");
  }
};

/// Index arithmetic for the horizon QP.
class VariableLayout {
 public:
  VariableLayout(int fleet_size, int horizon) : m_(fleet_size), tau_(horizon) {}

  int fleet_size() const { return m_; }
  int horizon() const { return tau_; }

  int g(int t) const { return t; }
  int p(int i, int t) const { return tau_ + i * tau_ + t; }
  int x(int i, int t) const { return tau_ + m_ * tau_ + i * (tau_ + 1) + t; }
  int num_vars() const { return tau_ + m_ * tau_ + m_ * (tau_ + 1); }

  int balance_row(int t) const { return t; }
  int dynamics_row(int i, int t) const { return tau_ + i * tau_ + t; }
  int initial_row(int i) const { return tau_ + m_ * tau_ + i; }
  int num_eq() const { return tau_ + m_ * tau_ + m_; }

  /// Receding-horizon shift of a primal vector: drop the first `shift` steps, repeat the last value.
  Vector shift_primal(const Vector& z, int shift) const {
    Vector out(num_vars());
    for (int t = 0; t < tau_; ++t) out[g(t)] = z[g(std::min(t + shift, tau_ - 1))];
    for (int i = 0; i < m_; ++i) {
      for (int t = 0; t < tau_; ++t) out[p(i, t)] = z[p(i, std::min(t + shift, tau_ - 1))];
      for (int t = 0; t <= tau_; ++t) out[x(i, t)] = z[x(i, std::min(t + shift, tau_))];
    }
    return out;
  }

  Vector shift_eq_duals(const Vector& nu, int shift) const {
    Vector out(num_eq());
    for (int t = 0; t < tau_; ++t) out[balance_row(t)] = nu[balance_row(std::min(t + shift, tau_ - 1))];
    for (int i = 0; i < m_; ++i) {
      for (int t = 0; t < tau_; ++t) out[dynamics_row(i, t)] = nu[dynamics_row(i, std::min(t + shift, tau_ - 1))];
      out[initial_row(i)] = nu[initial_row(i)];
    }
    return out;
  }

 private:
  int m_;
  int tau_;
};

namespace detail {

inline void check_inputs(const std::vector<DerClassParams>& fleet, const FleetState& x0,
                         std::span<const double> window, const MpcConfig& config, double state_tol = 0.0) {
  config.validate();
  if (fleet.empty()) throw ConfigError("fleet must contain at least one DER class");
  for (const auto& cls : fleet) cls.validate();
  if (static_cast<int>(window.size()) != config.horizon_steps)
    throw ConfigError(fmt::format("forecast window has {} samples, horizon is {}", window.size(),
                                  config.horizon_steps));
  if (x0.soc_gwh.size() != fleet.size())
    throw ConfigError(fmt::format("state has {} entries, fleet has {} classes", x0.soc_gwh.size(), fleet.size()));
  for (std::size_t i = 0; i < fleet.size(); ++i)
    if (!check_state(fleet[i], x0.soc_gwh[i], state_tol))
      throw ConfigError(fmt::format("initial SoC of '{}' is {} GWh, outside +/-{} GWh", fleet[i].id,
                                    x0.soc_gwh[i], fleet[i].soc_capacity_gwh));
  for (double v : window)
    if (!std::isfinite(v)) throw ConfigError("forecast window contains a non-finite value");
}

}  // namespace detail

inline double window_mean(std::span<const double> window, const MpcConfig& config) {
  if (config.lbar_override) return *config.lbar_override;
  return std::accumulate(window.begin(), window.end(), 0.0) / static_cast<double>(window.size());
}

/// Linear cost term; only lbar enters q.
inline Vector horizon_linear_cost(const VariableLayout& layout, double lbar, const MpcConfig& config) {
  Vector q = Vector::Zero(layout.num_vars());
  for (int t = 0; t < layout.horizon(); ++t) q[layout.g(t)] = -config.kappa_g * lbar;
  return q;
}

/// Equality right-hand side; the forecast feeds the balance rows, the state feeds the initial rows.
inline Vector horizon_eq_rhs(const VariableLayout& layout, const FleetState& x0, std::span<const double> window) {
  Vector b = Vector::Zero(layout.num_eq());
  for (int t = 0; t < layout.horizon(); ++t) b[layout.balance_row(t)] = window[static_cast<std::size_t>(t)];
  for (int i = 0; i < layout.fleet_size(); ++i) b[layout.initial_row(i)] = x0.soc_gwh[static_cast<std::size_t>(i)];
  return b;
}

/// Encodes one MPC iteration as a QpProblem (constant term 1/2 kappa_g lbar^2 tau dropped).
inline QpProblem build_qp(const std::vector<DerClassParams>& fleet, const FleetState& x0,
                          std::span<const double> forecast_window, const MpcConfig& config) {
  detail::check_inputs(fleet, x0, forecast_window, config);
  const int m = static_cast<int>(fleet.size());
  const int tau = config.horizon_steps;
  const VariableLayout layout(m, tau);
  const int n = layout.num_vars();

  QpProblem qp;
  qp.num_vars = n;

  std::vector<Triplet> p_trips;
  for (int t = 0; t < tau; ++t) p_trips.emplace_back(layout.g(t), layout.g(t), config.kappa_g);
  for (int i = 0; i < m; ++i)
    for (int t = 0; t < tau; ++t)
      p_trips.emplace_back(layout.x(i, t), layout.x(i, t), fleet[static_cast<std::size_t>(i)].kappa);
  qp.quadratic.resize(n, n);
  qp.quadratic.setFromTriplets(p_trips.begin(), p_trips.end());
  qp.quadratic.prune(0.0);

  qp.linear = horizon_linear_cost(layout, window_mean(forecast_window, config), config);

  std::vector<Triplet> a_trips;
  for (int t = 0; t < tau; ++t) {
    a_trips.emplace_back(layout.balance_row(t), layout.g(t), 1.0);
    for (int i = 0; i < m; ++i) a_trips.emplace_back(layout.balance_row(t), layout.p(i, t), 1.0);
  }
  for (int i = 0; i < m; ++i) {
    const DerClassParams& cls = fleet[static_cast<std::size_t>(i)];
    for (int t = 0; t < tau; ++t) {
      const int row = layout.dynamics_row(i, t);
      a_trips.emplace_back(row, layout.x(i, t + 1), 1.0);
      if (cls.alpha != 0.0) a_trips.emplace_back(row, layout.x(i, t), -cls.alpha);
      a_trips.emplace_back(row, layout.p(i, t), cls.beta_hours);
    }
    a_trips.emplace_back(layout.initial_row(i), layout.x(i, 0), 1.0);
  }
  qp.eq_matrix.resize(layout.num_eq(), n);
  qp.eq_matrix.setFromTriplets(a_trips.begin(), a_trips.end());
  qp.eq_rhs = horizon_eq_rhs(layout, x0, forecast_window);

  qp.bound_lower = Vector::Constant(n, -kInf);
  qp.bound_upper = Vector::Constant(n, kInf);
  for (int i = 0; i < m; ++i) {
    const DerClassParams& cls = fleet[static_cast<std::size_t>(i)];
    for (int t = 0; t < tau; ++t) {
      qp.bound_lower[layout.p(i, t)] = -cls.power_min_gw;
      qp.bound_upper[layout.p(i, t)] = cls.power_max_gw;
    }
    for (int t = 1; t <= tau; ++t) {
      qp.bound_lower[layout.x(i, t)] = -cls.soc_capacity_gwh;
      qp.bound_upper[layout.x(i, t)] = cls.soc_capacity_gwh;
    }
  }
  return qp;
}

/// Running cost of a trajectory evaluated directly, independent of the QP encoding.
/// `x[i]` needs at least tau entries; only x_i(0..tau-1) is charged.
inline double horizon_cost(const std::vector<DerClassParams>& fleet, const MpcConfig& config, double lbar,
                           std::span<const double> g, const std::vector<std::vector<double>>& x) {
  double cost = 0.0;
  for (std::size_t t = 0; t < g.size(); ++t) {
    const double dev = g[t] - lbar;
    cost += 0.5 * config.kappa_g * dev * dev;
    for (std::size_t i = 0; i < fleet.size(); ++i) cost += 0.5 * fleet[i].kappa * x[i][t] * x[i][t];
  }
  return cost;
}

/// Cost of the do-nothing policy: p = 0, g = l, SoC decays by leakage alone.
inline double null_policy_cost(const std::vector<DerClassParams>& fleet, const FleetState& x0,
                               std::span<const double> window, const MpcConfig& config) {
  std::vector<std::vector<double>> x(fleet.size(), std::vector<double>(window.size() + 1));
  for (std::size_t i = 0; i < fleet.size(); ++i) {
    x[i][0] = x0.soc_gwh[i];
    for (std::size_t t = 0; t < window.size(); ++t) x[i][t + 1] = step_soc(fleet[i], x[i][t], 0.0);
  }
  return horizon_cost(fleet, config, window_mean(window, config), window, x);
}

/// Decoded optimal plan for one horizon.
struct HorizonPlan {
  long t0 = 0;
  std::vector<double> g;               ///< tau
  std::vector<std::vector<double>> p;  ///< M x tau
  std::vector<std::vector<double>> x;  ///< M x (tau + 1)
  double objective = 0.0;              ///< full running cost, constant included
  double lbar = 0.0;
  double balance_residual = 0.0;       ///< max_t |l - g - sum p|
  QpSolution solution;                 ///< raw solver output, kept for warm starts
};

inline HorizonPlan decode_plan(const VariableLayout& layout, std::span<const double> window, double lbar,
                               const MpcConfig& config, QpSolution solution, long t0) {
  const int m = layout.fleet_size();
  const int tau = layout.horizon();
  const Vector& z = solution.z_star;
  HorizonPlan plan;
  plan.t0 = t0;
  plan.lbar = lbar;
  plan.g.resize(static_cast<std::size_t>(tau));
  plan.p.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(tau)));
  plan.x.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(tau + 1)));
  for (int t = 0; t < tau; ++t) plan.g[static_cast<std::size_t>(t)] = z[layout.g(t)];
  for (int i = 0; i < m; ++i) {
    for (int t = 0; t < tau; ++t) plan.p[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] = z[layout.p(i, t)];
    for (int t = 0; t <= tau; ++t) plan.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] = z[layout.x(i, t)];
  }
  for (int t = 0; t < tau; ++t) {
    double supplied = plan.g[static_cast<std::size_t>(t)];
    for (int i = 0; i < m; ++i) supplied += plan.p[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)];
    plan.balance_residual = std::max(plan.balance_residual, std::abs(window[static_cast<std::size_t>(t)] - supplied));
  }
  plan.objective = solution.objective_value + 0.5 * config.kappa_g * lbar * lbar * tau;
  plan.solution = std::move(solution);
  return plan;
}

inline void require_optimal(const QpSolution& sol, long t0) {
  if (sol.status == QpStatus::Optimal) return;
  throw SolverError(fmt::format("MPC iteration at t0 = {}: solver returned {} after {} iterations "
                                "(primal residual {:.3e}, dual residual {:.3e})",
                                t0, to_string(sol.status), sol.iterations, sol.primal_residual, sol.dual_residual));
}

/// One-shot plan for a single horizon. Throws SolverError unless the solver certifies optimality.
inline HorizonPlan plan_horizon(const std::vector<DerClassParams>& fleet, const FleetState& x0,
                                std::span<const double> forecast_window, const MpcConfig& config,
                                const QpSettings& settings = {}) {
  const QpProblem qp = build_qp(fleet, x0, forecast_window, config);
  QpSolution sol = solve(qp, settings);
  require_optimal(sol, x0.time_index);
  const VariableLayout layout(static_cast<int>(fleet.size()), config.horizon_steps);
  return decode_plan(layout, forecast_window, window_mean(forecast_window, config), config, std::move(sol),
                     x0.time_index);
}

/// Inputs applied by one receding-horizon step.
struct MpcStepResult {
  long t0 = 0;
  std::vector<double> net_demand;             ///< realized l over the applied steps
  std::vector<double> generation;             ///< planned g over the applied steps
  std::vector<std::vector<double>> power;     ///< M x t_s applied inputs
  std::vector<std::vector<double>> soc;       ///< M x t_s SoC at the start of each applied step
  FleetState next_state;
  HorizonPlan plan;
  double null_policy_cost = 0.0;
};

/// Forecast source: returns tau samples starting at step t0.
using WindowSource = std::function<std::vector<double>(long t0, int tau)>;

/**
 * Receding-horizon loop. The QP structure is fixed for a fleet and config,
 * so one QpSolver (and its KKT factorization) is reused for every step;
 * only the forecast, lbar and initial state change between steps.
 */
class MpcLoop {
 public:
  MpcLoop(std::vector<DerClassParams> fleet, MpcConfig config, QpSettings settings, FleetState initial)
      : fleet_(std::move(fleet)),
        config_(config),
        settings_(settings),
        layout_(static_cast<int>(fleet_.size()), config_.horizon_steps),
        state_(std::move(initial)) {
    config_.validate();
    if (!check_fleet_state(fleet_, state_))
      throw ConfigError("initial fleet state is outside the SoC capacity bounds");
  }

  long t0() const { return state_.time_index; }
  const FleetState& state() const { return state_; }
  const std::vector<DerClassParams>& fleet() const { return fleet_; }
  const MpcConfig& config() const { return config_; }

  MpcStepResult step(const WindowSource& source) {
    const long start = state_.time_index;
    const std::vector<double> window = source(start, config_.horizon_steps);
    const double lbar = window_mean(window, config_);

    if (!solver_) {
      solver_.emplace(build_qp(fleet_, state_, window, config_), settings_);
    } else {
      detail::check_inputs(fleet_, state_, window, config_, 10.0 * settings_.eps_primal);
      solver_->update_linear(horizon_linear_cost(layout_, lbar, config_));
      solver_->update_eq_rhs(horizon_eq_rhs(layout_, state_, window));
    }

    QpSolution sol = warm_ ? solver_->solve(&*warm_) : solver_->solve();
    require_optimal(sol, start);

    MpcStepResult out;
    out.t0 = start;
    out.null_policy_cost = null_policy_cost(fleet_, state_, window, config_);
    out.plan = decode_plan(layout_, window, lbar, config_, std::move(sol), start);

    const int ts = config_.shift_steps;
    const std::size_t m = fleet_.size();
    out.net_demand.assign(window.begin(), window.begin() + ts);
    out.generation.assign(out.plan.g.begin(), out.plan.g.begin() + ts);
    out.power.assign(m, std::vector<double>(static_cast<std::size_t>(ts)));
    out.soc.assign(m, std::vector<double>(static_cast<std::size_t>(ts)));
    FleetState next = state_;
    for (std::size_t i = 0; i < m; ++i) {
      for (int t = 0; t < ts; ++t) {
        const double p = out.plan.p[i][static_cast<std::size_t>(t)];
        out.power[i][static_cast<std::size_t>(t)] = p;
        out.soc[i][static_cast<std::size_t>(t)] = next.soc_gwh[i];
        next.soc_gwh[i] = step_soc(fleet_[i], next.soc_gwh[i], p);
      }
    }
    next.time_index = start + ts;
    out.next_state = next;
    state_ = std::move(next);

    const QpSolution& s = out.plan.solution;
    warm_ = WarmStart{layout_.shift_primal(s.z_star, ts), layout_.shift_eq_duals(s.eq_duals, ts),
                      layout_.shift_primal(s.bound_duals, ts)};
    return out;
  }

 private:
  std::vector<DerClassParams> fleet_;
  MpcConfig config_;
  QpSettings settings_;
  VariableLayout layout_;
  FleetState state_;
  std::optional<QpSolver> solver_;
  std::optional<WarmStart> warm_;
};

}  // namespace dermpc
