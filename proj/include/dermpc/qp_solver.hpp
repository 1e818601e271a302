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
 * @file qp_solver.hpp
 * @brief Operator-splitting (ADMM) solver for QpProblem.
 *
 * The equality rows and the variable box are stacked into one constraint
 * block C = [A; I] with interval bounds [b; l] <= C z <= [b; u]. Each
 * iteration solves one quasi-definite KKT system
 *
 *   [ P + sigma I    C'          ] [x]   [ sigma x_k - q      ]
 *   [ C             -diag(1/rho) ] [v] = [ z_k - y_k ./ rho   ]
 *
 * followed by a projection onto the bounds and a dual update. The KKT
 * matrix only depends on P, A and rho, so its sparse LDL' factorization is
 * kept across iterations and across calls to solve() after q or b change.
 *
 * Once the iterate is close, the solver guesses the active bound set and
 * solves the reduced equality-constrained KKT system directly ("polishing").
 * A polished point is accepted only if it passes the same residual checks
 * as any other candidate.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dermpc/qp_problem.hpp"

namespace dermpc {

struct QpSettings {
  double eps_primal = 1e-6;
  double eps_dual = 1e-6;
  int max_iterations = 50000;

  double rho = 0.1;
  double sigma = 1e-6;
  double relaxation = 1.6;
  bool adaptive_rho = true;
  int adaptive_rho_interval = 25;
  double adaptive_rho_tolerance = 5.0;
  int scaling_iterations = 10;

  bool polish = true;
  double polish_delta = 1e-9;
  int polish_refine_iterations = 10;
  int polish_active_set_passes = 5;

  // Infeasibility: neither the primal residual nor the worst relative
  // residual improves for stall_window iterations while the primal residual
  // stays above stall_factor * eps_primal.
  int stall_window = 1000;
  double stall_factor = 1e3;
  int presolve_passes = 10;
};

/// Starting point for solve(). Empty dual vectors mean "start duals at zero".
struct WarmStart {
  Vector z;
  Vector eq_duals;
  Vector bound_duals;
};

class QpSolver {
 public:
  explicit QpSolver(QpProblem problem, QpSettings settings = {})
      : problem_(std::move(problem)), settings_(settings) {
    problem_.validate();
    n_ = problem_.num_vars;
    me_ = problem_.num_eq();
    m_ = me_ + n_;
    setup_scaling();
    setup_rho();
    assemble_kkt();
    ldlt_.analyzePattern(kkt_);
    factorize();
  }

  const QpProblem& problem() const { return problem_; }
  const QpSettings& settings() const { return settings_; }
  int factorizations() const { return factorizations_; }
  double rho() const { return rho_scalar_; }

  void update_linear(const Vector& q) {
    if (q.size() != n_) throw std::invalid_argument("update_linear: dimension mismatch");
    if (!q.allFinite()) throw std::invalid_argument("update_linear: q must be finite");
    problem_.linear = q;
    q_scaled_ = cost_scale_ * d_.cwiseProduct(q);
  }

  void update_eq_rhs(const Vector& b) {
    if (b.size() != me_) throw std::invalid_argument("update_eq_rhs: dimension mismatch");
    if (!b.allFinite()) throw std::invalid_argument("update_eq_rhs: b must be finite");
    problem_.eq_rhs = b;
    const Vector scaled = e_.head(me_).cwiseProduct(b);
    lo_scaled_.head(me_) = scaled;
    hi_scaled_.head(me_) = scaled;
  }

  QpSolution solve(const WarmStart* warm = nullptr) {
    if (presolve_infeasible()) {
      QpSolution out = package(Vector::Zero(n_), Vector::Zero(me_), Vector::Zero(n_), 0, false);
      out.status = QpStatus::Infeasible;
      return out;
    }

    Vector x = Vector::Zero(n_);
    Vector y = Vector::Zero(m_);
    if (warm != nullptr) {
      if (warm->z.size() != n_) throw std::invalid_argument("warm start: dimension mismatch");
      x = d_.cwiseInverse().cwiseProduct(warm->z);
      if (warm->eq_duals.size() == me_ && warm->bound_duals.size() == n_) {
        Vector y_unscaled(m_);
        y_unscaled << warm->eq_duals, warm->bound_duals;
        y = cost_scale_ * e_.cwiseInverse().cwiseProduct(y_unscaled);
      }
    }
    Vector z = project(c_scaled_ * x);

    Candidate best = evaluate(x, y);
    double polish_gate = 1e3;
    if (best.converged) return finish(best, 0);
    if (settings_.polish && best.score <= polish_gate) {
      if (auto polished = polish(best)) return finish(*polished, 0);
      polish_gate = best.score / 10.0;
    }

    const double alpha = settings_.relaxation;
    double best_primal = best.primal;
    double best_score = best.score;
    int last_progress = 0;

    Vector rhs(n_ + m_);
    Vector z_tilde(m_);
    Vector z_hat(m_);
    for (int k = 1; k <= settings_.max_iterations; ++k) {
      rhs.head(n_) = settings_.sigma * x - q_scaled_;
      rhs.tail(m_) = z - y.cwiseProduct(rho_inv_);
      const Vector sol = ldlt_.solve(rhs);
      z_tilde = z + (sol.tail(m_) - y).cwiseProduct(rho_inv_);
      x = alpha * sol.head(n_) + (1.0 - alpha) * x;
      z_hat = alpha * z_tilde + (1.0 - alpha) * z;
      z = project(z_hat + y.cwiseProduct(rho_inv_));
      y += rho_.cwiseProduct(z_hat - z);

      const Candidate cand = evaluate(x, y);
      if (cand.converged) {
        if (settings_.polish) {
          if (auto polished = polish(cand)) return finish(*polished, k);
        }
        return finish(cand, k);
      }
      if (cand.score < best.score) best = cand;
      if (settings_.polish && cand.score <= polish_gate) {
        if (auto polished = polish(cand)) return finish(*polished, k);
        polish_gate = cand.score / 10.0;
      }

      if (cand.primal < 0.99 * best_primal || cand.score < 0.99 * best_score) {
        best_primal = std::min(best_primal, cand.primal);
        best_score = std::min(best_score, cand.score);
        last_progress = k;
      } else if (k - last_progress >= settings_.stall_window &&
                 best_primal > settings_.stall_factor * settings_.eps_primal) {
        QpSolution out = finish(best, k);
        out.status = QpStatus::Infeasible;
        return out;
      }

      if (settings_.adaptive_rho && k % settings_.adaptive_rho_interval == 0) adapt_rho(x, z, y);
    }
    QpSolution out = finish(best, settings_.max_iterations);
    out.status = QpStatus::MaxIterations;
    return out;
  }

 private:
  struct Candidate {
    Vector z;
    Vector eq_duals;
    Vector bound_duals;
    double primal = kInf;
    double dual = kInf;
    double comp = kInf;
    double score = kInf;  ///< worst residual relative to its tolerance
    bool converged = false;
    bool polished = false;
  };

  // --- setup -------------------------------------------------------------

  void setup_scaling() {
    // Stacked constraint matrix C = [A; I].
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(problem_.eq_matrix.nonZeros() + n_));
    for (int k = 0; k < problem_.eq_matrix.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(problem_.eq_matrix, k); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
    for (int j = 0; j < n_; ++j) trips.emplace_back(me_ + j, j, 1.0);
    c_scaled_.resize(m_, n_);
    c_scaled_.setFromTriplets(trips.begin(), trips.end());
    p_scaled_ = problem_.quadratic;
    q_scaled_ = problem_.linear;

    d_ = Vector::Ones(n_);
    e_ = Vector::Ones(m_);
    cost_scale_ = 1.0;

    auto clamp_norm = [](double v) {
      if (v < 1e-4) return 1.0;
      return std::min(v, 1e4);
    };

    // Ruiz equilibration of [P C'; C 0].
    for (int iter = 0; iter < settings_.scaling_iterations; ++iter) {
      Vector col_norm = Vector::Zero(n_);
      Vector row_norm = Vector::Zero(m_);
      for (int k = 0; k < n_; ++k) {
        for (SparseMatrix::InnerIterator it(p_scaled_, k); it; ++it)
          col_norm[k] = std::max(col_norm[k], std::abs(it.value()));
        for (SparseMatrix::InnerIterator it(c_scaled_, k); it; ++it) {
          col_norm[k] = std::max(col_norm[k], std::abs(it.value()));
          row_norm[it.row()] = std::max(row_norm[it.row()], std::abs(it.value()));
        }
      }
      const Vector dn = col_norm.unaryExpr([&](double v) { return 1.0 / std::sqrt(clamp_norm(v)); });
      const Vector en = row_norm.unaryExpr([&](double v) { return 1.0 / std::sqrt(clamp_norm(v)); });
      p_scaled_ = dn.asDiagonal() * p_scaled_ * dn.asDiagonal();
      c_scaled_ = en.asDiagonal() * c_scaled_ * dn.asDiagonal();
      q_scaled_ = dn.cwiseProduct(q_scaled_);
      d_ = d_.cwiseProduct(dn);
      e_ = e_.cwiseProduct(en);

      double mean_col = 0.0;
      for (int k = 0; k < n_; ++k) {
        double c = 0.0;
        for (SparseMatrix::InnerIterator it(p_scaled_, k); it; ++it) c = std::max(c, std::abs(it.value()));
        mean_col += c;
      }
      mean_col /= n_;
      const double gamma = 1.0 / clamp_norm(std::max(mean_col, q_scaled_.lpNorm<Eigen::Infinity>()));
      p_scaled_ *= gamma;
      q_scaled_ *= gamma;
      cost_scale_ *= gamma;
    }

    lo_scaled_.resize(m_);
    hi_scaled_.resize(m_);
    lo_scaled_.head(me_) = problem_.eq_rhs;
    hi_scaled_.head(me_) = problem_.eq_rhs;
    lo_scaled_.tail(n_) = problem_.bound_lower;
    hi_scaled_.tail(n_) = problem_.bound_upper;
    lo_scaled_ = e_.cwiseProduct(lo_scaled_);  // inf * positive stays inf
    hi_scaled_ = e_.cwiseProduct(hi_scaled_);
    p_scaled_.makeCompressed();
    c_scaled_.makeCompressed();
  }

  void setup_rho() {
    rho_scalar_ = settings_.rho;
    rho_.resize(m_);
    rho_inv_.resize(m_);
    refresh_rho_vector();
  }

  void refresh_rho_vector() {
    for (int i = 0; i < m_; ++i) {
      const double lo = i < me_ ? problem_.eq_rhs[i] : problem_.bound_lower[i - me_];
      const double hi = i < me_ ? problem_.eq_rhs[i] : problem_.bound_upper[i - me_];
      if (i < me_ || lo == hi)
        rho_[i] = 1e3 * rho_scalar_;
      else if (std::isinf(lo) && std::isinf(hi))
        rho_[i] = 1e-6;
      else
        rho_[i] = rho_scalar_;
      rho_inv_[i] = 1.0 / rho_[i];
    }
  }

  void assemble_kkt() {
    std::vector<Triplet> trips;
    trips.reserve(static_cast<std::size_t>(2 * (p_scaled_.nonZeros() + c_scaled_.nonZeros()) + n_ + m_));
    for (int k = 0; k < n_; ++k) {
      trips.emplace_back(k, k, settings_.sigma);
      for (SparseMatrix::InnerIterator it(p_scaled_, k); it; ++it)
        trips.emplace_back(it.row(), it.col(), it.value());
      for (SparseMatrix::InnerIterator it(c_scaled_, k); it; ++it) {
        trips.emplace_back(n_ + it.row(), k, it.value());
        trips.emplace_back(k, n_ + it.row(), it.value());
      }
    }
    for (int i = 0; i < m_; ++i) trips.emplace_back(n_ + i, n_ + i, -rho_inv_[i]);
    kkt_.resize(n_ + m_, n_ + m_);
    kkt_.setFromTriplets(trips.begin(), trips.end());
    kkt_.makeCompressed();
  }

  void factorize() {
    ldlt_.factorize(kkt_);
    if (ldlt_.info() != Eigen::Success) throw std::runtime_error("QpSolver: KKT factorization failed");
    ++factorizations_;
  }

  void adapt_rho(const Vector& x, const Vector& z, const Vector& y) {
    const Vector cx = c_scaled_ * x;
    const Vector px = p_scaled_ * x;
    const Vector cty = c_scaled_.transpose() * y;
    const double prim = (cx - z).lpNorm<Eigen::Infinity>() /
                        (std::max(cx.lpNorm<Eigen::Infinity>(), z.lpNorm<Eigen::Infinity>()) + 1e-30);
    const double dual = (px + q_scaled_ + cty).lpNorm<Eigen::Infinity>() /
                        (std::max({px.lpNorm<Eigen::Infinity>(), cty.lpNorm<Eigen::Infinity>(),
                                   q_scaled_.lpNorm<Eigen::Infinity>()}) +
                         1e-30);
    const double proposed = std::clamp(rho_scalar_ * std::sqrt(prim / (dual + 1e-30)), 1e-6, 1e6);
    const double tol = settings_.adaptive_rho_tolerance;
    if (proposed > rho_scalar_ * tol || proposed < rho_scalar_ / tol) {
      rho_scalar_ = proposed;
      refresh_rho_vector();
      for (int i = 0; i < m_; ++i) kkt_.coeffRef(n_ + i, n_ + i) = -rho_inv_[i];
      factorize();
    }
  }

  // --- iteration helpers --------------------------------------------------

  Vector project(const Vector& v) const { return v.cwiseMax(lo_scaled_).cwiseMin(hi_scaled_); }

  void snap_fixed(Vector& z) const {
    for (int i = 0; i < n_; ++i)
      if (problem_.bound_lower[i] == problem_.bound_upper[i]) z[i] = problem_.bound_lower[i];
  }

  Candidate certify(Vector z, Vector nu, Vector mu, bool polished) const {
    snap_fixed(z);
    const ResidualReport report = validate_solution(problem_, z, nu, mu);
    Candidate c;
    c.primal = report.primal();
    c.dual = *report.stationarity;
    c.comp = *report.complementarity;
    c.score = std::max({c.primal / settings_.eps_primal, c.dual / settings_.eps_dual,
                        c.comp / settings_.eps_dual});
    c.converged = c.score <= 1.0;
    c.z = std::move(z);
    c.eq_duals = std::move(nu);
    c.bound_duals = std::move(mu);
    c.polished = polished;
    return c;
  }

  /// Unscales an ADMM iterate and measures it.
  Candidate evaluate(const Vector& x, const Vector& y) const {
    const Vector y_unscaled = e_.cwiseProduct(y) / cost_scale_;
    return certify(d_.cwiseProduct(x), y_unscaled.head(me_), y_unscaled.tail(n_), false);
  }

  /// Solves the equality-constrained problem obtained by fixing the guessed active bounds.
  /// Active-set state of one variable during polishing.
  enum class Bound { Free, Lower, Upper };

  /// Guesses the active set from an ADMM iterate, then solves the reduced
  /// KKT system. A rejected solution updates the guess (overshooting free
  /// variables become fixed, fixed variables with wrong-sign multipliers are
  /// released) for up to polish_active_set_passes passes.
  std::optional<Candidate> polish(const Candidate& from) const {
    const Vector& l = problem_.bound_lower;
    const Vector& u = problem_.bound_upper;
    std::vector<Bound> set(static_cast<std::size_t>(n_), Bound::Free);
    for (int i = 0; i < n_; ++i) {
      const double zi = from.z[i];
      const double mi = from.bound_duals[i];
      if (l[i] == u[i] || (std::isfinite(l[i]) && zi - l[i] < -mi))
        set[static_cast<std::size_t>(i)] = Bound::Lower;
      else if (std::isfinite(u[i]) && u[i] - zi < mi)
        set[static_cast<std::size_t>(i)] = Bound::Upper;
    }
    for (int pass = 0; pass < settings_.polish_active_set_passes; ++pass) {
      std::optional<Candidate> c = solve_reduced(set);
      if (!c) return std::nullopt;
      if (c->converged) return c;
      bool changed = false;
      for (int i = 0; i < n_; ++i) {
        auto& state = set[static_cast<std::size_t>(i)];
        if (l[i] == u[i]) continue;
        const double zi = c->z[i], mi = c->bound_duals[i];
        const double tol = settings_.eps_primal;
        if (state == Bound::Free && zi < l[i] - tol) {
          state = Bound::Lower;
        } else if (state == Bound::Free && zi > u[i] + tol) {
          state = Bound::Upper;
        } else if ((state == Bound::Lower && mi > settings_.eps_dual) ||
                   (state == Bound::Upper && mi < -settings_.eps_dual)) {
          state = Bound::Free;
        } else {
          continue;
        }
        changed = true;
      }
      if (!changed) return std::nullopt;
    }
    return std::nullopt;
  }

  /// Fixes non-free variables at their bounds and solves the equality-
  /// constrained QP over the rest. The result is certified, not trusted.
  std::optional<Candidate> solve_reduced(const std::vector<Bound>& set) const {
    const Vector& l = problem_.bound_lower;
    const Vector& u = problem_.bound_upper;
    std::vector<int> free_pos(static_cast<std::size_t>(n_), -1);
    std::vector<int> free_vars;
    Vector fixed_values = Vector::Zero(n_);
    for (int i = 0; i < n_; ++i) {
      switch (set[static_cast<std::size_t>(i)]) {
        case Bound::Lower:
          fixed_values[i] = l[i];
          break;
        case Bound::Upper:
          fixed_values[i] = u[i];
          break;
        case Bound::Free:
          free_pos[static_cast<std::size_t>(i)] = static_cast<int>(free_vars.size());
          free_vars.push_back(i);
          break;
      }
    }
    const int nf = static_cast<int>(free_vars.size());

    const Vector q_red_full = problem_.linear + problem_.quadratic * fixed_values;
    Vector b_red = problem_.eq_rhs;
    if (me_ > 0) b_red -= problem_.eq_matrix * fixed_values;

    // Rows touching no free variable keep a zero multiplier.
    std::vector<int> row_pos(static_cast<std::size_t>(me_), -1);
    std::vector<int> rows;
    for (int k = 0; k < problem_.eq_matrix.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(problem_.eq_matrix, k); it; ++it)
        if (free_pos[static_cast<std::size_t>(k)] >= 0 && it.value() != 0.0 &&
            row_pos[static_cast<std::size_t>(it.row())] < 0)
          row_pos[static_cast<std::size_t>(it.row())] = 0;
    for (int r = 0; r < me_; ++r)
      if (row_pos[static_cast<std::size_t>(r)] == 0) {
        row_pos[static_cast<std::size_t>(r)] = static_cast<int>(rows.size());
        rows.push_back(r);
      }
    const int mr = static_cast<int>(rows.size());

    std::vector<Triplet> exact;
    for (int f = 0; f < nf; ++f) {
      const int j = free_vars[static_cast<std::size_t>(f)];
      for (SparseMatrix::InnerIterator it(problem_.quadratic, j); it; ++it) {
        const int fr = free_pos[static_cast<std::size_t>(it.row())];
        if (fr >= 0) exact.emplace_back(fr, f, it.value());
      }
      for (SparseMatrix::InnerIterator it(problem_.eq_matrix, j); it; ++it) {
        const int r = row_pos[static_cast<std::size_t>(it.row())];
        exact.emplace_back(nf + r, f, it.value());
        exact.emplace_back(f, nf + r, it.value());
      }
    }
    SparseMatrix k_exact(nf + mr, nf + mr);
    k_exact.setFromTriplets(exact.begin(), exact.end());
    std::vector<Triplet> reg = exact;
    for (int f = 0; f < nf; ++f) reg.emplace_back(f, f, settings_.polish_delta);
    for (int r = 0; r < mr; ++r) reg.emplace_back(nf + r, nf + r, -settings_.polish_delta);
    SparseMatrix k_reg(nf + mr, nf + mr);
    k_reg.setFromTriplets(reg.begin(), reg.end());

    Vector rhs(nf + mr);
    for (int f = 0; f < nf; ++f) rhs[f] = -q_red_full[free_vars[static_cast<std::size_t>(f)]];
    for (int r = 0; r < mr; ++r) rhs[nf + r] = b_red[rows[static_cast<std::size_t>(r)]];

    Vector sol = Vector::Zero(nf + mr);
    if (nf + mr > 0) {
      Eigen::SimplicialLDLT<SparseMatrix> ldlt(k_reg);
      if (ldlt.info() != Eigen::Success) return std::nullopt;
      sol = ldlt.solve(rhs);
      for (int it = 0; it < settings_.polish_refine_iterations; ++it) {
        const Vector res = rhs - k_exact * sol;
        if (res.lpNorm<Eigen::Infinity>() < 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>())) break;
        sol += ldlt.solve(res);
      }
      if (!sol.allFinite()) return std::nullopt;
    }

    Vector z = fixed_values;
    for (int f = 0; f < nf; ++f) z[free_vars[static_cast<std::size_t>(f)]] = sol[f];
    Vector nu = Vector::Zero(me_);
    for (int r = 0; r < mr; ++r) nu[rows[static_cast<std::size_t>(r)]] = sol[nf + r];
    Vector grad = problem_.quadratic * z + problem_.linear;
    if (me_ > 0) grad += problem_.eq_matrix.transpose() * nu;
    Vector mu = Vector::Zero(n_);
    for (int i = 0; i < n_; ++i)
      if (free_pos[static_cast<std::size_t>(i)] < 0) mu[i] = -grad[i];

    return certify(std::move(z), std::move(nu), std::move(mu), true);
  }

  QpSolution finish(const Candidate& c, int iterations) const {
    QpSolution out = package(c.z, c.eq_duals, c.bound_duals, iterations, c.polished);
    out.primal_residual = c.primal;
    out.dual_residual = c.dual;
    out.complementarity = c.comp;
    out.status = c.converged ? QpStatus::Optimal : QpStatus::MaxIterations;
    return out;
  }

  QpSolution package(Vector z, Vector nu, Vector mu, int iterations, bool polished) const {
    QpSolution out;
    out.objective_value = problem_.objective(z);
    out.z_star = std::move(z);
    out.eq_duals = std::move(nu);
    out.bound_duals = std::move(mu);
    out.iterations = iterations;
    out.polished = polished;
    return out;
  }

  // --- presolve -------------------------------------------------------------

  /// Bound propagation over the equality rows. True only when the feasible set is provably empty.
  bool presolve_infeasible() const {
    if (me_ == 0) return false;
    using RowMajor = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;
    const RowMajor a = problem_.eq_matrix;
    Vector lo = problem_.bound_lower;
    Vector hi = problem_.bound_upper;
    const double eps = settings_.eps_primal;

    for (int pass = 0; pass < settings_.presolve_passes; ++pass) {
      bool changed = false;
      for (int r = 0; r < me_; ++r) {
        // Per-variable activity ranges, frozen before this row tightens anything.
        std::vector<std::pair<double, double>> contrib;
        double min_act = 0.0, max_act = 0.0, row_scale = 0.0;
        int min_inf = 0, max_inf = 0;
        for (RowMajor::InnerIterator it(a, r); it; ++it) {
          const double c = it.value();
          const double lo_c = c > 0 ? c * lo[it.col()] : c * hi[it.col()];
          const double hi_c = c > 0 ? c * hi[it.col()] : c * lo[it.col()];
          contrib.emplace_back(lo_c, hi_c);
          if (std::isinf(lo_c)) ++min_inf; else min_act += lo_c;
          if (std::isinf(hi_c)) ++max_inf; else max_act += hi_c;
          row_scale = std::max(row_scale, std::abs(c));
        }
        const double b = problem_.eq_rhs[r];
        const double tol = 10.0 * eps * (1.0 + std::abs(b) + row_scale);
        if (min_inf == 0 && min_act > b + tol) return true;
        if (max_inf == 0 && max_act < b - tol) return true;

        std::size_t k = 0;
        for (RowMajor::InnerIterator it(a, r); it; ++it, ++k) {
          const double c = it.value();
          if (c == 0.0) continue;
          const int j = it.col();
          const auto [lo_c, hi_c] = contrib[k];
          const bool rest_min_finite = min_inf - (std::isinf(lo_c) ? 1 : 0) == 0;
          const bool rest_max_finite = max_inf - (std::isinf(hi_c) ? 1 : 0) == 0;
          const double rest_min = min_act - (std::isinf(lo_c) ? 0.0 : lo_c);
          const double rest_max = max_act - (std::isinf(hi_c) ? 0.0 : hi_c);
          double new_lo = -kInf, new_hi = kInf;
          if (rest_max_finite) (c > 0 ? new_lo : new_hi) = (b - rest_max) / c;
          if (rest_min_finite) (c > 0 ? new_hi : new_lo) = (b - rest_min) / c;
          const double var_tol = tol / std::abs(c);
          if (new_lo > hi[j] + var_tol || new_hi < lo[j] - var_tol) return true;
          const double min_step = 1e-6 * (1.0 + std::abs(lo[j]) + std::abs(hi[j]));
          if (new_lo > lo[j] + min_step && new_lo < hi[j]) {
            lo[j] = new_lo;
            changed = true;
          }
          if (new_hi < hi[j] - min_step && new_hi > lo[j]) {
            hi[j] = new_hi;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    return false;
  }

  QpProblem problem_;
  QpSettings settings_;
  int n_ = 0;
  int me_ = 0;
  int m_ = 0;

  SparseMatrix p_scaled_;
  SparseMatrix c_scaled_;
  Vector q_scaled_;
  Vector lo_scaled_;
  Vector hi_scaled_;
  Vector d_;
  Vector e_;
  double cost_scale_ = 1.0;

  double rho_scalar_ = 0.1;
  Vector rho_;
  Vector rho_inv_;

  SparseMatrix kkt_;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt_;
  int factorizations_ = 0;
};

/// One-shot convenience wrapper.
inline QpSolution solve(const QpProblem& problem, const QpSettings& settings = {},
                        const WarmStart* warm = nullptr) {
  QpSolver solver(problem, settings);
  return solver.solve(warm);
}

}  // namespace dermpc
