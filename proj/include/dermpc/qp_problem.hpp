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
 * @file qp_problem.hpp
 * @brief Standard-form convex QP and solution certificates.
 *
 *   minimize    1/2 z'Pz + q'z
 *   subject to  A z = b
 *               l <= z <= u        (entries of l, u may be infinite)
 *
 * Multiplier sign convention: the stationarity residual is
 * P z + q + A'nu + mu, with mu_i > 0 only at an upper bound and mu_i < 0 only
 * at a lower bound.
 */
#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dermpc {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct QpProblem {
  int num_vars = 0;
  SparseMatrix quadratic;  ///< P, full symmetric storage (both triangles)
  Vector linear;           ///< q
  SparseMatrix eq_matrix;  ///< A, num_eq x num_vars
  Vector eq_rhs;           ///< b
  Vector bound_lower;      ///< l
  Vector bound_upper;      ///< u

  int num_eq() const { return static_cast<int>(eq_matrix.rows()); }

  double objective(const Vector& z) const {
    return 0.5 * z.dot(quadratic * z) + linear.dot(z);
  }

  /// Dimension, symmetry, PSD and bound-order checks. Throws std::invalid_argument.
  void validate() const;
};

enum class QpStatus { Optimal, MaxIterations, Infeasible };

inline const char* to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIterations: return "max_iterations";
    case QpStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

struct QpSolution {
  Vector z_star;
  Vector eq_duals;     ///< nu
  Vector bound_duals;  ///< mu
  double objective_value = 0.0;
  double primal_residual = kInf;   ///< max(equality residual, bound violation)
  double dual_residual = kInf;     ///< stationarity, inf-norm
  double complementarity = kInf;
  int iterations = 0;
  bool polished = false;
  QpStatus status = QpStatus::MaxIterations;
};

/// Per-constraint-group residuals of a candidate point.
struct ResidualReport {
  double eq_residual = 0.0;       ///< ||Az - b||_inf
  double bound_violation = 0.0;   ///< max distance outside [l, u]
  double objective = 0.0;
  std::optional<double> stationarity;     ///< only when duals were supplied
  std::optional<double> complementarity;  ///< only when duals were supplied

  double primal() const { return std::max(eq_residual, bound_violation); }

  bool feasible(double tol) const { return primal() <= tol; }

  /// Feasible and, when duals were supplied, stationary and complementary.
  bool certified(double tol) const {
    return feasible(tol) && stationarity.value_or(0.0) <= tol && complementarity.value_or(0.0) <= tol;
  }
};

inline void QpProblem::validate() const {
  const Eigen::Index n = num_vars;
  auto fail = [](const std::string& what) { throw std::invalid_argument("QpProblem: " + what); };
  if (n <= 0) fail("num_vars must be positive");
  if (quadratic.rows() != n || quadratic.cols() != n) fail("P must be n x n");
  if (linear.size() != n) fail("q must have length n");
  if (eq_matrix.cols() != n && eq_matrix.rows() > 0) fail("A must have n columns");
  if (eq_rhs.size() != eq_matrix.rows()) fail("b must match the rows of A");
  if (bound_lower.size() != n || bound_upper.size() != n) fail("l and u must have length n");
  if (!linear.allFinite() || !eq_rhs.allFinite()) fail("q and b must be finite");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::isnan(bound_lower[i]) || std::isnan(bound_upper[i])) fail("bounds must not be NaN");
    if (bound_lower[i] > bound_upper[i]) fail("l must not exceed u (index " + std::to_string(i) + ")");
  }

  const SparseMatrix asym = SparseMatrix(quadratic - SparseMatrix(quadratic.transpose()));
  double scale = 1.0;
  for (int k = 0; k < quadratic.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(quadratic, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  for (int k = 0; k < asym.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(asym, k); it; ++it)
      if (std::abs(it.value()) > 1e-12 * scale) fail("P must be symmetric");

  // Gershgorin settles the common diagonal-dominant case without a factorization.
  bool dominant = true;
  for (int k = 0; k < quadratic.outerSize() && dominant; ++k) {
    double diag = 0.0;
    double off = 0.0;
    for (SparseMatrix::InnerIterator it(quadratic, k); it; ++it) {
      if (it.row() == k)
        diag += it.value();
      else
        off += std::abs(it.value());
    }
    dominant = diag >= off - 1e-12 * scale;
  }
  if (dominant) return;

  const double tol = 1e-10 * scale * static_cast<double>(n);
  if (n <= 1000) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Eigen::MatrixXd(quadratic), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -tol) fail("P must be positive semidefinite");
    return;
  }
  SparseMatrix shifted = quadratic;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += tol;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -tol)
    fail("P must be positive semidefinite");
}

/// Residuals of a primal point only.
inline ResidualReport validate_solution(const QpProblem& problem, const Vector& z) {
  if (z.size() != problem.num_vars) throw std::invalid_argument("validate_solution: dimension mismatch");
  ResidualReport report;
  if (problem.num_eq() > 0) report.eq_residual = (problem.eq_matrix * z - problem.eq_rhs).lpNorm<Eigen::Infinity>();
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    report.bound_violation = std::max(report.bound_violation, problem.bound_lower[i] - z[i]);
    report.bound_violation = std::max(report.bound_violation, z[i] - problem.bound_upper[i]);
  }
  report.objective = problem.objective(z);
  return report;
}

/// Residuals including stationarity and complementarity for the given multipliers.
inline ResidualReport validate_solution(const QpProblem& problem, const Vector& z, const Vector& eq_duals,
                                        const Vector& bound_duals) {
  ResidualReport report = validate_solution(problem, z);
  if (eq_duals.size() != problem.num_eq() || bound_duals.size() != problem.num_vars)
    throw std::invalid_argument("validate_solution: dual dimension mismatch");
  Vector grad = problem.quadratic * z + problem.linear + bound_duals;
  if (problem.num_eq() > 0) grad += problem.eq_matrix.transpose() * eq_duals;
  report.stationarity = grad.lpNorm<Eigen::Infinity>();

  double comp = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double up = std::max(bound_duals[i], 0.0);
    const double down = std::max(-bound_duals[i], 0.0);
    const double gap_up = problem.bound_upper[i] - z[i];
    const double gap_down = z[i] - problem.bound_lower[i];
    if (up > 0.0) comp = std::max(comp, std::min(up, std::abs(gap_up)));
    if (down > 0.0) comp = std::max(comp, std::min(down, std::abs(gap_down)));
  }
  report.complementarity = comp;
  return report;
}

// ---------------------------------------------------------------------------
// Triplet dump
// ---------------------------------------------------------------------------
//
// Plain-text layout, one item per line, 0-based indices, '#' comments allowed:
//
//   dermpc-qp 1
//   n <num_vars> m <num_eq>
//   P <nnz>          followed by <nnz> lines "row col value"
//   q                followed by n values
//   A <nnz>          followed by <nnz> lines "row col value"
//   b                followed by m values
//   l                followed by n values ("-inf" allowed)
//   u                followed by n values ("inf" allowed)

namespace detail {

inline void write_number(std::ostream& out, double v) {
  if (std::isinf(v)) {
    out << (v > 0 ? "inf" : "-inf");
  } else {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  }
}

inline void write_triplets(std::ostream& out, const char* tag, const SparseMatrix& m) {
  out << tag << ' ' << m.nonZeros() << '\n';
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
      out << it.row() << ' ' << it.col() << ' ';
      write_number(out, it.value());
      out << '\n';
    }
}

inline void write_vector(std::ostream& out, const char* tag, const Vector& v) {
  out << tag << '\n';
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    write_number(out, v[i]);
    out << '\n';
  }
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string next() {
    std::string tok;
    while (in_ >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in_, rest);
        continue;
      }
      return tok;
    }
    throw std::runtime_error("QP dump: unexpected end of input");
  }

  void expect(const std::string& tag) {
    const std::string tok = next();
    if (tok != tag) throw std::runtime_error("QP dump: expected '" + tag + "', found '" + tok + "'");
  }

  long integer() { return std::stol(next()); }

  double number() {
    const std::string tok = next();
    if (tok == "inf") return kInf;
    if (tok == "-inf") return -kInf;
    return std::stod(tok);
  }

 private:
  std::istream& in_;
};

inline SparseMatrix read_triplets(TokenReader& r, const char* tag, int rows, int cols) {
  r.expect(tag);
  const long nnz = r.integer();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(nnz));
  for (long k = 0; k < nnz; ++k) {
    const int i = static_cast<int>(r.integer());
    const int j = static_cast<int>(r.integer());
    trips.emplace_back(i, j, r.number());
  }
  SparseMatrix m(rows, cols);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

inline Vector read_vector(TokenReader& r, const char* tag, int size) {
  r.expect(tag);
  Vector v(size);
  for (int i = 0; i < size; ++i) v[i] = r.number();
  return v;
}

}  // namespace detail

inline void write_qp_dump(std::ostream& out, const QpProblem& problem) {
  out << "dermpc-qp 1\n";
  out << "n " << problem.num_vars << " m " << problem.num_eq() << '\n';
  detail::write_triplets(out, "P", problem.quadratic);
  detail::write_vector(out, "q", problem.linear);
  detail::write_triplets(out, "A", problem.eq_matrix);
  detail::write_vector(out, "b", problem.eq_rhs);
  detail::write_vector(out, "l", problem.bound_lower);
  detail::write_vector(out, "u", problem.bound_upper);
}

inline QpProblem read_qp_dump(std::istream& in) {
  detail::TokenReader r(in);
  r.expect("dermpc-qp");
  if (r.integer() != 1) throw std::runtime_error("QP dump: unsupported version");
  r.expect("n");
  const int n = static_cast<int>(r.integer());
  r.expect("m");
  const int m = static_cast<int>(r.integer());
  QpProblem p;
  p.num_vars = n;
  p.quadratic = detail::read_triplets(r, "P", n, n);
  p.linear = detail::read_vector(r, "q", n);
  p.eq_matrix = detail::read_triplets(r, "A", m, n);
  p.eq_rhs = detail::read_vector(r, "b", m);
  p.bound_lower = detail::read_vector(r, "l", n);
  p.bound_upper = detail::read_vector(r, "u", n);
  return p;
}

}  // namespace dermpc
