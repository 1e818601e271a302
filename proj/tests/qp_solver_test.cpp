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

#include <gtest/gtest.h>

#include <sstream>

#include "dermpc/qp_solver.hpp"
#include "support/active_set_oracle.hpp"

namespace dermpc {
namespace {

using testing::active_set_oracle;
using testing::random_box_qp;
using testing::Rng;

QpProblem make_problem(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& A,
                       const Eigen::VectorXd& b, const Eigen::VectorXd& l, const Eigen::VectorXd& u) {
  QpProblem qp;
  qp.num_vars = static_cast<int>(q.size());
  qp.quadratic = P.sparseView();
  qp.linear = q;
  qp.eq_matrix = A.sparseView();
  qp.eq_rhs = b;
  qp.bound_lower = l;
  qp.bound_upper = u;
  return qp;
}

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

void expect_certified(const QpProblem& qp, const QpSolution& sol, double tol = 1e-6) {
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  const ResidualReport r = validate_solution(qp, sol.z_star, sol.eq_duals, sol.bound_duals);
  EXPECT_LE(r.primal(), tol);
  EXPECT_LE(*r.stationarity, tol);
  EXPECT_LE(*r.complementarity, tol);
  EXPECT_NEAR(sol.objective_value, r.objective, 1e-12 * (1.0 + std::abs(r.objective)));
}

TEST(QpSolver, InteriorMinimumOfBoxedParabola) {
  const QpProblem qp = make_problem(Eigen::MatrixXd::Identity(1, 1), vec({0.0}), Eigen::MatrixXd(0, 1),
                                    Eigen::VectorXd(0), vec({-1.0}), vec({1.0}));
  const QpSolution sol = solve(qp);
  expect_certified(qp, sol);
  EXPECT_NEAR(sol.z_star[0], 0.0, 1e-9);
  EXPECT_NEAR(sol.objective_value, 0.0, 1e-12);
}

TEST(QpSolver, SymmetricEqualityConstrained) {
  const Eigen::MatrixXd A = (Eigen::MatrixXd(1, 2) << 1.0, 1.0).finished();
  const QpProblem qp = make_problem(Eigen::MatrixXd::Identity(2, 2), vec({0.0, 0.0}), A, vec({2.0}),
                                    vec({-kInf, -kInf}), vec({kInf, kInf}));
  const QpSolution sol = solve(qp);
  expect_certified(qp, sol);
  EXPECT_NEAR(sol.z_star[0], 1.0, 1e-9);
  EXPECT_NEAR(sol.z_star[1], 1.0, 1e-9);
  EXPECT_NEAR(sol.objective_value, 1.0, 1e-9);
}

TEST(QpSolver, ActiveUpperBound) {
  // 1/2 (z - 3)^2 = 1/2 z^2 - 3 z + 9/2; the constant is dropped from q-form.
  const QpProblem qp = make_problem(Eigen::MatrixXd::Identity(1, 1), vec({-3.0}), Eigen::MatrixXd(0, 1),
                                    Eigen::VectorXd(0), vec({-1.0}), vec({1.0}));
  const QpSolution sol = solve(qp);
  expect_certified(qp, sol);
  EXPECT_NEAR(sol.z_star[0], 1.0, 1e-9);
  EXPECT_NEAR(sol.objective_value + 4.5, 2.0, 1e-9);
  EXPECT_GT(sol.bound_duals[0], 0.0);  // upper bound multiplier is positive
}

TEST(QpSolver, MatchesActiveSetOracleOnSixVariables) {
  Rng rng(20231);
  const QpProblem qp = random_box_qp(rng, 6, 2);
  const auto oracle = active_set_oracle(qp);
  ASSERT_TRUE(oracle.has_value());
  const QpSolution sol = solve(qp);
  expect_certified(qp, sol);
  EXPECT_LE((sol.z_star - oracle->z).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_NEAR(sol.objective_value, oracle->objective, 1e-8);

  const ResidualReport at_oracle = validate_solution(qp, oracle->z);
  EXPECT_LE(at_oracle.primal(), 1e-8);
}

TEST(QpSolver, RandomInstancesAgreeWithOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = rng.integer(1, 7);
    const int me = rng.integer(0, std::min(3, n - 1));
    const QpProblem qp = random_box_qp(rng, n, me);
    const auto oracle = active_set_oracle(qp);
    ASSERT_TRUE(oracle.has_value()) << "trial " << trial;
    const QpSolution sol = solve(qp);
    expect_certified(qp, sol);
    EXPECT_LE((sol.z_star - oracle->z).lpNorm<Eigen::Infinity>(), 1e-6) << "trial " << trial;
    EXPECT_NEAR(sol.objective_value, oracle->objective, 1e-8) << "trial " << trial;
  }
}

TEST(ValidateSolution, ReportsResidualGroups) {
  const QpProblem qp = make_problem(Eigen::MatrixXd::Identity(1, 1), vec({0.0}), Eigen::MatrixXd(0, 1),
                                    Eigen::VectorXd(0), vec({-1.0}), vec({1.0}));
  const ResidualReport ok = validate_solution(qp, vec({0.25}));
  EXPECT_EQ(ok.eq_residual, 0.0);
  EXPECT_EQ(ok.bound_violation, 0.0);
  EXPECT_DOUBLE_EQ(ok.objective, 0.5 * 0.25 * 0.25);

  const ResidualReport bad = validate_solution(qp, vec({1.5}));
  EXPECT_DOUBLE_EQ(bad.bound_violation, 0.5);
  EXPECT_FALSE(bad.feasible(1e-6));

  EXPECT_THROW(validate_solution(qp, vec({0.0, 1.0})), std::invalid_argument);
}

TEST(ValidateSolution, FlagsWrongSignMultiplier) {
  const QpProblem qp = make_problem(Eigen::MatrixXd::Identity(1, 1), vec({-3.0}), Eigen::MatrixXd(0, 1),
                                    Eigen::VectorXd(0), vec({-1.0}), vec({1.0}));
  // Stationary at z = -1 with mu = +4, but a positive multiplier at the lower bound is not a KKT point.
  const ResidualReport r = validate_solution(qp, vec({-1.0}), Eigen::VectorXd(0), vec({4.0}));
  EXPECT_LE(*r.stationarity, 1e-12);
  EXPECT_GT(*r.complementarity, 1.0);
  EXPECT_FALSE(r.certified(1e-6));
}

TEST(QpSolver, PresolveDetectsConflictingEqualityAndBox) {
  const Eigen::MatrixXd A = (Eigen::MatrixXd(1, 2) << 1.0, 1.0).finished();
  const QpProblem qp = make_problem(Eigen::MatrixXd::Identity(2, 2), vec({0.0, 0.0}), A, vec({5.0}),
                                    vec({0.0, 0.0}), vec({1.0, 1.0}));
  EXPECT_EQ(solve(qp).status, QpStatus::Infeasible);
}

TEST(QpSolver, PresolvePropagatesAcrossRows) {
  // Each row alone is satisfiable in the unit box; together they force z2 = 1.8.
  const Eigen::MatrixXd A = (Eigen::MatrixXd(3, 3) << 1, 1, 0, 0, 1, 1, 1, 0, 1).finished();
  const QpProblem qp = make_problem(Eigen::MatrixXd::Identity(3, 3), vec({0, 0, 0}), A, vec({1.9, 1.9, 0.2}),
                                    vec({0, 0, 0}), vec({1, 1, 1}));
  EXPECT_EQ(solve(qp).status, QpStatus::Infeasible);
}

TEST(QpSolver, StallDetectsInconsistentEqualities) {
  // Unbounded variables, so presolve cannot help; the residual stalls at 0.5.
  const Eigen::MatrixXd A = (Eigen::MatrixXd(2, 2) << 1, 1, 1, 1).finished();
  const QpProblem qp = make_problem(Eigen::MatrixXd::Identity(2, 2), vec({0, 0}), A, vec({1.0, 2.0}),
                                    vec({-kInf, -kInf}), vec({kInf, kInf}));
  const QpSolution sol = solve(qp);
  EXPECT_EQ(sol.status, QpStatus::Infeasible);
  EXPECT_GT(sol.primal_residual, 1e-3);
}

TEST(QpSolver, MaxIterationsReturnsBestIterateWithResiduals) {
  Rng rng(99);
  const QpProblem qp = random_box_qp(rng, 6, 2);
  QpSettings settings;
  settings.max_iterations = 2;
  settings.polish = false;
  const QpSolution sol = solve(qp, settings);
  EXPECT_EQ(sol.status, QpStatus::MaxIterations);
  EXPECT_EQ(sol.iterations, 2);
  EXPECT_TRUE(std::isfinite(sol.primal_residual));
  EXPECT_TRUE(std::isfinite(sol.dual_residual));
}

TEST(QpSolver, RejectsInvalidProblems) {
  QpProblem asym = make_problem((Eigen::MatrixXd(2, 2) << 1, 1, 0, 1).finished(), vec({0, 0}),
                                Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), vec({-1, -1}), vec({1, 1}));
  EXPECT_THROW(QpSolver{asym}, std::invalid_argument);

  QpProblem indefinite = make_problem((Eigen::MatrixXd(2, 2) << 1, 2, 2, 1).finished(), vec({0, 0}),
                                      Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), vec({-1, -1}), vec({1, 1}));
  EXPECT_THROW(QpSolver{indefinite}, std::invalid_argument);

  QpProblem crossed = make_problem(Eigen::MatrixXd::Identity(1, 1), vec({0}), Eigen::MatrixXd(0, 1),
                                   Eigen::VectorXd(0), vec({1}), vec({-1}));
  EXPECT_THROW(QpSolver{crossed}, std::invalid_argument);
}

TEST(QpSolver, AcceptsPsdMatrixThatIsNotDiagonallyDominant) {
  // Rank-one PSD matrix [1 2; 2 4].
  QpProblem qp = make_problem((Eigen::MatrixXd(2, 2) << 1, 2, 2, 4).finished(), vec({1, 0}),
                              Eigen::MatrixXd(0, 2), Eigen::VectorXd(0), vec({-1, -1}), vec({1, 1}));
  const QpSolution sol = solve(qp);
  expect_certified(qp, sol);
}

TEST(QpSolverProperties, ObjectiveScalingLeavesMinimizerUnchanged) {
  Rng rng(1234);
  for (int trial = 0; trial < 10; ++trial) {
    const QpProblem qp = random_box_qp(rng, 5, 1);
    QpProblem scaled = qp;
    const double c = rng.uniform(0.1, 50.0);
    scaled.quadratic *= c;
    scaled.linear *= c;
    const QpSolution a = solve(qp);
    // Multipliers scale with c, so the dual tolerance scales too.
    QpSettings settings;
    settings.eps_dual *= c;
    const QpSolution b = solve(scaled, settings);
    ASSERT_EQ(a.status, QpStatus::Optimal);
    ASSERT_EQ(b.status, QpStatus::Optimal);
    EXPECT_LE((a.z_star - b.z_star).lpNorm<Eigen::Infinity>(), 10 * 1e-6) << "c = " << c;
  }
}

TEST(QpSolverProperties, OptimumBeatsRandomFeasiblePoints) {
  Rng rng(555);
  for (int trial = 0; trial < 10; ++trial) {
    const QpProblem qp = random_box_qp(rng, 6, 2);
    const QpSolution sol = solve(qp);
    ASSERT_EQ(sol.status, QpStatus::Optimal);

    const Eigen::MatrixXd A(qp.eq_matrix);
    const Eigen::MatrixXd pinv = A.transpose() * (A * A.transpose()).inverse();
    int accepted = 0;
    for (int k = 0; k < 200; ++k) {
      Eigen::VectorXd z(qp.num_vars);
      for (int i = 0; i < qp.num_vars; ++i) z[i] = rng.uniform(qp.bound_lower[i], qp.bound_upper[i]);
      z -= pinv * (A * z - qp.eq_rhs);  // onto the equality set
      z = z.cwiseMax(qp.bound_lower).cwiseMin(qp.bound_upper);
      if (!validate_solution(qp, z).feasible(1e-9)) continue;
      ++accepted;
      EXPECT_LE(sol.objective_value, qp.objective(z) + 1e-6);
    }
    EXPECT_GT(accepted, 0);
  }
}

TEST(QpSolverProperties, WarmStartFromOptimumIsNoSlowerThanColdStart) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const QpProblem qp = random_box_qp(rng, 7, 2);
    const QpSolution cold = solve(qp);
    ASSERT_EQ(cold.status, QpStatus::Optimal);
    const WarmStart warm{cold.z_star, cold.eq_duals, cold.bound_duals};
    const QpSolution hot = solve(qp, {}, &warm);
    ASSERT_EQ(hot.status, QpStatus::Optimal);
    EXPECT_LE(hot.iterations, cold.iterations);
  }
}

TEST(QpSolverProperties, Deterministic) {
  Rng rng(8);
  const QpProblem qp = random_box_qp(rng, 8, 3);
  const QpSolution a = solve(qp);
  const QpSolution b = solve(qp);
  ASSERT_EQ(a.z_star.size(), b.z_star.size());
  for (Eigen::Index i = 0; i < a.z_star.size(); ++i) EXPECT_EQ(a.z_star[i], b.z_star[i]);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.objective_value, b.objective_value);
}

TEST(QpSolver, UpdatedVectorsReuseFactorization) {
  Rng rng(404);
  const QpProblem qp = random_box_qp(rng, 6, 2);
  QpSolver solver(qp);
  ASSERT_EQ(solver.solve().status, QpStatus::Optimal);

  QpProblem moved = qp;
  moved.linear = -qp.linear;
  moved.eq_rhs = 0.5 * qp.eq_rhs;
  solver.update_linear(moved.linear);
  solver.update_eq_rhs(moved.eq_rhs);
  const QpSolution sol = solver.solve();
  expect_certified(moved, sol);
  const auto oracle = active_set_oracle(moved);
  ASSERT_TRUE(oracle.has_value());
  EXPECT_LE((sol.z_star - oracle->z).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(QpDump, TripletFormatRoundTrips) {
  Rng rng(3);
  QpProblem qp = random_box_qp(rng, 4, 1);
  qp.bound_upper[2] = kInf;
  std::stringstream buf;
  write_qp_dump(buf, qp);
  const QpProblem back = read_qp_dump(buf);
  EXPECT_EQ(back.num_vars, qp.num_vars);
  EXPECT_EQ(Eigen::MatrixXd(back.quadratic), Eigen::MatrixXd(qp.quadratic));
  EXPECT_EQ(Eigen::MatrixXd(back.eq_matrix), Eigen::MatrixXd(qp.eq_matrix));
  EXPECT_EQ(back.linear, qp.linear);
  EXPECT_EQ(back.eq_rhs, qp.eq_rhs);
  EXPECT_EQ(back.bound_lower, qp.bound_lower);
  EXPECT_EQ(back.bound_upper, qp.bound_upper);
}

}  // namespace
}  // namespace dermpc
