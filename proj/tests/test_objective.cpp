// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dissolve/objective.hpp"
#include "support.hpp"

namespace dissolve {
namespace {

DesignProblem make(const testing::SmallProblem& sp, const TargetProfile& target, const MaterialPair& m) {
  return DesignProblem(sp.grid, sp.sign, sp.filter, target, m);
}

TEST(Misfit, ZeroWhenProfileFollowsTarget) {
  const TargetProfile t = testing::linear_target(100.0, 6);
  ReleaseProfile p;
  p.initial_mass = 2.5;
  for (double v : t.values) p.mass.push_back(2.5 * v);
  EXPECT_EQ(evaluate_misfit(t, p), 0.0);
  p.mass[2] += 0.25;
  EXPECT_DOUBLE_EQ(evaluate_misfit(t, p), 0.01 * t.dt);
}

TEST(Misfit, WeightsMatchDifferences) {
  const TargetProfile t = testing::linear_target(100.0, 6);
  const std::vector<double> mass{2.0, 1.7, 1.1, 0.8, 0.2, 0.05};
  const double r0 = 2.1;
  auto J = [&](std::span<const double> x) {
    ReleaseProfile p;
    p.mass.assign(x.begin(), x.end() - 1);
    p.initial_mass = x.back();
    return evaluate_misfit(t, p);
  };
  std::vector<double> x = mass;
  x.push_back(r0);
  const auto fd = testing::central_differences(J, x, 1e-6);
  const MisfitWeights w = misfit_weights(t, mass, r0);
  for (std::size_t i = 0; i < mass.size(); ++i) EXPECT_NEAR(w.per_time[i], fd[i], 1e-7);
  EXPECT_NEAR(w.initial, fd.back(), 1e-7);
}

TEST(Misfit, EmptyDesignIsAnError) {
  const TargetProfile t = testing::linear_target(100.0, 3);
  ReleaseProfile p;
  p.mass = {0, 0, 0};
  try {
    evaluate_misfit(t, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_design);
  }
}

// Solves A^T q = b by Gaussian elimination with partial pivoting.
std::vector<double> dense_transpose_solve(std::vector<std::vector<double>> A, std::vector<double> b) {
  const std::size_t n = b.size();
  std::vector<std::vector<double>> M(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) M[i][j] = A[j][i];
  }
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(M[r][c]) > std::abs(M[piv][c])) piv = r;
    }
    std::swap(M[c], M[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = M[r][c] / M[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) M[r][k] -= f * M[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= M[i][k] * x[k];
    x[i] = s / M[i][i];
  }
  return x;
}

TEST(Adjoint, MatchesDenseSolve) {
  const auto sp = testing::small_octant(7);
  const std::size_t n = sp.grid.node_count();
  const auto v = testing::uniform_vector(n, 0.003, 0.03, 21);
  const FmmSolution fmm = solve_fmm(sp.grid, seed_boundary(sp.grid, sp.sign, v), v, sp.sign);
  std::vector<std::vector<double>> A(n, std::vector<double>(n, 0.0));
  for (std::size_t p = 0; p < n; ++p) {
    const JacobianRow row = jacobian_entries(sp.grid, fmm, v, sp.sign, p);
    A[p][p] = row.diagonal;
    for (int a = 0; a < 3; ++a) {
      if (row.upwind[a] != kNoNode) A[p][row.upwind[a]] += row.off_diagonal[a];
    }
  }
  const auto rhs = testing::uniform_vector(n, -1, 1, 22);
  const auto q = solve_adjoint(sp.grid, fmm, v, sp.sign, rhs).q;
  const auto oracle = dense_transpose_solve(A, rhs);
  EXPECT_LT(testing::relative_l2(q, oracle), 1e-10);
}

TEST(Objective, GradientMatchesDifferences) {
  const auto sp = testing::small_octant(10);
  const DesignProblem problem = make(sp, testing::linear_target(250.0, 12), {0.003, 0.03, 1e-3, 1e-3});
  const auto rho = testing::uniform_vector(problem.size(), 0.2, 0.8, 7);
  const double beta = 5.0;
  const ObjectiveReport rep = problem.evaluate(rho, beta);
  const auto fd = testing::central_differences(
      [&](std::span<const double> x) { return problem.evaluate(x, beta, false).J; }, rho, 1e-5);
  EXPECT_GT(testing::cosine(rep.gradient, fd), 0.999);
  EXPECT_LT(testing::relative_l2(rep.gradient, fd), 2e-2);
}

TEST(Objective, ConcentrationContrastEntersTheGradient) {
  const auto sp = testing::small_octant(8);
  const DesignProblem problem = make(sp, testing::linear_target(200.0, 9), {0.01, 0.01, 0.5e-3, 1.5e-3});
  const auto rho = testing::uniform_vector(problem.size(), 0.2, 0.8, 8);
  const ObjectiveReport rep = problem.evaluate(rho, 3.0);
  const auto fd = testing::central_differences(
      [&](std::span<const double> x) { return problem.evaluate(x, 3.0, false).J; }, rho, 1e-5);
  EXPECT_GT(testing::cosine(rep.gradient, fd), 0.999);
}

// The slowest node is the capsule axis, reached at inradius/v in the limit;
// the first-order march approaches it from below.
TEST(Objective, CompletionTimeApproachesInradiusOverSpeed) {
  std::vector<double> errors;
  for (std::ptrdiff_t n : {12, 24, 48}) {
    const auto sp = testing::small_octant(n);
    const DesignProblem problem = make(sp, testing::linear_target(400.0, 5), {0.003, 0.03, 1e-3, 1e-3});
    const std::vector<double> zero(problem.size(), 0.0);
    const ReleaseProfile p = problem.simulate(zero, 1.0, problem.materials(), problem.target().times);
    EXPECT_EQ(p.normalized.back(), 0.0);
    errors.push_back(std::abs(p.completion_time - sp.capsule.radius / 0.003));
  }
  EXPECT_LT(errors[2], 0.03 * 300.0);
  EXPECT_GT(errors[0] / errors[1], 1.4);
  EXPECT_GT(errors[1] / errors[2], 1.4);
}

TEST(Objective, UniformDesignsRescaleTime) {
  const auto sp = testing::small_octant(12);
  const MaterialPair m{0.003, 0.03, 1e-3, 1e-3};
  const DesignProblem problem = make(sp, testing::linear_target(300.0, 7), m);
  const std::vector<double> zero(problem.size(), 0.0), one(problem.size(), 1.0);
  const std::vector<double> fast_times{0, 3, 9, 14, 21};
  std::vector<double> slow_times;
  for (double t : fast_times) slow_times.push_back(10.0 * t);
  const ReleaseProfile fast = problem.simulate(one, 1.0, m, fast_times);
  const ReleaseProfile slow = problem.simulate(zero, 1.0, m, slow_times);
  for (std::size_t i = 0; i < fast_times.size(); ++i) EXPECT_NEAR(fast.normalized[i], slow.normalized[i], 1e-9);
}

TEST(Objective, NoDrugIsAnError) {
  const auto sp = testing::small_octant(8);
  const DesignProblem problem = make(sp, testing::linear_target(100.0, 3), {0.003, 0.03, 0.0, 0.0});
  const std::vector<double> rho(problem.size(), 0.5);
  try {
    problem.evaluate(rho, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_design);
  }
}

TEST(Objective, WrongDesignLengthIsAnError) {
  const auto sp = testing::small_octant(6);
  const DesignProblem problem = make(sp, testing::linear_target(100.0, 3), {});
  const std::vector<double> rho(problem.size() - 1, 0.5);
  EXPECT_THROW(problem.evaluate(rho, 1.0), Error);
}

}  // namespace
}  // namespace dissolve
