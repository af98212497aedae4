// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dissolve/mass.hpp"
#include "dissolve/volume.hpp"
#include "support.hpp"

namespace dissolve {
namespace {

CellValues affine_corners(const Vec3& n, double c, const Vec3& h) {
  CellValues F{};
  for (int v = 0; v < 8; ++v) {
    F[v] = n[0] * (v & 1) * h[0] + n[1] * (v >> 1 & 1) * h[1] + n[2] * (v >> 2 & 1) * h[2] - c;
  }
  return F;
}

TEST(TetFraction, SignPatterns) {
  EXPECT_EQ(tet_negative_fraction({1, 2, 3, 4}), 0.0);
  EXPECT_EQ(tet_negative_fraction({-1, -2, -3, -4}), 1.0);
  EXPECT_DOUBLE_EQ(tet_negative_fraction({-1, 1, 1, 1}), 0.125);
  EXPECT_DOUBLE_EQ(tet_negative_fraction({1, -1, -1, -1}), 1.0 - 0.125);
  EXPECT_NEAR(tet_negative_fraction({-1, -1, 1, 1}), 0.5, 1e-15);
  EXPECT_EQ(tet_negative_fraction({0, 0, 0, 0}), 0.0);
}

TEST(CellVolume, UniformSigns) {
  const Vec3 h{0.5, 1.0, 2.0};
  CellValues neg{}, pos{};
  neg.fill(-1.0);
  pos.fill(1.0);
  EXPECT_EQ(cell_volume_fraction(neg, h), 1.0);
  EXPECT_EQ(cell_volume_fraction(pos, h), 0.0);
}

TEST(CellVolume, AffineFieldsMatchHalfSpaceClipping) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dir(-1.0, 1.0);
  for (const Vec3& h : {Vec3{1, 1, 1}, Vec3{0.3, 1.1, 0.7}, Vec3{2.35 / 127, 2.35 / 127, 6.25 / 127}}) {
    std::uniform_real_distribution<double> offset(-0.2, 1.2);
    for (int trial = 0; trial < 300; ++trial) {
      Vec3 n{dir(rng), dir(rng), dir(rng)};
      for (double& x : n) {
        if (std::abs(x) < 1e-3) x = 1e-3;
      }
      // Plane through a random point of (or near) the cell.
      const Vec3 p{offset(rng) * h[0], offset(rng) * h[1], offset(rng) * h[2]};
      const double c = n[0] * p[0] + n[1] * p[1] + n[2] * p[2];
      const double exact = testing::box_halfspace_volume(n, c, h);
      const double got = cell_volume_fraction(affine_corners(n, c, h), h);
      EXPECT_NEAR(got, exact, 1e-9 * h[0] * h[1] * h[2]);
    }
  }
}

TEST(CellVolume, NonlinearFieldsMatchSampling) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> val(-1.0, 1.0), unit(0.0, 1.0);
  const Vec3 h{0.4, 0.9, 1.3};
  const int samples = 40000;
  int checked = 0;
  while (checked < 20) {
    CellValues F{};
    for (double& f : F) f = val(rng);
    const double got = cell_volume_fraction(F, h) / (h[0] * h[1] * h[2]);
    if (got == 0.0 || got == 1.0) continue;
    int hits = 0;
    for (int s = 0; s < samples; ++s) hits += testing::kuhn_interpolant(F, {unit(rng), unit(rng), unit(rng)}) < 0.0;
    const double p = static_cast<double>(hits) / samples;
    const double se = std::sqrt(std::max(p * (1 - p), 1e-12) / samples);
    EXPECT_LE(std::abs(got - p), 4.0 * se) << "trial " << checked;
    ++checked;
  }
}

TEST(CellVolume, ConcentrationMean) {
  EXPECT_DOUBLE_EQ(cell_mean_concentration({1, 2, 3, 4, 5, 6, 7, 8}), 4.5);
}

// Fixed (not marched) time fields let mass be checked against geometry.
FmmSolution with_times(std::vector<double> T) {
  FmmSolution s;
  s.T = std::move(T);
  return s;
}

TEST(RemainingMass, AffineTimesOverBoxDomain) {
  const GridSpec g = build_grid({5, 6, 7}, {0.5, 0.4, 0.3});
  SignField sign;
  sign.s.assign(g.node_count(), -1);
  sign.phi.assign(g.node_count(), -1.0);
  const Vec3 n{0.8, -0.5, 0.3};
  std::vector<double> T(g.node_count());
  for (std::size_t p = 0; p < T.size(); ++p) {
    const Vec3 x = g.coordinate(p);
    T[p] = n[0] * x[0] + n[1] * x[1] + n[2] * x[2] + 2.0;
  }
  const FmmSolution fmm = with_times(T);
  const std::vector<double> c(g.node_count(), 0.7);
  const Vec3 box{2.0, 2.0, 1.8};
  for (double t : {1.0, 1.7, 2.3, 3.0}) {
    // Remaining where T > t, i.e. -n.x < 2 - t.
    const double exact = testing::box_halfspace_volume({-n[0], -n[1], -n[2]}, 2.0 - t, box);
    EXPECT_NEAR(remaining_mass(t, fmm, sign, c, g), 0.7 * exact, 1e-12);
  }
}

TEST(RemainingMass, DecreasesWithTime) {
  const auto prob = testing::small_octant(12);
  const std::vector<double> v(prob.grid.node_count(), 0.01);
  const FmmSolution fmm = solve_fmm(prob.grid, seed_boundary(prob.grid, prob.sign, v), v, prob.sign);
  const std::vector<double> c(prob.grid.node_count(), 1e-3);
  double last = remaining_mass(0.0, fmm, prob.sign, c, prob.grid);
  EXPECT_NEAR(last, 1e-3 * prob.capsule.volume() / 8.0, 2e-2 * last);
  for (double t = 5.0; t <= 100.0; t += 5.0) {
    const double m = remaining_mass(t, fmm, prob.sign, c, prob.grid);
    EXPECT_LE(m, last);
    last = m;
  }
  EXPECT_EQ(last, 0.0);
}

TEST(MassGradients, ConcentrationDerivativeIsExact) {
  const auto prob = testing::small_octant(9);
  const auto v = testing::uniform_vector(prob.grid.node_count(), 0.003, 0.03, 8);
  const FmmSolution fmm = solve_fmm(prob.grid, seed_boundary(prob.grid, prob.sign, v), v, prob.sign);
  auto c = testing::uniform_vector(prob.grid.node_count(), 0.5e-3, 1.5e-3, 9);
  const double t = 15.0;
  const MassSample ms = mass_gradients(t, fmm, prob.sign, c, prob.grid, 1e-4);
  EXPECT_DOUBLE_EQ(ms.mass, remaining_mass(t, fmm, prob.sign, c, prob.grid));
  const auto fd = testing::central_differences(
      [&](std::span<const double> x) { return remaining_mass(t, fmm, prob.sign, x, prob.grid); }, c, 1e-6);
  for (std::size_t p = 0; p < c.size(); ++p) EXPECT_NEAR(ms.d_mass_dc[p], fd[p], 1e-12);
}

TEST(MassGradients, TimeDerivativeMatchesPerturbation) {
  const auto prob = testing::small_octant(9);
  const auto v = testing::uniform_vector(prob.grid.node_count(), 0.003, 0.03, 10);
  const FmmSolution fmm = solve_fmm(prob.grid, seed_boundary(prob.grid, prob.sign, v), v, prob.sign);
  const std::vector<double> c(prob.grid.node_count(), 1e-3);
  const double t = 12.0;
  const MassSample ms = mass_gradients(t, fmm, prob.sign, c, prob.grid, default_fd_step(prob.grid, 0.03));
  auto mass_of_T = [&](std::span<const double> T) {
    FmmSolution f = fmm;
    f.T.assign(T.begin(), T.end());
    return remaining_mass(t, f, prob.sign, c, prob.grid);
  };
  const auto fd = testing::central_differences(mass_of_T, fmm.T, 2e-3);
  double scale = 0.0;
  for (double x : fd) scale = std::max(scale, std::abs(x));
  ASSERT_GT(scale, 0.0);
  std::size_t active = 0;
  for (std::size_t p = 0; p < fd.size(); ++p) {
    const double dT = static_cast<double>(prob.sign.s[p]) * ms.d_mass_dF[p];
    EXPECT_NEAR(dT, fd[p], 1e-3 * scale) << p;
    active += ms.d_mass_dF[p] != 0.0;
  }
  EXPECT_GT(active, 0u);
}

TEST(MassGradients, CellsAwayFromTheFrontContributeNothing) {
  const auto prob = testing::small_octant(9);
  const std::vector<double> v(prob.grid.node_count(), 0.01);
  const FmmSolution fmm = solve_fmm(prob.grid, seed_boundary(prob.grid, prob.sign, v), v, prob.sign);
  const std::vector<double> c(prob.grid.node_count(), 1e-3);
  const double t = 30.0;
  const MassSample ms = mass_gradients(t, fmm, prob.sign, c, prob.grid, 1e-3);
  const double front_band = 2.0 * prob.grid.max_spacing() / 0.01;
  for (std::size_t p = 0; p < ms.d_mass_dF.size(); ++p) {
    if (std::abs(fmm.T[p] - t) > front_band && prob.sign.s[p] < 0) {
      EXPECT_EQ(ms.d_mass_dF[p], 0.0);
    }
  }
}

}  // namespace
}  // namespace dissolve
