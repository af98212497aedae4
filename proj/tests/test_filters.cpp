// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dissolve/filters.hpp"
#include "support.hpp"

namespace dissolve {
namespace {

SignField all_interior(const GridSpec& g) {
  SignField s;
  s.s.assign(g.node_count(), -1);
  s.phi.assign(g.node_count(), -1.0);
  return s;
}

TEST(DensityFilter, ZeroRadiusIsIdentity) {
  const auto prob = testing::small_octant(8, 0.0);
  const auto rho = testing::uniform_vector(prob.grid.node_count(), 0, 1, 1);
  const auto out = apply_density_filter(prob.filter, rho);
  for (std::size_t p = 0; p < rho.size(); ++p) EXPECT_EQ(out[p], rho[p]);
}

TEST(DensityFilter, RowsSumToOne) {
  const auto prob = testing::small_octant(10, 2.3);
  for (std::size_t p = 0; p < prob.grid.node_count(); ++p) {
    double s = 0.0;
    for (const auto& [q, w] : prob.filter.row(p)) {
      EXPECT_GE(w, 0.0);
      s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(DensityFilter, TransposeIsAdjoint) {
  const auto prob = testing::small_octant(10, 2.3);
  const std::size_t n = prob.grid.node_count();
  const auto rho = testing::uniform_vector(n, 0, 1, 2), y = testing::uniform_vector(n, -1, 1, 3);
  std::vector<double> Dr(n), Dty(n);
  prob.filter.apply(rho, Dr);
  prob.filter.apply_transpose(y, Dty);
  EXPECT_NEAR(testing::dot(Dr, y), testing::dot(rho, Dty), 1e-12 * std::abs(testing::dot(Dr, y)));
}

TEST(DensityFilter, SpikeSpreadsAsLinearDecayStencil) {
  const double h = 0.1;
  const GridSpec g = build_grid({5, 5, 5}, {h, h, h});
  const DensityFilter f(g, 2 * h, all_interior(g));
  std::vector<double> spike(g.node_count(), 0.0);
  const std::size_t c = g.linear({2, 2, 2});
  spike[c] = 1.0;
  const auto out = apply_density_filter(f, spike);
  auto kernel = [&](std::size_t p, std::size_t q) {
    const Vec3 a = g.coordinate(p), b = g.coordinate(q);
    return std::max(0.0, 2 * h - std::hypot(a[0] - b[0], a[1] - b[1], a[2] - b[2]));
  };
  for (std::size_t p = 0; p < g.node_count(); ++p) {
    double total = 0.0;
    for (std::size_t q = 0; q < g.node_count(); ++q) total += kernel(p, q);
    EXPECT_NEAR(out[p], kernel(p, c) / total, 1e-14) << p;
  }
}

TEST(DensityFilter, SupportIsStrictlyInsideRadius) {
  const auto prob = testing::small_octant(10, 2.0);
  const double d = prob.filter.d_max();
  for (const auto& tap : prob.filter.stencil()) {
    double r2 = 0.0;
    for (int a = 0; a < 3; ++a) r2 += std::pow(tap.offset[a] * prob.grid.spacing[a], 2);
    EXPECT_LT(std::sqrt(r2), d);
  }
}

TEST(DensityFilter, ExteriorNeighborsAreExcluded) {
  const auto prob = testing::small_octant(10, 2.3);
  for (std::size_t p = 0; p < prob.grid.node_count(); ++p) {
    for (const auto& [q, w] : prob.filter.row(p)) {
      if (q != p) {
        EXPECT_LE(prob.sign.s[q], 0);
      }
    }
  }
}

TEST(DensityFilter, OctantMatchesMirroredGrid) {
  const std::ptrdiff_t n = 9;
  const double h = 1.0 / (n - 1);
  const Vec3 spacing{h, h, 1.3 * h};
  const CapsuleSpec capsule{0.9, 2.4};
  const GridSpec oct = build_grid({n, n, n}, spacing, {0, 0, 0}, {true, true, true});
  const std::ptrdiff_t m = 2 * n - 1;
  const GridSpec full = build_grid({m, m, m}, spacing, {-(n - 1) * h, -(n - 1) * h, -(n - 1) * 1.3 * h});
  auto field = [](const Vec3& x) { return 0.5 + 0.4 * std::sin(5 * std::abs(x[0]) + 3 * std::abs(x[1]) - 2 * std::abs(x[2])); };
  auto run = [&](const GridSpec& g) {
    const DensityFilter f(g, 2.4 * h, build_sign_field(g, capsule));
    std::vector<double> rho(g.node_count());
    for (std::size_t p = 0; p < rho.size(); ++p) rho[p] = field(g.coordinate(p));
    return apply_density_filter(f, rho);
  };
  const auto a = run(oct), b = run(full);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      for (std::ptrdiff_t k = 0; k < n; ++k) {
        EXPECT_NEAR(a[oct.linear({i, j, k})], b[full.linear({i + n - 1, j + n - 1, k + n - 1})], 1e-14) << i << " " << j << " " << k;
      }
    }
  }
}

TEST(Heaviside, EndpointsAreExact) {
  for (double beta : {1.0, 5.0, 35.0, 300.0}) {
    const HeavisideProjection h{beta};
    EXPECT_EQ(h(0.0), 0.0) << beta;
    EXPECT_EQ(h(1.0), 1.0) << beta;
    EXPECT_EQ(h(0.5), 0.5) << beta;
  }
}

TEST(Heaviside, SteepLimitApproachesStep) {
  const HeavisideProjection h{300.0};
  for (double x = 0.0; x <= 1.0; x += 1.0 / 512) {
    if (std::abs(x - 0.5) <= 0.05) continue;
    EXPECT_NEAR(h(x), x > 0.5 ? 1.0 : 0.0, 0.01) << x;
  }
}

TEST(Heaviside, DerivativeMatchesDifferences) {
  for (double beta : {1.0, 10.0, 50.0}) {
    const HeavisideProjection h{beta};
    for (double x = 0.02; x < 1.0; x += 0.07) {
      const double e = 1e-6;
      EXPECT_NEAR(h.derivative(x), (h(x + e) - h(x - e)) / (2 * e), 1e-6 * std::max(1.0, h.derivative(x)));
    }
  }
}

TEST(Heaviside, RejectsNonPositiveBeta) {
  const std::vector<double> x{0.5};
  EXPECT_THROW(apply_heaviside(HeavisideProjection{0.0}, x), Error);
}

TEST(Materials, LinearInterpolation) {
  const MaterialPair m{0.003, 0.03, 1e-3, 2e-3};
  const std::vector<double> r{0.0, 1.0, 0.5};
  const MaterialFields f = interpolate_materials(r, m);
  EXPECT_EQ(f.velocity[0], 0.003);
  EXPECT_EQ(f.velocity[1], 0.03);
  EXPECT_DOUBLE_EQ(f.velocity[2], 0.0165);
  EXPECT_DOUBLE_EQ(f.concentration[2], 1.5e-3);
}

TEST(ChainBack, MatchesDifferencesOfProjectedField) {
  const auto prob = testing::small_octant(7, 1.8);
  const std::size_t n = prob.grid.node_count();
  const auto weights = testing::uniform_vector(n, -1, 1, 4);
  const HeavisideProjection proj{8.0};
  auto objective = [&](std::span<const double> rho) {
    const auto bar = apply_heaviside(proj, apply_density_filter(prob.filter, rho));
    return testing::dot(weights, bar);
  };
  const auto rho = testing::uniform_vector(n, 0.2, 0.8, 5);
  const auto slope = heaviside_derivative(proj, apply_density_filter(prob.filter, rho));
  const auto g = chain_back(prob.filter, slope, weights);
  const auto fd = testing::central_differences(objective, rho, 1e-6);
  EXPECT_LT(testing::relative_l2(g, fd), 1e-7);
}

}  // namespace
}  // namespace dissolve
