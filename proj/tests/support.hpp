// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

// Small problems and independent reference computations shared by tests.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "dissolve/filters.hpp"
#include "dissolve/grid.hpp"
#include "dissolve/objective.hpp"
#include "dissolve/volume.hpp"

namespace dissolve::testing {

/// Capsule scaled into a box of half extents (1, 1, 1.3) on an n^3 octant.
struct SmallProblem {
  GridSpec grid;
  CapsuleSpec capsule;
  SignField sign;
  DensityFilter filter;
};

inline SmallProblem small_octant(std::ptrdiff_t n, double filter_cells = 1.6) {
  SmallProblem p;
  const double h = 1.0 / static_cast<double>(n - 1);
  p.grid = build_grid({n, n, n}, {h, h, 1.3 * h}, {0, 0, 0}, {true, true, true});
  p.capsule = CapsuleSpec{0.9, 2.4};
  p.sign = build_sign_field(p.grid, p.capsule);
  p.filter = DensityFilter(p.grid, filter_cells * h, p.sign);
  return p;
}

/// Linear release from 1 to 0 over [0, end] with `points` samples.
inline TargetProfile linear_target(double end, int points) {
  TargetProfile t;
  t.dt = end / (points - 1);
  for (int i = 0; i < points; ++i) {
    t.times.push_back(i * t.dt);
    t.values.push_back(1.0 - static_cast<double>(i) / (points - 1));
  }
  return t;
}

inline std::vector<double> uniform_vector(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(s);
}

inline double cosine(std::span<const double> a, std::span<const double> b) {
  return dot(a, b) / std::sqrt(dot(a, a) * dot(b, b));
}

inline double relative_l2(std::span<const double> approx, std::span<const double> exact) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) {
    num += (approx[i] - exact[i]) * (approx[i] - exact[i]);
    den += exact[i] * exact[i];
  }
  return std::sqrt(num / den);
}

/// Central differences of f over every component (or the listed ones).
inline std::vector<double> central_differences(const std::function<double(std::span<const double>)>& f,
                                               std::vector<double> x, double step,
                                               const std::vector<std::size_t>& which = {}) {
  std::vector<double> g(x.size(), 0.0);
  auto one = [&](std::size_t i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f(x);
    x[i] = saved - step;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * step);
  };
  if (which.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) one(i);
  } else {
    for (std::size_t i : which) one(i);
  }
  return g;
}

/// Volume of {x in [0,h]^3 : n.x < c} by inclusion-exclusion over the box
/// corners, after flipping axes so every normal component is positive.
inline double box_halfspace_volume(Vec3 n, double c, const Vec3& h) {
  for (int a = 0; a < 3; ++a) {
    if (n[a] < 0.0) {
      c -= n[a] * h[a];
      n[a] = -n[a];
    }
  }
  long double sum = 0.0L;
  for (int e = 0; e < 8; ++e) {
    long double r = c;
    int ones = 0;
    for (int a = 0; a < 3; ++a) {
      if (e >> a & 1) {
        r -= static_cast<long double>(n[a]) * h[a];
        ++ones;
      }
    }
    if (r > 0.0L) sum += (ones % 2 ? -1.0L : 1.0L) * r * r * r;
  }
  return static_cast<double>(sum / (6.0L * n[0] * n[1] * n[2]));
}

// The piecewise-linear interpolant on the six diagonal tetrahedra,
// evaluated by walking from corner 0 along the axes in order of decreasing
// local coordinate.
inline double kuhn_interpolant(const CellValues& F, const Vec3& u) {
  std::array<int, 3> axes{0, 1, 2};
  std::sort(axes.begin(), axes.end(), [&](int a, int b) { return u[a] > u[b]; });
  double value = F[0];
  int corner = 0;
  for (int m = 0; m < 3; ++m) {
    const int next = corner | (1 << axes[m]);
    value += u[axes[m]] * (F[next] - F[corner]);
    corner = next;
  }
  return value;
}

}  // namespace dissolve::testing
