// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "dissolve/grid.hpp"

namespace dissolve {

/// Cell corners are numbered c = dx + 2*dy + 4*dz.
using CellValues = std::array<double, 8>;

/// The six tetrahedra sharing the 0-7 diagonal. Every cell of the grid
/// uses the same split, so neighboring cells agree on shared faces.
inline constexpr std::array<std::array<int, 4>, 6> kCellTetrahedra{{
    {0, 1, 3, 7},
    {0, 1, 5, 7},
    {0, 2, 3, 7},
    {0, 2, 6, 7},
    {0, 4, 5, 7},
    {0, 4, 6, 7},
}};

namespace detail {

inline double det3(const Vec3& a, const Vec3& b, const Vec3& c) {
  return a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0]);
}

inline Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

}  // namespace detail

/// Fraction of a tetrahedron where the linear interpolant of the vertex
/// values is strictly negative.
inline double tet_negative_fraction(const std::array<double, 4>& f) {
  std::array<int, 4> neg{}, pos{};
  int nn = 0, np = 0;
  for (int i = 0; i < 4; ++i) {
    if (f[i] < 0.0) {
      neg[nn++] = i;
    } else {
      pos[np++] = i;
    }
  }
  switch (nn) {
    case 0:
      return 0.0;
    case 4:
      return 1.0;
    case 1: {
      const double a = f[neg[0]];
      double frac = 1.0;
      for (int j = 0; j < 3; ++j) frac *= a / (a - f[pos[j]]);
      return frac;
    }
    case 3: {
      const double c = f[pos[0]];
      double frac = 1.0;
      for (int j = 0; j < 3; ++j) frac *= c / (c - f[neg[j]]);
      return 1.0 - frac;
    }
    default: {
      // Negative vertices A, B; non-negative C, D in reference coordinates.
      const double a = f[neg[0]], b = f[neg[1]], c = f[pos[0]], d = f[pos[1]];
      const double s_ac = a / (a - c), s_ad = a / (a - d);
      const double s_bc = b / (b - c), s_bd = b / (b - d);
      const Vec3 A{0, 0, 0}, B{1, 0, 0};
      const Vec3 P{0, s_ac, 0}, Q{0, 0, s_ad};
      const Vec3 R{1 - s_bc, s_bc, 0}, S{1 - s_bd, 0, s_bd};
      using detail::det3;
      using detail::sub;
      const double v = std::abs(det3(sub(B, A), sub(R, A), sub(S, A))) + std::abs(det3(sub(P, A), sub(Q, A), sub(S, A))) +
                       std::abs(det3(sub(P, A), sub(S, A), sub(R, A)));
      return std::min(v, 1.0);
    }
  }
}

/// Volume (mm^3) of the part of a cell with edge lengths `cell` where the
/// piecewise-linear interpolant of the corner values is negative. Exact
/// whenever the values come from an affine function.
inline double cell_volume_fraction(const CellValues& F, const Vec3& cell) {
  const double full = cell[0] * cell[1] * cell[2];
  int negative = 0;
  for (double f : F) negative += f < 0.0;
  if (negative == 0) return 0.0;
  if (negative == 8) return full;
  double frac = 0.0;
  for (const auto& t : kCellTetrahedra) {
    frac += tet_negative_fraction({F[t[0]], F[t[1]], F[t[2]], F[t[3]]});
  }
  return full * frac / 6.0;
}

inline double cell_mean_concentration(const CellValues& c) {
  return std::accumulate(c.begin(), c.end(), 0.0) / 8.0;
}

}  // namespace dissolve
