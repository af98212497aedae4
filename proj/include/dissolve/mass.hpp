// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dissolve/error.hpp"
#include "dissolve/fmm.hpp"
#include "dissolve/grid.hpp"
#include "dissolve/volume.hpp"

namespace dissolve {

/// Remaining mass at time t plus its partial derivatives. `d_mass_dF` is
/// taken with respect to the integrand value F_p = s_p*T_p + t at each node,
/// so the derivative with respect to T is s ⊙ d_mass_dF.
struct MassSample {
  double t = 0.0;
  double mass = 0.0;
  std::vector<double> d_mass_dF;
  std::vector<double> d_mass_dc;
};

namespace detail {

// Keeps the tetrahedron formulas finite for unreachable (infinite) nodes.
inline constexpr double kIntegrandCap = 1e150;

inline double integrand(const FmmSolution& fmm, const SignField& sign, std::size_t p, double t) {
  const double f = static_cast<double>(sign.s[p]) * fmm.T[p] + t;
  return std::clamp(f, -kIntegrandCap, kIntegrandCap);
}

inline std::array<std::ptrdiff_t, 8> corner_offsets(const GridSpec& grid) {
  std::array<std::ptrdiff_t, 8> off{};
  for (int c = 0; c < 8; ++c) {
    off[c] = (c & 1) * grid.stride(0) + ((c >> 1) & 1) * grid.stride(1) + ((c >> 2) & 1) * grid.stride(2);
  }
  return off;
}

/// Calls visit(corner node indices) for every cell of the grid.
template <class Visit>
void for_each_cell(const GridSpec& grid, Visit&& visit) {
  const auto off = corner_offsets(grid);
  std::array<std::size_t, 8> corners{};
  for (std::ptrdiff_t i = 0; i + 1 < grid.dims[0]; ++i) {
    for (std::ptrdiff_t j = 0; j + 1 < grid.dims[1]; ++j) {
      for (std::ptrdiff_t k = 0; k + 1 < grid.dims[2]; ++k) {
        const std::size_t base = grid.linear({i, j, k});
        for (int c = 0; c < 8; ++c) corners[c] = base + static_cast<std::size_t>(off[c]);
        visit(corners);
      }
    }
  }
}

inline void check_sizes(const GridSpec& grid, const FmmSolution& fmm, const SignField& sign,
                        std::span<const double> concentration) {
  const std::size_t n = grid.node_count();
  if (fmm.T.size() != n || sign.s.size() != n || concentration.size() != n) {
    throw Error(ErrorCode::dimension_mismatch, "mass evaluation: field sizes do not match the grid");
  }
}

}  // namespace detail

/// Sum over cells of mean(c) * Vol(s ⊙ T + t < 0). Symmetric octants are
/// not multiplied up; normalized profiles are unaffected.
inline double remaining_mass(double t, const FmmSolution& fmm, const SignField& sign,
                             std::span<const double> concentration, const GridSpec& grid) {
  detail::check_sizes(grid, fmm, sign, concentration);
  double mass = 0.0;
  CellValues F{}, c{};
  detail::for_each_cell(grid, [&](const std::array<std::size_t, 8>& corners) {
    for (int v = 0; v < 8; ++v) F[v] = detail::integrand(fmm, sign, corners[v], t);
    const double vol = cell_volume_fraction(F, grid.spacing);
    if (vol == 0.0) return;
    for (int v = 0; v < 8; ++v) c[v] = concentration[corners[v]];
    mass += cell_mean_concentration(c) * vol;
  });
  return mass;
}

/// Default perturbation for the integrand derivative: a thousandth of the
/// time the fastest front needs to cross the smallest cell edge.
inline double default_fd_step(const GridSpec& grid, double max_velocity) {
  return 1e-3 * grid.min_spacing() / clamp_velocity(max_velocity);
}

/// Adds weight * dR/dF and weight * dR/dc into the output buffers and
/// returns R(t). Cells whose corners all share one sign contribute nothing
/// to dR/dF; mixed cells use central differences of step `fd_step`.
inline double accumulate_mass_gradients(double t, const FmmSolution& fmm, const SignField& sign,
                                        std::span<const double> concentration, const GridSpec& grid, double fd_step,
                                        double weight, std::span<double> d_mass_dF, std::span<double> d_mass_dc) {
  detail::check_sizes(grid, fmm, sign, concentration);
  double mass = 0.0;
  const double full = grid.cell_volume();
  CellValues F{}, c{};
  detail::for_each_cell(grid, [&](const std::array<std::size_t, 8>& corners) {
    int negative = 0;
    for (int v = 0; v < 8; ++v) {
      F[v] = detail::integrand(fmm, sign, corners[v], t);
      negative += F[v] < 0.0;
    }
    if (negative == 0) return;
    for (int v = 0; v < 8; ++v) c[v] = concentration[corners[v]];
    const double mean_c = cell_mean_concentration(c);
    if (negative == 8) {
      mass += mean_c * full;
      for (int v = 0; v < 8; ++v) d_mass_dc[corners[v]] += weight * full / 8.0;
      return;
    }
    const double vol = cell_volume_fraction(F, grid.spacing);
    mass += mean_c * vol;
    for (int v = 0; v < 8; ++v) {
      d_mass_dc[corners[v]] += weight * vol / 8.0;
      const double saved = F[v];
      F[v] = saved + fd_step;
      const double up = cell_volume_fraction(F, grid.spacing);
      F[v] = saved - fd_step;
      const double down = cell_volume_fraction(F, grid.spacing);
      F[v] = saved;
      d_mass_dF[corners[v]] += weight * mean_c * (up - down) / (2.0 * fd_step);
    }
  });
  return mass;
}

inline MassSample mass_gradients(double t, const FmmSolution& fmm, const SignField& sign,
                                 std::span<const double> concentration, const GridSpec& grid, double fd_step) {
  MassSample sample;
  sample.t = t;
  sample.d_mass_dF.assign(grid.node_count(), 0.0);
  sample.d_mass_dc.assign(grid.node_count(), 0.0);
  sample.mass = accumulate_mass_gradients(t, fmm, sign, concentration, grid, fd_step, 1.0, sample.d_mass_dF,
                                          sample.d_mass_dc);
  return sample;
}

}  // namespace dissolve
