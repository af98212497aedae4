// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "dissolve/error.hpp"
#include "dissolve/grid.hpp"

namespace dissolve {

/// Row-normalized linear-decay density filter, the matrix D with
/// D_pq ∝ max(0, d_max - |x_p - x_q|).
///
/// Every row shares the same kernel stencil on a uniform grid, so D is
/// stored as that stencil plus one normalization per row. Rows skip
/// exterior neighbors (except the node itself) and reach across symmetry
/// planes through mirrored indices; a mirrored tap that lands on an
/// already-visited node simply adds to its weight.
class DensityFilter {
 public:
  struct Tap {
    Index3 offset;
    double kernel;
  };

  DensityFilter() = default;

  DensityFilter(const GridSpec& grid, double d_max, const SignField& sign) : grid_(grid), d_max_(d_max) {
    if (!(d_max >= 0.0)) throw Error(ErrorCode::invalid_config, "filter radius must be non-negative");
    if (sign.s.size() != grid.node_count()) {
      throw Error(ErrorCode::dimension_mismatch, "density filter: sign field does not match the grid");
    }
    Index3 reach{};
    for (int a = 0; a < 3; ++a) reach[a] = static_cast<std::ptrdiff_t>(std::floor(d_max / grid.spacing[a]));
    for (std::ptrdiff_t i = -reach[0]; i <= reach[0]; ++i) {
      for (std::ptrdiff_t j = -reach[1]; j <= reach[1]; ++j) {
        for (std::ptrdiff_t k = -reach[2]; k <= reach[2]; ++k) {
          const double dx = static_cast<double>(i) * grid.spacing[0];
          const double dy = static_cast<double>(j) * grid.spacing[1];
          const double dz = static_cast<double>(k) * grid.spacing[2];
          const double w = d_max - std::sqrt(dx * dx + dy * dy + dz * dz);
          if (w > 0.0) stencil_.push_back({{i, j, k}, w});
        }
      }
    }
    const std::size_t n = grid.node_count();
    included_.resize(n);
    for (std::size_t p = 0; p < n; ++p) included_[p] = sign.s[p] <= 0;
    inv_norm_.assign(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      double total = 0.0;
      visit_raw(p, [&](std::size_t, double w) { total += w; });
      inv_norm_[p] = total > 0.0 ? 1.0 / total : 0.0;
    }
  }

  const GridSpec& grid() const { return grid_; }
  double d_max() const { return d_max_; }
  std::size_t size() const { return inv_norm_.size(); }
  const std::vector<Tap>& stencil() const { return stencil_; }

  /// Calls f(q, D_pq) for every stored entry of row p (a column may repeat
  /// when mirrored taps coincide).
  template <class F>
  void for_each_in_row(std::size_t p, F&& f) const {
    if (inv_norm_[p] == 0.0) {
      f(p, 1.0);
      return;
    }
    const double scale = inv_norm_[p];
    visit_raw(p, [&](std::size_t q, double w) { f(q, w * scale); });
  }

  /// Row p with repeated columns merged, sorted by column.
  std::vector<std::pair<std::size_t, double>> row(std::size_t p) const {
    std::map<std::size_t, double> merged;
    for_each_in_row(p, [&](std::size_t q, double w) { merged[q] += w; });
    return {merged.begin(), merged.end()};
  }

  /// out = D * in
  void apply(std::span<const double> in, std::span<double> out) const {
    check(in, out);
    for (std::size_t p = 0; p < size(); ++p) {
      double acc = 0.0;
      for_each_in_row(p, [&](std::size_t q, double w) { acc += w * in[q]; });
      out[p] = acc;
    }
  }

  /// out = D^T * in
  void apply_transpose(std::span<const double> in, std::span<double> out) const {
    check(in, out);
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t p = 0; p < size(); ++p) {
      const double y = in[p];
      if (y == 0.0) continue;
      for_each_in_row(p, [&](std::size_t q, double w) { out[q] += w * y; });
    }
  }

 private:
  template <class F>
  void visit_raw(std::size_t p, F&& f) const {
    const Index3 node = grid_.unravel(p);
    for (const auto& tap : stencil_) {
      Index3 m{};
      bool ok = true;
      for (int a = 0; a < 3 && ok; ++a) {
        auto r = try_reflect(grid_, node[a] + tap.offset[a], a);
        if (r) {
          m[a] = *r;
        } else {
          ok = false;
        }
      }
      if (!ok) continue;
      const std::size_t q = grid_.linear(m);
      // Only the zero tap keeps an exterior node; mirror images of it do not.
      const bool self = tap.offset == Index3{0, 0, 0};
      if (!self && !included_[q]) continue;
      f(q, tap.kernel);
    }
  }

  void check(std::span<const double> in, std::span<double> out) const {
    if (in.size() != size() || out.size() != size()) {
      throw Error(ErrorCode::dimension_mismatch, "density filter: vector length does not match the grid");
    }
  }

  GridSpec grid_{};
  double d_max_ = 0.0;
  std::vector<Tap> stencil_;
  std::vector<std::uint8_t> included_;
  std::vector<double> inv_norm_;
};

inline DensityFilter build_density_filter(const GridSpec& grid, double d_max, const SignField& sign) {
  return DensityFilter(grid, d_max, sign);
}

inline std::vector<double> apply_density_filter(const DensityFilter& filter, std::span<const double> rho) {
  std::vector<double> out(rho.size());
  filter.apply(rho, out);
  return out;
}

/// Smooth tanh projection toward {0, 1} with steepness beta.
struct HeavisideProjection {
  double beta = 1.0;

  double operator()(double x) const {
    const double h = std::tanh(0.5 * beta);
    return (h + odd_tanh(x - 0.5)) / (2.0 * h);
  }

  double derivative(double x) const {
    const double c = std::cosh(beta * (x - 0.5));
    return beta / (c * c) / (2.0 * std::tanh(0.5 * beta));
  }

 private:
  // tanh evaluated so that d and -d give exactly opposite values.
  double odd_tanh(double d) const { return std::copysign(std::tanh(beta * std::abs(d)), d); }
};

inline std::vector<double> apply_heaviside(const HeavisideProjection& proj, std::span<const double> rho_hat) {
  if (!(proj.beta > 0.0)) throw Error(ErrorCode::invalid_config, "projection steepness must be positive");
  std::vector<double> out(rho_hat.size());
  std::transform(rho_hat.begin(), rho_hat.end(), out.begin(), [&](double x) { return proj(x); });
  return out;
}

inline std::vector<double> heaviside_derivative(const HeavisideProjection& proj, std::span<const double> rho_hat) {
  std::vector<double> out(rho_hat.size());
  std::transform(rho_hat.begin(), rho_hat.end(), out.begin(), [&](double x) { return proj.derivative(x); });
  return out;
}

/// Dissolution speeds (mm/min) and API concentrations (mg/mm^3) of the two
/// materials; rho = 0 selects material one.
struct MaterialPair {
  double v1 = 0.003;
  double v2 = 0.03;
  double c1 = 1e-3;
  double c2 = 1e-3;

  void validate() const {
    if (!(v1 > 0.0) || !(v2 > 0.0)) throw Error(ErrorCode::invalid_config, "material speeds must be positive");
    if (!(c1 >= 0.0) || !(c2 >= 0.0)) {
      throw Error(ErrorCode::invalid_config, "material concentrations must be non-negative");
    }
  }
};

struct MaterialFields {
  std::vector<double> velocity;
  std::vector<double> concentration;
};

inline MaterialFields interpolate_materials(std::span<const double> rho_bar, const MaterialPair& m) {
  MaterialFields out;
  out.velocity.resize(rho_bar.size());
  out.concentration.resize(rho_bar.size());
  for (std::size_t p = 0; p < rho_bar.size(); ++p) {
    out.velocity[p] = m.v1 + (m.v2 - m.v1) * rho_bar[p];
    out.concentration[p] = m.c1 + (m.c2 - m.c1) * rho_bar[p];
  }
  return out;
}

/// Pulls a gradient with respect to rho_bar back to the raw design:
/// D^T (d rho_bar/d rho_hat ⊙ g).
inline std::vector<double> chain_back(const DensityFilter& filter, std::span<const double> projection_slope,
                                      std::span<const double> nodal_gradient) {
  if (projection_slope.size() != nodal_gradient.size()) {
    throw Error(ErrorCode::dimension_mismatch, "chain_back: vector lengths differ");
  }
  std::vector<double> scaled(nodal_gradient.size());
  for (std::size_t p = 0; p < scaled.size(); ++p) scaled[p] = projection_slope[p] * nodal_gradient[p];
  std::vector<double> out(scaled.size());
  filter.apply_transpose(scaled, out);
  return out;
}

}  // namespace dissolve
