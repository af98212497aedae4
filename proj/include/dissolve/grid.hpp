// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dissolve/error.hpp"

namespace dissolve {

using Vec3 = std::array<double, 3>;
using Index3 = std::array<std::ptrdiff_t, 3>;

/// Cartesian node grid. Node (i,j,k) sits at origin + (i*hx, j*hy, k*hz);
/// linear indices run k-fastest, then j, then i. A symmetric axis carries a
/// mirror plane through its index-0 node layer.
struct GridSpec {
  Index3 dims{2, 2, 2};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  std::array<bool, 3> symmetric{false, false, false};

  std::size_t node_count() const {
    return static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
  }

  std::size_t linear(const Index3& n) const {
    return static_cast<std::size_t>((n[0] * dims[1] + n[1]) * dims[2] + n[2]);
  }

  Index3 unravel(std::size_t index) const {
    const auto idx = static_cast<std::ptrdiff_t>(index);
    const std::ptrdiff_t k = idx % dims[2];
    const std::ptrdiff_t j = (idx / dims[2]) % dims[1];
    const std::ptrdiff_t i = idx / (dims[1] * dims[2]);
    return {i, j, k};
  }

  bool contains(const Index3& n) const {
    for (int a = 0; a < 3; ++a) {
      if (n[a] < 0 || n[a] >= dims[a]) return false;
    }
    return true;
  }

  Vec3 coordinate(const Index3& n) const {
    return {origin[0] + static_cast<double>(n[0]) * spacing[0],
            origin[1] + static_cast<double>(n[1]) * spacing[1],
            origin[2] + static_cast<double>(n[2]) * spacing[2]};
  }

  Vec3 coordinate(std::size_t index) const { return coordinate(unravel(index)); }

  double cell_volume() const { return spacing[0] * spacing[1] * spacing[2]; }
  double min_spacing() const { return std::min({spacing[0], spacing[1], spacing[2]}); }
  double max_spacing() const { return std::max({spacing[0], spacing[1], spacing[2]}); }

  /// Index stride of one step along `axis` in linear numbering.
  std::ptrdiff_t stride(int axis) const {
    if (axis == 0) return dims[1] * dims[2];
    if (axis == 1) return dims[2];
    return 1;
  }
};

inline GridSpec build_grid(const Index3& dims, const Vec3& spacing, const Vec3& origin = {0, 0, 0},
                           const std::array<bool, 3>& symmetric = {false, false, false}) {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 2) {
      throw Error(ErrorCode::invalid_grid,
                  "axis " + std::to_string(a) + " has " + std::to_string(dims[a]) + " nodes (need >= 2)");
    }
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw Error(ErrorCode::invalid_grid, "axis " + std::to_string(a) + " spacing must be positive");
    }
  }
  return GridSpec{dims, spacing, origin, symmetric};
}

/// Maps an axis index onto the grid, mirroring negative indices across the
/// symmetry plane at index 0 (-m -> m). In-range indices pass through.
inline std::ptrdiff_t reflect_index(const GridSpec& grid, std::ptrdiff_t index, int axis) {
  const std::ptrdiff_t n = grid.dims[axis];
  if (index >= 0 && index < n) return index;
  if (index < 0 && grid.symmetric[axis] && -index < n) return -index;
  throw Error(ErrorCode::index_out_of_bounds,
              "index " + std::to_string(index) + " on axis " + std::to_string(axis) +
                  (grid.symmetric[axis] ? "" : " (axis is not symmetric)"));
}

/// Non-throwing variant used in the hot loops.
inline std::optional<std::ptrdiff_t> try_reflect(const GridSpec& grid, std::ptrdiff_t index, int axis) {
  const std::ptrdiff_t n = grid.dims[axis];
  if (index >= 0 && index < n) return index;
  if (index < 0 && grid.symmetric[axis] && -index < n) return -index;
  return std::nullopt;
}

/// Linear index of the axis neighbor of `node` at offset `step` (+-1),
/// honoring symmetry planes.
inline std::optional<std::size_t> axis_neighbor(const GridSpec& grid, const Index3& node, int axis, int step) {
  auto r = try_reflect(grid, node[axis] + step, axis);
  if (!r) return std::nullopt;
  Index3 m = node;
  m[axis] = *r;
  return grid.linear(m);
}

/// Capsule centered at the origin with its axis along z.
struct CapsuleSpec {
  double radius = 2.32;
  double total_length = 12.49;

  void validate() const {
    if (!(radius > 0.0) || !(total_length > 2.0 * radius)) {
      throw Error(ErrorCode::invalid_config, "capsule needs total_length > 2*radius > 0");
    }
  }

  double half_segment() const { return 0.5 * total_length - radius; }

  double volume() const {
    constexpr double pi = 3.14159265358979323846;
    return pi * radius * radius * (total_length - 2.0 * radius) + 4.0 / 3.0 * pi * radius * radius * radius;
  }

  double operator()(const Vec3& p) const { return signed_distance(p); }

  double signed_distance(const Vec3& p) const {
    const double a = half_segment();
    const double dz = p[2] - std::clamp(p[2], -a, a);
    return std::sqrt(p[0] * p[0] + p[1] * p[1] + dz * dz) - radius;
  }
};

inline double capsule_signed_distance(const Vec3& point, const CapsuleSpec& capsule) {
  return capsule.signed_distance(point);
}

/// Anything that maps a point (mm) to a signed distance (mm), negative inside.
template <class Shape>
concept SignedDistanceShape = requires(const Shape& s, const Vec3& p) {
  { s(p) } -> std::convertible_to<double>;
};

struct SignField {
  std::vector<double> phi;
  std::vector<std::int8_t> s;

  bool interior(std::size_t n) const { return s[n] < 0; }
  bool exterior(std::size_t n) const { return s[n] > 0; }
};

inline constexpr double kSurfaceTolerance = 1e-12;

template <SignedDistanceShape Shape>
SignField build_sign_field(const GridSpec& grid, const Shape& shape) {
  SignField field;
  const std::size_t n = grid.node_count();
  field.phi.resize(n);
  field.s.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    const double d = static_cast<double>(shape(grid.coordinate(p)));
    field.phi[p] = d;
    field.s[p] = std::abs(d) < kSurfaceTolerance ? 0 : (d < 0.0 ? -1 : 1);
  }
  return field;
}

/// Nodes fixed before marching starts. Exterior entries carry the outward
/// travel time phi/v so the mass integrand stays a signed-distance-like
/// field across the surface.
struct BoundarySeed {
  struct Node {
    std::size_t index;
    double value;
    bool exterior;
  };
  std::vector<Node> nodes;

  std::size_t surface_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const Node& n) { return !n.exterior; }));
  }
};

inline constexpr double kVelocityFloor = 1e-9;

inline double clamp_velocity(double v) { return std::max(v, kVelocityFloor); }

inline BoundarySeed seed_boundary(const GridSpec& grid, const SignField& sign, std::span<const double> velocity) {
  const std::size_t n = grid.node_count();
  if (sign.s.size() != n || velocity.size() != n) {
    throw Error(ErrorCode::dimension_mismatch, "seed_boundary: field sizes do not match the grid");
  }
  BoundarySeed seed;
  for (std::size_t p = 0; p < n; ++p) {
    const double v = clamp_velocity(velocity[p]);
    if (sign.s[p] > 0) {
      seed.nodes.push_back({p, sign.phi[p] / v, true});
      continue;
    }
    if (sign.s[p] == 0) {
      seed.nodes.push_back({p, 0.0, false});
      continue;
    }
    const Index3 node = grid.unravel(p);
    bool crossing = false;
    for (int axis = 0; axis < 3 && !crossing; ++axis) {
      for (int step : {-1, 1}) {
        if (auto q = axis_neighbor(grid, node, axis, step); q && sign.s[*q] >= 0) {
          crossing = true;
          break;
        }
      }
    }
    if (crossing) seed.nodes.push_back({p, std::abs(sign.phi[p]) / v, false});
  }
  if (seed.surface_count() == 0) {
    throw Error(ErrorCode::no_boundary, "the body surface does not cross the grid");
  }
  return seed;
}

}  // namespace dissolve
