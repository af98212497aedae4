// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <utility>
#include <vector>

#include "dissolve/error.hpp"
#include "dissolve/grid.hpp"

namespace dissolve {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();
inline constexpr std::size_t kNoNode = static_cast<std::size_t>(-1);

/// Result of the first-order upwind update at one node. Bit `a` of
/// `active` is set when axis `a` contributes to the quadratic.
struct LocalUpdate {
  double value;
  std::uint8_t active;
};

/// Largest root of sum_a max((T - a_a)/h_a, 0)^2 = 1/v^2. `axis_min` holds
/// the smaller accepted neighbor value per axis (+inf when there is none).
/// Axes with a_a >= T are dropped until every retained axis is causal.
inline std::optional<LocalUpdate> local_update(const std::array<double, 3>& axis_min, const Vec3& spacing,
                                               double velocity) {
  std::array<int, 3> order{0, 1, 2};
  std::sort(order.begin(), order.end(), [&](int l, int r) {
    return axis_min[l] < axis_min[r] || (axis_min[l] == axis_min[r] && l < r);
  });
  if (!std::isfinite(axis_min[order[0]])) return std::nullopt;

  const double slowness2 = 1.0 / (velocity * velocity);
  const double base = axis_min[order[0]];
  // Work in offsets from the smallest neighbor to limit cancellation.
  double tau = spacing[order[0]] / velocity;
  std::uint8_t active = static_cast<std::uint8_t>(1u << order[0]);
  double sum_w = 0.0, sum_wd = 0.0, sum_wd2 = 0.0;
  {
    const double w = 1.0 / (spacing[order[0]] * spacing[order[0]]);
    sum_w += w;
  }
  for (int m = 1; m < 3; ++m) {
    const int axis = order[m];
    if (!std::isfinite(axis_min[axis])) break;
    const double d = axis_min[axis] - base;
    if (tau <= d) break;
    const double w = 1.0 / (spacing[axis] * spacing[axis]);
    sum_w += w;
    sum_wd += w * d;
    sum_wd2 += w * d * d;
    const double disc = std::max(sum_wd * sum_wd - sum_w * (sum_wd2 - slowness2), 0.0);
    tau = (sum_wd + std::sqrt(disc)) / sum_w;
    active = static_cast<std::uint8_t>(active | (1u << axis));
  }
  return LocalUpdate{base + tau, active};
}

enum class NodeState : std::uint8_t { exterior, seed, marched, unreachable };

struct FmmSolution {
  std::vector<double> T;
  std::vector<NodeState> state;
  /// Seeds first (by value, then index), then marched nodes as popped.
  std::vector<std::size_t> acceptance_order;
  /// Per node and axis: the neighbor realizing the retained axis minimum.
  std::vector<std::array<std::size_t, 3>> upwind;
  std::vector<std::uint8_t> active_axes;
  std::vector<std::size_t> unreachable;
  std::size_t queue_pops = 0;

  bool accepted(std::size_t n) const { return state[n] == NodeState::seed || state[n] == NodeState::marched; }
};

namespace detail {

struct AxisCandidates {
  std::array<double, 3> value{kInfinity, kInfinity, kInfinity};
  std::array<std::size_t, 3> node{kNoNode, kNoNode, kNoNode};
};

template <class Usable>
AxisCandidates gather_axis_minima(const GridSpec& grid, std::span<const double> T, std::size_t p, Usable usable) {
  AxisCandidates out;
  const Index3 node = grid.unravel(p);
  for (int axis = 0; axis < 3; ++axis) {
    for (int step : {-1, 1}) {
      auto q = axis_neighbor(grid, node, axis, step);
      if (!q || !usable(*q)) continue;
      const double t = T[*q];
      if (t < out.value[axis] || (t == out.value[axis] && *q < out.node[axis])) {
        out.value[axis] = t;
        out.node[axis] = *q;
      }
    }
  }
  return out;
}

}  // namespace detail

/// First-order fast marching from the seed set. Exterior seeds are fixed
/// but never used as upwind neighbors; interior nodes not reached from the
/// surface end up `unreachable` with T = +inf.
inline FmmSolution solve_fmm(const GridSpec& grid, const BoundarySeed& seeds, std::span<const double> velocity,
                             const SignField& sign) {
  const std::size_t n = grid.node_count();
  if (velocity.size() != n || sign.s.size() != n) {
    throw Error(ErrorCode::dimension_mismatch, "solve_fmm: field sizes do not match the grid");
  }
  if (seeds.surface_count() == 0) throw Error(ErrorCode::no_boundary, "solve_fmm: empty seed set");

  FmmSolution sol;
  sol.T.assign(n, kInfinity);
  sol.state.assign(n, NodeState::unreachable);
  sol.upwind.assign(n, {kNoNode, kNoNode, kNoNode});
  sol.active_axes.assign(n, 0);
  sol.acceptance_order.reserve(n);

  for (std::size_t p = 0; p < n; ++p) {
    if (sign.s[p] > 0) sol.state[p] = NodeState::exterior;
  }

  std::vector<std::pair<double, std::size_t>> surface;
  for (const auto& s : seeds.nodes) {
    if (s.value < 0.0) throw Error(ErrorCode::invalid_config, "negative seed value");
    sol.T[s.index] = s.value;
    if (s.exterior) {
      sol.state[s.index] = NodeState::exterior;
    } else {
      sol.state[s.index] = NodeState::seed;
      surface.emplace_back(s.value, s.index);
    }
  }
  std::sort(surface.begin(), surface.end());
  for (const auto& [value, index] : surface) sol.acceptance_order.push_back(index);

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  auto usable = [&](std::size_t q) { return sol.accepted(q); };
  auto pending = [&](std::size_t q) { return sol.state[q] == NodeState::unreachable; };

  auto relax_neighbors = [&](std::size_t p) {
    const Index3 node = grid.unravel(p);
    for (int axis = 0; axis < 3; ++axis) {
      for (int step : {-1, 1}) {
        auto q = axis_neighbor(grid, node, axis, step);
        if (!q || !pending(*q)) continue;
        const auto cand = detail::gather_axis_minima(grid, sol.T, *q, usable);
        auto upd = local_update(cand.value, grid.spacing, clamp_velocity(velocity[*q]));
        if (upd && upd->value < sol.T[*q]) {
          sol.T[*q] = upd->value;
          queue.emplace(upd->value, *q);
        }
      }
    }
  };

  for (const auto& [value, index] : surface) relax_neighbors(index);

  while (!queue.empty()) {
    const auto [t, p] = queue.top();
    queue.pop();
    ++sol.queue_pops;
    if (!pending(p) || t > sol.T[p]) continue;  // stale entry
    const auto cand = detail::gather_axis_minima(grid, sol.T, p, usable);
    const auto upd = local_update(cand.value, grid.spacing, clamp_velocity(velocity[p]));
    sol.T[p] = upd->value;
    sol.active_axes[p] = upd->active;
    for (int axis = 0; axis < 3; ++axis) {
      if (upd->active & (1u << axis)) sol.upwind[p][axis] = cand.node[axis];
    }
    sol.state[p] = NodeState::marched;
    sol.acceptance_order.push_back(p);
    relax_neighbors(p);
  }

  for (std::size_t p = 0; p < n; ++p) {
    if (sol.state[p] == NodeState::unreachable) {
      sol.T[p] = kInfinity;
      sol.unreachable.push_back(p);
    }
  }
  return sol;
}

/// Left side of the discrete Eikonal equation at `node` using the final
/// neighbor values (exterior and unreachable neighbors are ignored).
inline double residual(const GridSpec& grid, const FmmSolution& sol, std::span<const double> velocity,
                       std::size_t node) {
  auto usable = [&](std::size_t q) { return sol.state[q] != NodeState::exterior && std::isfinite(sol.T[q]); };
  const auto cand = detail::gather_axis_minima(grid, sol.T, node, usable);
  double sum = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    if (!std::isfinite(cand.value[axis])) continue;
    const double d = std::max((sol.T[node] - cand.value[axis]) / grid.spacing[axis], 0.0);
    sum += d * d;
  }
  const double v = clamp_velocity(velocity[node]);
  return sum - 1.0 / (v * v);
}

}  // namespace dissolve
