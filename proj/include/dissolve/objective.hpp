// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dissolve/error.hpp"
#include "dissolve/filters.hpp"
#include "dissolve/fmm.hpp"
#include "dissolve/grid.hpp"
#include "dissolve/mass.hpp"

namespace dissolve {

/// Prescribed normalized remaining mass on an equispaced time grid that
/// starts at t = 0.
struct TargetProfile {
  std::vector<double> times;
  std::vector<double> values;
  double dt = 0.0;

  void validate() const {
    if (times.size() < 2 || times.size() != values.size()) {
      throw Error(ErrorCode::invalid_target, "target needs at least two (time, value) points");
    }
    if (times.front() != 0.0) throw Error(ErrorCode::invalid_target, "target must start at t = 0");
    if (!(dt > 0.0)) throw Error(ErrorCode::invalid_target, "target spacing must be positive");
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (std::abs((times[i] - times[i - 1]) - dt) > 1e-9 * std::max(1.0, dt)) {
        throw Error(ErrorCode::invalid_target, "target times must be equispaced");
      }
      if (values[i] > values[i - 1]) throw Error(ErrorCode::invalid_target, "target values must be non-increasing");
    }
  }
};

struct ReleaseProfile {
  std::vector<double> times;
  std::vector<double> mass;
  std::vector<double> normalized;
  double initial_mass = 0.0;
  /// Largest time-to-reach over the body nodes (min).
  double completion_time = 0.0;
};

/// Sum over target points of (target - R_d/R_d(0))^2 * dt.
inline double evaluate_misfit(const TargetProfile& target, const ReleaseProfile& profile) {
  if (profile.mass.size() != target.times.size()) {
    throw Error(ErrorCode::dimension_mismatch, "misfit: profile and target use different time grids");
  }
  if (!(profile.initial_mass > 0.0)) throw Error(ErrorCode::empty_design, "initial mass is zero");
  double J = 0.0;
  for (std::size_t i = 0; i < target.values.size(); ++i) {
    const double r = target.values[i] - profile.mass[i] / profile.initial_mass;
    J += r * r * target.dt;
  }
  return J;
}

/// dJ/dR(t_i) for every target point and dJ/dR(0), the two factors that
/// weight the mass sensitivities h_i (or k_i) and h_0 (or k_0).
struct MisfitWeights {
  std::vector<double> per_time;
  double initial = 0.0;
};

inline MisfitWeights misfit_weights(const TargetProfile& target, std::span<const double> mass, double initial_mass) {
  if (!(initial_mass > 0.0)) throw Error(ErrorCode::empty_design, "initial mass is zero");
  MisfitWeights w;
  w.per_time.resize(mass.size());
  for (std::size_t i = 0; i < mass.size(); ++i) {
    const double r = target.values[i] - mass[i] / initial_mass;
    w.per_time[i] = -2.0 * target.dt * r / initial_mass;
    w.initial += 2.0 * target.dt * r * mass[i] / (initial_mass * initial_mass);
  }
  return w;
}

namespace detail {

inline void check_samples(const TargetProfile& target, std::span<const MassSample> samples) {
  if (samples.size() != target.times.size()) {
    throw Error(ErrorCode::dimension_mismatch, "one mass sample per target time is required");
  }
  if (samples.front().t != 0.0) throw Error(ErrorCode::invalid_target, "first mass sample must be at t = 0");
}

inline std::vector<double> sample_masses(std::span<const MassSample> samples) {
  std::vector<double> m(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) m[i] = samples[i].mass;
  return m;
}

}  // namespace detail

/// dJ/dT from mass samples taken at the target times (samples[0] at t = 0).
inline std::vector<double> misfit_dT(const TargetProfile& target, std::span<const MassSample> samples,
                                     const SignField& sign) {
  detail::check_samples(target, samples);
  const auto masses = detail::sample_masses(samples);
  const auto w = misfit_weights(target, masses, samples.front().mass);
  std::vector<double> out(sign.s.size(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& h = samples[i].d_mass_dF;
    for (std::size_t p = 0; p < out.size(); ++p) out[p] += w.per_time[i] * h[p];
  }
  const auto& h0 = samples.front().d_mass_dF;
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = static_cast<double>(sign.s[p]) * (out[p] + w.initial * h0[p]);
  }
  return out;
}

inline std::vector<double> misfit_dc(const TargetProfile& target, std::span<const MassSample> samples) {
  detail::check_samples(target, samples);
  const auto masses = detail::sample_masses(samples);
  const auto w = misfit_weights(target, masses, samples.front().mass);
  const std::size_t n = samples.front().d_mass_dc.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& k = samples[i].d_mass_dc;
    for (std::size_t p = 0; p < n; ++p) out[p] += w.per_time[i] * k[p];
  }
  const auto& k0 = samples.front().d_mass_dc;
  for (std::size_t p = 0; p < n; ++p) out[p] += w.initial * k0[p];
  return out;
}

/// Nonzeros of row p of dE/dT plus dE_p/dv_p. Marched nodes follow the
/// discrete Eikonal equation; fixed nodes (seeds, exterior) follow
/// E_p = T_p - |phi_p|/v_p.
struct JacobianRow {
  double diagonal = 0.0;
  std::array<std::size_t, 3> upwind{kNoNode, kNoNode, kNoNode};
  std::array<double, 3> off_diagonal{0.0, 0.0, 0.0};
  double d_velocity = 0.0;
};

inline JacobianRow jacobian_entries(const GridSpec& grid, const FmmSolution& fmm, std::span<const double> velocity,
                                    const SignField& sign, std::size_t node) {
  JacobianRow row;
  const double v = velocity[node];
  switch (fmm.state[node]) {
    case NodeState::unreachable:
      throw Error(ErrorCode::unreachable_node, "node " + std::to_string(node) + " was never reached");
    case NodeState::seed:
    case NodeState::exterior:
      row.diagonal = 1.0;
      row.d_velocity = v > kVelocityFloor ? std::abs(sign.phi[node]) / (v * v) : 0.0;
      return row;
    case NodeState::marched:
      break;
  }
  for (int axis = 0; axis < 3; ++axis) {
    if (!(fmm.active_axes[node] & (1u << axis))) continue;
    const std::size_t u = fmm.upwind[node][axis];
    const double h2 = grid.spacing[axis] * grid.spacing[axis];
    const double g = 2.0 * (fmm.T[node] - fmm.T[u]) / h2;
    row.diagonal += g;
    row.upwind[axis] = u;
    row.off_diagonal[axis] = -g;
  }
  row.d_velocity = v > kVelocityFloor ? 2.0 / (v * v * v) : 0.0;
  return row;
}

struct AdjointState {
  std::vector<double> q;
};

/// Solves (dE/dT)^T q = rhs. Each equation involves only its own node and
/// strictly earlier accepted neighbors, so a sweep in reverse acceptance
/// order is an exact back-substitution.
inline AdjointState solve_adjoint(const GridSpec& grid, const FmmSolution& fmm, std::span<const double> velocity,
                                  const SignField& sign, std::span<const double> rhs) {
  const std::size_t n = grid.node_count();
  if (rhs.size() != n) throw Error(ErrorCode::dimension_mismatch, "adjoint right-hand side has wrong length");
  if (!fmm.unreachable.empty()) {
    throw Error(ErrorCode::unreachable_node, std::to_string(fmm.unreachable.size()) + " nodes were never reached");
  }
  AdjointState state;
  state.q.assign(n, 0.0);
  std::vector<double> pending(n, 0.0);
  for (auto it = fmm.acceptance_order.rbegin(); it != fmm.acceptance_order.rend(); ++it) {
    const std::size_t p = *it;
    const JacobianRow row = jacobian_entries(grid, fmm, velocity, sign, p);
    if (row.diagonal == 0.0) {
      throw Error(ErrorCode::singular_adjoint, "zero diagonal at node " + std::to_string(p));
    }
    const double qp = (rhs[p] - pending[p]) / row.diagonal;
    state.q[p] = qp;
    for (int axis = 0; axis < 3; ++axis) {
      if (row.upwind[axis] != kNoNode) pending[row.upwind[axis]] += row.off_diagonal[axis] * qp;
    }
  }
  for (std::size_t p = 0; p < n; ++p) {
    if (fmm.state[p] == NodeState::exterior) state.q[p] = rhs[p];
  }
  return state;
}

/// dJ/drho = D^T [dρ̄/dρ̂ ⊙ ((v2 - v1)(-q ⊙ dE/dv) + (c2 - c1) dJ/dc)].
inline std::vector<double> assemble_gradient(const AdjointState& adjoint, std::span<const double> d_velocity,
                                             std::span<const double> dJ_dc, std::span<const double> projection_slope,
                                             const DensityFilter& filter, const MaterialPair& materials) {
  const std::size_t n = adjoint.q.size();
  std::vector<double> nodal(n);
  for (std::size_t p = 0; p < n; ++p) {
    nodal[p] = (materials.v2 - materials.v1) * (-adjoint.q[p] * d_velocity[p]) + (materials.c2 - materials.c1) * dJ_dc[p];
  }
  return chain_back(filter, projection_slope, nodal);
}

struct ObjectiveReport {
  double J = 0.0;
  std::vector<double> gradient;
  ReleaseProfile profile;
};

/// Filtered and projected design plus the projection slope.
struct PhysicalDesign {
  std::vector<double> rho_hat;
  std::vector<double> rho_bar;
  std::vector<double> slope;
};

inline PhysicalDesign project_design(const DensityFilter& filter, const HeavisideProjection& projection,
                                     std::span<const double> rho) {
  PhysicalDesign d;
  d.rho_hat = apply_density_filter(filter, rho);
  d.rho_bar = apply_heaviside(projection, d.rho_hat);
  d.slope = heaviside_derivative(projection, d.rho_hat);
  return d;
}

/// Everything that stays fixed across evaluations of one design problem.
class DesignProblem {
 public:
  DesignProblem(GridSpec grid, SignField sign, DensityFilter filter, TargetProfile target, MaterialPair materials)
      : grid_(grid), sign_(std::move(sign)), filter_(std::move(filter)), target_(std::move(target)),
        materials_(materials) {
    target_.validate();
    materials_.validate();
    if (sign_.s.size() != grid_.node_count() || filter_.size() != grid_.node_count()) {
      throw Error(ErrorCode::dimension_mismatch, "design problem components disagree on grid size");
    }
  }

  const GridSpec& grid() const { return grid_; }
  const SignField& sign() const { return sign_; }
  const DensityFilter& filter() const { return filter_; }
  const TargetProfile& target() const { return target_; }
  const MaterialPair& materials() const { return materials_; }
  std::size_t size() const { return grid_.node_count(); }

  ObjectiveReport evaluate(std::span<const double> rho, double beta, bool with_gradient = true) const {
    return evaluate(rho, beta, materials_, with_gradient);
  }

  /// J and dJ/drho for the given material speeds (concentrations as given).
  ObjectiveReport evaluate(std::span<const double> rho, double beta, const MaterialPair& materials,
                           bool with_gradient = true) const {
    check_design(rho);
    const PhysicalDesign design = project_design(filter_, HeavisideProjection{beta}, rho);
    const MaterialFields fields = interpolate_materials(design.rho_bar, materials);
    const FmmSolution fmm = march(fields.velocity);

    ObjectiveReport report;
    report.profile = sample_profile(fmm, fields, target_.times);
    report.J = evaluate_misfit(target_, report.profile);
    if (!with_gradient) return report;

    const auto w = misfit_weights(target_, report.profile.mass, report.profile.initial_mass);
    const double step = default_fd_step(grid_, std::max(materials.v1, materials.v2));
    const std::size_t n = size();
    std::vector<double> dJ_dF(n, 0.0), dJ_dc(n, 0.0);
    for (std::size_t i = 0; i < target_.times.size(); ++i) {
      double weight = w.per_time[i];
      if (target_.times[i] == 0.0) weight += w.initial;
      if (weight == 0.0) continue;
      accumulate_mass_gradients(target_.times[i], fmm, sign_, fields.concentration, grid_, step, weight, dJ_dF, dJ_dc);
    }
    for (std::size_t p = 0; p < n; ++p) dJ_dF[p] *= static_cast<double>(sign_.s[p]);

    const AdjointState adjoint = solve_adjoint(grid_, fmm, fields.velocity, sign_, dJ_dF);
    std::vector<double> d_velocity(n);
    for (std::size_t p = 0; p < n; ++p) {
      d_velocity[p] = jacobian_entries(grid_, fmm, fields.velocity, sign_, p).d_velocity;
    }
    report.gradient = assemble_gradient(adjoint, d_velocity, dJ_dc, design.slope, filter_, materials);
    return report;
  }

  ReleaseProfile simulate(std::span<const double> rho, double beta, const MaterialPair& materials,
                          std::span<const double> times) const {
    check_design(rho);
    const PhysicalDesign design = project_design(filter_, HeavisideProjection{beta}, rho);
    return simulate_physical(design.rho_bar, materials, times);
  }

  /// Forward model for an already filtered and projected design.
  ReleaseProfile simulate_physical(std::span<const double> rho_bar, const MaterialPair& materials,
                                   std::span<const double> times) const {
    check_design(rho_bar);
    const MaterialFields fields = interpolate_materials(rho_bar, materials);
    const FmmSolution fmm = march(fields.velocity);
    return sample_profile(fmm, fields, times);
  }

 private:
  void check_design(std::span<const double> rho) const {
    if (rho.size() != size()) {
      throw Error(ErrorCode::dimension_mismatch, "design has " + std::to_string(rho.size()) + " entries, grid has " +
                                                     std::to_string(size()));
    }
  }

  FmmSolution march(std::span<const double> velocity) const {
    const BoundarySeed seeds = seed_boundary(grid_, sign_, velocity);
    FmmSolution fmm = solve_fmm(grid_, seeds, velocity, sign_);
    if (!fmm.unreachable.empty()) {
      throw Error(ErrorCode::unreachable_node,
                  std::to_string(fmm.unreachable.size()) + " body nodes are cut off from the surface");
    }
    return fmm;
  }

  ReleaseProfile sample_profile(const FmmSolution& fmm, const MaterialFields& fields,
                                std::span<const double> times) const {
    ReleaseProfile profile;
    profile.times.assign(times.begin(), times.end());
    profile.initial_mass = remaining_mass(0.0, fmm, sign_, fields.concentration, grid_);
    if (!(profile.initial_mass > 0.0)) throw Error(ErrorCode::empty_design, "design holds no drug mass");
    for (double t : times) {
      const double m = t == 0.0 ? profile.initial_mass : remaining_mass(t, fmm, sign_, fields.concentration, grid_);
      profile.mass.push_back(m);
      profile.normalized.push_back(m / profile.initial_mass);
    }
    for (std::size_t p = 0; p < size(); ++p) {
      if (sign_.s[p] <= 0) profile.completion_time = std::max(profile.completion_time, fmm.T[p]);
    }
    return profile;
  }

  GridSpec grid_;
  SignField sign_;
  DensityFilter filter_;
  TargetProfile target_;
  MaterialPair materials_;
};

/// Forward simulation of a raw design through the filter chain.
inline ReleaseProfile simulate_release(const DesignProblem& problem, std::span<const double> rho, double beta,
                                       const MaterialPair& materials, std::span<const double> times) {
  return problem.simulate(rho, beta, materials, times);
}

}  // namespace dissolve
