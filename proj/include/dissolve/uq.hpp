// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "dissolve/error.hpp"
#include "dissolve/filters.hpp"
#include "dissolve/gamma.hpp"
#include "dissolve/io.hpp"
#include "dissolve/objective.hpp"
#include "dissolve/parallel.hpp"
#include "dissolve/srom.hpp"

namespace dissolve {

struct RateDraw {
  double v1 = 0.0;
  double v2 = 0.0;
};

/// Independent (v1, v2) pairs; v1 is drawn before v2 for every pair.
inline std::vector<RateDraw> draw_rates(const GammaPair& gammas, std::size_t count, std::uint64_t seed) {
  for (const auto& g : gammas) g.validate();
  std::mt19937_64 engine(seed);
  std::vector<RateDraw> draws(count);
  for (auto& d : draws) {
    d.v1 = sample_gamma(gammas[0], engine);
    d.v2 = sample_gamma(gammas[1], engine);
  }
  return draws;
}

/// Linear-interpolation sample quantile (Hyndman-Fan type 7) of sorted data.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::dimension_mismatch, "quantile of an empty sample");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Equispaced evaluation times covering [a, b] with spacing close to `step`.
inline std::vector<double> window_times(std::array<double, 2> interval, double step) {
  const double span = interval[1] - interval[0];
  if (!(span > 0.0) || !(step > 0.0)) throw Error(ErrorCode::invalid_config, "bad evaluation window");
  const auto n = static_cast<std::size_t>(std::max(1.0, std::round(span / step)));
  std::vector<double> t(n + 1);
  for (std::size_t i = 0; i <= n; ++i) t[i] = i == n ? interval[1] : interval[0] + span * i / n;
  return t;
}

/// Mean squared release difference over the window spanned by `times`:
/// (1/T_span) * sum_i (target(t_i) - normalized_i)^2 * dt. The target is
/// held at its final value past its end.
inline double msrd(std::span<const double> times, std::span<const double> normalized, const TargetSpec& target) {
  if (times.size() < 2 || times.size() != normalized.size()) {
    throw Error(ErrorCode::dimension_mismatch, "MSRD needs matching time and profile samples");
  }
  const double span = times.back() - times.front();
  const double dt = span / static_cast<double>(times.size() - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double r = target_value(target, times[i]) - normalized[i];
    sum += r * r * dt;
  }
  return sum / span;
}

struct UncertaintyBands {
  std::vector<double> times;
  std::vector<double> q05, q25, q75, q95;
  std::size_t draws = 0;
};

struct UncertaintyResult {
  UncertaintyBands bands;
  std::vector<RateDraw> draws;
  std::vector<double> msrd;
  std::vector<double> completion_time;
};

/// Monte-Carlo propagation of random speeds through the forward model of
/// an already projected design. Concentrations stay at `base`.
inline UncertaintyResult run_uncertainty(const DesignProblem& problem, std::span<const double> rho_bar,
                                         const MaterialPair& base, std::span<const RateDraw> draws,
                                         std::span<const double> times, const TargetSpec& target,
                                         unsigned threads = 1) {
  if (draws.size() < 2) throw Error(ErrorCode::invalid_config, "uncertainty needs at least two draws");
  std::vector<ReleaseProfile> profiles(draws.size());
  parallel_for(draws.size(), threads, [&](std::size_t d) {
    MaterialPair m = base;
    m.v1 = draws[d].v1;
    m.v2 = draws[d].v2;
    profiles[d] = problem.simulate_physical(rho_bar, m, times);
  });

  UncertaintyResult out;
  out.draws.assign(draws.begin(), draws.end());
  auto& b = out.bands;
  b.times.assign(times.begin(), times.end());
  b.draws = draws.size();
  std::vector<double> column(draws.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    for (std::size_t d = 0; d < draws.size(); ++d) column[d] = profiles[d].normalized[i];
    std::sort(column.begin(), column.end());
    b.q05.push_back(sorted_quantile(column, 0.05));
    b.q25.push_back(sorted_quantile(column, 0.25));
    b.q75.push_back(sorted_quantile(column, 0.75));
    b.q95.push_back(sorted_quantile(column, 0.95));
  }
  for (const auto& p : profiles) {
    out.msrd.push_back(msrd(times, p.normalized, target));
    out.completion_time.push_back(p.completion_time);
  }
  return out;
}

struct MsrdDensity {
  std::vector<double> samples;
  double bandwidth = 0.0;
  std::vector<double> x;
  std::vector<double> density;
};

/// Gaussian kernel density estimate on `points` equispaced abscissae over
/// [min - 4w, max + 4w].
inline MsrdDensity gaussian_kde(std::span<const double> samples, double bandwidth, std::size_t points = 512) {
  if (samples.size() < 2) throw Error(ErrorCode::invalid_config, "density estimate needs at least two samples");
  if (!(bandwidth > 0.0)) throw Error(ErrorCode::invalid_config, "bandwidth must be positive");
  if (points < 2) throw Error(ErrorCode::invalid_config, "density grid needs at least two points");
  MsrdDensity out;
  out.samples.assign(samples.begin(), samples.end());
  out.bandwidth = bandwidth;
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  const double a = *lo - 4.0 * bandwidth, b = *hi + 4.0 * bandwidth;
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  out.x.resize(points);
  out.density.resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = a + (b - a) * static_cast<double>(i) / static_cast<double>(points - 1);
    double s = 0.0;
    for (double v : samples) {
      const double z = (x - v) / bandwidth;
      s += std::exp(-0.5 * z * z);
    }
    out.x[i] = x;
    out.density[i] = norm * s;
  }
  return out;
}

}  // namespace dissolve
