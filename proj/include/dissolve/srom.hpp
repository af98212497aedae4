// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "dissolve/error.hpp"
#include "dissolve/filters.hpp"
#include "dissolve/gamma.hpp"
#include "dissolve/objective.hpp"
#include "dissolve/optimizer.hpp"
#include "dissolve/parallel.hpp"

namespace dissolve {

/// How weighted sample sums become moments. `scaled` keeps an extra 1/l
/// prefactor on top of weights that already sum to one.
enum class EstimatorConvention { weighted_mean, scaled };

struct SromConfig {
  int samples = 40;
  std::array<double, 3> alpha{1.0, 1.0, 1.0};
  /// CDF smoothing width as a fraction of each marginal's standard deviation.
  double sigma_factor = 0.1;
  int max_moment = 4;
  int starts = 10;
  OptimizerConfig inner{.memory = 10,
                        .gradient_tolerance = 1e-10,
                        .relative_decrease_tolerance = 1e-12,
                        .decrease_window = 10,
                        .max_iterations = 3000,
                        .max_line_search = 40};

  void validate() const {
    if (samples < 1) throw Error(ErrorCode::invalid_config, "SROM needs at least one sample");
    for (double a : alpha) {
      if (!(a > 0.0)) throw Error(ErrorCode::invalid_config, "SROM cost weights must be positive");
    }
    if (!(sigma_factor > 0.0)) throw Error(ErrorCode::invalid_config, "SROM smoothing must be positive");
    if (max_moment < 1) throw Error(ErrorCode::invalid_config, "SROM moment order must be >= 1");
    if (starts < 1) throw Error(ErrorCode::invalid_config, "SROM needs at least one start");
    inner.validate();
  }
};

/// Weighted samples of (v1, v2): samples[material][k], weights[k].
struct SromModel {
  std::array<std::vector<double>, 2> samples;
  std::vector<double> weights;

  std::size_t size() const { return weights.size(); }

  MaterialPair materials(std::size_t k, const MaterialPair& base) const {
    MaterialPair m = base;
    m.v1 = samples[0][k];
    m.v2 = samples[1][k];
    return m;
  }

  void validate() const {
    const std::size_t l = weights.size();
    if (l == 0 || samples[0].size() != l || samples[1].size() != l) {
      throw Error(ErrorCode::invalid_config, "SROM samples and weights disagree in length");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < l; ++k) {
      if (!(weights[k] > 0.0)) throw Error(ErrorCode::invalid_config, "SROM weights must be positive");
      if (!(samples[0][k] > 0.0) || !(samples[1][k] > 0.0)) {
        throw Error(ErrorCode::invalid_config, "SROM samples must be positive");
      }
      total += weights[k];
    }
    if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::invalid_config, "SROM weights must sum to one");
  }
};

using GammaPair = std::array<GammaSpec, 2>;

struct SromCost {
  double total = 0.0;
  double h1 = 0.0;  ///< smoothed-CDF mismatch
  double h2 = 0.0;  ///< relative raw-moment mismatch
  double h3 = 0.0;  ///< relative cross-moment mismatch
};

namespace detail {

inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Cost and, when the spans are non-empty, the gradient of the weighted
/// total with respect to samples (2*l, material-major) and weights.
inline SromCost srom_cost_impl(const SromModel& model, const GammaPair& gammas, const SromConfig& cfg,
                               std::span<double> d_samples, std::span<double> d_weights) {
  const std::size_t l = model.size();
  const bool grad = !d_samples.empty();
  if (grad) {
    std::fill(d_samples.begin(), d_samples.end(), 0.0);
    std::fill(d_weights.begin(), d_weights.end(), 0.0);
  }
  const auto& w = model.weights;
  const auto& a = cfg.alpha;
  SromCost cost;

  std::vector<double> err(l);
  for (int i = 0; i < 2; ++i) {
    const auto& x = model.samples[i];
    const double sigma = cfg.sigma_factor * gammas[i].stddev();
    for (std::size_t j = 0; j < l; ++j) {
      double smoothed = 0.0;
      for (std::size_t k = 0; k < l; ++k) smoothed += w[k] * (1.0 + std::erf((x[j] - x[k]) / (kSqrt2 * sigma)));
      err[j] = 0.5 * smoothed - gamma_cdf(x[j], gammas[i]);
      cost.h1 += 0.5 * err[j] * err[j];
    }
    if (!grad) continue;
    for (std::size_t j = 0; j < l; ++j) {
      double slope = 0.0, cross = 0.0;
      for (std::size_t k = 0; k < l; ++k) {
        const double z = x[j] - x[k];
        d_weights[k] += a[0] * err[j] * 0.5 * (1.0 + std::erf(z / (kSqrt2 * sigma)));
        if (k == j) continue;
        const double kernel = kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z / (sigma * sigma));
        slope += w[k] * kernel;
        cross += err[k] * kernel;
      }
      d_samples[i * l + j] += a[0] * (err[j] * (slope - gamma_pdf(x[j], gammas[i])) - w[j] * cross);
    }
  }

  for (int i = 0; i < 2; ++i) {
    const auto& x = model.samples[i];
    for (int m = 1; m <= cfg.max_moment; ++m) {
      const double target = gamma_raw_moment(m, gammas[i]);
      double approx = 0.0;
      for (std::size_t k = 0; k < l; ++k) approx += w[k] * std::pow(x[k], m);
      const double rel = (approx - target) / target;
      cost.h2 += 0.5 * rel * rel;
      if (!grad) continue;
      const double coef = a[1] * rel / target;
      for (std::size_t k = 0; k < l; ++k) {
        d_weights[k] += coef * std::pow(x[k], m);
        d_samples[i * l + k] += coef * w[k] * m * std::pow(x[k], m - 1);
      }
    }
  }

  // Independent marginals: E[v1 v2] = E[v1] E[v2].
  const double target = gammas[0].mean * gammas[1].mean;
  double approx = 0.0;
  for (std::size_t k = 0; k < l; ++k) approx += w[k] * model.samples[0][k] * model.samples[1][k];
  const double rel = (approx - target) / target;
  cost.h3 = 0.5 * rel * rel;
  if (grad) {
    const double coef = a[2] * rel / target;
    for (std::size_t k = 0; k < l; ++k) {
      d_weights[k] += coef * model.samples[0][k] * model.samples[1][k];
      d_samples[k] += coef * w[k] * model.samples[1][k];
      d_samples[l + k] += coef * w[k] * model.samples[0][k];
    }
  }

  cost.total = a[0] * cost.h1 + a[1] * cost.h2 + a[2] * cost.h3;
  return cost;
}

}  // namespace detail

inline SromCost srom_cost(const SromModel& model, const GammaPair& gammas, const SromConfig& config) {
  return detail::srom_cost_impl(model, gammas, config, {}, {});
}

inline SromCost srom_cost_gradient(const SromModel& model, const GammaPair& gammas, const SromConfig& config,
                                   std::span<double> d_samples, std::span<double> d_weights) {
  if (d_samples.size() != 2 * model.size() || d_weights.size() != model.size()) {
    throw Error(ErrorCode::dimension_mismatch, "SROM gradient buffers have the wrong length");
  }
  return detail::srom_cost_impl(model, gammas, config, d_samples, d_weights);
}

/// Sup distance between the SROM step CDF of one marginal and its Gamma CDF.
inline double srom_marginal_ks(const SromModel& model, int material, const GammaSpec& gamma) {
  std::vector<std::size_t> order(model.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& x = model.samples[material];
  std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return x[l] < x[r]; });
  double below = 0.0, sup = 0.0;
  for (std::size_t idx = 0; idx < order.size(); ++idx) {
    const double F = gamma_cdf(x[order[idx]], gamma);
    sup = std::max(sup, std::abs(F - below));
    below += model.weights[order[idx]];
    sup = std::max(sup, std::abs(F - below));
  }
  return sup;
}

struct SromBuild {
  SromModel model;
  SromCost cost;
  /// Set when the best start ended on a failed line search.
  bool warning = false;
};

namespace detail {

/// Unconstrained parameters: log-samples (2*l) then softmax logits (l).
inline SromModel decode_srom(std::span<const double> params, std::size_t l) {
  SromModel m;
  for (int i = 0; i < 2; ++i) {
    m.samples[i].resize(l);
    for (std::size_t k = 0; k < l; ++k) m.samples[i][k] = std::exp(params[i * l + k]);
  }
  const auto logits = params.subspan(2 * l, l);
  const double top = *std::max_element(logits.begin(), logits.end());
  m.weights.resize(l);
  double total = 0.0;
  for (std::size_t k = 0; k < l; ++k) total += m.weights[k] = std::exp(logits[k] - top);
  for (double& w : m.weights) w /= total;
  return m;
}

}  // namespace detail

/// Fits weighted samples to two independent Gamma marginals by minimizing
/// the three-term SROM cost from several stratified starts.
inline SromBuild build_srom(const GammaPair& gammas, const SromConfig& config, std::uint64_t seed) {
  config.validate();
  for (const auto& g : gammas) g.validate();
  const std::size_t l = static_cast<std::size_t>(config.samples);
  const std::size_t np = 3 * l;

  const Objective cost = [&](std::span<const double> params, std::span<double> grad) {
    const SromModel m = detail::decode_srom(params, l);
    std::vector<double> ds(2 * l), dw(l);
    const SromCost c = srom_cost_gradient(m, gammas, config, ds, dw);
    for (std::size_t k = 0; k < 2 * l; ++k) grad[k] = ds[k] * m.samples[k / l][k % l];
    double mean_dw = 0.0;
    for (std::size_t k = 0; k < l; ++k) mean_dw += m.weights[k] * dw[k];
    for (std::size_t k = 0; k < l; ++k) grad[2 * l + k] = m.weights[k] * (dw[k] - mean_dw);
    return c.total;
  };

  const std::vector<double> lower(np, -std::numeric_limits<double>::infinity());
  const std::vector<double> upper(np, std::numeric_limits<double>::infinity());
  std::mt19937_64 rng(seed);
  std::array<std::vector<double>, 2> strata;
  for (int i = 0; i < 2; ++i) {
    for (std::size_t k = 0; k < l; ++k) {
      strata[i].push_back(gamma_quantile((static_cast<double>(k) + 0.5) / static_cast<double>(l), gammas[i]));
    }
  }

  SromBuild best;
  best.cost.total = std::numeric_limits<double>::infinity();
  for (int start = 0; start < config.starts; ++start) {
    std::vector<std::size_t> pairing(l);
    std::iota(pairing.begin(), pairing.end(), 0);
    if (start > 0) std::shuffle(pairing.begin(), pairing.end(), rng);
    std::vector<double> x0(np, 0.0);
    for (std::size_t k = 0; k < l; ++k) {
      x0[k] = std::log(strata[0][k]);
      x0[l + k] = std::log(strata[1][pairing[k]]);
    }
    const StageResult r = minimize_stage(cost, x0, lower, upper, config.inner);
    const SromModel model = detail::decode_srom(r.x, l);
    const SromCost c = srom_cost(model, gammas, config);
    if (c.total < best.cost.total) {
      best.model = model;
      best.cost = c;
      best.warning = r.status == StageStatus::line_search_failure;
    }
  }
  return best;
}

inline double convention_scale(EstimatorConvention convention, std::size_t l) {
  return convention == EstimatorConvention::scaled ? 1.0 / static_cast<double>(l) : 1.0;
}

inline double srom_expectation(std::span<const double> values, const SromModel& model,
                               EstimatorConvention convention = EstimatorConvention::weighted_mean) {
  if (values.size() != model.size()) throw Error(ErrorCode::dimension_mismatch, "one value per SROM sample");
  double s = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) s += model.weights[k] * values[k];
  return convention_scale(convention, model.size()) * s;
}

inline double srom_std(std::span<const double> values, const SromModel& model,
                       EstimatorConvention convention = EstimatorConvention::weighted_mean) {
  if (values.size() != model.size()) throw Error(ErrorCode::dimension_mismatch, "one value per SROM sample");
  const double c = convention_scale(convention, model.size());
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    m1 += model.weights[k] * values[k];
    m2 += model.weights[k] * values[k] * values[k];
  }
  m1 *= c;
  m2 *= c;
  return std::sqrt(std::max(m2 - m1 * m1, 0.0));
}

struct RobustSpec {
  double k = 0.0;
  SromModel model;
  EstimatorConvention convention = EstimatorConvention::weighted_mean;
};

struct RobustEvaluation {
  double value = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> sample_values;
  std::vector<double> gradient;
};

/// J and dJ/drho of one design at fixed material speeds.
using SampleEvaluator = std::function<ObjectiveReport(std::span<const double> rho, const MaterialPair& materials)>;

/// E[J] + k*std[J] over the SROM samples and its gradient. Samples are
/// evaluated on up to `threads` workers; the reduction runs in sample order.
inline RobustEvaluation robust_objective_and_gradient(std::span<const double> rho, const RobustSpec& spec,
                                                      const MaterialPair& base, const SampleEvaluator& evaluate,
                                                      unsigned threads = 1, bool with_gradient = true) {
  const std::size_t l = spec.model.size();
  std::vector<ObjectiveReport> reports(l);
  parallel_for(l, threads, [&](std::size_t k) {
    try {
      reports[k] = evaluate(rho, spec.model.materials(k, base));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::sample_failure, "SROM sample " + std::to_string(k) + ": " + e.what());
    }
  });

  RobustEvaluation out;
  out.sample_values.resize(l);
  for (std::size_t k = 0; k < l; ++k) out.sample_values[k] = reports[k].J;
  out.mean = srom_expectation(out.sample_values, spec.model, spec.convention);
  out.stddev = srom_std(out.sample_values, spec.model, spec.convention);
  out.value = out.mean + spec.k * out.stddev;
  if (!with_gradient) return out;

  const double c = convention_scale(spec.convention, l);
  const bool spread = spec.k != 0.0 && out.stddev != 0.0;
  out.gradient.assign(rho.size(), 0.0);
  for (std::size_t k = 0; k < l; ++k) {
    double factor = c * spec.model.weights[k];
    if (spread) factor *= 1.0 + spec.k / out.stddev * (out.sample_values[k] - out.mean);
    const auto& g = reports[k].gradient;
    for (std::size_t p = 0; p < rho.size(); ++p) out.gradient[p] += factor * g[p];
  }
  return out;
}

/// Writes the model as CSV: sample,v1,v2,weight.
inline void write_srom_table(const std::string& path, const SromModel& model) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path);
  out.precision(17);
  out << "sample,v1,v2,weight\n";
  for (std::size_t k = 0; k < model.size(); ++k) {
    out << k << ',' << model.samples[0][k] << ',' << model.samples[1][k] << ',' << model.weights[k] << '\n';
  }
  if (!out) throw Error(ErrorCode::io_failure, "failed writing " + path);
}

inline SromModel read_srom_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample,v1,v2,weight", 0) != 0) {
    throw Error(ErrorCode::io_failure, path + ": expected header sample,v1,v2,weight");
  }
  SromModel model;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream row(line);
    std::string cell;
    std::array<double, 4> v{};
    for (int c = 0; c < 4; ++c) {
      if (!std::getline(row, cell, ',')) throw Error(ErrorCode::io_failure, path + ": short row '" + line + "'");
      v[c] = std::stod(cell);
    }
    model.samples[0].push_back(v[1]);
    model.samples[1].push_back(v[2]);
    model.weights.push_back(v[3]);
  }
  model.validate();
  return model;
}

}  // namespace dissolve
