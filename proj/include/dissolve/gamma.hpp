// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/random/gamma_distribution.hpp>

#include "dissolve/error.hpp"

namespace dissolve {

/// Gamma distribution given by its mean and variance.
struct GammaSpec {
  double mean = 1.0;
  double variance = 1.0;

  double shape() const { return mean * mean / variance; }
  double scale() const { return variance / mean; }
  double stddev() const { return std::sqrt(variance); }

  void validate() const {
    if (!(mean > 0.0) || !(variance > 0.0)) {
      throw Error(ErrorCode::invalid_config, "gamma mean and variance must be positive");
    }
  }
};

inline double gamma_cdf(double x, const GammaSpec& g) {
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(g.shape(), x / g.scale());
}

inline double gamma_pdf(double x, const GammaSpec& g) {
  if (!(x > 0.0) || std::isinf(x)) return 0.0;
  return boost::math::gamma_p_derivative(g.shape(), x / g.scale()) / g.scale();
}

inline double gamma_quantile(double p, const GammaSpec& g) {
  return boost::math::gamma_p_inv(g.shape(), p) * g.scale();
}

/// E[X^m] = scale^m * prod_{j<m} (shape + j).
inline double gamma_raw_moment(int order, const GammaSpec& g) {
  if (order < 1) throw Error(ErrorCode::invalid_config, "moment order must be >= 1");
  const double k = g.shape(), theta = g.scale();
  double m = 1.0;
  for (int j = 0; j < order; ++j) m *= theta * (k + j);
  return m;
}

/// Draws X ~ Gamma(spec) from any uniform random bit generator.
template <class Engine>
double sample_gamma(const GammaSpec& g, Engine& engine) {
  boost::random::gamma_distribution<double> dist(g.shape(), g.scale());
  return dist(engine);
}

}  // namespace dissolve
