// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dissolve/error.hpp"

namespace dissolve {

/// Returns f(x) and writes the gradient into the second argument.
using Objective = std::function<double(std::span<const double>, std::span<double>)>;

struct OptimizerConfig {
  int memory = 10;
  /// Stage stops when the projected-gradient inf-norm drops below this
  /// times |f| at the stage start.
  double gradient_tolerance = 1e-6;
  /// ... or when the relative decrease over `decrease_window` iterations
  /// falls below this.
  double relative_decrease_tolerance = 1e-8;
  int decrease_window = 5;
  int max_iterations = 200;
  int max_line_search = 30;
  double armijo = 1e-4;
  double initial_design = 0.5;

  void validate() const {
    if (memory < 1) throw Error(ErrorCode::invalid_config, "optimizer memory must be >= 1");
    if (!(gradient_tolerance > 0.0) || !(relative_decrease_tolerance > 0.0)) {
      throw Error(ErrorCode::invalid_config, "optimizer tolerances must be positive");
    }
    if (max_iterations < 1) throw Error(ErrorCode::invalid_config, "max_iterations must be >= 1");
    if (decrease_window < 1) throw Error(ErrorCode::invalid_config, "decrease_window must be >= 1");
  }
};

enum class StageStatus { gradient_converged, decrease_converged, max_iterations, line_search_failure };

inline const char* to_string(StageStatus s) {
  switch (s) {
    case StageStatus::gradient_converged: return "gradient";
    case StageStatus::decrease_converged: return "decrease";
    case StageStatus::max_iterations: return "max-iterations";
    case StageStatus::line_search_failure: return "line-search-failure";
  }
  return "unknown";
}

struct IterationRecord {
  int iteration = 0;
  double value = 0.0;
  double projected_gradient = 0.0;
  int evaluations = 0;
};

struct StageResult {
  std::vector<double> x;
  double value = 0.0;
  std::vector<IterationRecord> history;
  StageStatus status = StageStatus::max_iterations;
  int evaluations = 0;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

namespace detail {

inline double projected_gradient_norm(std::span<const double> x, std::span<const double> g,
                                      std::span<const double> lower, std::span<const double> upper) {
  double norm = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double moved = std::clamp(x[i] - g[i], lower[i], upper[i]);
    norm = std::max(norm, std::abs(x[i] - moved));
  }
  return norm;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct CurvaturePair {
  std::vector<double> s, y;
  double rho;
};

/// Two-loop recursion on the free variables; bound-blocked components are
/// held at zero.
inline std::vector<double> lbfgs_direction(std::span<const double> g, const std::vector<char>& blocked,
                                           const std::deque<CurvaturePair>& pairs) {
  const std::size_t n = g.size();
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = blocked[i] ? 0.0 : g[i];
  std::vector<double> alpha(pairs.size());
  for (std::size_t m = pairs.size(); m-- > 0;) {
    const auto& p = pairs[m];
    double a = 0.0;
    for (std::size_t i = 0; i < n; ++i) a += blocked[i] ? 0.0 : p.s[i] * q[i];
    a *= p.rho;
    alpha[m] = a;
    for (std::size_t i = 0; i < n; ++i) {
      if (!blocked[i]) q[i] -= a * p.y[i];
    }
  }
  if (!pairs.empty()) {
    const auto& last = pairs.back();
    const double gamma = dot(last.s, last.y) / dot(last.y, last.y);
    for (double& v : q) v *= gamma;
  }
  for (std::size_t m = 0; m < pairs.size(); ++m) {
    const auto& p = pairs[m];
    double b = 0.0;
    for (std::size_t i = 0; i < n; ++i) b += blocked[i] ? 0.0 : p.y[i] * q[i];
    b *= p.rho;
    for (std::size_t i = 0; i < n; ++i) {
      if (!blocked[i]) q[i] += (alpha[m] - b) * p.s[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) q[i] = blocked[i] ? 0.0 : -q[i];
  return q;
}

}  // namespace detail

/// Bound-constrained limited-memory quasi-Newton minimization: L-BFGS
/// directions on the variables not held by an active bound, followed by a
/// projected backtracking (Armijo) line search. Iterates never leave the box.
inline StageResult minimize_stage(const Objective& f, std::vector<double> x0, std::span<const double> lower,
                                  std::span<const double> upper, const OptimizerConfig& config,
                                  const IterationCallback& on_iteration = {}) {
  config.validate();
  const std::size_t n = x0.size();
  if (lower.size() != n || upper.size() != n) {
    throw Error(ErrorCode::dimension_mismatch, "bounds do not match the design length");
  }
  for (std::size_t i = 0; i < n; ++i) x0[i] = std::clamp(x0[i], lower[i], upper[i]);

  StageResult result;
  std::vector<double> x = std::move(x0), g(n), x_new(n), g_new(n);
  double fx = f(x, g);
  result.evaluations = 1;
  const double tolerance = config.gradient_tolerance * std::max(std::abs(fx), std::numeric_limits<double>::min());
  std::deque<detail::CurvaturePair> pairs;
  std::vector<char> blocked(n);

  auto record = [&](int it) {
    IterationRecord r{it, fx, detail::projected_gradient_norm(x, g, lower, upper), result.evaluations};
    result.history.push_back(r);
    if (on_iteration) on_iteration(r);
    return r.projected_gradient;
  };

  double pg = record(0);
  result.status = StageStatus::max_iterations;
  for (int it = 1; it <= config.max_iterations; ++it) {
    if (pg < tolerance) {
      result.status = StageStatus::gradient_converged;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      blocked[i] = (x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0);
    }
    std::vector<double> d = detail::lbfgs_direction(g, blocked, pairs);
    bool quasi_newton = !pairs.empty();
    if (detail::dot(d, g) >= 0.0) {
      pairs.clear();
      d = detail::lbfgs_direction(g, blocked, pairs);
      quasi_newton = false;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1) {
        if (!quasi_newton) break;
        pairs.clear();
        d = detail::lbfgs_direction(g, blocked, pairs);
        quasi_newton = false;
      }
      double step = 1.0;
      if (!quasi_newton) {
        double dmax = 0.0;
        for (double v : d) dmax = std::max(dmax, std::abs(v));
        if (dmax > 1.0) step = 1.0 / dmax;
      }
      for (int ls = 0; ls < config.max_line_search; ++ls, step *= 0.5) {
        for (std::size_t i = 0; i < n; ++i) x_new[i] = std::clamp(x[i] + step * d[i], lower[i], upper[i]);
        double predicted = 0.0;
        for (std::size_t i = 0; i < n; ++i) predicted += g[i] * (x_new[i] - x[i]);
        if (predicted >= 0.0) continue;
        const double f_new = f(x_new, g_new);
        ++result.evaluations;
        if (f_new <= fx + config.armijo * predicted) {
          std::vector<double> s(n), y(n);
          for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
          }
          const double sy = detail::dot(s, y);
          if (sy > 1e-12 * std::sqrt(detail::dot(s, s) * detail::dot(y, y))) {
            pairs.push_back({std::move(s), std::move(y), 1.0 / sy});
            if (pairs.size() > static_cast<std::size_t>(config.memory)) pairs.pop_front();
          }
          x.swap(x_new);
          g.swap(g_new);
          fx = f_new;
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      result.status = StageStatus::line_search_failure;
      break;
    }
    pg = record(it);
    const int w = config.decrease_window;
    if (it >= w) {
      const double before = result.history[result.history.size() - 1 - static_cast<std::size_t>(w)].value;
      const double drop = (before - fx) / std::max(std::abs(before), std::numeric_limits<double>::min());
      if (drop < config.relative_decrease_tolerance) {
        result.status = StageStatus::decrease_converged;
        break;
      }
    }
    if (it == config.max_iterations) result.status = pg < tolerance ? StageStatus::gradient_converged
                                                                   : StageStatus::max_iterations;
  }
  result.x = std::move(x);
  result.value = fx;
  return result;
}

/// Strictly increasing projection steepness values, one optimization stage each.
struct ContinuationSchedule {
  std::vector<double> betas{1, 5, 10, 20, 35, 50, 150, 300};

  void validate() const {
    if (betas.empty()) throw Error(ErrorCode::invalid_config, "continuation schedule is empty");
    for (std::size_t i = 0; i < betas.size(); ++i) {
      if (!(betas[i] > 0.0)) throw Error(ErrorCode::invalid_config, "beta values must be positive");
      if (i > 0 && !(betas[i] > betas[i - 1])) {
        throw Error(ErrorCode::invalid_config, "beta values must be strictly increasing");
      }
    }
  }
};

struct StageRecord {
  double beta = 0.0;
  /// Objective of the incoming design under this stage's beta.
  double start_value = 0.0;
  /// Objective of the same design at the end of the previous stage (NaN
  /// for the first stage).
  double previous_end_value = std::numeric_limits<double>::quiet_NaN();
  double end_value = 0.0;
  StageStatus status = StageStatus::max_iterations;
  std::vector<IterationRecord> history;
  int evaluations = 0;
};

struct OptimizationRun {
  std::vector<StageRecord> stages;
  std::vector<double> design;
  double final_value = 0.0;

  bool any_stage_failed() const {
    return std::any_of(stages.begin(), stages.end(),
                       [](const StageRecord& s) { return s.status == StageStatus::line_search_failure; });
  }
};

using ObjectiveFactory = std::function<Objective(double beta)>;
using StageIterationCallback = std::function<void(std::size_t stage, double beta, const IterationRecord&)>;

/// Runs one stage per beta, each warm-started from the previous result.
inline OptimizationRun run_continuation(const ObjectiveFactory& factory, std::vector<double> rho_init,
                                        const ContinuationSchedule& schedule, const OptimizerConfig& config,
                                        const StageIterationCallback& on_iteration = {}) {
  schedule.validate();
  const std::vector<double> lower(rho_init.size(), 0.0), upper(rho_init.size(), 1.0);
  OptimizationRun run;
  std::vector<double> rho = std::move(rho_init);
  double previous_end = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t s = 0; s < schedule.betas.size(); ++s) {
    const double beta = schedule.betas[s];
    const Objective objective = factory(beta);
    IterationCallback cb;
    if (on_iteration) cb = [&](const IterationRecord& r) { on_iteration(s, beta, r); };
    StageResult stage = minimize_stage(objective, rho, lower, upper, config, cb);
    StageRecord rec;
    rec.beta = beta;
    rec.start_value = stage.history.front().value;
    rec.previous_end_value = previous_end;
    rec.end_value = stage.value;
    rec.status = stage.status;
    rec.history = std::move(stage.history);
    rec.evaluations = stage.evaluations;
    run.stages.push_back(std::move(rec));
    rho = std::move(stage.x);
    previous_end = stage.value;
  }
  run.design = std::move(rho);
  run.final_value = previous_end;
  return run;
}

}  // namespace dissolve
