// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dissolve/io.hpp"
#include "dissolve/objective.hpp"
#include "dissolve/optimizer.hpp"
#include "dissolve/srom.hpp"

namespace dissolve {

/// J(rho) at fixed beta, either at the nominal speeds or as the SROM
/// expectation (+ k std) over `robust`.
inline ObjectiveFactory design_objective(const DesignProblem& problem, const std::optional<RobustSpec>& robust,
                                         unsigned threads = 1) {
  return [&problem, robust, threads](double beta) -> Objective {
    if (!robust) {
      return [&problem, beta](std::span<const double> rho, std::span<double> grad) {
        const ObjectiveReport r = problem.evaluate(rho, beta);
        std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
        return r.J;
      };
    }
    return [&problem, spec = *robust, beta, threads](std::span<const double> rho, std::span<double> grad) {
      const SampleEvaluator eval = [&](std::span<const double> x, const MaterialPair& m) {
        return problem.evaluate(x, beta, m);
      };
      const RobustEvaluation r = robust_objective_and_gradient(rho, spec, problem.materials(), eval, threads);
      std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
      return r.value;
    };
  };
}

struct DesignOutcome {
  OptimizationRun run;
  /// Misfit of the uniform starting design at nominal speeds.
  double initial_J = 0.0;
  /// Misfit of the final design at the last beta and nominal speeds.
  double final_J = 0.0;
  std::vector<double> rho_bar;
  ReleaseProfile release;
};

inline DesignOutcome optimize_design(const DesignProblem& problem, const ContinuationSchedule& schedule,
                                     const OptimizerConfig& config, const std::optional<RobustSpec>& robust,
                                     unsigned threads = 1, const StageIterationCallback& on_iteration = {}) {
  DesignOutcome out;
  std::vector<double> rho(problem.size(), config.initial_design);
  out.initial_J = problem.evaluate(rho, schedule.betas.front(), false).J;
  out.run = run_continuation(design_objective(problem, robust, threads), std::move(rho), schedule, config,
                             on_iteration);
  const double beta = schedule.betas.back();
  const ObjectiveReport final_report = problem.evaluate(out.run.design, beta, false);
  out.final_J = final_report.J;
  out.release = final_report.profile;
  out.rho_bar = project_design(problem.filter(), HeavisideProjection{beta}, out.run.design).rho_bar;
  return out;
}

}  // namespace dissolve
