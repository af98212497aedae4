// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: optimize, simulate, uncertainty, kde, srom-build.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dissolve/io.hpp"
#include "dissolve/parallel.hpp"
#include "dissolve/pipeline.hpp"
#include "dissolve/srom.hpp"
#include "dissolve/uq.hpp"

namespace fs = std::filesystem;
using namespace dissolve;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  unsigned threads = default_thread_count();
  std::optional<int> resolution;
};

RunConfig load(const CommonOptions& o) {
  RunConfig cfg = load_run_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.output) cfg.output = *o.output;
  if (o.resolution) cfg.resolution = *o.resolution;
  cfg.validate();
  fs::create_directories(cfg.output);
  return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.output) / name).string(); }

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path);
  out << j.dump(2) << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Json gamma_json(const GammaSpec& g) { return {{"mean", g.mean}, {"variance", g.variance}}; }

SromModel obtain_srom(const RunConfig& cfg, Json& summary) {
  if (!cfg.robust.table.empty()) {
    summary["srom_table"] = cfg.robust.table;
    return read_srom_table(cfg.robust.table);
  }
  std::fprintf(stderr, "building SROM with %d samples\n", cfg.robust.srom.samples);
  SromBuild b = build_srom(cfg.robust.gammas, cfg.robust.srom, cfg.seed);
  if (b.warning) std::fprintf(stderr, "warning: SROM optimizer ended on a failed line search\n");
  write_srom_table(out_path(cfg, "srom.csv"), b.model);
  summary["srom_cost"] = b.cost.total;
  summary["srom_warning"] = b.warning;
  return b.model;
}

int cmd_optimize(const CommonOptions& o) {
  const RunConfig cfg = load(o);
  const auto t0 = std::chrono::steady_clock::now();
  Json summary{{"command", "optimize"},
               {"status", "running"},
               {"mode", cfg.mode == RunMode::robust ? "robust" : "deterministic"},
               {"resolution", cfg.resolution},
               {"seed", cfg.seed}};
  const std::string summary_path = out_path(cfg, "summary.json");
  try {
    const GridSpec grid = octant_grid(cfg);
    const DesignProblem problem = make_problem(cfg, grid);
    std::optional<RobustSpec> robust;
    if (cfg.mode == RunMode::robust) robust = RobustSpec{cfg.robust.k, obtain_srom(cfg, summary), cfg.robust.convention};

    CsvWriter log(out_path(cfg, "convergence.csv"), {"stage", "beta", "iteration", "J", "projected_gradient", "evaluations"});
    const auto on_iteration = [&](std::size_t stage, double beta, const IterationRecord& r) {
      log.row(stage, beta, r.iteration, r.value, r.projected_gradient, r.evaluations);
      std::fprintf(stderr, "stage %zu beta %g it %d J %.6e |pg| %.3e\n", stage, beta, r.iteration, r.value,
                   r.projected_gradient);
    };
    const DesignOutcome result = optimize_design(problem, cfg.schedule, cfg.optimizer, robust, o.threads, on_iteration);

    write_design(out_path(cfg, "design.f32"), grid, result.run.design);
    write_design(out_path(cfg, "filtered.f32"), grid, result.rho_bar);
    write_release_csv(out_path(cfg, "release.csv"), result.release, mirror_factor(grid));

    Json stages = Json::array();
    for (const auto& s : result.run.stages) {
      stages.push_back({{"beta", s.beta},
                        {"start_value", s.start_value},
                        {"previous_end_value", std::isnan(s.previous_end_value) ? Json() : Json(s.previous_end_value)},
                        {"end_value", s.end_value},
                        {"status", to_string(s.status)},
                        {"iterations", s.history.size() - 1},
                        {"evaluations", s.evaluations}});
    }
    summary["status"] = result.run.any_stage_failed() ? "completed-with-stage-failures" : "completed";
    summary["initial_J"] = result.initial_J;
    summary["final_J"] = result.final_J;
    summary["final_objective"] = result.run.final_value;
    summary["completion_time"] = result.release.completion_time;
    summary["stages"] = stages;
  } catch (const std::exception& e) {
    summary["status"] = "failed";
    summary["error"] = e.what();
    summary["seconds"] = seconds_since(t0);
    write_json(summary_path, summary);
    throw;
  }
  summary["seconds"] = seconds_since(t0);
  write_json(summary_path, summary);
  std::printf("final J %.6e (initial %.6e)\n", summary["final_J"].get<double>(), summary["initial_J"].get<double>());
  return 0;
}

/// Projected design field: raw designs go through the filter chain at the
/// last beta of the schedule.
std::vector<double> load_physical_design(const RunConfig& cfg, const DesignProblem& problem, const std::string& path,
                                         bool physical) {
  const std::vector<double> values = design_for_grid(read_design(path), problem.grid());
  if (physical) return values;
  return project_design(problem.filter(), HeavisideProjection{cfg.schedule.betas.back()}, values).rho_bar;
}

int cmd_simulate(const CommonOptions& o, const std::string& design, bool physical) {
  const RunConfig cfg = load(o);
  const GridSpec grid = octant_grid(cfg);
  const DesignProblem problem = make_problem(cfg, grid);
  const auto rho_bar = load_physical_design(cfg, problem, design, physical);
  const ReleaseProfile profile = problem.simulate_physical(rho_bar, cfg.materials, problem.target().times);
  write_release_csv(out_path(cfg, "release.csv"), profile, mirror_factor(grid));
  std::printf("completion time %.6g min, misfit %.6e\n", profile.completion_time,
              evaluate_misfit(problem.target(), profile));
  return 0;
}

int cmd_uncertainty(const CommonOptions& o, const std::string& design, bool physical, std::optional<int> draws) {
  RunConfig cfg = load(o);
  if (draws) cfg.uncertainty.draws = *draws;
  cfg.validate();
  const GridSpec grid = octant_grid(cfg);
  const DesignProblem problem = make_problem(cfg, grid);
  const auto rho_bar = load_physical_design(cfg, problem, design, physical);
  const auto& u = cfg.uncertainty;
  const auto times = window_times(u.msrd_interval, u.msrd_step > 0.0 ? u.msrd_step : problem.target().dt);
  const auto rates = draw_rates(cfg.robust.gammas, static_cast<std::size_t>(u.draws), cfg.seed);
  const UncertaintyResult r = run_uncertainty(problem, rho_bar, cfg.materials, rates, times, cfg.target, o.threads);

  CsvWriter bands(out_path(cfg, "bands.csv"), {"t", "q05", "q25", "q75", "q95"});
  for (std::size_t i = 0; i < times.size(); ++i) {
    bands.row(times[i], r.bands.q05[i], r.bands.q25[i], r.bands.q75[i], r.bands.q95[i]);
  }
  CsvWriter samples(out_path(cfg, "msrd.csv"), {"draw", "v1", "v2", "msrd", "completion_time"});
  for (std::size_t d = 0; d < rates.size(); ++d) {
    samples.row(d, rates[d].v1, rates[d].v2, r.msrd[d], r.completion_time[d]);
  }
  const ReleaseProfile ideal = problem.simulate_physical(rho_bar, cfg.materials, times);
  write_release_csv(out_path(cfg, "release_ideal.csv"), ideal, mirror_factor(grid));

  double mean = 0.0;
  for (double m : r.msrd) mean += m / static_cast<double>(r.msrd.size());
  write_json(out_path(cfg, "uncertainty.json"),
             {{"draws", u.draws},
              {"seed", cfg.seed},
              {"gammas", {gamma_json(cfg.robust.gammas[0]), gamma_json(cfg.robust.gammas[1])}},
              {"msrd_interval", {u.msrd_interval[0], u.msrd_interval[1]}},
              {"mean_msrd", mean},
              {"ideal_msrd", msrd(times, ideal.normalized, cfg.target)}});
  std::printf("mean MSRD %.6e over %d draws\n", mean, u.draws);
  return 0;
}

// The config is optional here; it only supplies the bandwidth and the
// output directory.
int cmd_kde(const CommonOptions& o, const std::string& input, const std::string& column,
            std::optional<double> bandwidth, std::size_t points) {
  std::string dir = o.output.value_or(".");
  double w = 0.0022;
  if (!o.config.empty()) {
    const RunConfig cfg = load(o);
    dir = cfg.output;
    w = cfg.uncertainty.bandwidth;
  }
  if (bandwidth) w = *bandwidth;
  fs::create_directories(dir);
  const auto samples = read_column(input, column);
  const MsrdDensity d = gaussian_kde(samples, w, points);
  CsvWriter csv((fs::path(dir) / "kde.csv").string(), {"x", "density"});
  for (std::size_t i = 0; i < d.x.size(); ++i) csv.row(d.x[i], d.density[i]);
  std::printf("density of %zu samples, bandwidth %g\n", samples.size(), w);
  return 0;
}

int cmd_srom_build(const CommonOptions& o) {
  const RunConfig cfg = load(o);
  const auto t0 = std::chrono::steady_clock::now();
  const SromBuild b = build_srom(cfg.robust.gammas, cfg.robust.srom, cfg.seed);
  write_srom_table(out_path(cfg, "srom.csv"), b.model);
  Json marginals = Json::array();
  for (int i = 0; i < 2; ++i) {
    const auto& g = cfg.robust.gammas[i];
    std::vector<double> x(b.model.samples[i]), x2(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) x2[k] = x[k] * x[k];
    marginals.push_back({{"gamma", gamma_json(g)},
                         {"ks_distance", srom_marginal_ks(b.model, i, g)},
                         {"mean", srom_expectation(x, b.model)},
                         {"second_moment", srom_expectation(x2, b.model)},
                         {"target_mean", gamma_raw_moment(1, g)},
                         {"target_second_moment", gamma_raw_moment(2, g)}});
  }
  write_json(out_path(cfg, "srom.json"), {{"samples", b.model.size()},
                                          {"seed", cfg.seed},
                                          {"cost", {{"total", b.cost.total}, {"h1", b.cost.h1}, {"h2", b.cost.h2}, {"h3", b.cost.h3}}},
                                          {"warning", b.warning},
                                          {"marginals", marginals},
                                          {"seconds", seconds_since(t0)}});
  std::printf("SROM cost %.3e (h1 %.3e h2 %.3e h3 %.3e)\n", b.cost.total, b.cost.h1, b.cost.h2, b.cost.h3);
  return 0;
}

void add_common(CLI::App* sub, CommonOptions& o, bool config_required = true) {
  auto* config = sub->add_option("--config", o.config, "run configuration (JSON)")->check(CLI::ExistingFile);
  if (config_required) config->required();
  sub->add_option("--seed", o.seed, "random seed, overrides the config");
  sub->add_option("--output", o.output, "output directory, overrides the config");
  sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--resolution", o.resolution, "octant nodes per axis (default 128)")->check(CLI::Range(2, 4096));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-material dissolution design toolkit"};
  app.require_subcommand(1);

  CommonOptions common;
  std::string design;
  bool physical = false;
  std::optional<int> draws;

  auto* optimize = app.add_subcommand("optimize", "optimize a design against the configured target");
  add_common(optimize, common);

  auto* simulate = app.add_subcommand("simulate", "release profile of a design at nominal speeds");
  add_common(simulate, common);
  simulate->add_option("--design", design, "design file (.f32 with .json sidecar)")->required();
  simulate->add_flag("--physical", physical, "design holds projected densities");

  auto* uncertainty = app.add_subcommand("uncertainty", "Monte-Carlo release bands and MSRD samples");
  add_common(uncertainty, common);
  uncertainty->add_option("--design", design, "design file (.f32 with .json sidecar)")->required();
  uncertainty->add_flag("--physical", physical, "design holds projected densities");
  uncertainty->add_option("--draws", draws, "number of draws, overrides the config")->check(CLI::Range(2, 1 << 24));

  std::string kde_input, kde_column = "msrd";
  std::optional<double> bandwidth;
  std::size_t kde_points = 512;
  auto* kde = app.add_subcommand("kde", "Gaussian kernel density estimate of MSRD samples");
  add_common(kde, common, false);
  kde->add_option("--input", kde_input, "CSV with a header row")->required()->check(CLI::ExistingFile);
  kde->add_option("--column", kde_column, "column to read (default msrd)");
  kde->add_option("--bandwidth", bandwidth, "kernel bandwidth, overrides the config")->check(CLI::PositiveNumber);
  kde->add_option("--points", kde_points, "evaluation points (default 512)")->check(CLI::Range(2, 1 << 20));

  auto* srom = app.add_subcommand("srom-build", "fit and export a stochastic reduced-order model");
  add_common(srom, common);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*optimize) return cmd_optimize(common);
    if (*simulate) return cmd_simulate(common, design, physical);
    if (*uncertainty) return cmd_uncertainty(common, design, physical, draws);
    if (*kde) return cmd_kde(common, kde_input, kde_column, bandwidth, kde_points);
    if (*srom) return cmd_srom_build(common);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
