// Copyright 2026 The dissolve Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissolve/error.hpp"
#include "dissolve/filters.hpp"
#include "dissolve/gamma.hpp"
#include "dissolve/grid.hpp"
#include "dissolve/objective.hpp"
#include "dissolve/optimizer.hpp"
#include "dissolve/srom.hpp"

namespace dissolve {

using Json = nlohmann::json;

// ---------------------------------------------------------------- targets

enum class TargetKind { linear, pulsatile, table };

struct TargetSpec {
  TargetKind kind = TargetKind::linear;
  double end_time = 750.0;
  int points = 20;
  /// (time, normalized remaining mass) pairs; only used by the table kind.
  std::vector<std::pair<double, double>> breakpoints;
};

inline const std::vector<std::pair<double, double>>& pulsatile_breakpoints() {
  static const std::vector<std::pair<double, double>> bp{{0.0, 1.0}, {60.0, 0.6}, {210.0, 0.6}, {300.0, 0.0}};
  return bp;
}

namespace detail {

inline void check_breakpoints(const std::vector<std::pair<double, double>>& bp) {
  if (bp.size() < 2) throw Error(ErrorCode::invalid_target, "a table target needs at least two breakpoints");
  if (bp.front().first != 0.0) throw Error(ErrorCode::invalid_target, "the first breakpoint must be at t = 0");
  for (std::size_t i = 1; i < bp.size(); ++i) {
    if (!(bp[i].first > bp[i - 1].first)) {
      throw Error(ErrorCode::invalid_target, "breakpoint times must be strictly increasing");
    }
    if (bp[i].second > bp[i - 1].second) {
      throw Error(ErrorCode::invalid_target, "breakpoint values must be non-increasing");
    }
  }
}

inline double interpolate(const std::vector<std::pair<double, double>>& bp, double t) {
  if (t <= bp.front().first) return bp.front().second;
  for (std::size_t i = 1; i < bp.size(); ++i) {
    if (t <= bp[i].first) {
      const auto [t0, v0] = bp[i - 1];
      const auto [t1, v1] = bp[i];
      return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
    }
  }
  return bp.back().second;
}

}  // namespace detail

/// Breakpoints describing the continuous target curve of a spec.
inline std::vector<std::pair<double, double>> target_breakpoints(const TargetSpec& spec) {
  switch (spec.kind) {
    case TargetKind::linear:
      if (!(spec.end_time > 0.0)) throw Error(ErrorCode::invalid_target, "target end time must be positive");
      return {{0.0, 1.0}, {spec.end_time, 0.0}};
    case TargetKind::pulsatile:
      return pulsatile_breakpoints();
    case TargetKind::table:
      detail::check_breakpoints(spec.breakpoints);
      return spec.breakpoints;
  }
  return {};
}

/// The target curve at any time; it stays at its last value past the end.
inline double target_value(const TargetSpec& spec, double t) {
  return detail::interpolate(target_breakpoints(spec), t);
}

inline TargetProfile make_target(const TargetSpec& spec) {
  if (spec.points < 2) throw Error(ErrorCode::invalid_target, "a target needs at least two points");
  const auto bp = target_breakpoints(spec);
  const double end = bp.back().first;
  TargetProfile target;
  target.dt = end / (spec.points - 1);
  for (int i = 0; i < spec.points; ++i) {
    const double t = i + 1 == spec.points ? end : i * target.dt;
    target.times.push_back(t);
    target.values.push_back(detail::interpolate(bp, t));
  }
  target.validate();
  return target;
}

// ------------------------------------------------------------ run config

enum class RunMode { deterministic, robust };

struct RobustSettings {
  GammaPair gammas{GammaSpec{0.003, 1e-6}, GammaSpec{0.03, 1e-4}};
  SromConfig srom;
  double k = 0.0;
  EstimatorConvention convention = EstimatorConvention::weighted_mean;
  /// Optional SROM table to load instead of building a model.
  std::string table;
};

struct UncertaintySettings {
  int draws = 200;
  /// Window for the mean squared release difference, minutes.
  std::array<double, 2> msrd_interval{0.0, 750.0};
  /// Step of the evaluation grid on that window; 0 means the target spacing.
  double msrd_step = 0.0;
  double bandwidth = 0.0022;
};

struct RunConfig {
  int resolution = 128;
  Vec3 half_extent{2.35, 2.35, 6.25};
  CapsuleSpec capsule{};
  /// Speeds in mm/min, concentrations stored in mg/mm^3.
  MaterialPair materials{};
  TargetSpec target{};
  double d_max = 0.15;
  ContinuationSchedule schedule{};
  OptimizerConfig optimizer{};
  RunMode mode = RunMode::deterministic;
  RobustSettings robust{};
  UncertaintySettings uncertainty{};
  std::uint64_t seed = 1;
  std::string output = "out";

  void validate() const {
    if (resolution < 2) throw Error(ErrorCode::invalid_config, "resolution must be at least 2");
    for (double h : half_extent) {
      if (!(h > 0.0)) throw Error(ErrorCode::invalid_config, "grid half extents must be positive");
    }
    capsule.validate();
    materials.validate();
    make_target(target);
    if (!(d_max >= 0.0)) throw Error(ErrorCode::invalid_config, "filter.d_max must be non-negative");
    schedule.validate();
    optimizer.validate();
    if (mode == RunMode::robust) {
      for (const auto& g : robust.gammas) g.validate();
      robust.srom.validate();
      if (!(robust.k >= 0.0)) throw Error(ErrorCode::invalid_config, "robust.k must be non-negative");
    }
    if (uncertainty.draws < 2) throw Error(ErrorCode::invalid_config, "uncertainty.draws must be at least 2");
    if (!(uncertainty.msrd_interval[1] > uncertainty.msrd_interval[0])) {
      throw Error(ErrorCode::invalid_config, "uncertainty.msrd_interval must be increasing");
    }
    if (!(uncertainty.msrd_step >= 0.0) || !(uncertainty.bandwidth > 0.0)) {
      throw Error(ErrorCode::invalid_config, "uncertainty step and bandwidth must be positive");
    }
  }
};

namespace detail {

/// Reads one JSON object, remembering which keys were consumed so that
/// leftovers can be reported as unknown.
class ConfigReader {
 public:
  ConfigReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorCode::invalid_config, where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T required(const std::string& key) {
    if (!j_.contains(key)) throw Error(ErrorCode::invalid_config, "missing key '" + name(key) + "'");
    return get<T>(key);
  }

  template <class T>
  T optional(const std::string& key, T fallback) {
    return j_.contains(key) ? get<T>(key) : fallback;
  }

  ConfigReader child(const std::string& key) {
    if (!j_.contains(key)) throw Error(ErrorCode::invalid_config, "missing key '" + name(key) + "'");
    seen_.insert(key);
    return ConfigReader(j_.at(key), name(key));
  }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw Error(ErrorCode::invalid_config, "unknown key '" + name(item.key()) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "configuration" : "'" + path_ + "'"; }

  template <class T>
  T get(const std::string& key) {
    seen_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(ErrorCode::invalid_config, "key '" + name(key) + "' has the wrong type");
    }
  }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline GammaSpec read_gamma(ConfigReader r) {
  GammaSpec g{r.required<double>("mean"), r.required<double>("variance")};
  r.finish();
  return g;
}

}  // namespace detail

/// Concentrations in the file are mg/cm^3; they are stored as mg/mm^3.
inline RunConfig parse_run_config(const Json& j) {
  RunConfig cfg;
  detail::ConfigReader root(j, "");

  if (root.has("grid")) {
    auto g = root.child("grid");
    cfg.resolution = g.optional<int>("resolution", cfg.resolution);
    auto he = g.optional<std::vector<double>>("half_extent", {cfg.half_extent.begin(), cfg.half_extent.end()});
    if (he.size() != 3) throw Error(ErrorCode::invalid_config, "grid.half_extent needs three values");
    cfg.half_extent = {he[0], he[1], he[2]};
    g.finish();
  }
  if (root.has("capsule")) {
    auto c = root.child("capsule");
    cfg.capsule.radius = c.required<double>("radius");
    cfg.capsule.total_length = c.required<double>("total_length");
    c.finish();
  }
  {
    auto m = root.child("materials");
    cfg.materials.v1 = m.required<double>("v1");
    cfg.materials.v2 = m.required<double>("v2");
    cfg.materials.c1 = 1e-3 * m.required<double>("c1");
    cfg.materials.c2 = 1e-3 * m.required<double>("c2");
    m.finish();
  }
  {
    auto t = root.child("target");
    const auto kind = t.required<std::string>("kind");
    if (kind == "linear") {
      cfg.target.kind = TargetKind::linear;
      cfg.target.end_time = t.required<double>("end_time");
      cfg.target.points = t.required<int>("points");
    } else if (kind == "pulsatile") {
      cfg.target.kind = TargetKind::pulsatile;
      cfg.target.points = t.optional<int>("points", 16);
    } else if (kind == "table") {
      cfg.target.kind = TargetKind::table;
      cfg.target.breakpoints = t.required<std::vector<std::pair<double, double>>>("breakpoints");
      cfg.target.points = t.required<int>("points");
    } else {
      throw Error(ErrorCode::invalid_config, "target.kind must be linear, pulsatile or table");
    }
    t.finish();
  }
  {
    auto f = root.child("filter");
    cfg.d_max = f.required<double>("d_max");
    f.finish();
  }
  cfg.schedule.betas = root.optional<std::vector<double>>("betas", cfg.schedule.betas);
  if (root.has("optimizer")) {
    auto o = root.child("optimizer");
    auto& c = cfg.optimizer;
    c.memory = o.optional<int>("memory", c.memory);
    c.gradient_tolerance = o.optional<double>("gradient_tolerance", c.gradient_tolerance);
    c.relative_decrease_tolerance = o.optional<double>("relative_decrease_tolerance", c.relative_decrease_tolerance);
    c.decrease_window = o.optional<int>("decrease_window", c.decrease_window);
    c.max_iterations = o.optional<int>("max_iterations", c.max_iterations);
    c.initial_design = o.optional<double>("initial_design", c.initial_design);
    o.finish();
  }
  const auto mode = root.required<std::string>("mode");
  if (mode == "deterministic") {
    cfg.mode = RunMode::deterministic;
  } else if (mode == "robust") {
    cfg.mode = RunMode::robust;
  } else {
    throw Error(ErrorCode::invalid_config, "mode must be deterministic or robust");
  }
  if (root.has("robust")) {
    auto r = root.child("robust");
    auto& rs = cfg.robust;
    if (r.has("gammas")) {
      const Json& arr = r.raw("gammas");
      if (!arr.is_array() || arr.size() != 2) throw Error(ErrorCode::invalid_config, "robust.gammas needs two entries");
      for (int i = 0; i < 2; ++i) rs.gammas[i] = detail::read_gamma({arr[i], "robust.gammas[" + std::to_string(i) + "]"});
    }
    rs.k = r.optional<double>("k", rs.k);
    const auto conv = r.optional<std::string>("convention", "weighted_mean");
    if (conv == "weighted_mean") {
      rs.convention = EstimatorConvention::weighted_mean;
    } else if (conv == "scaled") {
      rs.convention = EstimatorConvention::scaled;
    } else {
      throw Error(ErrorCode::invalid_config, "robust.convention must be weighted_mean or scaled");
    }
    rs.table = r.optional<std::string>("table", "");
    if (r.has("srom")) {
      auto s = r.child("srom");
      auto& sc = rs.srom;
      sc.samples = s.optional<int>("samples", sc.samples);
      auto alpha = s.optional<std::vector<double>>("alpha", {sc.alpha.begin(), sc.alpha.end()});
      if (alpha.size() != 3) throw Error(ErrorCode::invalid_config, "robust.srom.alpha needs three values");
      sc.alpha = {alpha[0], alpha[1], alpha[2]};
      sc.sigma_factor = s.optional<double>("sigma_factor", sc.sigma_factor);
      sc.max_moment = s.optional<int>("max_moment", sc.max_moment);
      sc.starts = s.optional<int>("starts", sc.starts);
      sc.inner.max_iterations = s.optional<int>("max_iterations", sc.inner.max_iterations);
      s.finish();
    }
    r.finish();
  } else if (cfg.mode == RunMode::robust) {
    throw Error(ErrorCode::invalid_config, "missing key 'robust'");
  }
  if (root.has("uncertainty")) {
    auto u = root.child("uncertainty");
    auto& us = cfg.uncertainty;
    us.draws = u.optional<int>("draws", us.draws);
    auto iv = u.optional<std::vector<double>>("msrd_interval", {us.msrd_interval[0], us.msrd_interval[1]});
    if (iv.size() != 2) throw Error(ErrorCode::invalid_config, "uncertainty.msrd_interval needs two values");
    us.msrd_interval = {iv[0], iv[1]};
    us.msrd_step = u.optional<double>("msrd_step", us.msrd_step);
    us.bandwidth = u.optional<double>("bandwidth", us.bandwidth);
    u.finish();
  }
  cfg.seed = root.optional<std::uint64_t>("seed", cfg.seed);
  cfg.output = root.optional<std::string>("output", cfg.output);
  root.finish();
  cfg.validate();
  return cfg;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::invalid_config, path + ": " + e.what());
  }
}

inline RunConfig load_run_config(const std::string& path) { return parse_run_config(read_json_file(path)); }

/// Octant grid whose last node on each axis sits at the half extent.
inline GridSpec octant_grid(const RunConfig& cfg) {
  const auto n = static_cast<std::ptrdiff_t>(cfg.resolution);
  Vec3 spacing{};
  for (int a = 0; a < 3; ++a) spacing[a] = cfg.half_extent[a] / static_cast<double>(n - 1);
  return build_grid({n, n, n}, spacing, {0, 0, 0}, {true, true, true});
}

/// Number of mirrored copies an octant stands for.
inline double mirror_factor(const GridSpec& grid) {
  double f = 1.0;
  for (bool s : grid.symmetric) f *= s ? 2.0 : 1.0;
  return f;
}

inline DesignProblem make_problem(const RunConfig& cfg, const GridSpec& grid) {
  SignField sign = build_sign_field(grid, cfg.capsule);
  DensityFilter filter(grid, cfg.d_max, sign);
  return DesignProblem(grid, std::move(sign), std::move(filter), make_target(cfg.target), cfg.materials);
}

// ----------------------------------------------------------- design files

inline constexpr const char* kDesignFormat = "dissolve-design/1";

struct DesignFile {
  GridSpec grid;
  std::vector<float> values;
};

inline std::string design_sidecar(const std::string& path) { return path + ".json"; }

/// Raw little-endian float32 values in k-fastest order plus a JSON sidecar.
inline void write_design(const std::string& path, const GridSpec& grid, std::span<const double> values) {
  if (values.size() != grid.node_count()) {
    throw Error(ErrorCode::dimension_mismatch, "design length does not match the grid");
  }
  std::vector<std::uint32_t> bits(values.size());
  for (std::size_t p = 0; p < values.size(); ++p) {
    std::uint32_t b = std::bit_cast<std::uint32_t>(static_cast<float>(values[p]));
    if constexpr (std::endian::native == std::endian::big) b = __builtin_bswap32(b);
    bits[p] = b;
  }
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bits.data()), static_cast<std::streamsize>(bits.size() * 4));
    if (!out) throw Error(ErrorCode::io_failure, "failed writing " + path);
  }
  Json meta{{"format", kDesignFormat},
            {"dims", {grid.dims[0], grid.dims[1], grid.dims[2]}},
            {"spacing", {grid.spacing[0], grid.spacing[1], grid.spacing[2]}},
            {"origin", {grid.origin[0], grid.origin[1], grid.origin[2]}},
            {"symmetric", {grid.symmetric[0], grid.symmetric[1], grid.symmetric[2]}},
            {"order", "k-fastest"},
            {"dtype", "float32-le"}};
  std::ofstream side(design_sidecar(path));
  if (!side) throw Error(ErrorCode::io_failure, "cannot write " + design_sidecar(path));
  side << meta.dump(2) << '\n';
}

inline DesignFile read_design(const std::string& path) {
  const Json meta = read_json_file(design_sidecar(path));
  if (meta.value("format", "") != kDesignFormat) {
    throw Error(ErrorCode::io_failure, design_sidecar(path) + ": unsupported format");
  }
  DesignFile d;
  try {
    const auto dims = meta.at("dims").get<std::array<std::ptrdiff_t, 3>>();
    const auto spacing = meta.at("spacing").get<std::array<double, 3>>();
    const auto origin = meta.at("origin").get<std::array<double, 3>>();
    const auto sym = meta.at("symmetric").get<std::array<bool, 3>>();
    d.grid = build_grid(dims, spacing, origin, sym);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io_failure, design_sidecar(path) + ": " + e.what());
  }
  const std::size_t n = d.grid.node_count();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read " + path);
  std::vector<std::uint32_t> bits(n);
  in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(n * 4));
  if (static_cast<std::size_t>(in.gcount()) != n * 4 || in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::io_failure, path + ": expected " + std::to_string(n) + " float32 values");
  }
  d.values.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    std::uint32_t b = bits[p];
    if constexpr (std::endian::native == std::endian::big) b = __builtin_bswap32(b);
    d.values[p] = std::bit_cast<float>(b);
  }
  return d;
}

inline std::string dims_string(const Index3& d) {
  return std::to_string(d[0]) + "x" + std::to_string(d[1]) + "x" + std::to_string(d[2]);
}

/// Design values as doubles after checking they belong to `grid`.
inline std::vector<double> design_for_grid(const DesignFile& file, const GridSpec& grid) {
  if (file.grid.dims != grid.dims) {
    throw Error(ErrorCode::dimension_mismatch,
                "design has dims " + dims_string(file.grid.dims) + ", expected " + dims_string(grid.dims));
  }
  return {file.values.begin(), file.values.end()};
}

// ----------------------------------------------------------------- tables

/// Comma-separated table with a header row; numbers keep full precision.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path), path_(path) {
    if (!out_) throw Error(ErrorCode::io_failure, "cannot write " + path);
    out_.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  template <class... T>
  void row(const T&... cells) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << cells), ...);
    out_ << '\n';
    if (!out_) throw Error(ErrorCode::io_failure, "failed writing " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

/// Release table with whole-body masses in mg.
inline void write_release_csv(const std::string& path, const ReleaseProfile& profile, double mass_factor) {
  CsvWriter csv(path, {"t", "mass", "normalized"});
  for (std::size_t i = 0; i < profile.times.size(); ++i) {
    csv.row(profile.times[i], mass_factor * profile.mass[i], profile.normalized[i]);
  }
}

/// Reads one named column of a CSV with a header row.
inline std::vector<double> read_column(const std::string& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read " + path);
  std::string line;
  std::vector<double> out;
  std::ptrdiff_t index = -1;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (index < 0) {
      const auto it = std::find(cells.begin(), cells.end(), column);
      if (it == cells.end()) throw Error(ErrorCode::io_failure, path + ": no column '" + column + "'");
      index = it - cells.begin();
      continue;
    }
    if (static_cast<std::size_t>(index) >= cells.size()) throw Error(ErrorCode::io_failure, path + ": short row");
    try {
      out.push_back(std::stod(cells[static_cast<std::size_t>(index)]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::io_failure, path + ": bad number '" + cells[static_cast<std::size_t>(index)] + "'");
    }
  }
  return out;
}

}  // namespace dissolve
