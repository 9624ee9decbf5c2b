// Copyright 2026 The zodiac-pb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zodiac/errors.hpp"
#include "zodiac/estimator.hpp"
#include "zodiac/format.hpp"
#include "zodiac/optimizer.hpp"
#include "zodiac/problems.hpp"
#include "zodiac/topology.hpp"

namespace zodiac::harness {

namespace fs = std::filesystem;

enum class Preset { kNone, kPaperSigmoid, kDeskSigmoid, kRateSweep, kAttackDesk };

inline Preset parse_preset(std::string_view name) {
  if (name.empty() || name == "none") return Preset::kNone;
  if (name == "paper-sigmoid") return Preset::kPaperSigmoid;
  if (name == "desk-sigmoid") return Preset::kDeskSigmoid;
  if (name == "rate-sweep") return Preset::kRateSweep;
  if (name == "attack-desk") return Preset::kAttackDesk;
  throw std::invalid_argument("unknown preset: " + std::string(name));
}

struct ProblemSpec {
  ProblemKind kind = ProblemKind::kSyntheticNonconvex;
  std::size_t n_agents = 8;
  std::size_t dim = 16;
  // sigmoid_ls
  std::size_t samples_per_agent = 200;
  std::size_t test_size = 10000;
  std::string dataset_path;  // import instead of generating
  // synthetic_nonconvex
  double heterogeneity = 1.0;
  SyntheticOptions synthetic;
  // attack_surrogate
  std::size_t n_classes = 10;
  double c_penalty = 1.0;
  std::size_t images_per_agent = 4;
};

struct TopologySpec {
  std::string kind = "er";  // er | path | complete | cycle | star
  double er_prob = 0.4;
  std::uint64_t seed = 1;
};

struct ExperimentConfig {
  Preset preset = Preset::kNone;
  ProblemSpec problem;
  TopologySpec topology;
  DifferenceMode mode = DifferenceMode::kCentral;
  std::size_t n_c = 4;
  double gamma = 0.6;
  std::int64_t T = 2000;
  std::int64_t record_every = 1;
  std::vector<std::uint64_t> seeds{1};
  std::vector<std::int64_t> sweep_T{2000, 8000, 32000};
  std::string out_dir = "out";
  ParamMargins margins;
  bool paper_delta = false;
  InitMode init = InitMode::kNormal;
  std::string salt;
  std::size_t threads = 1;
  bool wall_clock = false;

  void validate() const {
    if (seeds.empty()) throw std::invalid_argument("config: seeds must be nonempty");
    if (T < 1) throw std::invalid_argument("config: T must be positive");
    if (record_every < 1) throw std::invalid_argument("config: record-every must be >= 1");
    if (problem.n_agents < 2) throw std::invalid_argument("config: need at least 2 agents");
    EstimatorConfig{problem.dim, n_c, mode}.validate();
    PowerballGamma{gamma};
  }
};

inline ExperimentConfig preset_config(Preset preset) {
  ExperimentConfig c;
  c.preset = preset;
  switch (preset) {
    case Preset::kNone:
      break;
    case Preset::kPaperSigmoid:
      c.problem.kind = ProblemKind::kSigmoidLs;
      c.problem.n_agents = 500;
      c.problem.dim = 100;
      c.problem.samples_per_agent = 200;
      c.problem.test_size = 10000;
      c.topology.er_prob = 1.01 * std::log(500.0) / 500.0;
      c.T = 500;
      c.n_c = 100;
      c.record_every = 10;
      c.paper_delta = true;
      c.margins.enforce_horizon = false;  // 500 < 500^3/100
      break;
    case Preset::kDeskSigmoid:
      c.problem.kind = ProblemKind::kSigmoidLs;
      c.problem.n_agents = 20;
      c.problem.dim = 20;
      c.problem.samples_per_agent = 200;
      c.problem.test_size = 10000;
      c.topology.er_prob = 1.01 * std::log(20.0) / 20.0;
      c.T = 500;
      c.n_c = 20;
      c.record_every = 1;
      c.seeds = {1, 2, 3, 4, 5};
      c.paper_delta = true;
      break;
    case Preset::kRateSweep:
      c.problem.kind = ProblemKind::kSyntheticNonconvex;
      c.problem.n_agents = 8;
      c.problem.dim = 16;
      c.problem.synthetic.kappa_nc = 0.75;  // Hessian diagonal spans [-0.5, 2.5]
      c.topology.er_prob = 0.8;
      c.n_c = 4;
      c.record_every = 1;
      c.seeds = {1, 2, 3, 4, 5};
      c.sweep_T = {2000, 8000, 32000};
      c.T = 2000;
      break;
    case Preset::kAttackDesk:
      c.problem.kind = ProblemKind::kAttackSurrogate;
      c.problem.n_agents = 10;
      c.problem.dim = 64;
      c.problem.n_classes = 10;
      c.problem.c_penalty = 1.0;
      c.problem.images_per_agent = 4;
      c.topology.er_prob = 0.4;
      c.n_c = 8;
      c.T = 2000;
      c.record_every = 10;
      c.seeds = {1, 2, 3};
      break;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Settings: flat key=value pairs shared by config files and the CLI

using Settings = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t\r") - first + 1);
}

inline std::uint64_t parse_uint(std::string_view key, std::string_view text) {
  std::uint64_t value = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || end != text.data() + text.size()) {
    throw std::invalid_argument(std::string(key) + ": expected a nonnegative integer, got '" + std::string(text) + "'");
  }
  return value;
}

inline double parse_real(std::string_view key, std::string_view text) {
  try {
    return parse_double(text);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  }
}

inline bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw std::invalid_argument(std::string(key) + ": expected a boolean, got '" + std::string(text) + "'");
}

// "3" | "1,2,7" | "1..5"
inline std::vector<std::uint64_t> parse_uint_list(std::string_view key, std::string_view text) {
  std::vector<std::uint64_t> out;
  if (const auto dots = text.find(".."); dots != std::string_view::npos) {
    const std::uint64_t lo = parse_uint(key, trim(text.substr(0, dots)));
    const std::uint64_t hi = parse_uint(key, trim(text.substr(dots + 2)));
    if (hi < lo) throw std::invalid_argument(std::string(key) + ": empty range");
    for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = trim(text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    out.push_back(parse_uint(key, piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string normalize_key(std::string_view key) {
  std::string k(trim(key));
  for (char& c : k) c = c == '_' ? '-' : c;
  return k;
}

}  // namespace detail

/// Reads "key = value" lines. Blank lines and lines starting with '#' are
/// skipped; keys accept '-' or '_'.
inline Settings parse_settings(std::istream& in) {
  Settings out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view text = detail::trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " + std::to_string(number) + ": expected key=value");
    }
    std::string key = detail::normalize_key(text.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), std::string(detail::trim(text.substr(eq + 1))));
  }
  return out;
}

/// Applies one setting on top of the current config. "preset" is handled by
/// resolve_config and rejected here.
inline void apply_setting(ExperimentConfig& c, std::string_view raw_key, std::string_view raw_value) {
  const std::string key = detail::normalize_key(raw_key);
  const std::string_view v = detail::trim(raw_value);
  using detail::parse_bool;
  using detail::parse_real;
  using detail::parse_uint;
  if (key == "problem") {
    c.problem.kind = parse_problem_kind(v);
  } else if (key == "n-agents") {
    c.problem.n_agents = parse_uint(key, v);
  } else if (key == "dim") {
    c.problem.dim = parse_uint(key, v);
  } else if (key == "samples-per-agent") {
    c.problem.samples_per_agent = parse_uint(key, v);
  } else if (key == "test-size") {
    c.problem.test_size = parse_uint(key, v);
  } else if (key == "dataset") {
    c.problem.dataset_path = std::string(v);
  } else if (key == "heterogeneity") {
    c.problem.heterogeneity = parse_real(key, v);
  } else if (key == "kappa-nc") {
    c.problem.synthetic.kappa_nc = parse_real(key, v);
  } else if (key == "zeta") {
    c.problem.synthetic.zeta = parse_real(key, v);
  } else if (key == "pool-size") {
    c.problem.synthetic.pool_size = parse_uint(key, v);
  } else if (key == "n-classes") {
    c.problem.n_classes = parse_uint(key, v);
  } else if (key == "c-penalty") {
    c.problem.c_penalty = parse_real(key, v);
  } else if (key == "images-per-agent") {
    c.problem.images_per_agent = parse_uint(key, v);
  } else if (key == "topology") {
    if (v != "er") parse_graph_kind(v);
    c.topology.kind = std::string(v);
  } else if (key == "er-prob") {
    c.topology.er_prob = parse_real(key, v);
  } else if (key == "topology-seed") {
    c.topology.seed = parse_uint(key, v);
  } else if (key == "gamma") {
    c.gamma = parse_real(key, v);
  } else if (key == "nc") {
    c.n_c = parse_uint(key, v);
  } else if (key == "mode") {
    c.mode = parse_difference_mode(v);
  } else if (key == "t") {
    c.T = static_cast<std::int64_t>(parse_uint(key, v));
  } else if (key == "sweep-t") {
    c.sweep_T.clear();
    for (std::uint64_t t : detail::parse_uint_list(key, v)) c.sweep_T.push_back(static_cast<std::int64_t>(t));
  } else if (key == "seeds") {
    c.seeds = detail::parse_uint_list(key, v);
  } else if (key == "record-every") {
    c.record_every = static_cast<std::int64_t>(parse_uint(key, v));
  } else if (key == "paper-delta") {
    c.paper_delta = parse_bool(key, v);
  } else if (key == "out") {
    c.out_dir = std::string(v);
  } else if (key == "kappa1-margin") {
    c.margins.kappa1_margin = parse_real(key, v);
  } else if (key == "kappa2-frac") {
    c.margins.kappa2_frac = parse_real(key, v);
  } else if (key == "kappa-delta") {
    c.margins.kappa_delta = parse_real(key, v);
  } else if (key == "enforce-horizon") {
    c.margins.enforce_horizon = parse_bool(key, v);
  } else if (key == "init") {
    if (v == "normal") {
      c.init = InitMode::kNormal;
    } else if (v == "zeros") {
      c.init = InitMode::kZeros;
    } else {
      throw std::invalid_argument("init: expected normal or zeros, got '" + std::string(v) + "'");
    }
  } else if (key == "salt") {
    c.salt = std::string(v);
  } else if (key == "threads") {
    c.threads = parse_uint(key, v);
  } else if (key == "wall-clock") {
    c.wall_clock = parse_bool(key, v);
  } else {
    throw std::invalid_argument("unknown setting: " + key);
  }
}

/// The last "preset" entry selects the base config; every other entry is
/// then applied in order, so later entries win.
inline ExperimentConfig resolve_config(const Settings& settings) {
  Preset preset = Preset::kNone;
  for (const auto& [key, value] : settings) {
    if (detail::normalize_key(key) == "preset") preset = parse_preset(detail::trim(value));
  }
  ExperimentConfig c = preset_config(preset);
  for (const auto& [key, value] : settings) {
    if (detail::normalize_key(key) != "preset") apply_setting(c, key, value);
  }
  return c;
}

// ---------------------------------------------------------------------------
// Construction

inline std::unique_ptr<OracleProblem> build_problem(const ProblemSpec& spec, std::uint64_t seed) {
  switch (spec.kind) {
    case ProblemKind::kSigmoidLs: {
      if (!spec.dataset_path.empty()) {
        std::ifstream in(spec.dataset_path);
        if (!in) throw std::invalid_argument("cannot open dataset " + spec.dataset_path);
        return std::make_unique<SigmoidLeastSquares>(read_sigmoid_dataset_csv(in));
      }
      return std::make_unique<SigmoidLeastSquares>(
          make_sigmoid_ls(spec.n_agents, spec.samples_per_agent, spec.dim, spec.test_size, seed));
    }
    case ProblemKind::kSyntheticNonconvex:
      return std::make_unique<SyntheticNonconvex>(
          make_synthetic_nonconvex(spec.n_agents, spec.dim, spec.heterogeneity, seed, spec.synthetic));
    case ProblemKind::kAttackSurrogate:
      return std::make_unique<AttackSurrogate>(make_attack_surrogate(
          spec.n_agents, spec.dim, spec.n_classes, spec.c_penalty, seed, spec.images_per_agent));
    case ProblemKind::kCustom:
      break;
  }
  throw std::invalid_argument("build_problem: unsupported problem kind");
}

inline Topology build_topology(const TopologySpec& spec, std::size_t n) {
  if (spec.kind == "er") return erdos_renyi(n, spec.er_prob, spec.seed);
  return fixture_graph(parse_graph_kind(spec.kind), n);
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kCsvHeader =
    "k,mean_loss,stat_sq,stat_1pg_sq,consensus_err,subopt,oracle_calls,test_acc,wall_ms";

inline std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string text(kCsvHeader);
  text += '\n';
  for (const auto& r : rows) {
    text += std::to_string(r.k);
    for (double value : {r.mean_loss, r.stat_sq, r.stat_1pg_sq, r.consensus_err, r.subopt}) {
      text += ',';
      text += format_double(value);
    }
    text += ',';
    text += std::to_string(r.oracle_calls);
    text += ',';
    text += format_double(r.test_acc);
    text += ',';
    text += format_double(r.wall_ms);
    text += '\n';
  }
  return text;
}

// Per-k arithmetic mean across runs; all runs must share the same k grid.
inline std::vector<MetricsRow> summarize(const std::vector<std::vector<MetricsRow>>& runs) {
  if (runs.empty()) throw std::invalid_argument("summarize: no runs");
  std::vector<MetricsRow> out(runs.front().size());
  const double count = static_cast<double>(runs.size());
  for (std::size_t r = 0; r < out.size(); ++r) {
    MetricsRow& s = out[r];
    s = MetricsRow{};
    s.k = runs.front()[r].k;
    s.test_acc = 0.0;
    double calls = 0.0;
    for (const auto& run : runs) {
      if (run.size() != out.size() || run[r].k != s.k) throw std::invalid_argument("summarize: mismatched rows");
      s.mean_loss += run[r].mean_loss;
      s.stat_sq += run[r].stat_sq;
      s.stat_1pg_sq += run[r].stat_1pg_sq;
      s.consensus_err += run[r].consensus_err;
      s.subopt += run[r].subopt;
      s.test_acc += run[r].test_acc;
      s.wall_ms += run[r].wall_ms;
      calls += static_cast<double>(run[r].oracle_calls);
    }
    s.mean_loss /= count;
    s.stat_sq /= count;
    s.stat_1pg_sq /= count;
    s.consensus_err /= count;
    s.subopt /= count;
    s.test_acc /= count;
    s.wall_ms /= count;
    s.oracle_calls = static_cast<std::uint64_t>(std::llround(calls / count));
  }
  return out;
}

inline void write_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Rate fitting

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log T, log metric)
};

// Ordinary least squares of log(metric) on log(T).
inline RateFit rate_fit(const std::vector<std::pair<double, double>>& runs) {
  if (runs.size() < 3) throw std::invalid_argument("rate_fit: need at least 3 horizons");
  RateFit fit;
  double mx = 0.0, my = 0.0;
  for (const auto& [t, metric] : runs) {
    if (!(t > 0.0)) throw std::invalid_argument("rate_fit: horizons must be positive");
    if (!(metric > 0.0)) throw std::invalid_argument("rate_fit: metric must be positive");
    fit.points.emplace_back(std::log(t), std::log(metric));
    mx += fit.points.back().first;
    my += fit.points.back().second;
  }
  const double m = static_cast<double>(runs.size());
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [lx, ly] : fit.points) {
    sxx += (lx - mx) * (lx - mx);
    sxy += (lx - mx) * (ly - my);
    syy += (ly - my) * (ly - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("rate_fit: horizons must differ");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& [lx, ly] : fit.points) {
    const double e = ly - (fit.intercept + fit.slope * lx);
    ss_res += e * e;
  }
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return fit;
}

// ---------------------------------------------------------------------------
// Experiments

struct SeedRun {
  std::uint64_t seed = 0;
  RunRecord record;
};

struct SweepResult {
  std::vector<SeedRun> runs;
  std::vector<MetricsRow> summary;
};

inline EstimatorConfig estimator_config(const ExperimentConfig& config) {
  return EstimatorConfig{config.problem.dim, config.n_c, config.mode};
}

inline AlgoParams experiment_params(const ExperimentConfig& config, const Topology& topology, std::int64_t T,
                                    double gamma) {
  AlgoParams params = derive_params(topology, config.problem.dim, T, gamma, config.margins);
  if (config.paper_delta) params.constant_delta = benchmark_delta(T, config.problem.dim);
  return params;
}

// One distributed run per seed with the given gamma and horizon. The data
// seed equals the run seed; the topology is shared.
inline SweepResult run_seeds(const ExperimentConfig& config, const Topology& topology, double gamma,
                             std::int64_t T) {
  SweepResult result;
  const AlgoParams params = experiment_params(config, topology, T, gamma);
  RunOptions options;
  options.init = InitOptions{config.init, config.salt};
  options.exec.threads = config.threads;
  options.measure_wall_clock = config.wall_clock;
  std::vector<std::vector<MetricsRow>> all;
  for (std::uint64_t seed : config.seeds) {
    const auto problem = build_problem(config.problem, seed);
    if (problem->n_agents() != topology.n()) {
      throw std::invalid_argument("problem has " + std::to_string(problem->n_agents()) + " agents, topology has " +
                                  std::to_string(topology.n()));
    }
    SeedRun run{seed, zodiac::run(*problem, topology, params, estimator_config(config), T, seed,
                                  config.record_every, options)};
    all.push_back(run.record.rows);
    result.runs.push_back(std::move(run));
  }
  result.summary = summarize(all);
  return result;
}

inline void write_sweep(const fs::path& dir, const SweepResult& sweep) {
  for (const auto& run : sweep.runs) {
    write_file(dir / ("seed_" + std::to_string(run.seed) + ".csv"), metrics_csv(run.record.rows));
  }
  write_file(dir / "summary.csv", metrics_csv(sweep.summary));
}

inline void write_topology(const fs::path& dir, const Topology& topology) {
  std::ostringstream edges;
  write_edge_list(topology, edges);
  write_file(dir / "topology.edges", edges.str());
}

// First recorded k with mean_loss <= target, or -1.
inline std::int64_t first_reaching(const std::vector<MetricsRow>& rows, double target) {
  for (const auto& r : rows) {
    if (r.mean_loss <= target) return r.k;
  }
  return -1;
}

struct BenchmarkOutcome {
  std::uint64_t seed = 0;
  double pb_final_loss = 0.0;
  double baseline_final_loss = 0.0;
  double pb_final_acc = 0.0;
  double baseline_final_acc = 0.0;
  std::int64_t pb_hit = -1;        // first k where PB loss <= baseline final loss
  std::int64_t baseline_hit = -1;  // first k where baseline loss <= its own final loss
};

struct BenchmarkResult {
  SweepResult powerball;
  SweepResult baseline;
  std::vector<BenchmarkOutcome> outcomes;
};

/// Powerball (config.gamma) against the gamma = 1 baseline with matched seeds.
inline BenchmarkResult benchmark_sigmoid(const ExperimentConfig& config, const Topology& topology) {
  if (config.problem.kind != ProblemKind::kSigmoidLs) {
    throw std::invalid_argument("benchmark_sigmoid: problem must be sigmoid_ls");
  }
  BenchmarkResult result;
  result.powerball = run_seeds(config, topology, config.gamma, config.T);
  result.baseline = run_seeds(config, topology, 1.0, config.T);
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    const auto& pb = result.powerball.runs[s].record.rows;
    const auto& base = result.baseline.runs[s].record.rows;
    BenchmarkOutcome o;
    o.seed = config.seeds[s];
    o.pb_final_loss = pb.back().mean_loss;
    o.baseline_final_loss = base.back().mean_loss;
    o.pb_final_acc = pb.back().test_acc;
    o.baseline_final_acc = base.back().test_acc;
    o.pb_hit = first_reaching(pb, o.baseline_final_loss);
    o.baseline_hit = first_reaching(base, o.baseline_final_loss);
    result.outcomes.push_back(o);
  }
  return result;
}

inline std::string benchmark_csv(const std::vector<BenchmarkOutcome>& outcomes) {
  std::string text = "algorithm,seed,final_loss,final_test_acc,k_reach_baseline_final\n";
  for (const auto& o : outcomes) {
    text += "zodiac_pb," + std::to_string(o.seed) + ',' + format_double(o.pb_final_loss) + ',' +
            format_double(o.pb_final_acc) + ',' + std::to_string(o.pb_hit) + '\n';
    text += "zodiac," + std::to_string(o.seed) + ',' + format_double(o.baseline_final_loss) + ',' +
            format_double(o.baseline_final_acc) + ',' + std::to_string(o.baseline_hit) + '\n';
  }
  return text;
}

struct RateSweepResult {
  std::vector<std::int64_t> horizons;
  std::vector<SweepResult> sweeps;
  std::vector<double> stationarity;  // seed-averaged (1/T) sum_k ||grad f||_{1+gamma}^2
  std::vector<double> consensus;     // seed-averaged (1/T) sum_k consensus_err
  RateFit stationarity_fit;
  RateFit consensus_fit;
};

inline RateSweepResult rate_sweep(const ExperimentConfig& config, const Topology& topology) {
  RateSweepResult result;
  std::vector<std::pair<double, double>> stat_points, cons_points;
  for (std::int64_t T : config.sweep_T) {
    SweepResult sweep = run_seeds(config, topology, config.gamma, T);
    double stat = 0.0, cons = 0.0;
    for (const auto& run : sweep.runs) {
      stat += time_average(run.record.rows, T, [](const MetricsRow& r) { return r.stat_1pg_sq; });
      cons += time_average(run.record.rows, T, [](const MetricsRow& r) { return r.consensus_err; });
    }
    stat /= static_cast<double>(sweep.runs.size());
    cons /= static_cast<double>(sweep.runs.size());
    result.horizons.push_back(T);
    result.stationarity.push_back(stat);
    result.consensus.push_back(cons);
    stat_points.emplace_back(static_cast<double>(T), stat);
    cons_points.emplace_back(static_cast<double>(T), cons);
    result.sweeps.push_back(std::move(sweep));
  }
  result.stationarity_fit = rate_fit(stat_points);
  result.consensus_fit = rate_fit(cons_points);
  return result;
}

inline std::string rate_csv(const RateSweepResult& r) {
  std::string text = "T,stat_1pg_sq_avg,consensus_err_avg\n";
  for (std::size_t i = 0; i < r.horizons.size(); ++i) {
    text += std::to_string(r.horizons[i]) + ',' + format_double(r.stationarity[i]) + ',' +
            format_double(r.consensus[i]) + '\n';
  }
  text += "\nmetric,slope,intercept,r_squared\n";
  text += "stat_1pg_sq," + format_double(r.stationarity_fit.slope) + ',' + format_double(r.stationarity_fit.intercept) +
          ',' + format_double(r.stationarity_fit.r_squared) + '\n';
  text += "consensus_err," + format_double(r.consensus_fit.slope) + ',' + format_double(r.consensus_fit.intercept) +
          ',' + format_double(r.consensus_fit.r_squared) + '\n';
  return text;
}

struct AttackOutcome {
  std::string algorithm;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  double distortion = 0.0;
  double success_rate = 0.0;
};

struct AttackResult {
  SweepResult powerball;
  SweepResult baseline;
  std::vector<SeedRun> zo_sgd;
  std::vector<SeedRun> zo_scd;
  std::vector<AttackOutcome> outcomes;
};

/// Distributed powerball vs gamma = 1, plus the centralized ZO-SGD / ZO-SCD
/// loops run with the distributed step size and a fixed delta of 0.01.
inline AttackResult attack_benchmark(const ExperimentConfig& config, const Topology& topology) {
  if (config.problem.kind != ProblemKind::kAttackSurrogate) {
    throw std::invalid_argument("attack_benchmark: problem must be attack_surrogate");
  }
  AttackResult result;
  result.powerball = run_seeds(config, topology, config.gamma, config.T);
  result.baseline = run_seeds(config, topology, 1.0, config.T);
  const AlgoParams params = experiment_params(config, topology, config.T, 1.0);
  RunOptions options;
  options.init = InitOptions{config.init, config.salt};
  options.measure_wall_clock = config.wall_clock;
  constexpr double kBaselineDelta = 0.01;
  auto summarize_final = [&](const std::string& name, std::uint64_t seed, const OracleProblem& problem,
                             const RunRecord& record) {
    const auto* attack = dynamic_cast<const AttackSurrogate*>(&problem);
    const Eigen::VectorXd mean = record.final_state.x.colwise().mean().transpose();
    result.outcomes.push_back(AttackOutcome{name, seed, record.rows.back().mean_loss, attack->mean_distortion(mean),
                                            attack->success_rate(mean)});
  };
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    const std::uint64_t seed = config.seeds[s];
    const auto problem = build_problem(config.problem, seed);
    summarize_final("zodiac_pb", seed, *problem, result.powerball.runs[s].record);
    summarize_final("zodiac", seed, *problem, result.baseline.runs[s].record);
    for (BaselineAlgo algo : {BaselineAlgo::kZoSgd, BaselineAlgo::kZoScd}) {
      SeedRun run{seed, run_centralized_baseline(*problem, algo, config.T, params.eta, kBaselineDelta, seed,
                                                 config.record_every, options)};
      summarize_final(to_string(algo), seed, *problem, run.record);
      (algo == BaselineAlgo::kZoSgd ? result.zo_sgd : result.zo_scd).push_back(std::move(run));
    }
  }
  return result;
}

inline std::string attack_csv(const std::vector<AttackOutcome>& outcomes) {
  std::string text = "algorithm,seed,final_loss,l2_distortion_sq,success_rate\n";
  for (const auto& o : outcomes) {
    text += o.algorithm + ',' + std::to_string(o.seed) + ',' + format_double(o.final_loss) + ',' +
            format_double(o.distortion) + ',' + format_double(o.success_rate) + '\n';
  }
  return text;
}

/// Runs whatever the config describes and writes every CSV under out_dir.
/// Returns a one-line human summary.
inline std::string execute(const ExperimentConfig& config) {
  config.validate();
  const fs::path out(config.out_dir);
  const Topology topology = build_topology(config.topology, config.problem.n_agents);
  write_topology(out, topology);
  std::ostringstream note;
  note.imbue(std::locale::classic());
  switch (config.preset) {
    case Preset::kPaperSigmoid:
    case Preset::kDeskSigmoid: {
      const BenchmarkResult r = benchmark_sigmoid(config, topology);
      write_sweep(out / "zodiac_pb", r.powerball);
      write_sweep(out / "zodiac", r.baseline);
      write_file(out / "final.csv", benchmark_csv(r.outcomes));
      std::size_t wins = 0;
      for (const auto& o : r.outcomes) wins += o.pb_final_loss <= o.baseline_final_loss ? 1 : 0;
      note << "powerball final loss <= baseline on " << wins << "/" << r.outcomes.size() << " seeds";
      break;
    }
    case Preset::kRateSweep: {
      const RateSweepResult r = rate_sweep(config, topology);
      for (std::size_t i = 0; i < r.horizons.size(); ++i) {
        write_sweep(out / ("T_" + std::to_string(r.horizons[i])), r.sweeps[i]);
      }
      write_file(out / "rate_fit.csv", rate_csv(r));
      note << "stationarity slope " << r.stationarity_fit.slope << ", consensus slope " << r.consensus_fit.slope;
      break;
    }
    case Preset::kAttackDesk: {
      const AttackResult r = attack_benchmark(config, topology);
      write_sweep(out / "zodiac_pb", r.powerball);
      write_sweep(out / "zodiac", r.baseline);
      for (const auto* runs : {&r.zo_sgd, &r.zo_scd}) {
        const std::string name = runs == &r.zo_sgd ? "zo_sgd" : "zo_scd";
        std::vector<std::vector<MetricsRow>> rows;
        for (const auto& run : *runs) {
          write_file(out / name / ("seed_" + std::to_string(run.seed) + ".csv"), metrics_csv(run.record.rows));
          rows.push_back(run.record.rows);
        }
        write_file(out / name / "summary.csv", metrics_csv(summarize(rows)));
      }
      write_file(out / "final.csv", attack_csv(r.outcomes));
      note << "attack benchmark: " << r.outcomes.size() << " runs";
      break;
    }
    case Preset::kNone: {
      const SweepResult r = run_seeds(config, topology, config.gamma, config.T);
      write_sweep(out, r);
      note << "final mean loss " << r.summary.back().mean_loss << " over " << r.runs.size() << " seeds";
      break;
    }
  }
  return note.str();
}

}  // namespace zodiac::harness
