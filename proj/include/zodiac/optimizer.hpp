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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "zodiac/errors.hpp"
#include "zodiac/estimator.hpp"
#include "zodiac/powerball.hpp"
#include "zodiac/problems.hpp"
#include "zodiac/rng.hpp"
#include "zodiac/topology.hpp"

namespace zodiac {

// ---------------------------------------------------------------------------
// Parameters

struct ParamMargins {
  double kappa1_margin = 1.1;  // kappa1 = margin * (1/rho2 + 1), margin > 1
  double kappa2_frac = 0.9;    // kappa2 = frac * (upper end of its window)
  double kappa_delta = 1.0;
  // Off only for runs that knowingly use T <= n^3/p (the large benchmark
  // presets do); the resulting params carry horizon_admissible=false.
  bool enforce_horizon = true;
};

/// Step sizes and gains for one run of horizon T:
///   alpha = kappa1 beta, beta = kappa2 sqrt(pT)/sqrt(n), eta = kappa2 / beta,
///   delta_k = kappa_delta / (p n (k+1))^(1/4) unless constant_delta is set.
struct AlgoParams {
  double alpha = 0.0;
  double beta = 0.0;
  double eta = 0.0;
  double gamma = 1.0;
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double kappa_delta = 1.0;
  std::int64_t T = 0;
  std::size_t n = 0;
  std::size_t p = 0;
  std::optional<double> constant_delta;
  bool horizon_admissible = true;
};

// Smallest T with T > n^3 / p.
inline std::int64_t min_admissible_horizon(std::size_t n, std::size_t p) {
  const auto cube = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n);
  return cube / static_cast<std::int64_t>(p) + 1;
}

// Upper end of the open kappa2 window for a given kappa1; rho(L^2) = rho(L)^2.
inline double kappa2_upper(double kappa1, double rho, double rho2) {
  const double window = ((kappa1 - 1.0) * rho2 - 1.0) / (rho + (2.0 * kappa1 * kappa1 + 1.0) * rho * rho + 1.0);
  return std::min(window, 0.2);
}

inline AlgoParams derive_params(const Topology& topology, std::size_t p, std::int64_t T, double gamma,
                                const ParamMargins& margins = {}) {
  const std::size_t n = topology.n();
  if (p == 0) throw std::invalid_argument("derive_params: p must be positive");
  if (T <= 0) throw std::invalid_argument("derive_params: T must be positive");
  if (!(margins.kappa1_margin > 1.0)) throw std::invalid_argument("derive_params: kappa1_margin must exceed 1");
  if (!(margins.kappa2_frac > 0.0 && margins.kappa2_frac < 1.0)) {
    throw std::invalid_argument("derive_params: kappa2_frac must lie in (0,1)");
  }
  if (!(margins.kappa_delta > 0.0)) throw std::invalid_argument("derive_params: kappa_delta must be positive");
  const PowerballGamma checked_gamma(gamma);
  const std::int64_t min_t = min_admissible_horizon(n, p);
  if (T < min_t && margins.enforce_horizon) throw HorizonTooShortError(T, min_t);

  const double rho = topology.rho();
  const double rho2 = topology.rho2();
  AlgoParams params;
  params.n = n;
  params.p = p;
  params.T = T;
  params.gamma = checked_gamma.value();
  params.kappa1 = margins.kappa1_margin * (1.0 / rho2 + 1.0);
  params.kappa2 = margins.kappa2_frac * kappa2_upper(params.kappa1, rho, rho2);
  params.kappa_delta = margins.kappa_delta;
  params.beta = params.kappa2 * std::sqrt(static_cast<double>(p) * static_cast<double>(T)) /
                std::sqrt(static_cast<double>(n));
  params.alpha = params.kappa1 * params.beta;
  params.eta = params.kappa2 / params.beta;
  params.horizon_admissible = T >= min_t;
  return params;
}

inline double delta_at(const AlgoParams& params, std::int64_t k) {
  if (params.constant_delta) return *params.constant_delta;
  const double scale = static_cast<double>(params.p) * static_cast<double>(params.n) * static_cast<double>(k + 1);
  return params.kappa_delta / std::sqrt(std::sqrt(scale));
}

// Constant smoothing 10 / sqrt(T d) used by the classification benchmark presets.
inline double benchmark_delta(std::int64_t T, std::size_t dim) {
  return 10.0 / std::sqrt(static_cast<double>(T) * static_cast<double>(dim));
}

// ---------------------------------------------------------------------------
// State

struct SwarmState {
  std::int64_t k = 0;
  AgentMatrix x;  // primal, one agent per row
  AgentMatrix v;  // dual, one agent per row
  std::vector<Rng> streams;
  std::uint64_t oracle_calls = 0;
};

enum class InitMode { kNormal, kZeros };

struct InitOptions {
  InitMode mode = InitMode::kNormal;
  std::string salt;  // folded into every stream; empty = none
};

// x_{i,0} ~ N(0, I_p) from the master stream (or zeros), v_{i,0} = 0,
// agent i gets stream(seed, agent, i).
inline SwarmState init_state(std::size_t n, std::size_t p, std::uint64_t seed, const InitOptions& init = {}) {
  SwarmState state;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(p);
  state.x = AgentMatrix::Zero(rows, cols);
  state.v = AgentMatrix::Zero(rows, cols);
  if (init.mode == InitMode::kNormal) {
    Rng master = rng::stream(seed, rng::Tag::kMaster, 0, init.salt);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) state.x(i, j) = normal(master);
  }
  state.streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i) state.streams.push_back(rng::stream(seed, rng::Tag::kAgent, i, init.salt));
  return state;
}

inline constexpr double kDivergenceBound = 1e12;

struct Execution {
  std::size_t threads = 1;
  bool reverse_order = false;  // sequential only; exercises order independence
};

namespace detail {

// sum_j L_ij x_j over the nonzero Laplacian entries, ascending j.
inline void laplacian_row_product(const Topology& topology, const AgentMatrix& x, std::size_t i,
                                  Eigen::VectorXd& out) {
  out.setZero();
  const auto& lap = topology.laplacian();
  const auto row = static_cast<Eigen::Index>(i);
  for (std::size_t j : topology.laplacian_support(i)) {
    const double lij = lap(row, static_cast<Eigen::Index>(j));
    const auto xj = x.row(static_cast<Eigen::Index>(j));
    for (Eigen::Index c = 0; c < out.size(); ++c) out(c) += lij * xj(c);
  }
}

struct AgentUpdate {
  std::size_t calls = 0;
  std::exception_ptr error;
};

inline AgentUpdate update_agent(std::size_t i, const SwarmState& current, Rng& stream, AgentMatrix& x_next,
                                AgentMatrix& v_next, const AlgoParams& params, const Topology& topology,
                                const ZerothOrderOracle& oracle, const EstimatorConfig& config) {
  AgentUpdate result;
  try {
    const auto row = static_cast<Eigen::Index>(i);
    const auto p = static_cast<Eigen::Index>(config.p);
    Eigen::VectorXd lx(p);
    laplacian_row_product(topology, current.x, i, lx);

    const std::vector<std::size_t> subset = sample_coordinates(config.p, config.n_c, stream);
    std::uniform_int_distribution<std::size_t> pick(0, oracle.pool_size(i) - 1);
    const SampleRef sample{i, pick(stream)};
    const Eigen::VectorXd xi = current.x.row(row).transpose();
    auto eval_at = [&oracle, sample](const Eigen::VectorXd& point) { return oracle.oracle_eval(point, sample); };
    const Estimate est = estimate(config, eval_at, xi, delta_at(params, current.k), subset);
    const Eigen::VectorXd direction = powerball(est.g, PowerballGamma(params.gamma));
    result.calls = est.calls;

    const double eta = params.eta, alpha = params.alpha, beta = params.beta;
    const double dual_gain = eta * beta;
    for (Eigen::Index c = 0; c < p; ++c) {
      const double xn = current.x(row, c) - eta * (alpha * lx(c) + beta * current.v(row, c) + direction(c));
      const double vn = current.v(row, c) + dual_gain * lx(c);
      if (!std::isfinite(xn) || !std::isfinite(vn) || std::abs(xn) > kDivergenceBound) {
        throw DivergenceError(i, current.k);
      }
      x_next(row, c) = xn;
      v_next(row, c) = vn;
    }
  } catch (...) {
    result.error = std::current_exception();
  }
  return result;
}

}  // namespace detail

/// One synchronous round. Every agent reads the round-k snapshot only and
/// draws from its own stream, so the result does not depend on processing
/// order or thread count.
inline SwarmState step(const SwarmState& state, const AlgoParams& params, const Topology& topology,
                       const ZerothOrderOracle& oracle, const EstimatorConfig& config,
                       const Execution& exec = {}) {
  config.validate();
  const std::size_t n = topology.n();
  if (static_cast<std::size_t>(state.x.rows()) != n || static_cast<std::size_t>(state.v.rows()) != n ||
      state.streams.size() != n || oracle.n_agents() != n) {
    throw std::invalid_argument("step: agent count mismatch between state, topology and problem");
  }
  if (static_cast<std::size_t>(state.x.cols()) != config.p || static_cast<std::size_t>(state.v.cols()) != config.p ||
      oracle.dim() != config.p) {
    throw std::invalid_argument("step: dimension mismatch between state, estimator and problem");
  }

  SwarmState next;
  next.k = state.k + 1;
  next.x.resize(state.x.rows(), state.x.cols());
  next.v.resize(state.v.rows(), state.v.cols());
  next.streams = state.streams;
  std::vector<detail::AgentUpdate> updates(n);

  auto work = [&](std::size_t i) {
    updates[i] = detail::update_agent(i, state, next.streams[i], next.x, next.v, params, topology, oracle, config);
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(exec.threads, n));
  if (threads == 1) {
    for (std::size_t t = 0; t < n; ++t) work(exec.reverse_order ? n - 1 - t : t);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < n; i += threads) work(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  next.oracle_calls = state.oracle_calls;
  for (const auto& u : updates) {
    if (u.error) std::rethrow_exception(u.error);
    next.oracle_calls += u.calls;
  }
  return next;
}

// ---------------------------------------------------------------------------
// Metrics and runs

struct MetricsRow {
  std::int64_t k = 0;
  double mean_loss = 0.0;       // f(x_bar_k)
  double stat_sq = 0.0;         // ||grad f(x_bar_k)||^2
  double stat_1pg_sq = 0.0;     // ||grad f(x_bar_k)||_{1+gamma}^2
  double consensus_err = 0.0;   // (1/n) sum_i ||x_i - x_bar||^2
  double subopt = 0.0;          // f(x_bar_k) - running best
  std::uint64_t oracle_calls = 0;
  double test_acc = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

struct RunRecord {
  std::vector<MetricsRow> rows;
  SwarmState final_state;
};

struct RunOptions {
  InitOptions init;
  Execution exec;
  bool measure_wall_clock = false;  // otherwise wall_ms stays 0 and output is reproducible
  bool with_test_accuracy = true;   // sigmoid_ls only
};

class MetricsRecorder {
 public:
  MetricsRecorder(const OracleProblem& problem, double gamma, bool with_test_accuracy, bool wall_clock)
      : problem_(problem),
        gamma_(gamma),
        accuracy_(with_test_accuracy && problem.kind() == ProblemKind::kSigmoidLs),
        wall_clock_(wall_clock),
        start_(std::chrono::steady_clock::now()) {}

  MetricsRow record(std::int64_t k, const AgentMatrix& x, std::uint64_t calls) {
    MetricsRow row;
    row.k = k;
    const Eigen::VectorXd mean = x.colwise().mean().transpose();
    row.mean_loss = problem_.mean_loss(mean);
    const Eigen::VectorXd grad = problem_.true_full_gradient(mean);
    row.stat_sq = grad.squaredNorm();
    row.stat_1pg_sq = norm_1_plus_gamma_sq(grad, PowerballGamma(gamma_));
    row.consensus_err = consensus_projection_norm_sq(x) / static_cast<double>(x.rows());
    best_ = std::min(best_, row.mean_loss);
    row.subopt = row.mean_loss - best_;
    row.oracle_calls = calls;
    if (accuracy_) row.test_acc = test_accuracy(problem_, mean);
    if (wall_clock_) {
      row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    }
    return row;
  }

 private:
  const OracleProblem& problem_;
  double gamma_;
  bool accuracy_;
  bool wall_clock_;
  double best_ = std::numeric_limits<double>::infinity();
  std::chrono::steady_clock::time_point start_;
};

// Rows are taken at k = 0, r, 2r, ... < T and at k = T.
inline bool is_record_round(std::int64_t k, std::int64_t T, std::int64_t record_every) {
  return k == T || k % record_every == 0;
}

inline RunRecord run(const OracleProblem& problem, const Topology& topology, const AlgoParams& params,
                     const EstimatorConfig& config, std::int64_t T, std::uint64_t seed, std::int64_t record_every,
                     const RunOptions& options = {}) {
  if (record_every < 1) throw std::invalid_argument("run: record_every must be >= 1");
  if (T < 0) throw std::invalid_argument("run: T must be nonnegative");
  config.validate();
  RunRecord record;
  SwarmState state = init_state(topology.n(), problem.dim(), seed, options.init);
  MetricsRecorder recorder(problem, params.gamma, options.with_test_accuracy, options.measure_wall_clock);
  const ZerothOrderOracle& oracle = problem;
  for (std::int64_t k = 0;; ++k) {
    if (is_record_round(k, T, record_every)) record.rows.push_back(recorder.record(k, state.x, state.oracle_calls));
    if (k == T) break;
    state = step(state, params, topology, oracle, config, options.exec);
  }
  record.final_state = std::move(state);
  return record;
}

// Mean of a metric over recorded rows with k < T.
template <class Field>
double time_average(const std::vector<MetricsRow>& rows, std::int64_t T, Field field) {
  double acc = 0.0;
  std::size_t count = 0;
  for (const auto& row : rows) {
    if (row.k < T) {
      acc += field(row);
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("time_average: no rows before T");
  return acc / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Centralized single-agent baselines on the mean objective. Each step draws
// an agent uniformly, then one sample from its pool.

enum class BaselineAlgo { kZoSgd, kZoScd };

inline BaselineAlgo parse_baseline(std::string_view name) {
  if (name == "zo_sgd") return BaselineAlgo::kZoSgd;
  if (name == "zo_scd") return BaselineAlgo::kZoScd;
  throw std::invalid_argument("unknown baseline: " + std::string(name));
}

inline const char* to_string(BaselineAlgo algo) { return algo == BaselineAlgo::kZoSgd ? "zo_sgd" : "zo_scd"; }

inline RunRecord run_centralized_baseline(const OracleProblem& problem, BaselineAlgo algo, std::int64_t steps,
                                          double step_size, double delta, std::uint64_t seed,
                                          std::int64_t record_every = 1, const RunOptions& options = {}) {
  if (!(step_size > 0.0)) throw std::invalid_argument("baseline: step_size must be positive");
  if (!(delta > 0.0)) throw std::invalid_argument("baseline: delta must be positive");
  if (record_every < 1) throw std::invalid_argument("baseline: record_every must be >= 1");
  const std::size_t p = problem.dim();
  RunRecord record;
  SwarmState state = init_state(1, p, seed, options.init);
  Rng gen = rng::stream(seed, rng::Tag::kBaseline, 0, options.init.salt);
  std::uniform_int_distribution<std::size_t> pick_agent(0, problem.n_agents() - 1);
  std::uniform_int_distribution<std::size_t> pick_coord(0, p - 1);
  MetricsRecorder recorder(problem, 1.0, options.with_test_accuracy, options.measure_wall_clock);
  const ZerothOrderOracle& oracle = problem;
  const double scale = algo == BaselineAlgo::kZoSgd ? static_cast<double>(p) : 1.0;

  Eigen::VectorXd x = state.x.row(0).transpose();
  for (std::int64_t k = 0;; ++k) {
    if (is_record_round(k, steps, record_every)) {
      state.x.row(0) = x.transpose();
      record.rows.push_back(recorder.record(k, state.x, state.oracle_calls));
    }
    if (k == steps) break;
    const std::size_t agent = pick_agent(gen);
    std::uniform_int_distribution<std::size_t> pick_sample(0, oracle.pool_size(agent) - 1);
    const SampleRef sample{agent, pick_sample(gen)};
    const auto j = static_cast<Eigen::Index>(pick_coord(gen));
    Eigen::VectorXd probe = x;
    probe(j) = x(j) + delta;
    const double up = detail::checked(oracle.oracle_eval(probe, sample));
    probe(j) = x(j) - delta;
    const double down = detail::checked(oracle.oracle_eval(probe, sample));
    state.oracle_calls += 2;
    x(j) -= step_size * (scale * ((up - down) / (2.0 * delta)));
    if (!std::isfinite(x(j)) || std::abs(x(j)) > kDivergenceBound) throw DivergenceError(0, k);
  }
  state.k = steps;
  state.x.row(0) = x.transpose();
  record.final_state = std::move(state);
  return record;
}

}  // namespace zodiac
