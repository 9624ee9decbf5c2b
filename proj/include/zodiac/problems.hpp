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
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zodiac/errors.hpp"
#include "zodiac/format.hpp"
#include "zodiac/rng.hpp"
#include "zodiac/topology.hpp"

namespace zodiac {

enum class ProblemKind { kSigmoidLs, kSyntheticNonconvex, kAttackSurrogate, kCustom };

inline const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kSigmoidLs: return "sigmoid_ls";
    case ProblemKind::kSyntheticNonconvex: return "synthetic_nonconvex";
    case ProblemKind::kAttackSurrogate: return "attack_surrogate";
    case ProblemKind::kCustom: return "custom";
  }
  return "unknown";
}

inline ProblemKind parse_problem_kind(std::string_view name) {
  if (name == "sigmoid_ls" || name == "sigmoid") return ProblemKind::kSigmoidLs;
  if (name == "synthetic_nonconvex" || name == "synthetic") return ProblemKind::kSyntheticNonconvex;
  if (name == "attack_surrogate" || name == "attack") return ProblemKind::kAttackSurrogate;
  throw std::invalid_argument("unknown problem kind: " + std::string(name));
}

/// Identifies one drawn sample xi: an index into an agent's pool.
struct SampleRef {
  std::size_t agent_id = 0;
  std::size_t sample_index = 0;
};

/// Diagnostic constants. NaN when a problem cannot certify a value.
struct ProblemMeta {
  double smoothness = std::numeric_limits<double>::quiet_NaN();     // L_f of F_i(., xi)
  double zeta = std::numeric_limits<double>::quiet_NaN();           // per-coordinate noise bound
  double heterogeneity = std::numeric_limits<double>::quiet_NaN();  // sigma_2
};

/// What the optimizer is allowed to see: dimensions, pool sizes, and
/// function values F_i(x, xi). No gradients.
class ZerothOrderOracle {
 public:
  ZerothOrderOracle(std::size_t dim, std::size_t n_agents) : dim_(dim), n_agents_(n_agents) {}
  ZerothOrderOracle(const ZerothOrderOracle& other)
      : dim_(other.dim_), n_agents_(other.n_agents_), calls_(other.oracle_calls()) {}
  ZerothOrderOracle& operator=(const ZerothOrderOracle&) = delete;
  virtual ~ZerothOrderOracle() = default;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_agents() const noexcept { return n_agents_; }
  virtual std::size_t pool_size(std::size_t agent) const = 0;

  // F_i(x, xi). Pure in (x, sample); thread-safe; counts the call.
  double oracle_eval(const Eigen::Ref<const Eigen::VectorXd>& x, SampleRef sample) const {
    if (static_cast<std::size_t>(x.size()) != dim_) {
      throw std::invalid_argument("oracle_eval: x has dimension " + std::to_string(x.size()) +
                                  ", expected " + std::to_string(dim_));
    }
    if (sample.agent_id >= n_agents_ || sample.sample_index >= pool_size(sample.agent_id)) {
      throw std::invalid_argument("oracle_eval: sample reference out of range");
    }
    calls_.fetch_add(1, std::memory_order_relaxed);
    return evaluate_sample(x, sample);
  }

  std::uint64_t oracle_calls() const noexcept { return calls_.load(std::memory_order_relaxed); }
  void reset_oracle_calls() noexcept { calls_.store(0, std::memory_order_relaxed); }

 protected:
  virtual double evaluate_sample(const Eigen::Ref<const Eigen::VectorXd>& x,
                                 SampleRef sample) const = 0;

 private:
  std::size_t dim_;
  std::size_t n_agents_;
  mutable std::atomic<std::uint64_t> calls_{0};
};

/// A stochastic zeroth-order problem f(x) = (1/n) sum_i E[F_i(x, xi_i)] with
/// diagnostic access to the noiseless objective and its exact gradient.
/// The diagnostic surface is for metrics only; optimizers take the
/// ZerothOrderOracle base.
class OracleProblem : public ZerothOrderOracle {
 public:
  using ZerothOrderOracle::ZerothOrderOracle;

  virtual ProblemKind kind() const = 0;
  const ProblemMeta& meta() const noexcept { return meta_; }

  virtual double local_loss(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
  virtual Eigen::VectorXd local_gradient(std::size_t agent,
                                         const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;

  double mean_loss(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < n_agents(); ++i) acc += local_loss(i, x);
    return acc / static_cast<double>(n_agents());
  }

  // Exact gradient of the noiseless mean objective.
  Eigen::VectorXd true_full_gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    check_dim(x);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < n_agents(); ++i) acc += local_gradient(i, x);
    return acc / static_cast<double>(n_agents());
  }

 protected:
  void check_dim(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (static_cast<std::size_t>(x.size()) != dim()) {
      throw std::invalid_argument("problem: x has wrong dimension");
    }
  }

  ProblemMeta meta_;
};

// ---------------------------------------------------------------------------
// Sigmoid least squares: F_i(x, (a, y)) = (y - phi(x; a))^2,
// phi(x; a) = 1 / (1 + exp(-a^T x)).

inline double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

class SigmoidLeastSquares final : public OracleProblem {
 public:
  // features[i] holds agent i's pool, one sample per row.
  SigmoidLeastSquares(std::vector<AgentMatrix> features, std::vector<Eigen::VectorXd> labels,
                      AgentMatrix test_features, Eigen::VectorXd test_labels)
      : OracleProblem(features.empty() ? 0 : static_cast<std::size_t>(features[0].cols()),
                      features.size()),
        features_(std::move(features)),
        labels_(std::move(labels)),
        test_features_(std::move(test_features)),
        test_labels_(std::move(test_labels)) {
    if (features_.empty() || dim() == 0) throw std::invalid_argument("sigmoid_ls: empty problem");
    if (labels_.size() != features_.size()) throw std::invalid_argument("sigmoid_ls: label pools mismatch");
    double max_norm_sq = 0.0;
    for (std::size_t i = 0; i < features_.size(); ++i) {
      if (features_[i].rows() == 0) throw std::invalid_argument("sigmoid_ls: empty agent pool");
      if (static_cast<std::size_t>(features_[i].cols()) != dim() ||
          labels_[i].size() != features_[i].rows()) {
        throw std::invalid_argument("sigmoid_ls: inconsistent pool shapes");
      }
      max_norm_sq = std::max(max_norm_sq, features_[i].rowwise().squaredNorm().maxCoeff());
    }
    if (test_features_.rows() > 0 && static_cast<std::size_t>(test_features_.cols()) != dim()) {
      throw std::invalid_argument("sigmoid_ls: test features have wrong dimension");
    }
    if (test_labels_.size() != test_features_.rows()) {
      throw std::invalid_argument("sigmoid_ls: test label count mismatch");
    }
    // sup_t |d^2/dt^2 (y - phi(t))^2| ~= 0.15406 for y in {0, 1}; scaled by ||a||^2.
    constexpr double kCurvature = 0.155;
    meta_.smoothness = kCurvature * max_norm_sq;
  }

  ProblemKind kind() const override { return ProblemKind::kSigmoidLs; }
  std::size_t pool_size(std::size_t agent) const override {
    return static_cast<std::size_t>(features_.at(agent).rows());
  }

  double local_loss(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    check_dim(x);
    const AgentMatrix& a = features_.at(agent);
    const Eigen::VectorXd t = a * x;
    double acc = 0.0;
    for (Eigen::Index s = 0; s < t.size(); ++s) {
      const double r = labels_[agent](s) - logistic(t(s));
      acc += r * r;
    }
    return acc / static_cast<double>(t.size());
  }

  Eigen::VectorXd local_gradient(std::size_t agent,
                                 const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    check_dim(x);
    const AgentMatrix& a = features_.at(agent);
    const Eigen::VectorXd t = a * x;
    Eigen::VectorXd weights(t.size());
    for (Eigen::Index s = 0; s < t.size(); ++s) {
      const double phi = logistic(t(s));
      weights(s) = -2.0 * (labels_[agent](s) - phi) * phi * (1.0 - phi);
    }
    return (a.transpose() * weights) / static_cast<double>(t.size());
  }

  // Fraction of held-out samples with (phi >= 0.5) == (y == 1).
  double test_accuracy(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    check_dim(x);
    if (test_features_.rows() == 0) throw std::invalid_argument("sigmoid_ls: no test set");
    const Eigen::VectorXd t = test_features_ * x;
    std::size_t correct = 0;
    for (Eigen::Index s = 0; s < t.size(); ++s) {
      const bool predicted = logistic(t(s)) >= 0.5;
      if (predicted == (test_labels_(s) == 1.0)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(t.size());
  }

  const std::vector<AgentMatrix>& features() const noexcept { return features_; }
  const std::vector<Eigen::VectorXd>& labels() const noexcept { return labels_; }
  const AgentMatrix& test_features() const noexcept { return test_features_; }
  const Eigen::VectorXd& test_labels() const noexcept { return test_labels_; }

 protected:
  double evaluate_sample(const Eigen::Ref<const Eigen::VectorXd>& x, SampleRef sample) const override {
    const auto row = static_cast<Eigen::Index>(sample.sample_index);
    const double t = features_[sample.agent_id].row(row).dot(x);
    const double r = labels_[sample.agent_id](row) - logistic(t);
    return r * r;
  }

 private:
  std::vector<AgentMatrix> features_;
  std::vector<Eigen::VectorXd> labels_;
  AgentMatrix test_features_;
  Eigen::VectorXd test_labels_;
};

/// Features a ~ N(0, I_dim); x_opt = 1; y = 1 iff phi(x_opt; a) >= 0.5.
inline SigmoidLeastSquares make_sigmoid_ls(std::size_t n_agents, std::size_t samples_per_agent,
                                           std::size_t dim, std::size_t test_size,
                                           std::uint64_t seed) {
  if (n_agents == 0 || samples_per_agent == 0 || dim == 0 || test_size == 0) {
    throw std::invalid_argument("make_sigmoid_ls: all counts must be positive");
  }
  Rng gen = rng::stream(seed, rng::Tag::kProblem, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(dim);
  const Eigen::VectorXd x_opt = Eigen::VectorXd::Ones(d);
  auto draw = [&](Eigen::Index rows, AgentMatrix& a, Eigen::VectorXd& y) {
    a.resize(rows, d);
    y.resize(rows);
    for (Eigen::Index s = 0; s < rows; ++s) {
      for (Eigen::Index j = 0; j < d; ++j) a(s, j) = normal(gen);
      y(s) = logistic(a.row(s).dot(x_opt)) >= 0.5 ? 1.0 : 0.0;
    }
  };
  std::vector<AgentMatrix> features(n_agents);
  std::vector<Eigen::VectorXd> labels(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) {
    draw(static_cast<Eigen::Index>(samples_per_agent), features[i], labels[i]);
  }
  AgentMatrix test_features;
  Eigen::VectorXd test_labels;
  draw(static_cast<Eigen::Index>(test_size), test_features, test_labels);
  return SigmoidLeastSquares(std::move(features), std::move(labels), std::move(test_features),
                             std::move(test_labels));
}

// ---------------------------------------------------------------------------
// Synthetic smooth nonconvex family with closed-form gradients:
//   f_i(x) = ||x - c_i||^2 / 2 + kappa_nc * sum_j sin^2(x_j - c_ij)
//   F_i(x, xi) = f_i(x) + xi^T x,   xi drawn from a zero-mean pool with
//   entries in [-zeta, zeta] before centering.

struct SyntheticOptions {
  double kappa_nc = 0.4;
  double zeta = 0.1;
  std::size_t pool_size = 256;
  double center_scale = 1.0;  // c_bar ~ N(0, center_scale^2 I)
};

class SyntheticNonconvex final : public OracleProblem {
 public:
  SyntheticNonconvex(AgentMatrix centers, double kappa_nc, std::vector<AgentMatrix> noise_pools,
                     double zeta, double heterogeneity)
      : OracleProblem(static_cast<std::size_t>(centers.cols()), static_cast<std::size_t>(centers.rows())),
        centers_(std::move(centers)),
        kappa_(kappa_nc),
        noise_(std::move(noise_pools)) {
    if (noise_.size() != n_agents()) throw std::invalid_argument("synthetic: one noise pool per agent");
    for (const auto& pool : noise_) {
      if (pool.rows() == 0 || static_cast<std::size_t>(pool.cols()) != dim()) {
        throw std::invalid_argument("synthetic: malformed noise pool");
      }
    }
    meta_.smoothness = 1.0 + 2.0 * std::abs(kappa_);
    meta_.zeta = zeta;
    // ||grad f_i - grad f|| <= h + kappa * ||s(c_i) - mean_m s(c_m)|| with s
    // 2-Lipschitz, and mean_m ||c_i - c_m|| <= sqrt(2) h when sum_m u_m = 0.
    meta_.heterogeneity = (1.0 + 2.0 * std::numbers::sqrt2 * std::abs(kappa_)) * heterogeneity;
  }

  ProblemKind kind() const override { return ProblemKind::kSyntheticNonconvex; }
  std::size_t pool_size(std::size_t agent) const override {
    return static_cast<std::size_t>(noise_.at(agent).rows());
  }

  double local_loss(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    check_dim(x);
    return smooth_part(agent, x);
  }

  Eigen::VectorXd local_gradient(std::size_t agent,
                                 const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    check_dim(x);
    Eigen::VectorXd g(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double d = x(j) - centers_(static_cast<Eigen::Index>(agent), j);
      g(j) = d + kappa_ * std::sin(2.0 * d);
    }
    return g;
  }

  // Gradient of F_i(., xi) for one pool sample; diagnostics only.
  Eigen::VectorXd sample_gradient(SampleRef sample, const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return local_gradient(sample.agent_id, x) +
           noise_.at(sample.agent_id).row(static_cast<Eigen::Index>(sample.sample_index)).transpose();
  }

  Eigen::VectorXd mean_center() const { return centers_.colwise().mean().transpose(); }
  const AgentMatrix& centers() const noexcept { return centers_; }
  double kappa_nc() const noexcept { return kappa_; }
  const AgentMatrix& noise_pool(std::size_t agent) const { return noise_.at(agent); }

 protected:
  double evaluate_sample(const Eigen::Ref<const Eigen::VectorXd>& x, SampleRef sample) const override {
    return smooth_part(sample.agent_id, x) +
           noise_[sample.agent_id].row(static_cast<Eigen::Index>(sample.sample_index)).dot(x);
  }

 private:
  double smooth_part(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& x) const {
    double acc = 0.0;
    const auto row = static_cast<Eigen::Index>(agent);
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double d = x(j) - centers_(row, j);
      const double s = std::sin(d);
      acc += 0.5 * d * d + kappa_ * s * s;
    }
    return acc;
  }

  AgentMatrix centers_;
  double kappa_;
  std::vector<AgentMatrix> noise_;
};

namespace detail {

inline Eigen::VectorXd random_unit(Rng& gen, Eigen::Index dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd w(dim);
  do {
    for (Eigen::Index j = 0; j < dim; ++j) w(j) = normal(gen);
  } while (w.norm() == 0.0);
  return w.normalized();
}

// n unit vectors summing to zero: +/- pairs, plus a 120-degree triple when n
// is odd.
inline AgentMatrix balanced_unit_directions(std::size_t n, std::size_t dim, Rng& gen) {
  AgentMatrix u = AgentMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  if (n < 2) return u;
  std::size_t next = 0;
  if (n % 2 == 1) {
    if (dim < 2) throw std::invalid_argument("synthetic: odd agent count needs dim >= 2 for heterogeneity");
    const Eigen::VectorXd a = random_unit(gen, static_cast<Eigen::Index>(dim));
    Eigen::VectorXd b;
    do {
      b = random_unit(gen, static_cast<Eigen::Index>(dim));
      b -= b.dot(a) * a;
    } while (b.norm() < 1e-6);
    b.normalize();
    const double h = std::sqrt(3.0) / 2.0;
    u.row(0) = a.transpose();
    u.row(1) = (-0.5 * a + h * b).transpose();
    u.row(2) = (-0.5 * a - h * b).transpose();
    next = 3;
  }
  for (; next < n; next += 2) {
    const Eigen::VectorXd w = random_unit(gen, static_cast<Eigen::Index>(dim));
    u.row(static_cast<Eigen::Index>(next)) = w.transpose();
    u.row(static_cast<Eigen::Index>(next + 1)) = -w.transpose();
  }
  return u;
}

}  // namespace detail

inline SyntheticNonconvex make_synthetic_nonconvex(std::size_t n_agents, std::size_t dim,
                                                   double heterogeneity, std::uint64_t seed,
                                                   const SyntheticOptions& options = {}) {
  if (n_agents == 0 || dim == 0) throw std::invalid_argument("make_synthetic_nonconvex: empty problem");
  if (!(heterogeneity >= 0.0)) throw std::invalid_argument("make_synthetic_nonconvex: heterogeneity must be >= 0");
  if (!(options.zeta >= 0.0)) throw std::invalid_argument("make_synthetic_nonconvex: zeta must be >= 0");
  if (options.pool_size == 0) throw std::invalid_argument("make_synthetic_nonconvex: empty noise pool");
  Rng gen = rng::stream(seed, rng::Tag::kProblem, 1);
  std::normal_distribution<double> normal(0.0, options.center_scale);
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::RowVectorXd c_bar(d);
  for (Eigen::Index j = 0; j < d; ++j) c_bar(j) = normal(gen);

  AgentMatrix centers(static_cast<Eigen::Index>(n_agents), d);
  if (heterogeneity > 0.0) {
    const AgentMatrix u = detail::balanced_unit_directions(n_agents, dim, gen);
    centers = (heterogeneity * u).rowwise() + c_bar;
  } else {
    centers.rowwise() = c_bar;
  }

  std::vector<AgentMatrix> pools(n_agents);
  std::uniform_real_distribution<double> noise(-options.zeta, options.zeta);
  for (auto& pool : pools) {
    pool.resize(static_cast<Eigen::Index>(options.pool_size), d);
    if (options.zeta == 0.0) {
      pool.setZero();
      continue;
    }
    for (Eigen::Index s = 0; s < pool.rows(); ++s)
      for (Eigen::Index j = 0; j < d; ++j) pool(s, j) = noise(gen);
    pool.rowwise() -= pool.colwise().mean();
  }
  return SyntheticNonconvex(std::move(centers), options.kappa_nc, std::move(pools), options.zeta,
                            heterogeneity);
}

// ---------------------------------------------------------------------------
// Black-box attack surrogate. A fixed random linear softmax model stands in
// for the classifier; each agent holds a pool of images it wants misclassified
// under one shared perturbation x:
//   z(x) = 0.5 tanh(atanh(2a) + x)
//   F_i(x, (a, y)) = c * max{F_y(z) - max_{j != y} F_j(z), 0} + ||z - a||^2

class AttackSurrogate final : public OracleProblem {
 public:
  AttackSurrogate(Eigen::MatrixXd weights, Eigen::VectorXd bias, std::vector<AgentMatrix> images,
                  std::vector<std::vector<int>> labels, double c_penalty)
      : OracleProblem(static_cast<std::size_t>(weights.cols()), images.size()),
        weights_(std::move(weights)),
        bias_(std::move(bias)),
        images_(std::move(images)),
        labels_(std::move(labels)),
        c_(c_penalty) {
    if (weights_.rows() < 2) throw std::invalid_argument("attack_surrogate: need at least 2 classes");
    if (bias_.size() != weights_.rows()) throw std::invalid_argument("attack_surrogate: bias size mismatch");
    if (!(c_ > 0.0)) throw std::invalid_argument("attack_surrogate: c_penalty must be positive");
    if (images_.empty() || labels_.size() != images_.size()) {
      throw std::invalid_argument("attack_surrogate: malformed image pools");
    }
    for (std::size_t i = 0; i < images_.size(); ++i) {
      const AgentMatrix& pool = images_[i];
      if (pool.rows() == 0 || static_cast<std::size_t>(pool.cols()) != dim() ||
          labels_[i].size() != static_cast<std::size_t>(pool.rows())) {
        throw std::invalid_argument("attack_surrogate: inconsistent image pool");
      }
      if ((2.0 * pool.array().abs()).maxCoeff() >= 1.0) {
        throw std::domain_error("attack_surrogate: image coordinate outside (-0.5, 0.5)");
      }
      for (int y : labels_[i]) {
        if (y < 0 || y >= weights_.rows()) throw std::invalid_argument("attack_surrogate: label out of range");
      }
      // Precompute atanh(2a) per image.
      pre_.push_back((2.0 * pool.array()).atanh().matrix());
    }
  }

  ProblemKind kind() const override { return ProblemKind::kAttackSurrogate; }
  std::size_t pool_size(std::size_t agent) const override {
    return static_cast<std::size_t>(images_.at(agent).rows());
  }

  double local_loss(std::size_t agent, const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    check_dim(x);
    double acc = 0.0;
    for (std::size_t s = 0; s < pool_size(agent); ++s) acc += sample_loss(agent, s, x);
    return acc / static_cast<double>(pool_size(agent));
  }

  Eigen::VectorXd local_gradient(std::size_t agent,
                                 const Eigen::Ref<const Eigen::VectorXd>& x) const override {
    check_dim(x);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.size());
    for (std::size_t s = 0; s < pool_size(agent); ++s) acc += sample_gradient(agent, s, x);
    return acc / static_cast<double>(pool_size(agent));
  }

  // z(x) for one image.
  Eigen::VectorXd perturbed(std::size_t agent, std::size_t sample,
                            const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd u = pre_[agent].row(static_cast<Eigen::Index>(sample)).transpose() + x;
    return 0.5 * u.array().tanh().matrix();
  }

  // F_y(z) - max_{j != y} F_j(z).
  double margin(std::size_t agent, std::size_t sample, const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd probs = predict(perturbed(agent, sample, x));
    const int y = labels_[agent][sample];
    return probs(y) - runner_up(probs, y).second;
  }

  // Fraction of pool images whose perturbed prediction differs from the label.
  double success_rate(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    check_dim(x);
    std::size_t fooled = 0, total = 0;
    for (std::size_t i = 0; i < n_agents(); ++i) {
      for (std::size_t s = 0; s < pool_size(i); ++s, ++total) {
        Eigen::Index best = 0;
        predict(perturbed(i, s, x)).maxCoeff(&best);
        if (best != labels_[i][s]) ++fooled;
      }
    }
    return static_cast<double>(fooled) / static_cast<double>(total);
  }

  // Mean squared l2 distortion ||z(x) - a||^2 over all images.
  double mean_distortion(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    check_dim(x);
    double acc = 0.0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < n_agents(); ++i) {
      for (std::size_t s = 0; s < pool_size(i); ++s, ++total) {
        acc += (perturbed(i, s, x) - images_[i].row(static_cast<Eigen::Index>(s)).transpose()).squaredNorm();
      }
    }
    return acc / static_cast<double>(total);
  }

  const std::vector<AgentMatrix>& images() const noexcept { return images_; }
  const std::vector<std::vector<int>>& labels() const noexcept { return labels_; }
  double c_penalty() const noexcept { return c_; }

 protected:
  double evaluate_sample(const Eigen::Ref<const Eigen::VectorXd>& x, SampleRef sample) const override {
    return sample_loss(sample.agent_id, sample.sample_index, x);
  }

 private:
  Eigen::VectorXd predict(const Eigen::VectorXd& z) const {
    Eigen::VectorXd logits = weights_ * z + bias_;
    logits.array() -= logits.maxCoeff();
    Eigen::VectorXd e = logits.array().exp().matrix();
    return e / e.sum();
  }

  static std::pair<Eigen::Index, double> runner_up(const Eigen::VectorXd& probs, int y) {
    Eigen::Index best = -1;
    double value = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < probs.size(); ++j) {
      if (j != y && probs(j) > value) {
        value = probs(j);
        best = j;
      }
    }
    return {best, value};
  }

  double sample_loss(std::size_t agent, std::size_t sample, const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd z = perturbed(agent, sample, x);
    const Eigen::VectorXd probs = predict(z);
    const int y = labels_[agent][sample];
    const double hinge = std::max(probs(y) - runner_up(probs, y).second, 0.0);
    return c_ * hinge + (z - images_[agent].row(static_cast<Eigen::Index>(sample)).transpose()).squaredNorm();
  }

  Eigen::VectorXd sample_gradient(std::size_t agent, std::size_t sample,
                                  const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::VectorXd z = perturbed(agent, sample, x);
    const Eigen::VectorXd probs = predict(z);
    const int y = labels_[agent][sample];
    Eigen::VectorXd grad_z = 2.0 * (z - images_[agent].row(static_cast<Eigen::Index>(sample)).transpose());
    const auto [j, pj] = runner_up(probs, y);
    if (probs(y) - pj > 0.0) {
      // d softmax_k / dz = p_k (W_k - sum_m p_m W_m)
      const Eigen::RowVectorXd mean_row = probs.transpose() * weights_;
      grad_z += c_ * (probs(y) * (weights_.row(y) - mean_row) - pj * (weights_.row(j) - mean_row)).transpose();
    }
    // dz/dx = 0.5 (1 - tanh^2) = 0.5 (1 - 4 z^2)
    const Eigen::ArrayXd dz = 0.5 * (1.0 - 4.0 * z.array().square());
    return (grad_z.array() * dz).matrix();
  }

  Eigen::MatrixXd weights_;
  Eigen::VectorXd bias_;
  std::vector<AgentMatrix> images_;
  std::vector<std::vector<int>> labels_;
  std::vector<AgentMatrix> pre_;
  double c_;
};

inline constexpr double kImageClamp = 0.4999;

inline AttackSurrogate make_attack_surrogate(std::size_t n_agents, std::size_t dim, std::size_t n_classes,
                                             double c_penalty, std::uint64_t seed,
                                             std::size_t images_per_agent = 4) {
  if (n_classes < 2) throw std::invalid_argument("make_attack_surrogate: n_classes must be >= 2");
  if (!(c_penalty > 0.0)) throw std::invalid_argument("make_attack_surrogate: c_penalty must be positive");
  if (n_agents == 0 || dim == 0 || images_per_agent == 0) {
    throw std::invalid_argument("make_attack_surrogate: empty problem");
  }
  Rng gen = rng::stream(seed, rng::Tag::kProblem, 2);
  const auto d = static_cast<Eigen::Index>(dim);
  const auto k = static_cast<Eigen::Index>(n_classes);
  std::normal_distribution<double> normal(0.0, 3.0 / std::sqrt(static_cast<double>(dim)));
  std::uniform_real_distribution<double> pixel(-0.5, 0.5);
  Eigen::MatrixXd w(k, d);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index c = 0; c < d; ++c) w(r, c) = normal(gen);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(k);

  std::vector<AgentMatrix> images(n_agents);
  std::vector<std::vector<int>> labels(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) {
    images[i].resize(static_cast<Eigen::Index>(images_per_agent), d);
    for (Eigen::Index s = 0; s < images[i].rows(); ++s) {
      for (Eigen::Index c = 0; c < d; ++c) {
        images[i](s, c) = std::clamp(pixel(gen), -kImageClamp, kImageClamp);
      }
      Eigen::Index best = 0;
      (w * images[i].row(s).transpose() + b).maxCoeff(&best);
      labels[i].push_back(static_cast<int>(best));
    }
  }
  return AttackSurrogate(std::move(w), std::move(b), std::move(images), std::move(labels), c_penalty);
}

// ---------------------------------------------------------------------------

inline double test_accuracy(const OracleProblem& problem, const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto* sigmoid = dynamic_cast<const SigmoidLeastSquares*>(&problem);
  if (sigmoid == nullptr) {
    throw std::invalid_argument(std::string("test_accuracy: needs sigmoid_ls, got ") + to_string(problem.kind()));
  }
  return sigmoid->test_accuracy(x);
}

// Dataset CSV: header "agent_id,label,f0,...,f{p-1}", one row per sample.
// Held-out sigmoid test samples use agent_id -1. Synthetic pools export
// their noise vectors with label 0.
inline void write_dataset_csv(const OracleProblem& problem, std::ostream& out) {
  std::string text = "agent_id,label";
  for (std::size_t j = 0; j < problem.dim(); ++j) text += ",f" + std::to_string(j);
  text += '\n';
  auto emit = [&text](long agent, double label, const auto& row) {
    text += std::to_string(agent);
    text += ',';
    text += format_double(label);
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      text += ',';
      text += format_double(row(j));
    }
    text += '\n';
  };
  if (const auto* s = dynamic_cast<const SigmoidLeastSquares*>(&problem)) {
    for (std::size_t i = 0; i < s->n_agents(); ++i)
      for (Eigen::Index r = 0; r < s->features()[i].rows(); ++r)
        emit(static_cast<long>(i), s->labels()[i](r), s->features()[i].row(r));
    for (Eigen::Index r = 0; r < s->test_features().rows(); ++r)
      emit(-1, s->test_labels()(r), s->test_features().row(r));
  } else if (const auto* a = dynamic_cast<const AttackSurrogate*>(&problem)) {
    for (std::size_t i = 0; i < a->n_agents(); ++i)
      for (Eigen::Index r = 0; r < a->images()[i].rows(); ++r)
        emit(static_cast<long>(i), a->labels()[i][static_cast<std::size_t>(r)], a->images()[i].row(r));
  } else if (const auto* y = dynamic_cast<const SyntheticNonconvex*>(&problem)) {
    for (std::size_t i = 0; i < y->n_agents(); ++i)
      for (Eigen::Index r = 0; r < y->noise_pool(i).rows(); ++r) emit(static_cast<long>(i), 0.0, y->noise_pool(i).row(r));
  } else {
    throw std::invalid_argument("write_dataset_csv: unsupported problem kind");
  }
  out << text;
}

/// Rebuilds a sigmoid_ls problem from write_dataset_csv output. Agent ids
/// must be contiguous from 0.
inline SigmoidLeastSquares read_sigmoid_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("dataset csv: missing header");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (columns < 2) throw std::invalid_argument("dataset csv: need at least one feature column");
  const std::size_t dim = columns - 1;
  std::vector<std::vector<std::vector<double>>> pools;
  std::vector<std::vector<double>> pool_labels;
  std::vector<std::vector<double>> test_rows;
  std::vector<double> test_labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != dim + 2) {
      throw std::invalid_argument("dataset csv: wrong field count on line " + std::to_string(line_no));
    }
    const double agent = parse_double(fields[0]);
    const double label = parse_double(fields[1]);
    std::vector<double> row(dim);
    for (std::size_t j = 0; j < dim; ++j) row[j] = parse_double(fields[j + 2]);
    if (agent < 0) {
      test_rows.push_back(std::move(row));
      test_labels.push_back(label);
      continue;
    }
    const auto id = static_cast<std::size_t>(agent);
    if (id >= pools.size()) {
      pools.resize(id + 1);
      pool_labels.resize(id + 1);
    }
    pools[id].push_back(std::move(row));
    pool_labels[id].push_back(label);
  }
  auto to_matrix = [dim](const std::vector<std::vector<double>>& rows) {
    AgentMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t j = 0; j < dim; ++j) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
    return m;
  };
  std::vector<AgentMatrix> features;
  std::vector<Eigen::VectorXd> labels;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    if (pools[i].empty()) throw std::invalid_argument("dataset csv: agent " + std::to_string(i) + " has no samples");
    features.push_back(to_matrix(pools[i]));
    labels.push_back(Eigen::Map<const Eigen::VectorXd>(pool_labels[i].data(),
                                                       static_cast<Eigen::Index>(pool_labels[i].size())));
  }
  Eigen::VectorXd tl = Eigen::Map<const Eigen::VectorXd>(test_labels.data(), static_cast<Eigen::Index>(test_labels.size()));
  return SigmoidLeastSquares(std::move(features), std::move(labels), to_matrix(test_rows), std::move(tl));
}

}  // namespace zodiac
