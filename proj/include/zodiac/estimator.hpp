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
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zodiac/errors.hpp"

namespace zodiac {

/// A black-box F(x, xi) with xi already fixed by the caller.
template <class F>
concept ScalarOracle = requires(const F& f, const Eigen::VectorXd& x) {
  { f(x) } -> std::convertible_to<double>;
};

enum class DifferenceMode { kForward, kCentral };

inline DifferenceMode parse_difference_mode(std::string_view name) {
  if (name == "forward") return DifferenceMode::kForward;
  if (name == "central") return DifferenceMode::kCentral;
  throw std::invalid_argument("unknown difference mode: " + std::string(name));
}

inline const char* to_string(DifferenceMode mode) {
  return mode == DifferenceMode::kForward ? "forward" : "central";
}

struct EstimatorConfig {
  std::size_t p = 1;
  std::size_t n_c = 1;
  DifferenceMode mode = DifferenceMode::kCentral;

  void validate() const {
    if (p == 0) throw std::invalid_argument("estimator: p must be positive");
    if (n_c < 1 || n_c > p) {
      throw std::invalid_argument("estimator: n_c must lie in [1, p], got " + std::to_string(n_c));
    }
  }

  // Oracle calls consumed by one estimate().
  std::size_t calls_per_estimate() const {
    return mode == DifferenceMode::kForward ? n_c + 1 : 2 * n_c;
  }
};

struct Estimate {
  Eigen::VectorXd g;
  std::size_t calls = 0;
};

// Uniform n_c-subset of {0..p-1} without replacement (partial Fisher-Yates),
// returned ascending.
template <class Urbg>
std::vector<std::size_t> sample_coordinates(std::size_t p, std::size_t n_c, Urbg& gen) {
  if (n_c < 1 || n_c > p) {
    throw std::invalid_argument("sample_coordinates: need 1 <= n_c <= p");
  }
  std::vector<std::size_t> pool(p);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  if (n_c == p) return pool;
  for (std::size_t i = 0; i < n_c; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, p - 1);
    std::swap(pool[i], pool[pick(gen)]);
  }
  pool.resize(n_c);
  std::sort(pool.begin(), pool.end());
  return pool;
}

namespace detail {

inline double checked(double value) {
  if (!std::isfinite(value)) throw NumericError("estimator: non-finite oracle value");
  return value;
}

}  // namespace detail

/// Coordinate-subset zeroth-order gradient estimate.
///
/// forward: g = (p/n_c) sum_{j in S} (F(x + delta e_j) - F(x)) / delta e_j,
///          F(x) evaluated once and shared, n_c + 1 calls.
/// central: g = (p/n_c) sum_{j in S} (F(x + delta e_j) - F(x - delta e_j)) / (2 delta) e_j,
///          2 n_c calls.
/// Coordinates outside S are exactly zero.
template <ScalarOracle F>
Estimate estimate(const EstimatorConfig& config, const F& eval_at,
                  const Eigen::Ref<const Eigen::VectorXd>& x, double delta,
                  const std::vector<std::size_t>& subset) {
  if (!(delta > 0.0)) throw std::invalid_argument("estimator: delta must be positive");
  if (static_cast<std::size_t>(x.size()) != config.p) {
    throw std::invalid_argument("estimator: x has wrong dimension");
  }
  const double scale = static_cast<double>(config.p) / static_cast<double>(subset.size());
  Estimate out{Eigen::VectorXd::Zero(x.size()), 0};
  Eigen::VectorXd probe = x;
  if (config.mode == DifferenceMode::kForward) {
    const double base = detail::checked(eval_at(probe));
    ++out.calls;
    for (std::size_t j : subset) {
      const auto jj = static_cast<Eigen::Index>(j);
      probe(jj) = x(jj) + delta;
      const double up = detail::checked(eval_at(probe));
      probe(jj) = x(jj);
      ++out.calls;
      out.g(jj) = scale * ((up - base) / delta);
    }
  } else {
    for (std::size_t j : subset) {
      const auto jj = static_cast<Eigen::Index>(j);
      probe(jj) = x(jj) + delta;
      const double up = detail::checked(eval_at(probe));
      probe(jj) = x(jj) - delta;
      const double down = detail::checked(eval_at(probe));
      probe(jj) = x(jj);
      out.calls += 2;
      out.g(jj) = scale * ((up - down) / (2.0 * delta));
    }
  }
  return out;
}

// Reference estimators over every coordinate, unscaled. Written as separate
// loops so they can serve as the unbiasedness reference for estimate().
template <ScalarOracle F>
Eigen::VectorXd full_coordinate_estimate(const F& eval_at, const Eigen::Ref<const Eigen::VectorXd>& x,
                                         double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("estimator: delta must be positive");
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd up = x, down = x;
    up(j) += delta;
    down(j) -= delta;
    g(j) = (detail::checked(eval_at(up)) - detail::checked(eval_at(down))) / (2.0 * delta);
  }
  return g;
}

template <ScalarOracle F>
Eigen::VectorXd full_coordinate_forward_estimate(const F& eval_at,
                                                 const Eigen::Ref<const Eigen::VectorXd>& x,
                                                 double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("estimator: delta must be positive");
  const Eigen::VectorXd base_point = x;
  const double base = detail::checked(eval_at(base_point));
  Eigen::VectorXd g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Eigen::VectorXd up = x;
    up(j) += delta;
    g(j) = (detail::checked(eval_at(up)) - base) / delta;
  }
  return g;
}

}  // namespace zodiac
