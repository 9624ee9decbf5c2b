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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zodiac/errors.hpp"
#include "zodiac/rng.hpp"

namespace zodiac {

// Agent vectors stacked one per row.
using AgentMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Spectrum {
  double rho = 0.0;   // largest Laplacian eigenvalue
  double rho2 = 0.0;  // smallest positive Laplacian eigenvalue
  Eigen::VectorXd eigenvalues;  // ascending
};

// Relative tolerance separating the zero eigenvalue from the rest.
inline constexpr double kDefaultEigenTolerance = 1e-9;

inline Spectrum spectral(const Eigen::MatrixXd& laplacian,
                         double relative_tolerance = kDefaultEigenTolerance) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(laplacian, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericError("Laplacian eigensolver failed");
  Spectrum s;
  s.eigenvalues = solver.eigenvalues();
  s.rho = s.eigenvalues(s.eigenvalues.size() - 1);
  const double tau = relative_tolerance * s.rho;
  Eigen::Index below = 0;
  for (Eigen::Index i = 0; i < s.eigenvalues.size(); ++i) {
    if (s.eigenvalues(i) <= tau) ++below;
  }
  if (below != 1 || s.rho <= 0.0) {
    throw DisconnectedGraphError(std::to_string(below) + " eigenvalues below tolerance");
  }
  s.rho2 = s.eigenvalues(1);
  return s;
}

/// Undirected unit- or positively-weighted communication graph together with
/// its Laplacian L = Deg - A and the spectral quantities derived from it.
/// A Topology is always connected; construction fails otherwise. Immutable.
class Topology {
 public:
  static Topology from_adjacency(Eigen::MatrixXd adjacency) {
    const Eigen::Index n = adjacency.rows();
    if (n < 2 || adjacency.cols() != n) {
      throw std::invalid_argument("adjacency must be square with n >= 2");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (adjacency(i, i) != 0.0) throw std::invalid_argument("adjacency diagonal must be zero");
      for (Eigen::Index j = 0; j < n; ++j) {
        const double a = adjacency(i, j);
        if (!std::isfinite(a) || a < 0.0) {
          throw std::invalid_argument("adjacency weights must be finite and nonnegative");
        }
        if (a != adjacency(j, i)) throw std::invalid_argument("adjacency must be symmetric");
      }
    }
    return Topology(std::move(adjacency));
  }

  std::size_t n() const noexcept { return static_cast<std::size_t>(adjacency_.rows()); }
  const Eigen::MatrixXd& adjacency() const noexcept { return adjacency_; }
  const Eigen::MatrixXd& laplacian() const noexcept { return laplacian_; }
  double rho() const noexcept { return spectrum_.rho; }
  double rho2() const noexcept { return spectrum_.rho2; }
  const Eigen::VectorXd& eigenvalues() const noexcept { return spectrum_.eigenvalues; }
  const Spectrum& spectrum() const noexcept { return spectrum_; }

  // Column indices j with L(i,j) != 0, ascending (includes i itself).
  const std::vector<std::size_t>& laplacian_support(std::size_t i) const {
    return support_[i];
  }

  std::size_t edge_count() const {
    std::size_t m = 0;
    for (Eigen::Index i = 0; i < adjacency_.rows(); ++i)
      for (Eigen::Index j = i + 1; j < adjacency_.cols(); ++j)
        if (adjacency_(i, j) > 0.0) ++m;
    return m;
  }

 private:
  explicit Topology(Eigen::MatrixXd adjacency) : adjacency_(std::move(adjacency)) {
    const Eigen::Index n = adjacency_.rows();
    laplacian_ = -adjacency_;
    laplacian_.diagonal() = adjacency_.rowwise().sum();
    spectrum_ = spectral(laplacian_);
    support_.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (laplacian_(i, j) != 0.0) support_[static_cast<std::size_t>(i)].push_back(static_cast<std::size_t>(j));
  }

  Eigen::MatrixXd adjacency_;
  Eigen::MatrixXd laplacian_;
  Spectrum spectrum_;
  std::vector<std::vector<std::size_t>> support_;
};

namespace detail {

inline bool is_connected(const Eigen::MatrixXd& adjacency) {
  const Eigen::Index n = adjacency.rows();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::queue<Eigen::Index> frontier;
  frontier.push(0);
  seen[0] = true;
  Eigen::Index reached = 1;
  while (!frontier.empty()) {
    const Eigen::Index u = frontier.front();
    frontier.pop();
    for (Eigen::Index v = 0; v < n; ++v) {
      if (adjacency(u, v) > 0.0 && !seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == n;
}

}  // namespace detail

/// Erdős–Rényi G(n, prob) with unit weights, conditioned on connectivity by
/// resampling whole graphs from the same seeded stream.
inline Topology erdos_renyi(std::size_t n, double prob, std::uint64_t seed,
                            int max_attempts = 1000) {
  if (n < 2) throw std::invalid_argument("erdos_renyi: n must be >= 2");
  if (!(prob > 0.0 && prob <= 1.0)) throw std::invalid_argument("erdos_renyi: prob must lie in (0,1]");
  Rng gen = rng::stream(seed, rng::Tag::kTopology, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto size = static_cast<Eigen::Index>(n);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
    for (Eigen::Index i = 0; i < size; ++i) {
      for (Eigen::Index j = i + 1; j < size; ++j) {
        if (unit(gen) < prob) a(i, j) = a(j, i) = 1.0;
      }
    }
    if (detail::is_connected(a)) return Topology::from_adjacency(std::move(a));
  }
  throw DisconnectedGraphError("no connected sample after " + std::to_string(max_attempts) +
                               " attempts (n=" + std::to_string(n) + ")");
}

enum class GraphKind { kPath, kComplete, kCycle, kStar };

inline GraphKind parse_graph_kind(std::string_view name) {
  if (name == "path") return GraphKind::kPath;
  if (name == "complete") return GraphKind::kComplete;
  if (name == "cycle") return GraphKind::kCycle;
  if (name == "star") return GraphKind::kStar;
  throw std::invalid_argument("unknown graph kind: " + std::string(name));
}

// Star graphs use node 0 as the hub.
inline Topology fixture_graph(GraphKind kind, std::size_t n) {
  if (n < 2) throw std::invalid_argument("fixture_graph: n must be >= 2");
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
  auto link = [&a](Eigen::Index i, Eigen::Index j) { a(i, j) = a(j, i) = 1.0; };
  switch (kind) {
    case GraphKind::kPath:
      for (Eigen::Index i = 0; i + 1 < size; ++i) link(i, i + 1);
      break;
    case GraphKind::kCycle:
      for (Eigen::Index i = 0; i < size; ++i) {
        if (i != (i + 1) % size) link(i, (i + 1) % size);
      }
      break;
    case GraphKind::kComplete:
      for (Eigen::Index i = 0; i < size; ++i)
        for (Eigen::Index j = i + 1; j < size; ++j) link(i, j);
      break;
    case GraphKind::kStar:
      for (Eigen::Index i = 1; i < size; ++i) link(0, i);
      break;
  }
  return Topology::from_adjacency(std::move(a));
}

/// Sum over rows of ||x_i - mean||^2, i.e. the K_n-weighted quadratic form of
/// the stacked vector.
inline double consensus_projection_norm_sq(const AgentMatrix& x) {
  if (x.rows() == 0) return 0.0;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  return (x.rowwise() - mean).squaredNorm();
}

// One "i j weight" line per undirected edge (i < j), 0-indexed.
inline void write_edge_list(const Topology& topology, std::ostream& out) {
  const auto& a = topology.adjacency();
  std::ostringstream line;
  line.imbue(std::locale::classic());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.cols(); ++j) {
      if (a(i, j) > 0.0) line << i << ' ' << j << ' ' << a(i, j) << '\n';
    }
  }
  out << line.str();
}

inline Topology read_edge_list(std::istream& in, std::size_t n) {
  const auto size = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(size, size);
  std::string text;
  while (std::getline(in, text)) {
    if (text.empty()) continue;
    std::istringstream fields(text);
    fields.imbue(std::locale::classic());
    Eigen::Index i = 0, j = 0;
    double w = 0.0;
    if (!(fields >> i >> j >> w) || i < 0 || j < 0 || i >= size || j >= size || i == j) {
      throw std::invalid_argument("malformed edge-list line: " + text);
    }
    a(i, j) = a(j, i) = w;
  }
  return Topology::from_adjacency(std::move(a));
}

}  // namespace zodiac
