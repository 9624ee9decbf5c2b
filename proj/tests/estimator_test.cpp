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


#include "zodiac/estimator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <random>

#include "zodiac/errors.hpp"

namespace zodiac {
namespace {

// All n_c-subsets of {0..p-1} in lexicographic order.
std::vector<std::vector<std::size_t>> all_subsets(std::size_t p, std::size_t n_c) {
  std::vector<std::vector<std::size_t>> out;
  std::vector<bool> mask(p, false);
  std::fill(mask.begin(), mask.begin() + static_cast<long>(n_c), true);
  do {
    std::vector<std::size_t> s;
    for (std::size_t j = 0; j < p; ++j)
      if (mask[j]) s.push_back(j);
    out.push_back(s);
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return out;
}

std::vector<std::size_t> iota(std::size_t p) {
  std::vector<std::size_t> s(p);
  for (std::size_t j = 0; j < p; ++j) s[j] = j;
  return s;
}

double smooth(const Eigen::VectorXd& x) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) acc += std::sin(1.3 * x(j)) * (1.0 + 0.2 * j) + 0.1 * x(j) * x(j) * x(j);
  return acc + std::exp(0.1 * x.sum());
}

TEST(SampleCoordinatesTest, FullSubsetIsIdentity) {
  std::mt19937_64 gen(1);
  EXPECT_EQ(sample_coordinates(5, 5, gen), iota(5));
}

TEST(SampleCoordinatesTest, SortedDistinctInRange) {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = sample_coordinates(9, 4, gen);
    ASSERT_EQ(s.size(), 4u);
    for (std::size_t k = 1; k < s.size(); ++k) EXPECT_LT(s[k - 1], s[k]);
    EXPECT_LT(s.back(), 9u);
  }
}

TEST(SampleCoordinatesTest, SingleCoordinateFrequencies) {
  std::mt19937_64 gen(3);
  std::vector<int> counts(4, 0);
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) ++counts[sample_coordinates(4, 1, gen)[0]];
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(draws), 0.25, 0.01);
}

TEST(SampleCoordinatesTest, PairFrequenciesUniformOverTenSubsets) {
  std::mt19937_64 gen(4);
  std::map<std::vector<std::size_t>, int> counts;
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) ++counts[sample_coordinates(5, 2, gen)];
  ASSERT_EQ(counts.size(), 10u);
  for (const auto& [subset, c] : counts) EXPECT_NEAR(c / static_cast<double>(draws), 0.1, 0.01);
}

TEST(SampleCoordinatesTest, DeterministicGivenStream) {
  std::mt19937_64 a(99), b(99);
  for (int trial = 0; trial < 50; ++trial) EXPECT_EQ(sample_coordinates(12, 5, a), sample_coordinates(12, 5, b));
}

TEST(SampleCoordinatesTest, RejectsBadCardinality) {
  std::mt19937_64 gen(5);
  EXPECT_THROW(sample_coordinates(3, 4, gen), std::invalid_argument);
  EXPECT_THROW(sample_coordinates(3, 0, gen), std::invalid_argument);
}

TEST(EstimateTest, LinearIsExactInBothModes) {
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(4, -1.5, 2.0);
  const auto f = [&c](const Eigen::VectorXd& x) { return c.dot(x); };
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.5);
  for (DifferenceMode mode : {DifferenceMode::kForward, DifferenceMode::kCentral}) {
    const EstimatorConfig config{4, 4, mode};
    EXPECT_LE((estimate(config, f, x, 0.25, iota(4)).g - c).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(EstimateTest, QuadraticCentralIsExact) {
  const auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
  const EstimatorConfig config{5, 5, DifferenceMode::kCentral};
  for (double delta : {0.5, 0.125, 1e-3}) {
    EXPECT_LE((estimate(config, f, x, delta, iota(5)).g - 2.0 * x).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(EstimateTest, QuadraticForwardBiasedByDelta) {
  const auto f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0);
  const EstimatorConfig config{5, 5, DifferenceMode::kForward};
  const double delta = 0.25;
  const Eigen::VectorXd expected = 2.0 * x + Eigen::VectorXd::Constant(5, delta);
  EXPECT_LE((estimate(config, f, x, delta, iota(5)).g - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EstimateTest, CallCountsAndSupport) {
  int calls = 0;
  const auto f = [&calls](const Eigen::VectorXd& x) {
    ++calls;
    return smooth(x);
  };
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(6, 0.3);
  const std::vector<std::size_t> subset{1, 4};
  for (DifferenceMode mode : {DifferenceMode::kForward, DifferenceMode::kCentral}) {
    calls = 0;
    const EstimatorConfig config{6, 2, mode};
    const Estimate e = estimate(config, f, x, 0.1, subset);
    EXPECT_EQ(e.calls, config.calls_per_estimate());
    EXPECT_EQ(static_cast<std::size_t>(calls), e.calls);
    for (std::size_t j : {0u, 2u, 3u, 5u}) EXPECT_EQ(e.g(static_cast<Eigen::Index>(j)), 0.0);
    EXPECT_NE(e.g(1), 0.0);
  }
  EXPECT_EQ((EstimatorConfig{6, 2, DifferenceMode::kForward}.calls_per_estimate()), 3u);
  EXPECT_EQ((EstimatorConfig{6, 2, DifferenceMode::kCentral}.calls_per_estimate()), 4u);
}

TEST(EstimateTest, SubsetScalingIsPOverNc) {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -0.4, 0.9);
  const double delta = 0.05;
  const std::vector<std::size_t> subset{0, 3, 5};
  const Estimate e = estimate(EstimatorConfig{6, 3, DifferenceMode::kCentral}, smooth, x, delta, subset);
  for (std::size_t j : subset) {
    const auto jj = static_cast<Eigen::Index>(j);
    Eigen::VectorXd up = x, down = x;
    up(jj) += delta;
    down(jj) -= delta;
    const double quotient = (smooth(up) - smooth(down)) / (2.0 * delta);
    EXPECT_NEAR(e.g(jj), 2.0 * quotient, 1e-12);
  }
}

TEST(EstimateTest, SubsetMeanEqualsFullCoordinateReference) {
  for (std::size_t p = 3; p <= 6; ++p) {
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(p), -0.7, 0.6);
    const double delta = 0.03;
    const Eigen::VectorXd central_ref = full_coordinate_estimate(smooth, x, delta);
    const Eigen::VectorXd forward_ref = full_coordinate_forward_estimate(smooth, x, delta);
    for (std::size_t n_c = 1; n_c <= p; ++n_c) {
      const auto subsets = all_subsets(p, n_c);
      Eigen::VectorXd central_mean = Eigen::VectorXd::Zero(x.size());
      Eigen::VectorXd forward_mean = Eigen::VectorXd::Zero(x.size());
      for (const auto& s : subsets) {
        central_mean += estimate(EstimatorConfig{p, n_c, DifferenceMode::kCentral}, smooth, x, delta, s).g;
        forward_mean += estimate(EstimatorConfig{p, n_c, DifferenceMode::kForward}, smooth, x, delta, s).g;
      }
      central_mean /= static_cast<double>(subsets.size());
      forward_mean /= static_cast<double>(subsets.size());
      EXPECT_LE((central_mean - central_ref).cwiseAbs().maxCoeff(), 1e-12) << "p=" << p << " n_c=" << n_c;
      EXPECT_LE((forward_mean - forward_ref).cwiseAbs().maxCoeff(), 1e-12) << "p=" << p << " n_c=" << n_c;
    }
  }
}

TEST(EstimateTest, CentralErrorShrinksQuadratically) {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(4, -0.5, 0.8);
  Eigen::VectorXd grad(4);
  for (Eigen::Index j = 0; j < 4; ++j) {
    grad(j) = 1.3 * std::cos(1.3 * x(j)) * (1.0 + 0.2 * j) + 0.3 * x(j) * x(j) + 0.1 * std::exp(0.1 * x.sum());
  }
  const EstimatorConfig config{4, 4, DifferenceMode::kCentral};
  double previous = (estimate(config, smooth, x, 0.1, iota(4)).g - grad).norm();
  for (double delta : {0.05, 0.025}) {
    const double err = (estimate(config, smooth, x, delta, iota(4)).g - grad).norm();
    EXPECT_NEAR(previous / err, 4.0, 1.2);
    previous = err;
  }
}

TEST(EstimateTest, FullSubsetCentralMatchesReference) {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(5, 0.1, 0.5);
  const Estimate e = estimate(EstimatorConfig{5, 5, DifferenceMode::kCentral}, smooth, x, 0.02, iota(5));
  EXPECT_LE((e.g - full_coordinate_estimate(smooth, x, 0.02)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EstimateTest, ArgumentAndNumericErrors) {
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  const EstimatorConfig config{3, 1, DifferenceMode::kCentral};
  EXPECT_THROW(estimate(config, smooth, x, 0.0, {0}), std::invalid_argument);
  EXPECT_THROW(estimate(config, smooth, x, -1.0, {0}), std::invalid_argument);
  EXPECT_THROW(estimate(config, smooth, Eigen::VectorXd::Zero(4), 0.1, {0}), std::invalid_argument);
  const auto nan_f = [](const Eigen::VectorXd&) { return std::numeric_limits<double>::quiet_NaN(); };
  EXPECT_THROW(estimate(config, nan_f, x, 0.1, {0}), NumericError);
  EXPECT_THROW(full_coordinate_estimate(nan_f, x, 0.1), NumericError);
  EXPECT_THROW((EstimatorConfig{3, 4, DifferenceMode::kForward}.validate()), std::invalid_argument);
  EXPECT_THROW((EstimatorConfig{3, 0, DifferenceMode::kForward}.validate()), std::invalid_argument);
}

TEST(DifferenceModeTest, ParseRoundTrip) {
  for (DifferenceMode mode : {DifferenceMode::kForward, DifferenceMode::kCentral}) {
    EXPECT_EQ(parse_difference_mode(to_string(mode)), mode);
  }
  EXPECT_THROW(parse_difference_mode("backward"), std::invalid_argument);
}

}  // namespace
}  // namespace zodiac
