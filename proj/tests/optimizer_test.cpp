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


#include "zodiac/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"

namespace zodiac {
namespace {

using testing::FunctionProblem;
using testing::constant_problem;

EstimatorConfig central(std::size_t p, std::size_t n_c) { return {p, n_c, DifferenceMode::kCentral}; }

FunctionProblem zero_problem(std::size_t n, std::size_t dim) { return constant_problem(n, dim, 0.0); }

// Heterogeneous smooth quadratic-plus-sine objective with per-sample shifts.
FunctionProblem wavy_problem(std::size_t n, std::size_t dim) {
  return FunctionProblem(
      n, dim,
      [](std::size_t agent, const Eigen::VectorXd& x, std::size_t sample) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < x.size(); ++j) {
          const double d = x(j) - 0.1 * static_cast<double>(agent) + 0.01 * static_cast<double>(sample);
          acc += 0.5 * d * d + 0.3 * std::sin(d) * std::sin(d);
        }
        return acc;
      },
      [](std::size_t agent, const Eigen::VectorXd& x) {
        Eigen::VectorXd g(x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j) {
          const double d = x(j) - 0.1 * static_cast<double>(agent) + 0.015;
          g(j) = d + 0.3 * std::sin(2.0 * d);
        }
        return g;
      });
}

// --- parameters ------------------------------------------------------------

TEST(DeriveParamsTest, PathTwoWindowByHand) {
  const Topology path = fixture_graph(GraphKind::kPath, 2);
  const AlgoParams params = derive_params(path, 100, 1000, 0.6);
  EXPECT_NEAR(params.kappa1, 1.65, 1e-12);
  const double window = (0.65 * 2.0 - 1.0) / (2.0 + (2.0 * 1.65 * 1.65 + 1.0) * 4.0 + 1.0);
  EXPECT_NEAR(window, 0.3 / 28.78, 1e-12);
  EXPECT_NEAR(params.kappa2, 0.9 * window, 1e-15);
  EXPECT_NEAR(params.kappa2, 0.0093815, 1e-7);
  EXPECT_NEAR(params.beta, params.kappa2 * std::sqrt(100.0 * 1000.0) / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(params.beta / params.kappa2, 223.6068, 1e-4);
  EXPECT_DOUBLE_EQ(params.alpha, params.kappa1 * params.beta);
  EXPECT_NEAR(params.eta * params.beta, params.kappa2, 1e-17);
  EXPECT_TRUE(params.horizon_admissible);
}

TEST(DeriveParamsTest, HorizonBoundary) {
  const Topology cycle = fixture_graph(GraphKind::kCycle, 10);
  EXPECT_EQ(min_admissible_horizon(10, 1), 1001);
  for (std::int64_t T : {999, 1000}) {
    try {
      derive_params(cycle, 1, T, 1.0);
      FAIL() << "T=" << T << " accepted";
    } catch (const HorizonTooShortError& e) {
      EXPECT_EQ(e.horizon(), T);
      EXPECT_EQ(e.min_horizon(), 1001);
    }
  }
  EXPECT_NO_THROW(derive_params(cycle, 1, 1001, 1.0));
  ParamMargins relaxed;
  relaxed.enforce_horizon = false;
  EXPECT_FALSE(derive_params(cycle, 1, 10, 1.0, relaxed).horizon_admissible);
}

TEST(DeriveParamsTest, WindowsHoldOnAssortedGraphs) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Topology g = erdos_renyi(6 + seed, 0.5, seed);
    const AlgoParams params = derive_params(g, 8, min_admissible_horizon(g.n(), 8), 0.7);
    EXPECT_GT((params.kappa1 - 1.0) * g.rho2(), 1.0);
    EXPECT_GT(params.kappa2, 0.0);
    EXPECT_LT(params.kappa2, 0.2);
    const double upper = ((params.kappa1 - 1.0) * g.rho2() - 1.0) /
                         (g.rho() + (2.0 * params.kappa1 * params.kappa1 + 1.0) * g.rho() * g.rho() + 1.0);
    EXPECT_LT(params.kappa2, upper);
  }
}

TEST(DeriveParamsTest, ArgumentErrors) {
  const Topology path = fixture_graph(GraphKind::kPath, 2);
  EXPECT_THROW(derive_params(path, 0, 100, 1.0), std::invalid_argument);
  EXPECT_THROW(derive_params(path, 4, 100, 0.3), std::invalid_argument);
  ParamMargins bad;
  bad.kappa1_margin = 1.0;
  EXPECT_THROW(derive_params(path, 4, 100, 1.0, bad), std::invalid_argument);
  bad = {};
  bad.kappa2_frac = 1.0;
  EXPECT_THROW(derive_params(path, 4, 100, 1.0, bad), std::invalid_argument);
}

TEST(DeltaScheduleTest, FourthRootValues) {
  AlgoParams params;
  params.p = 1;
  params.n = 1;
  EXPECT_DOUBLE_EQ(delta_at(params, 0), 1.0);
  params.p = 16;
  params.n = 16;
  EXPECT_DOUBLE_EQ(delta_at(params, 15), 0.125);
  for (std::int64_t k = 0; k < 1000; ++k) EXPECT_LT(delta_at(params, k + 1), delta_at(params, k));
  params.constant_delta = 0.01;
  EXPECT_EQ(delta_at(params, 7), 0.01);
  EXPECT_DOUBLE_EQ(benchmark_delta(100, 1), 1.0);
}

// --- step ------------------------------------------------------------------

TEST(StepTest, ConsensusFixedPointUnderConstantOracle) {
  const Topology g = erdos_renyi(6, 0.6, 3);
  const FunctionProblem problem = constant_problem(6, 4, 2.5);
  const AlgoParams params = derive_params(g, 4, 1000, 0.6);
  SwarmState state = init_state(6, 4, 1, {InitMode::kZeros, {}});
  for (Eigen::Index i = 0; i < 6; ++i) state.x.row(i) << 0.375, -1.0, 2.0, 0.0;
  const AgentMatrix start = state.x;
  for (int k = 0; k < 50; ++k) state = step(state, params, g, problem, central(4, 2));
  EXPECT_EQ(state.x, start);
  EXPECT_TRUE((state.v.array() == 0.0).all());
}

TEST(StepTest, TwoAgentPathByHand) {
  const Topology path = fixture_graph(GraphKind::kPath, 2);
  const FunctionProblem problem = zero_problem(2, 1);
  const AlgoParams params = derive_params(path, 1, 100, 1.0);
  SwarmState state = init_state(2, 1, 1, {InitMode::kZeros, {}});
  state.x << 1.0, -1.0;
  const SwarmState next = step(state, params, path, problem, central(1, 1));
  EXPECT_NEAR(next.x(0, 0), 1.0 - params.eta * params.alpha * 2.0, 1e-15);
  EXPECT_NEAR(next.x(1, 0), -1.0 + params.eta * params.alpha * 2.0, 1e-15);
  EXPECT_NEAR(next.v(0, 0), params.eta * params.beta * 2.0, 1e-15);
  EXPECT_EQ(next.v(0, 0) + next.v(1, 0), 0.0);
  EXPECT_EQ(next.k, 1);
  EXPECT_EQ(next.oracle_calls, 4u);
}

// Independent loop: (5a)-(5b) with gamma = 1 and central differences, written
// without the library estimator, powerball or Laplacian helpers.
SwarmState reference_step(const SwarmState& s, const AlgoParams& prm, const Topology& g,
                          const FunctionProblem& problem, std::size_t n_c) {
  SwarmState next = s;
  next.k = s.k + 1;
  const Eigen::Index n = s.x.rows(), p = s.x.cols();
  const double delta = prm.kappa_delta / std::sqrt(std::sqrt(static_cast<double>(prm.p * prm.n) * (s.k + 1)));
  for (Eigen::Index i = 0; i < n; ++i) {
    Rng& gen = next.streams[static_cast<std::size_t>(i)];
    const std::vector<std::size_t> subset = sample_coordinates(prm.p, n_c, gen);
    std::uniform_int_distribution<std::size_t> pick(0, problem.pool_size(0) - 1);
    const std::size_t xi = pick(gen);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(p);
    const Eigen::VectorXd xi_row = s.x.row(i).transpose();
    for (std::size_t j : subset) {
      Eigen::VectorXd up = xi_row, down = xi_row;
      up(static_cast<Eigen::Index>(j)) += delta;
      down(static_cast<Eigen::Index>(j)) -= delta;
      const double q = (problem.oracle_eval(up, {static_cast<std::size_t>(i), xi}) -
                        problem.oracle_eval(down, {static_cast<std::size_t>(i), xi})) /
                       (2.0 * delta);
      grad(static_cast<Eigen::Index>(j)) = static_cast<double>(prm.p) / static_cast<double>(n_c) * q;
    }
    for (Eigen::Index c = 0; c < p; ++c) {
      double lx = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (g.laplacian()(i, j) != 0.0) lx += g.laplacian()(i, j) * s.x(j, c);
      }
      next.x(i, c) = s.x(i, c) - prm.eta * (prm.alpha * lx + prm.beta * s.v(i, c) + grad(c));
      next.v(i, c) = s.v(i, c) + (prm.eta * prm.beta) * lx;
    }
  }
  return next;
}

TEST(StepTest, GammaOneMatchesIndependentLoopBitwise) {
  const Topology g = erdos_renyi(7, 0.5, 11);
  const FunctionProblem problem = wavy_problem(7, 5);
  const AlgoParams params = derive_params(g, 5, 1000, 1.0);
  SwarmState lib = init_state(7, 5, 42);
  SwarmState ref = lib;
  for (int k = 0; k < 30; ++k) {
    lib = step(lib, params, g, problem, central(5, 2));
    ref = reference_step(ref, params, g, problem, 2);
    ASSERT_EQ(lib.x, ref.x) << "round " << k;
    ASSERT_EQ(lib.v, ref.v) << "round " << k;
  }
}

TEST(StepTest, OrderAndThreadCountDoNotMatter) {
  const Topology g = erdos_renyi(9, 0.5, 5);
  const SyntheticNonconvex problem = make_synthetic_nonconvex(9, 6, 0.5, 5);
  const AlgoParams params = derive_params(g, 6, 1000, 0.6);
  SwarmState a = init_state(9, 6, 8), b = a, c = a;
  for (int k = 0; k < 40; ++k) {
    a = step(a, params, g, problem, central(6, 3));
    b = step(b, params, g, problem, central(6, 3), {1, true});
    c = step(c, params, g, problem, central(6, 3), {4, false});
  }
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.x, c.x);
  EXPECT_EQ(a.v, c.v);
  EXPECT_EQ(a.oracle_calls, c.oracle_calls);
}

TEST(StepTest, DualSumConserved) {
  const Topology g = erdos_renyi(10, 0.4, 2);
  const SyntheticNonconvex problem = make_synthetic_nonconvex(10, 4, 1.0, 2);
  const AlgoParams params = derive_params(g, 4, 2000, 0.6, {1.1, 0.9, 1.0, false});
  SwarmState state = init_state(10, 4, 3);
  for (std::int64_t k = 1; k <= 500; ++k) {
    state = step(state, params, g, problem, central(4, 2));
    const double drift = state.v.colwise().sum().cwiseAbs().maxCoeff();
    ASSERT_LE(drift, 1e-9 * std::max(1.0, params.eta * params.beta * static_cast<double>(k)));
  }
}

TEST(StepTest, DivergenceNamesAgentAndRound) {
  const FunctionProblem steep(
      3, 2, [](std::size_t, const Eigen::VectorXd& x, std::size_t) { return 1e300 * x.sum(); },
      [](std::size_t, const Eigen::VectorXd&) { return Eigen::VectorXd::Constant(2, 1e300); });
  const Topology g = fixture_graph(GraphKind::kComplete, 3);
  const AlgoParams params = derive_params(g, 2, 100, 1.0);
  const SwarmState state = init_state(3, 2, 1, {InitMode::kZeros, {}});
  for (std::size_t threads : {1u, 3u}) {
    try {
      step(state, params, g, steep, central(2, 2), {threads, false});
      FAIL() << "no divergence";
    } catch (const DivergenceError& e) {
      EXPECT_EQ(e.agent(), 0u);
      EXPECT_EQ(e.round(), 0);
    }
  }
}

TEST(StepTest, ShapeMismatchRejected) {
  const Topology g = fixture_graph(GraphKind::kPath, 3);
  const FunctionProblem problem = zero_problem(3, 2);
  const AlgoParams params = derive_params(g, 2, 100, 1.0);
  EXPECT_THROW(step(init_state(2, 2, 1), params, g, problem, central(2, 1)), std::invalid_argument);
  EXPECT_THROW(step(init_state(3, 3, 1), params, g, problem, central(3, 1)), std::invalid_argument);
}

// --- run -------------------------------------------------------------------

TEST(RunTest, DeterministicAndCountsOracleCalls) {
  const Topology g = erdos_renyi(5, 0.6, 4);
  const SyntheticNonconvex problem = make_synthetic_nonconvex(5, 6, 0.5, 4);
  const AlgoParams params = derive_params(g, 6, 200, 0.6);
  const RunRecord a = run(problem, g, params, central(6, 3), 200, 9, 7);
  const RunRecord b = run(problem, g, params, central(6, 3), 200, 9, 7);
  EXPECT_EQ(a.final_state.x, b.final_state.x);
  ASSERT_EQ(a.rows.size(), b.rows.size());
  for (std::size_t r = 0; r < a.rows.size(); ++r) EXPECT_EQ(a.rows[r].mean_loss, b.rows[r].mean_loss);
  EXPECT_EQ(a.final_state.oracle_calls, 5u * 2u * 3u * 200u);
  const RunRecord f = run(problem, g, params, {6, 3, DifferenceMode::kForward}, 200, 9, 50);
  EXPECT_EQ(f.final_state.oracle_calls, 5u * 4u * 200u);
}

TEST(RunTest, RecordScheduleAndRowInvariants) {
  const Topology g = erdos_renyi(4, 0.8, 1);
  const SyntheticNonconvex problem = make_synthetic_nonconvex(4, 3, 0.5, 1);
  const AlgoParams params = derive_params(g, 3, 100, 0.6);
  const RunRecord rec = run(problem, g, params, central(3, 1), 100, 1, 30);
  std::vector<std::int64_t> ks;
  for (const auto& row : rec.rows) ks.push_back(row.k);
  EXPECT_EQ(ks, (std::vector<std::int64_t>{0, 30, 60, 90, 100}));
  for (std::size_t r = 0; r < rec.rows.size(); ++r) {
    EXPECT_GE(rec.rows[r].consensus_err, 0.0);
    EXPECT_GE(rec.rows[r].subopt, 0.0);
    EXPECT_GE(rec.rows[r].stat_1pg_sq, rec.rows[r].stat_sq * (1.0 - 1e-12));
    EXPECT_EQ(rec.rows[r].wall_ms, 0.0);
    EXPECT_TRUE(std::isnan(rec.rows[r].test_acc));
    if (r > 0) {
      EXPECT_GE(rec.rows[r].oracle_calls, rec.rows[r - 1].oracle_calls);
    }
  }
  EXPECT_EQ(rec.rows.front().subopt, 0.0);
  EXPECT_DOUBLE_EQ(time_average(rec.rows, 100, [](const MetricsRow& r) { return static_cast<double>(r.k); }), 45.0);
}

TEST(RunTest, ZeroInitStartsAtOriginAndSaltChangesStreams) {
  const Topology g = fixture_graph(GraphKind::kStar, 4);
  const SyntheticNonconvex problem = make_synthetic_nonconvex(4, 3, 0.5, 1);
  const AlgoParams params = derive_params(g, 3, 100, 0.6);
  RunOptions zeros;
  zeros.init.mode = InitMode::kZeros;
  const RunRecord rec = run(problem, g, params, central(3, 1), 0, 1, 1, zeros);
  EXPECT_TRUE((rec.final_state.x.array() == 0.0).all());
  RunOptions salted;
  salted.init.salt = "other";
  EXPECT_NE(run(problem, g, params, central(3, 1), 5, 1, 1).final_state.x,
            run(problem, g, params, central(3, 1), 5, 1, 1, salted).final_state.x);
}

TEST(RunTest, SigmoidRecordsTestAccuracy) {
  const SigmoidLeastSquares problem = make_sigmoid_ls(4, 20, 3, 100, 2);
  const Topology g = fixture_graph(GraphKind::kComplete, 4);
  AlgoParams params = derive_params(g, 3, 100, 0.6);
  const RunRecord rec = run(problem, g, params, central(3, 3), 10, 1, 5);
  for (const auto& row : rec.rows) {
    EXPECT_GE(row.test_acc, 0.0);
    EXPECT_LE(row.test_acc, 1.0);
  }
}

TEST(RunTest, StationarityDropsTenfoldOverLongRun) {
  const Topology g = erdos_renyi(8, 0.8, 1);
  SyntheticOptions options;
  options.kappa_nc = 0.75;
  const SyntheticNonconvex problem = make_synthetic_nonconvex(8, 16, 1.0, 1, options);
  const std::int64_t T = 20000;
  const AlgoParams params = derive_params(g, 16, T, 0.6);
  const RunRecord rec = run(problem, g, params, central(16, 4), T, 1, 1);
  double head = 0.0, tail = 0.0;
  for (const auto& row : rec.rows) {
    if (row.k < 100) head += row.stat_sq;
    if (row.k >= T - 100 && row.k < T) tail += row.stat_sq;
  }
  EXPECT_LE(tail * 10.0, head);
}

// --- baselines -------------------------------------------------------------

TEST(BaselineTest, ZeroOracleLeavesIterateFixed) {
  const FunctionProblem problem = zero_problem(3, 4);
  for (BaselineAlgo algo : {BaselineAlgo::kZoSgd, BaselineAlgo::kZoScd}) {
    const RunRecord rec = run_centralized_baseline(problem, algo, 50, 0.1, 0.01, 3);
    EXPECT_EQ(rec.final_state.x, init_state(1, 4, 3).x);
    EXPECT_EQ(rec.final_state.oracle_calls, 100u);
  }
}

TEST(BaselineTest, ScdContractsOneCoordinateOnQuadratic) {
  const FunctionProblem problem(
      2, 5, [](std::size_t, const Eigen::VectorXd& x, std::size_t) { return 0.5 * x.squaredNorm(); },
      [](std::size_t, const Eigen::VectorXd& x) { return x; });
  const double s = 0.3;
  for (std::int64_t steps = 1; steps <= 20; ++steps) {
    const Eigen::VectorXd before = run_centralized_baseline(problem, BaselineAlgo::kZoScd, steps - 1, s, 0.05, 7)
                                       .final_state.x.row(0)
                                       .transpose();
    const Eigen::VectorXd after =
        run_centralized_baseline(problem, BaselineAlgo::kZoScd, steps, s, 0.05, 7).final_state.x.row(0).transpose();
    int changed = 0;
    for (Eigen::Index j = 0; j < 5; ++j) {
      if (after(j) == before(j)) continue;
      ++changed;
      EXPECT_NEAR(after(j), (1.0 - s) * before(j), 1e-12);
    }
    EXPECT_LE(changed, 1);
  }
}

TEST(BaselineTest, SgdMovesAlongScaledCoordinateOnLinear) {
  const Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(4, 1.0, 4.0);
  const FunctionProblem problem(
      1, 4, [c](std::size_t, const Eigen::VectorXd& x, std::size_t) { return c.dot(x); },
      [c](std::size_t, const Eigen::VectorXd&) { return c; });
  const double s = 0.01;
  Eigen::VectorXd mean_direction = Eigen::VectorXd::Zero(4);
  const int seeds = 4000;
  for (int seed = 1; seed <= seeds; ++seed) {
    const Eigen::VectorXd x0 = init_state(1, 4, seed).x.row(0).transpose();
    const Eigen::VectorXd x1 =
        run_centralized_baseline(problem, BaselineAlgo::kZoSgd, 1, s, 0.1, seed).final_state.x.row(0).transpose();
    const Eigen::VectorXd direction = (x0 - x1) / s;
    int nonzero = 0;
    for (Eigen::Index j = 0; j < 4; ++j) {
      if (direction(j) == 0.0) continue;
      ++nonzero;
      EXPECT_NEAR(direction(j), 4.0 * c(j), 1e-9);
    }
    EXPECT_EQ(nonzero, 1);
    mean_direction += direction / seeds;
  }
  EXPECT_LE((mean_direction - c).cwiseAbs().maxCoeff(), 0.25);
}

TEST(BaselineTest, ArgumentErrorsAndNames) {
  const FunctionProblem problem = zero_problem(1, 2);
  EXPECT_THROW(run_centralized_baseline(problem, BaselineAlgo::kZoSgd, 1, 0.0, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(run_centralized_baseline(problem, BaselineAlgo::kZoSgd, 1, 0.1, 0.0, 1), std::invalid_argument);
  EXPECT_EQ(parse_baseline(to_string(BaselineAlgo::kZoScd)), BaselineAlgo::kZoScd);
  EXPECT_THROW(parse_baseline("adam"), std::invalid_argument);
}

}  // namespace
}  // namespace zodiac
