// Copyright 2026 The HFLGen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "hflgen/bounds.hpp"
#include "hflgen/dp_round.hpp"
#include "hflgen/errors.hpp"
#include "hflgen/oracles.hpp"

namespace hflgen {
namespace {

AggregationPlan laplace_plan(std::vector<double> eps) {
  AggregationPlan plan;
  for (double e : eps) plan.mechanisms.push_back(LaplaceOnMean{e, 0.0, 1.0});
  return plan;
}

TEST(LaplaceMechanism, VanishingNoise) {
  EXPECT_NEAR(laplace_mechanism(0.37, 1.0, 1e9, 4), 0.37, 1e-6);
}

TEST(LaplaceMechanism, Variance) {
  const double sensitivity = 0.5, epsilon = 0.8, b = sensitivity / epsilon;
  std::vector<double> sq(1000000);
  for (std::size_t i = 0; i < sq.size(); ++i) {
    const double v = laplace_mechanism(0.0, sensitivity, epsilon, 3, i);
    sq[i] = v * v;
  }
  EXPECT_NEAR(summarize(sq).mean / (2 * b * b), 1.0, 0.01);
}

TEST(LaplaceMechanism, ArgumentErrors) {
  EXPECT_THROW(laplace_mechanism(0.0, 0.0, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(laplace_mechanism(0.0, 1.0, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(laplace_mechanism(0.0, -1.0, 1.0, 1), std::invalid_argument);
}

TEST(LaplaceMechanism, OutputsFollowCalibratedLaw) {
  // KS test of the mechanism's output against Laplace(sensitivity / eps).
  const double sensitivity = 0.25, epsilon = 0.5, b = sensitivity / epsilon;
  std::vector<double> out(100000);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = laplace_mechanism(1.0, sensitivity, epsilon, 8, i) - 1.0;
  }
  const double d = oracles::ks_statistic(out, [b](double x) { return oracles::laplace_cdf(x, b); });
  EXPECT_LT(d, oracles::ks_critical(out.size(), 1e-3));
}

TEST(LaplaceMechanism, LikelihoodRatio) {
  for (double eps : {0.1, 0.5, 1.0}) {
    const double sensitivity = 1.0;
    const double ratio =
        oracles::laplace_bin_ratio(sensitivity, sensitivity / eps, 1e-3, 30.0 * sensitivity / eps);
    EXPECT_LE(ratio, std::exp(eps) * (1 + 1e-6)) << "eps " << eps;
    EXPECT_GT(ratio, std::exp(eps) * 0.99);
  }
}

TEST(RandomizedResponse, LikelihoodRatioIsExact) {
  for (double eps : {0.1, 0.5, 1.0}) {
    for (std::size_t k : {2u, 3u, 5u}) {
      const double keep = rr_keep_probability(eps, k);
      const double other = (1 - keep) / static_cast<double>(k - 1);
      EXPECT_NEAR(keep / other, std::exp(eps), 1e-12);
    }
  }
}

TEST(RandomizedResponse, FrequenciesMatchChannel) {
  const double eps = 0.7;
  const std::size_t k = 3;
  Stream s(5, {});
  std::vector<int> counts(k, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[randomized_response_from_uniform(1, eps, k, s.uniform())];
  const double keep = rr_keep_probability(eps, k);
  EXPECT_NEAR(counts[1] / static_cast<double>(n), keep, 0.005);
  EXPECT_NEAR(counts[0] / static_cast<double>(n), (1 - keep) / 2, 0.005);
}

TEST(AggregateRound, NoiselessEqualsGlobalMean) {
  const Topology t({3, 2, 2});
  const DatasetTree tree = sample_tree(t, BoundedBernoulli{}, 0.4, 2);
  const RoundResult r = aggregate_round(tree, laplace_plan({1e12, 1e12, 1e12}), 3);
  EXPECT_NEAR(r.root, mean_of(tree.leaves()), 1e-6);
}

TEST(AggregateRound, UnbiasedForConstantData) {
  const Topology t({2, 2});
  const DatasetTree tree = sample_tree(t, GaussianLocation{{0.0, 0.0}}, 0.5, 1);
  const AggregationPlan plan = laplace_plan({0.5, 0.5});
  std::vector<double> w(100000);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = aggregate_round(tree, plan, 4, i).root;
  const GenEstimate e = summarize(w);
  EXPECT_NEAR(e.mean, 0.5, 3 * e.std_error);
}

TEST(AggregateRound, ReplayIsBitExact) {
  const Topology t({3, 2});
  const DatasetTree tree = sample_tree(t, BoundedBernoulli{}, 0.6, 7);
  for (const AggregationPlan& plan :
       {laplace_plan({0.3, 0.9}),
        AggregationPlan{{RandomizedResponse{0.5, 2}, RandomizedResponse{1.0, 2}}}}) {
    const RoundResult r = aggregate_round(tree, plan, 11, 2);
    for (std::size_t layer = 0; layer < t.depth(); ++layer) {
      const std::size_t n = t.branching_at(layer + 1);
      for (std::size_t f = 0; f < t.layer_size(layer); ++f) {
        const std::span<const double> children(r.hypotheses[layer + 1].data() + f * n, n);
        EXPECT_EQ(aggregation_step(plan.mechanisms[layer], children, r.randomness[layer][f]),
                  r.hypotheses[layer][f]);
      }
    }
  }
}

TEST(AggregateRound, DepthMismatchIsConfigError) {
  const DatasetTree tree = sample_tree(Topology({2, 2}), BoundedBernoulli{}, 0.5, 1);
  EXPECT_THROW(aggregate_round(tree, laplace_plan({1.0}), 1), ConfigError);
}

TEST(AggregateRound, NonPositiveEpsilonIsContractError) {
  const DatasetTree tree = sample_tree(Topology({2}), BoundedBernoulli{}, 0.5, 1);
  EXPECT_THROW(aggregate_round(tree, laplace_plan({0.0}), 1), ContractError);
}

TEST(DpEmpiricalVsBound, DegenerateDataHasNoGap) {
  const Topology t({2, 2});
  const DpComparison c = dp_empirical_vs_bound(t, BoundedBernoulli{}, 1.0, laplace_plan({1e9, 1e9}),
                                               SquaredClippedLoss{1.0}, 200, 3);
  EXPECT_NEAR(c.gen.mean, 0.0, 1e-9);
  EXPECT_TRUE(c.dominates);
}

TEST(DpEmpiricalVsBound, SmallEpsilon) {
  const Topology t({3, 3});
  const DpComparison c = dp_empirical_vs_bound(t, BoundedBernoulli{}, 0.5, laplace_plan({0.1, 0.1}),
                                               ZeroOneLoss{0.5}, 4000, 5);
  EXPECT_NEAR(c.bound.total, 0.41024, 1e-4);
  EXPECT_LT(std::abs(c.gen.mean), c.bound.total);
  EXPECT_TRUE(c.dominates);
}

TEST(DpEmpiricalVsBound, ContractErrors) {
  const Topology t({2});
  EXPECT_THROW(dp_empirical_vs_bound(t, BoundedBernoulli{}, 0.5, laplace_plan({0.0}),
                                     ZeroOneLoss{}, 10, 1),
               ContractError);
  EXPECT_THROW(dp_empirical_vs_bound(t, BoundedBernoulli{}, 0.5, laplace_plan({1.0}),
                                     AbsoluteLoss{}, 10, 1),
               ContractError);
  EXPECT_THROW(dp_empirical_vs_bound(t, GaussianLocation{{1.0}}, 0.5, laplace_plan({1.0}),
                                     ZeroOneLoss{}, 10, 1),
               ContractError);
}

}  // namespace
}  // namespace hflgen
