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
#include <numbers>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "hflgen/bounds.hpp"
#include "hflgen/risk.hpp"

namespace hflgen {
namespace {

DatasetTree leaves_tree(const std::vector<double>& leaves) {
  DatasetTree tree(share(Topology({leaves.size()})), 0.0);
  for (std::size_t f = 0; f < leaves.size(); ++f) tree.set(1, f, leaves[f]);
  return tree;
}

TEST(Loss, Contracts) {
  const LossContract abs = contract(AbsoluteLoss{});
  EXPECT_EQ(abs.lipschitz, 1.0);
  EXPECT_FALSE(abs.bound.has_value());
  const LossContract zo = contract(ZeroOneLoss{});
  ASSERT_TRUE(zo.bound.has_value());
  EXPECT_EQ(zo.bound->lo, 0.0);
  EXPECT_EQ(zo.bound->hi, 1.0);
  EXPECT_EQ(zo.metric, Metric::kDiscrete);
  EXPECT_TRUE(bounded_in_unit_interval(SquaredClippedLoss{1.0}));
  EXPECT_FALSE(bounded_in_unit_interval(SquaredClippedLoss{2.0}));
  EXPECT_FALSE(bounded_in_unit_interval(AbsoluteLoss{}));
}

TEST(Loss, Values) {
  EXPECT_EQ(evaluate(AbsoluteLoss{}, 1.0, -0.5), 1.5);
  EXPECT_EQ(evaluate(SquaredClippedLoss{1.0}, 0.0, 3.0), 1.0);
  EXPECT_EQ(evaluate(SquaredClippedLoss{1.0}, 0.0, 0.5), 0.25);
  EXPECT_EQ(evaluate(ZeroOneLoss{0.5}, 0.0, 0.6), 1.0);
  EXPECT_EQ(evaluate(ZeroOneLoss{0.5}, 0.0, 0.4), 0.0);
}

TEST(EmpiricalRisk, Examples) {
  EXPECT_EQ(empirical_risk(2.0, leaves_tree({2.0, 2.0, 2.0}), AbsoluteLoss{}), 0.0);
  EXPECT_EQ(empirical_risk(1.0, leaves_tree({0.0, 2.0}), AbsoluteLoss{}), 1.0);
  EXPECT_EQ(empirical_risk(0.0, leaves_tree({0.0, 1.0, 2.0, 3.0}), AbsoluteLoss{}), 1.5);
}

TEST(PopulationRisk, ZeroVarianceIsExactlyZero) {
  const GenEstimate e = population_risk_mc(Topology({2, 2}), 1.0, GaussianLocation{{0.0, 0.0}},
                                           1.0, AbsoluteLoss{}, 1000, 3);
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(PopulationRisk, SingleLayerMeanAbsoluteDeviation) {
  const GenEstimate e = population_risk_mc(Topology({4}), 0.0, GaussianLocation{{1.0}}, 0.0,
                                           AbsoluteLoss{}, 100000, 4);
  EXPECT_NEAR(e.mean, std::sqrt(2.0 / std::numbers::pi), 3 * e.std_error);
}

TEST(PopulationRisk, TwoLayerMeanAbsoluteDeviation) {
  const GenEstimate e = population_risk_mc(Topology({2, 2}), 0.0, GaussianLocation{{1.0, 1.0}},
                                           0.0, AbsoluteLoss{}, 100000, 5);
  EXPECT_NEAR(e.mean, std::sqrt(2.0 / std::numbers::pi) * std::sqrt(2.0), 3 * e.std_error);
}

TEST(PopulationRisk, ZeroTrialsIsArgumentError) {
  EXPECT_THROW(population_risk_mc(Topology({2}), 0.0, GaussianLocation{{1.0}}, 0.0,
                                  AbsoluteLoss{}, 0, 1),
               std::invalid_argument);
}

TEST(GenError, ZeroVarianceIsZeroWithZeroError) {
  const GenEstimate e = gen_error_mc(Topology({2, 2}), GaussianLocation{{0.0, 0.0}}, 0.0,
                                     LeafAverage{}, AbsoluteLoss{}, 100, 4, 1);
  EXPECT_EQ(e.mean, 0.0);
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(GenError, SingleLayerMatchesClosedForm) {
  const Topology t({4});
  const GenEstimate e =
      gen_error_mc(t, GaussianLocation{{1.0}}, 0.0, LeafAverage{}, AbsoluteLoss{}, 100000, 1, 21);
  const double exact = glm_true_gen({0.0, {1.0}, t});
  EXPECT_NEAR(exact, 0.2011, 1e-4);
  EXPECT_NEAR(e.mean, exact, 3 * e.std_error);
}

TEST(GenError, LargeSampleLimitIsSmall) {
  const Topology t({1024});
  const GenEstimate e = gen_error_mc(t, GaussianLocation{{1.0}}, 0.0, LeafAverage{},
                                     AbsoluteLoss{}, 4000, 1000, 22);
  EXPECT_LT(glm_true_gen({0.0, {1.0}, t}), 0.002);
  EXPECT_LT(e.mean, 0.002);
}

TEST(GenError, ArgumentValidation) {
  EXPECT_THROW(gen_error_mc(Topology({2}), GaussianLocation{{1.0}}, 0.0, LeafAverage{},
                            AbsoluteLoss{}, 1, 1, 1),
               std::invalid_argument);
  EXPECT_THROW(gen_error_mc(Topology({2}), GaussianLocation{{1.0}}, 0.0, LeafAverage{},
                            AbsoluteLoss{}, 10, 0, 1),
               std::invalid_argument);
}

TEST(GenError, NoisyAverageReproducible) {
  const Topology t({3});
  auto run = [&] {
    return gen_error_mc(t, GaussianLocation{{1.0}}, 0.0, NoisyLeafAverage{0.3}, AbsoluteLoss{},
                        200, 2, 8)
        .mean;
  };
  EXPECT_EQ(run(), run());
}

TEST(Decomposition, ZeroVarianceTermsVanish) {
  const Decomposition d = decomposition_terms_mc(Topology({2, 2}), GaussianLocation{{0.0, 0.0}},
                                                 0.0, LeafAverage{}, AbsoluteLoss{}, 50, 2, 1);
  ASSERT_EQ(d.terms.size(), 3u);
  for (const auto& term : d.terms) EXPECT_EQ(term.estimate.mean, 0.0);
  EXPECT_EQ(d.signed_total.mean, 0.0);
}

TEST(Decomposition, SingleLayerTermIsTheGeneralizationError) {
  const Topology t({4});
  const Decomposition d = decomposition_terms_mc(t, GaussianLocation{{1.0}}, 0.0, LeafAverage{},
                                                 AbsoluteLoss{}, 5000, 1, 17);
  const GenEstimate g =
      gen_error_mc(t, GaussianLocation{{1.0}}, 0.0, LeafAverage{}, AbsoluteLoss{}, 5000, 1, 17);
  ASSERT_EQ(d.terms.size(), 1u);
  EXPECT_EQ(d.terms[0].path, NodePath::root());
  EXPECT_NEAR(d.terms[0].estimate.mean, g.mean, 1e-12);
  EXPECT_NEAR(d.terms[0].estimate.mean, g.mean, 3 * g.std_error);
}

TEST(Decomposition, TelescopesToGeneralizationError) {
  const Topology t({2, 2});
  const Kernel k = GaussianLocation{{1.0, 1.0}};
  const Decomposition d =
      decomposition_terms_mc(t, k, 0.0, LeafAverage{}, AbsoluteLoss{}, 20000, 4, 31);
  const GenEstimate g = gen_error_mc(t, k, 0.0, LeafAverage{}, AbsoluteLoss{}, 20000, 4, 31);
  EXPECT_NEAR(d.signed_total.mean, g.mean, 3 * g.std_error);
  EXPECT_NEAR(d.signed_total.mean, d.gen.mean, 1e-12);
  EXPECT_NEAR(g.mean, glm_true_gen({0.0, {1.0, 1.0}, t}), 3 * g.std_error);
  EXPECT_EQ(d.terms.size(), 3u);
  EXPECT_EQ(d.terms[0].child_layer(), 1u);
}

}  // namespace
}  // namespace hflgen
