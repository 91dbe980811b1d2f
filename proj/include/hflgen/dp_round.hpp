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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hflgen/errors.hpp"
#include "hflgen/hierarchy.hpp"
#include "hflgen/random.hpp"
#include "hflgen/topology.hpp"

namespace hflgen {

// Single-round hierarchical aggregation with a locally private mechanism at
// every layer. Hypotheses flow bottom-up: the layer-L hypotheses are the
// data points, and each internal node publishes mechanism(children).

// Laplace noise on the mean of the children, calibrated to the replace-one
// sensitivity (hi - lo) / n of a mean of n values in [lo, hi]. The noisy
// value is clipped back into [lo, hi].
struct LaplaceOnMean {
  double epsilon = 1.0;
  double lo = 0.0;
  double hi = 1.0;
};

// k-ary randomized response on the plurality symbol of the children: keeps
// it with probability e^eps / (e^eps + k - 1), otherwise reports one of the
// other k - 1 symbols uniformly.
struct RandomizedResponse {
  double epsilon = 1.0;
  std::size_t alphabet_size = 2;
};

using DpMechanism = std::variant<LaplaceOnMean, RandomizedResponse>;

inline double mechanism_epsilon(const DpMechanism& m) {
  return std::visit([](const auto& v) { return v.epsilon; }, m);
}

// mechanisms[l-1] aggregates the hypotheses of layer l into their parents at
// layer l-1, so it carries epsilon_l.
struct AggregationPlan {
  std::vector<DpMechanism> mechanisms;

  std::vector<double> epsilons() const {
    std::vector<double> out;
    for (const auto& m : mechanisms) out.push_back(mechanism_epsilon(m));
    return out;
  }
};

inline void validate_plan(const AggregationPlan& plan, const Topology& topology) {
  if (plan.mechanisms.size() != topology.depth()) {
    throw ConfigError("aggregation plan has " + std::to_string(plan.mechanisms.size()) +
                      " layers, topology has " + std::to_string(topology.depth()));
  }
  for (const auto& m : plan.mechanisms) {
    if (!(mechanism_epsilon(m) > 0.0)) {
      throw ContractError("DP mechanisms require epsilon > 0");
    }
    if (const auto* lap = std::get_if<LaplaceOnMean>(&m)) {
      if (!(lap->lo < lap->hi)) throw ContractError("LaplaceOnMean requires lo < hi");
    } else if (std::get<RandomizedResponse>(m).alphabet_size < 2) {
      throw ContractError("RandomizedResponse requires at least two symbols");
    }
  }
}

inline double laplace_mechanism(double value, double sensitivity, double epsilon,
                                Stream& stream) {
  if (!(sensitivity > 0.0)) throw std::invalid_argument("laplace_mechanism: sensitivity must be > 0");
  if (!(epsilon > 0.0)) throw std::invalid_argument("laplace_mechanism: epsilon must be > 0");
  return value + stream.laplace(sensitivity / epsilon);
}

inline double laplace_mechanism(double value, double sensitivity, double epsilon,
                                std::uint64_t seed, std::uint64_t draw = 0) {
  Stream stream(seed, {draw, 0, 0, Purpose::kMechanism});
  return laplace_mechanism(value, sensitivity, epsilon, stream);
}

// Probability that randomized response reports its input unchanged.
inline double rr_keep_probability(double epsilon, std::size_t k) {
  const double e = std::exp(epsilon);
  return e / (e + static_cast<double>(k) - 1.0);
}

// Deterministic randomized-response step driven by one uniform u in (0, 1).
inline std::size_t randomized_response_from_uniform(std::size_t symbol, double epsilon,
                                                    std::size_t k, double u) {
  const double keep = rr_keep_probability(epsilon, k);
  if (u < keep) return symbol;
  const double width = (1.0 - keep) / static_cast<double>(k - 1);
  auto other = static_cast<std::size_t>((u - keep) / width);
  other = std::min(other, k - 2);
  return other < symbol ? other : other + 1;
}

inline double mean_of(std::span<const double> values) {
  double total = 0.0;
  for (double v : values) total += v;
  return total / static_cast<double>(values.size());
}

// Plurality symbol among the (rounded, clamped) child hypotheses; ties go to
// the smaller symbol.
inline std::size_t plurality_symbol(std::span<const double> values, std::size_t k) {
  std::vector<std::size_t> counts(k, 0);
  for (double v : values) {
    const double r = std::clamp(std::round(v), 0.0, static_cast<double>(k - 1));
    ++counts[static_cast<std::size_t>(r)];
  }
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) -
                                  counts.begin());
}

// One aggregation step given the recorded randomness (additive Laplace noise,
// or the uniform consumed by randomized response). Replaying a stored step
// through this function reproduces the stored hypothesis bit-exactly.
inline double aggregation_step(const DpMechanism& mechanism,
                               std::span<const double> children, double randomness) {
  if (const auto* lap = std::get_if<LaplaceOnMean>(&mechanism)) {
    return std::clamp(mean_of(children) + randomness, lap->lo, lap->hi);
  }
  const auto& rr = std::get<RandomizedResponse>(mechanism);
  const std::size_t input = plurality_symbol(children, rr.alphabet_size);
  return static_cast<double>(
      randomized_response_from_uniform(input, rr.epsilon, rr.alphabet_size, randomness));
}

struct RoundResult {
  double root = 0.0;
  // hypotheses[l][flat] for l = 0..L; layer L holds the clipped data points.
  std::vector<std::vector<double>> hypotheses;
  // randomness[l][flat] consumed by the node at layer l < L.
  std::vector<std::vector<double>> randomness;
};

// `salt` separates rounds that share a trial index (the bound estimators
// run many rounds per supersample draw).
inline RoundResult aggregate_round(const DatasetTree& tree, const AggregationPlan& plan,
                                   std::uint64_t seed, std::uint64_t trial = 0,
                                   std::uint64_t salt = 0) {
  const Topology& topology = tree.topology();
  validate_plan(plan, topology);
  const std::size_t depth = topology.depth();
  RoundResult result;
  result.hypotheses.resize(depth + 1);
  result.randomness.resize(depth);

  const auto& leaf_mechanism = plan.mechanisms[depth - 1];
  auto& leaves = result.hypotheses[depth];
  leaves.assign(tree.leaves().begin(), tree.leaves().end());
  for (double& v : leaves) {
    if (const auto* lap = std::get_if<LaplaceOnMean>(&leaf_mechanism)) {
      v = std::clamp(v, lap->lo, lap->hi);
    }
  }

  for (std::size_t layer = depth; layer-- > 0;) {
    const DpMechanism& mechanism = plan.mechanisms[layer];
    const std::size_t n = topology.branching_at(layer + 1);
    const std::size_t count = topology.layer_size(layer);
    auto& out = result.hypotheses[layer];
    auto& noise = result.randomness[layer];
    out.resize(count);
    noise.resize(count);
    const auto& below = result.hypotheses[layer + 1];
    for (std::size_t flat = 0; flat < count; ++flat) {
      Stream stream(seed, {trial, static_cast<std::uint32_t>(layer), flat,
                           Purpose::kMechanism, salt});
      if (const auto* lap = std::get_if<LaplaceOnMean>(&mechanism)) {
        const double sensitivity = (lap->hi - lap->lo) / static_cast<double>(n);
        noise[flat] = stream.laplace(sensitivity / lap->epsilon);
      } else {
        noise[flat] = stream.uniform();
      }
      const std::span<const double> children(below.data() + flat * n, n);
      out[flat] = aggregation_step(mechanism, children, noise[flat]);
    }
  }
  result.root = result.hypotheses[0][0];
  return result;
}

}  // namespace hflgen
