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
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "hflgen/dp_round.hpp"
#include "hflgen/hierarchy.hpp"
#include "hflgen/kernel.hpp"
#include "hflgen/parallel.hpp"
#include "hflgen/random.hpp"
#include "hflgen/topology.hpp"

namespace hflgen {

// Metric on the hypothesis space used by the Lipschitz contract of a loss and
// by the Wasserstein distances measured against it.
enum class Metric { kAbsolute, kDiscrete };

inline std::string metric_name(Metric m) {
  return m == Metric::kAbsolute ? "absolute" : "discrete";
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

// l(w, z) = |w - z|.
struct AbsoluteLoss {};
// l(w, z) = min((w - z)^2, cap).
struct SquaredClippedLoss {
  double cap = 1.0;
};
// l(w, z) = 1[|w - z| > threshold].
struct ZeroOneLoss {
  double threshold = 0.5;
};

using Loss = std::variant<AbsoluteLoss, SquaredClippedLoss, ZeroOneLoss>;

inline double evaluate(const Loss& loss, double w, double z) {
  if (std::holds_alternative<AbsoluteLoss>(loss)) return std::abs(w - z);
  if (const auto* sq = std::get_if<SquaredClippedLoss>(&loss)) {
    return std::min((w - z) * (w - z), sq->cap);
  }
  return std::abs(w - z) > std::get<ZeroOneLoss>(loss).threshold ? 1.0 : 0.0;
}

inline std::string loss_name(const Loss& loss) {
  if (std::holds_alternative<AbsoluteLoss>(loss)) return "absolute";
  if (std::holds_alternative<SquaredClippedLoss>(loss)) return "squared_clipped";
  return "zero_one";
}

// What a loss promises: |l(w, z) - l(w', z)| <= lipschitz * rho(w, w') under
// `metric`, and l in `bound` when bounded.
struct LossContract {
  std::optional<double> lipschitz;
  Metric metric = Metric::kAbsolute;
  std::optional<Interval> bound;
};

inline LossContract contract(const Loss& loss) {
  if (std::holds_alternative<AbsoluteLoss>(loss)) {
    return {1.0, Metric::kAbsolute, std::nullopt};
  }
  if (const auto* sq = std::get_if<SquaredClippedLoss>(&loss)) {
    // The clipped parabola has slope at most 2 sqrt(cap).
    return {2.0 * std::sqrt(sq->cap), Metric::kAbsolute, Interval{0.0, sq->cap}};
  }
  // Not Lipschitz in |w - w'|; 1-Lipschitz under the discrete metric.
  return {1.0, Metric::kDiscrete, Interval{0.0, 1.0}};
}

inline bool bounded_in_unit_interval(const Loss& loss) {
  const auto c = contract(loss);
  return c.bound && c.bound->lo >= 0.0 && c.bound->hi <= 1.0;
}

struct LeafAverage {};
struct NoisyLeafAverage {
  double noise_sd = 0.0;
};
struct HierarchicalDP {
  AggregationPlan plan;
};

using Algorithm = std::variant<LeafAverage, NoisyLeafAverage, HierarchicalDP>;

inline std::string algorithm_name(const Algorithm& algorithm) {
  if (std::holds_alternative<LeafAverage>(algorithm)) return "leaf_average";
  if (std::holds_alternative<NoisyLeafAverage>(algorithm)) return "noisy_leaf_average";
  return "hierarchical_dp";
}

inline bool is_deterministic(const Algorithm& algorithm) {
  if (std::holds_alternative<LeafAverage>(algorithm)) return true;
  if (const auto* noisy = std::get_if<NoisyLeafAverage>(&algorithm)) {
    return noisy->noise_sd == 0.0;
  }
  return false;
}

// Runs the learning algorithm on `tree`. Its randomness, if any, comes from
// streams derived from (seed, key), so two calls with equal keys share it.
inline double train(const Algorithm& algorithm, const DatasetTree& tree, std::uint64_t seed,
                    const StreamKey& key) {
  if (std::holds_alternative<LeafAverage>(algorithm)) return mean_of(tree.leaves());
  if (const auto* noisy = std::get_if<NoisyLeafAverage>(&algorithm)) {
    const double w = mean_of(tree.leaves());
    if (noisy->noise_sd == 0.0) return w;
    StreamKey k = key;
    k.purpose = Purpose::kAlgorithm;
    Stream stream(seed, k);
    return stream.normal(w, noisy->noise_sd);
  }
  const auto& dp = std::get<HierarchicalDP>(algorithm);
  return aggregate_round(tree, dp.plan, seed, key.trial, key.id()).root;
}

inline void validate_algorithm(const Algorithm& algorithm, const Topology& topology) {
  if (const auto* noisy = std::get_if<NoisyLeafAverage>(&algorithm)) {
    if (!(noisy->noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
  } else if (const auto* dp = std::get_if<HierarchicalDP>(&algorithm)) {
    validate_plan(dp->plan, topology);
  }
}

// (1/N_L) * sum over leaves of l(w, leaf).
inline double empirical_risk(double w, const DatasetTree& tree, const Loss& loss) {
  CompensatedSum total;
  for (double z : tree.leaves()) total.add(evaluate(loss, w, z));
  return total.value() / static_cast<double>(tree.leaves().size());
}

// Monte Carlo population risk: mean of l(w, leaf) over fresh root-to-leaf
// chains.
inline GenEstimate population_risk_mc(const Topology& topology, double w,
                                      const Kernel& kernel, double root_param,
                                      const Loss& loss, std::size_t trials,
                                      std::uint64_t seed, Parallelism par = {}) {
  if (trials == 0) throw std::invalid_argument("population_risk_mc: trials must be >= 1");
  validate_kernel(kernel, topology, root_param);
  std::vector<double> values(trials);
  parallel_for(trials, par, [&](std::size_t i) {
    Stream stream(seed, {i, 0, 0, Purpose::kTestLeaf});
    values[i] = evaluate(loss, w, draw_test_leaf(kernel, topology, 0, root_param, stream));
  });
  return summarize(values);
}

namespace detail {

inline double mean_test_loss(const Kernel& kernel, const Topology& topology,
                             std::size_t layer, double value, double w,
                             const Loss& loss, std::size_t samples, Stream& stream) {
  CompensatedSum total;
  for (std::size_t k = 0; k < samples; ++k) {
    total.add(evaluate(loss, w, draw_test_leaf(kernel, topology, layer, value, stream)));
  }
  return total.value() / static_cast<double>(samples);
}

inline void check_mc_arguments(std::size_t outer_trials, std::size_t inner) {
  if (outer_trials < 2) throw std::invalid_argument("outer_trials must be >= 2");
  if (inner < 1) throw std::invalid_argument("inner_test_samples must be >= 1");
}

}  // namespace detail

// gen = E[L(W) - L_hat(W, mu)]. Per outer trial: sample a tree, train, then
// population risk from `inner_test_samples` fresh chains minus empirical
// risk. The root test stream of trial t is the one the decomposition
// estimator uses for its l = 0 term, so both estimators share randomness.
inline GenEstimate gen_error_mc(const Topology& topology, const Kernel& kernel,
                                double root_param, const Algorithm& algorithm,
                                const Loss& loss, std::size_t outer_trials,
                                std::size_t inner_test_samples, std::uint64_t seed,
                                Parallelism par = {}) {
  detail::check_mc_arguments(outer_trials, inner_test_samples);
  validate_kernel(kernel, topology, root_param);
  validate_algorithm(algorithm, topology);
  const auto shared = share(topology);
  std::vector<double> values(outer_trials);
  parallel_for(outer_trials, par, [&](std::size_t t) {
    DatasetTree tree(shared, root_param);
    fill_tree(
        tree, kernel, [](std::size_t, std::size_t) { return std::optional<double>{}; },
        [&](std::size_t layer, std::size_t flat) {
          return Stream(seed, {t, static_cast<std::uint32_t>(layer), flat, Purpose::kTree});
        });
    const double w = train(algorithm, tree, seed, {t, 0, 0, Purpose::kAlgorithm});
    Stream test(seed, {t, 0, 0, Purpose::kTestLeaf});
    const double population = detail::mean_test_loss(kernel, topology, 0, root_param, w,
                                                     loss, inner_test_samples, test);
    values[t] = population - empirical_risk(w, tree, loss);
  });
  return summarize(values);
}

// One term of the layer decomposition: the parent-versus-children risk gap at
// the node `path` of layer `layer` (0 <= layer < L).
struct DecompositionTerm {
  std::size_t layer = 0;
  NodePath path;
  GenEstimate estimate;

  // The same term indexed by the layer of the children, which is how the
  // Wasserstein bound numbers its sum (layers 1..L).
  std::size_t child_layer() const { return layer + 1; }
};

struct Decomposition {
  std::vector<DecompositionTerm> terms;
  // sum_l (1/N_l) sum_i Delta_{l,i}; equals the generalization error.
  GenEstimate signed_total;
  // Generalization error estimated on the same trials and streams.
  GenEstimate gen;
  // sum_l (1/N_l) sum_i |E Delta_{l,i}| and a conservative standard error
  // (errors added linearly).
  double absolute_total = 0.0;
  double absolute_total_std_error = 0.0;
};

// Estimates Delta_{l,i} = E[test risk from node (l,i)] - mean over children
// of E[test risk from child], for every node of layers 0..L-1. A test risk
// from a node averages `inner_test_samples` independent leaves drawn below
// the node's payload; from a leaf it is the loss at the leaf itself. The
// trained W is shared by all terms within one outer trial.
inline Decomposition decomposition_terms_mc(const Topology& topology, const Kernel& kernel,
                                            double root_param, const Algorithm& algorithm,
                                            const Loss& loss, std::size_t outer_trials,
                                            std::size_t inner_test_samples,
                                            std::uint64_t seed, Parallelism par = {}) {
  detail::check_mc_arguments(outer_trials, inner_test_samples);
  validate_kernel(kernel, topology, root_param);
  validate_algorithm(algorithm, topology);
  const std::size_t depth = topology.depth();
  std::vector<std::size_t> term_offset(depth + 1, 0);
  for (std::size_t l = 1; l <= depth; ++l) {
    term_offset[l] = term_offset[l - 1] + topology.layer_size(l - 1);
  }
  const std::size_t term_count = term_offset[depth];
  const auto shared = share(topology);

  std::vector<double> deltas(outer_trials * term_count);
  std::vector<double> signed_totals(outer_trials);
  std::vector<double> gens(outer_trials);

  parallel_for(outer_trials, par, [&](std::size_t t) {
    DatasetTree tree(shared, root_param);
    fill_tree(
        tree, kernel, [](std::size_t, std::size_t) { return std::optional<double>{}; },
        [&](std::size_t layer, std::size_t flat) {
          return Stream(seed, {t, static_cast<std::uint32_t>(layer), flat, Purpose::kTree});
        });
    const double w = train(algorithm, tree, seed, {t, 0, 0, Purpose::kAlgorithm});

    // risk[l][flat]: test risk from each node, layers 0..L.
    std::vector<std::vector<double>> risk(depth + 1);
    for (std::size_t layer = 0; layer < depth; ++layer) {
      risk[layer].resize(topology.layer_size(layer));
      for (std::size_t flat = 0; flat < topology.layer_size(layer); ++flat) {
        Stream test(seed, {t, static_cast<std::uint32_t>(layer), flat, Purpose::kTestLeaf});
        risk[layer][flat] = detail::mean_test_loss(kernel, topology, layer,
                                                   tree.value(layer, flat), w, loss,
                                                   inner_test_samples, test);
      }
    }
    for (double z : tree.leaves()) risk[depth].push_back(evaluate(loss, w, z));

    double* row = deltas.data() + t * term_count;
    CompensatedSum total;
    for (std::size_t layer = 0; layer < depth; ++layer) {
      const std::size_t n = topology.branching_at(layer + 1);
      const double weight = 1.0 / static_cast<double>(topology.layer_size(layer));
      for (std::size_t flat = 0; flat < topology.layer_size(layer); ++flat) {
        CompensatedSum children;
        for (std::size_t c = 0; c < n; ++c) children.add(risk[layer + 1][flat * n + c]);
        const double delta = risk[layer][flat] - children.value() / static_cast<double>(n);
        row[term_offset[layer] + flat] = delta;
        total.add(weight * delta);
      }
    }
    signed_totals[t] = total.value();
    gens[t] = risk[0][0] - empirical_risk(w, tree, loss);
  });

  Decomposition out;
  std::vector<double> column(outer_trials);
  for (std::size_t layer = 0; layer < depth; ++layer) {
    const double weight = 1.0 / static_cast<double>(topology.layer_size(layer));
    for (std::size_t flat = 0; flat < topology.layer_size(layer); ++flat) {
      for (std::size_t t = 0; t < outer_trials; ++t) {
        column[t] = deltas[t * term_count + term_offset[layer] + flat];
      }
      DecompositionTerm term{layer, topology.path_at(layer, flat), summarize(column)};
      out.absolute_total += weight * std::abs(term.estimate.mean);
      out.absolute_total_std_error += weight * term.estimate.std_error;
      out.terms.push_back(std::move(term));
    }
  }
  out.signed_total = summarize(signed_totals);
  out.gen = summarize(gens);
  return out;
}

}  // namespace hflgen
