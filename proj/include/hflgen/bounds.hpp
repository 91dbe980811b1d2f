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
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hflgen/divergences.hpp"
#include "hflgen/dp_round.hpp"
#include "hflgen/errors.hpp"
#include "hflgen/hierarchy.hpp"
#include "hflgen/kernel.hpp"
#include "hflgen/parallel.hpp"
#include "hflgen/risk.hpp"
#include "hflgen/topology.hpp"

namespace hflgen {

struct LayerContribution {
  std::size_t layer = 0;
  double contribution = 0.0;
  double std_error = 0.0;
};

// Unweighted per-node term, before the (1/N_l) and Lipschitz factors.
struct NodeTerm {
  std::size_t layer = 0;
  std::size_t flat = 0;
  double value = 0.0;
  double std_error = 0.0;
};

struct BoundReport {
  // wasserstein | cmi | subtree | subtree_cmi | dp | glm_exact | glm_taylor |
  // glm_wasserstein
  std::string family;
  std::vector<LayerContribution> per_layer;
  std::vector<NodeTerm> per_node;
  double total = 0.0;
  double total_std_error = 0.0;
  // absolute | discrete | none
  std::string metric = "none";
  std::optional<Interval> loss_bound_used;
  std::optional<double> lipschitz_used;
};

namespace detail {

inline void finalize_total(BoundReport& report) {
  CompensatedSum total;
  for (const auto& c : report.per_layer) total.add(c.contribution);
  report.total = total.value();
}

inline void require_positive_lipschitz(double lipschitz) {
  if (!(lipschitz > 0.0) || !std::isfinite(lipschitz)) {
    throw std::invalid_argument("lipschitz constant must be finite and > 0");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gaussian location model closed forms.

struct GlmParams {
  double theta = 0.0;
  std::vector<double> sigmas;
  Topology topology;
};

inline void validate_glm(const GlmParams& p) {
  if (p.sigmas.size() != p.topology.depth()) {
    throw ConfigError("GLM needs one sigma per layer");
  }
  for (double s : p.sigmas) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("GLM sigmas must be finite and >= 0");
  }
}

inline GlmParams glm_params(const Topology& topology, const Kernel& kernel, double root_param) {
  const auto* g = std::get_if<GaussianLocation>(&kernel);
  if (g == nullptr) throw ConfigError("GLM closed forms need a gaussian_location kernel");
  GlmParams p{root_param, g->sigmas, topology};
  validate_glm(p);
  return p;
}

// V = sum sigma_l^2.
inline double glm_total_variance(const GlmParams& p) {
  CompensatedSum v;
  for (double s : p.sigmas) v.add(s * s);
  return v.value();
}

// Delta = sum sigma_l^2 / N_l, the variance of the leaf average.
inline double glm_delta(const GlmParams& p) {
  CompensatedSum d;
  for (std::size_t l = 1; l <= p.sigmas.size(); ++l) {
    const double s = p.sigmas[l - 1];
    d.add(s * s / static_cast<double>(p.topology.layer_size(l)));
  }
  return d.value();
}

// Exact generalization error of the leaf average under absolute loss.
inline double glm_true_gen(const GlmParams& p) {
  validate_glm(p);
  const double v = glm_total_variance(p);
  if (v == 0.0) return 0.0;
  const double d = glm_delta(p);
  return std::sqrt(2.0 / std::numbers::pi) * (std::sqrt(v + d) - std::sqrt(v - d));
}

// First-order expansion of glm_true_gen in Delta.
inline double glm_taylor_gen(const GlmParams& p) {
  validate_glm(p);
  const double v = glm_total_variance(p);
  if (v == 0.0) throw std::domain_error("glm_taylor_gen: V must be > 0");
  return std::sqrt(2.0 / std::numbers::pi) * glm_delta(p) / std::sqrt(v);
}

// Per node the Wasserstein term is sigma_l / (sqrt(pi) N_l), so layer l
// contributes 2 sigma_l / (sqrt(pi) N_l) with unit Lipschitz constant.
inline BoundReport glm_wasserstein_bound(const GlmParams& p) {
  validate_glm(p);
  BoundReport report;
  report.family = "glm_wasserstein";
  report.metric = "absolute";
  report.lipschitz_used = 1.0;
  const double inv_sqrt_pi = 1.0 / std::sqrt(std::numbers::pi);
  for (std::size_t l = 1; l <= p.sigmas.size(); ++l) {
    const double n_l = static_cast<double>(p.topology.layer_size(l));
    const double node = p.sigmas[l - 1] * inv_sqrt_pi / n_l;
    for (std::size_t i = 0; i < p.topology.layer_size(l); ++i) {
      report.per_node.push_back({l, i, node, 0.0});
    }
    report.per_layer.push_back({l, 2.0 * node, 0.0});
  }
  detail::finalize_total(report);
  return report;
}

// Standard deviation of the leaf average given the selected ancestors of a
// layer-l node, the node's own payload and its selector; `noise_sd` is
// independent Gaussian noise added by the algorithm.
inline double glm_conditional_sd(const GlmParams& p, std::size_t layer, double noise_sd = 0.0) {
  validate_glm(p);
  if (layer < 1 || layer > p.sigmas.size()) throw std::out_of_range("glm_conditional_sd: layer");
  CompensatedSum var;
  for (std::size_t k = 1; k <= p.sigmas.size(); ++k) {
    const double n_k = static_cast<double>(p.topology.layer_size(k));
    const double s2 = p.sigmas[k - 1] * p.sigmas[k - 1];
    if (k <= layer) {
      // One node of this layer lies on the conditioned chain.
      var.add((n_k - 1.0) * s2 / (n_k * n_k));
    } else {
      var.add(s2 / n_k);
    }
  }
  var.add(noise_sd * noise_sd);
  return std::sqrt(std::max(0.0, var.value()));
}

// ---------------------------------------------------------------------------
// CMI bound.

// Per-node CMI values. With empty weights the values are treated as Monte
// Carlo draws of I(W; U | conditioning) and the term carries a standard
// error; otherwise weights are the probabilities of exact slices.
struct NodeCmi {
  std::vector<double> values;
  std::vector<double> weights;

  NodeCmi() = default;
  NodeCmi(double value) : values{value} {}  // NOLINT(google-explicit-constructor)
  NodeCmi(std::vector<double> v, std::vector<double> w = {})
      : values(std::move(v)), weights(std::move(w)) {}
};

// sum_l (1/N_l) sum_i E sqrt(2 I_i). Every node of layers 1..L must be
// present.
inline BoundReport cmi_bound(const Topology& topology,
                             const std::map<NodePath, NodeCmi>& per_node_cmi) {
  for (const auto& [path, cmi] : per_node_cmi) {
    if (path.layer() == 0 || !topology.contains(path)) {
      throw std::invalid_argument("cmi_bound: node " + path.to_string() + " is not in the topology");
    }
    if (cmi.values.empty()) throw std::invalid_argument("cmi_bound: node without values");
    if (!cmi.weights.empty() && cmi.weights.size() != cmi.values.size()) {
      throw std::invalid_argument("cmi_bound: weights and values differ in length");
    }
    for (double v : cmi.values) {
      if (!(v >= 0.0)) throw std::invalid_argument("cmi_bound: CMI values must be >= 0");
    }
  }
  BoundReport report;
  report.family = "cmi";
  report.metric = "none";
  report.loss_bound_used = Interval{0.0, 1.0};
  for (std::size_t l = 1; l <= topology.depth(); ++l) {
    const double n_l = static_cast<double>(topology.layer_size(l));
    CompensatedSum layer_sum;
    double layer_se = 0.0;
    for (std::size_t i = 0; i < topology.layer_size(l); ++i) {
      const auto it = per_node_cmi.find(topology.path_at(l, i));
      if (it == per_node_cmi.end()) {
        throw std::invalid_argument("cmi_bound: missing node " + topology.path_at(l, i).to_string());
      }
      const NodeCmi& cmi = it->second;
      std::vector<double> roots(cmi.values.size());
      for (std::size_t k = 0; k < roots.size(); ++k) roots[k] = std::sqrt(2.0 * cmi.values[k]);
      NodeTerm term{l, i, 0.0, 0.0};
      if (cmi.weights.empty()) {
        const GenEstimate e = summarize(roots);
        term.value = e.mean;
        term.std_error = e.std_error;
      } else {
        CompensatedSum weighted;
        for (std::size_t k = 0; k < roots.size(); ++k) weighted.add(cmi.weights[k] * roots[k]);
        term.value = weighted.value();
      }
      layer_sum.add(term.value);
      layer_se += term.std_error;
      report.per_node.push_back(term);
    }
    report.per_layer.push_back({l, layer_sum.value() / n_l, layer_se / n_l});
  }
  detail::finalize_total(report);
  for (const auto& c : report.per_layer) report.total_std_error += c.std_error;
  return report;
}

// CMI bound for the Gaussian location model with the leaf average plus
// optional Gaussian noise. Given the conditioned chain and the node pair, W
// is Gaussian with mean shift x_u / N_l and sd glm_conditional_sd, so each
// per-draw CMI is a two-component Gaussian mixture information.
inline BoundReport glm_cmi_bound(const GlmParams& p, std::size_t draws, std::uint64_t seed,
                                 double noise_sd = 0.0, Parallelism par = {}) {
  validate_glm(p);
  if (draws < 2) throw std::invalid_argument("glm_cmi_bound: draws must be >= 2");
  const Topology& topology = p.topology;
  const std::size_t depth = topology.depth();
  const Kernel kernel = GaussianLocation{p.sigmas, {}};
  const std::size_t nodes = topology.node_count();
  std::vector<double> sd(depth + 1, 0.0);
  for (std::size_t l = 1; l <= depth; ++l) sd[l] = glm_conditional_sd(p, l, noise_sd);

  std::vector<double> values(draws * nodes);
  parallel_for(draws, par, [&](std::size_t d) {
    const SupersampleTree ss = sample_supersample(topology, kernel, p.theta, seed, d);
    for (std::size_t l = 1; l <= depth; ++l) {
      const double n_l = static_cast<double>(topology.layer_size(l));
      for (std::size_t i = 0; i < topology.layer_size(l); ++i) {
        const auto pair = ss.pair(l, i);
        const auto g = static_cast<std::size_t>(topology.global_id(l, i) - 1);
        values[d * nodes + g] = cmi_gaussian_mixture({pair[0] / n_l, pair[1] / n_l, sd[l]});
      }
    }
  });
  std::map<NodePath, NodeCmi> per_node;
  for (std::size_t l = 1; l <= depth; ++l) {
    for (std::size_t i = 0; i < topology.layer_size(l); ++i) {
      const auto g = static_cast<std::size_t>(topology.global_id(l, i) - 1);
      std::vector<double> column(draws);
      for (std::size_t d = 0; d < draws; ++d) column[d] = values[d * nodes + g];
      per_node.emplace(topology.path_at(l, i), NodeCmi(std::move(column)));
    }
  }
  BoundReport report = cmi_bound(topology, per_node);
  report.loss_bound_used.reset();
  return report;
}

// ---------------------------------------------------------------------------
// Monte Carlo Wasserstein bounds.

struct BoundMcOptions {
  // Hypothesis samples per selector value and per supersample draw.
  std::size_t inner_replicates = 8;
  Metric metric = Metric::kAbsolute;
  Parallelism par{};
};

namespace detail {

enum class Conditioning { kPair, kSubtree };

// TV between the empirical laws of two finite-valued sample sets.
inline double tv_empirical(std::span<const double> x_in, std::span<const double> y_in) {
  std::vector<double> x(x_in.begin(), x_in.end());
  std::vector<double> y(y_in.begin(), y_in.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double wx = 1.0 / static_cast<double>(x.size());
  const double wy = 1.0 / static_cast<double>(y.size());
  CompensatedSum total;
  std::size_t i = 0, j = 0;
  while (i < x.size() || j < y.size()) {
    double v;
    if (j == y.size() || (i < x.size() && x[i] < y[j])) {
      v = x[i];
    } else {
      v = y[j];
    }
    std::size_t cx = 0, cy = 0;
    while (i < x.size() && x[i] == v) ++i, ++cx;
    while (j < y.size() && y[j] == v) ++j, ++cy;
    total.add(std::abs(static_cast<double>(cx) * wx - static_cast<double>(cy) * wy));
  }
  return 0.5 * total.value();
}

// (1/2) sum_u D(P_u, (P_1 + P_2) / 2) with P_u the empirical law of s_u.
inline double mixture_term(std::span<const double> s1, std::span<const double> s2,
                           Metric metric) {
  std::vector<double> pooled(s1.begin(), s1.end());
  pooled.insert(pooled.end(), s2.begin(), s2.end());
  if (metric == Metric::kAbsolute) {
    return 0.5 * (w1_empirical(s1, pooled) + w1_empirical(s2, pooled));
  }
  return 0.5 * (tv_empirical(s1, pooled) + tv_empirical(s2, pooled));
}

inline bool hypothesis_is_finite_valued(const Kernel& kernel, const Algorithm& algorithm) {
  if (!is_finite_valued(kernel)) return false;
  if (is_deterministic(algorithm)) return true;
  if (const auto* dp = std::get_if<HierarchicalDP>(&algorithm)) {
    return !dp->plan.mechanisms.empty() &&
           std::holds_alternative<RandomizedResponse>(dp->plan.mechanisms.front());
  }
  return false;
}

// Nodes per layer between two layers: N_lower / N_upper.
inline std::size_t layer_span(const Topology& topology, std::size_t upper, std::size_t lower) {
  return topology.layer_size(lower) / topology.layer_size(upper);
}

inline BoundReport conditional_bound_mc(const Topology& topology, const Kernel& kernel,
                                        double root_param, const Algorithm& algorithm,
                                        double lipschitz, std::size_t draws,
                                        std::uint64_t seed, const BoundMcOptions& options,
                                        Conditioning conditioning) {
  require_positive_lipschitz(lipschitz);
  if (draws < 2) throw std::invalid_argument("bound estimators need draws >= 2");
  if (options.inner_replicates < 1) throw std::invalid_argument("inner_replicates must be >= 1");
  validate_kernel(kernel, topology, root_param);
  validate_algorithm(algorithm, topology);
  if (options.metric == Metric::kDiscrete && !hypothesis_is_finite_valued(kernel, algorithm)) {
    throw UnsupportedConfiguration(
        "the discrete metric needs a finite-valued hypothesis (finite kernel and "
        "deterministic or randomized-response output)");
  }

  const std::size_t depth = topology.depth();
  const std::size_t nodes = topology.node_count();
  const std::size_t m = options.inner_replicates;
  const auto shared = share(topology);
  std::vector<double> terms(draws * nodes);

  parallel_for(draws, options.par, [&](std::size_t d) {
    const SupersampleTree ss = sample_supersample(topology, kernel, root_param, seed, d);
    DatasetTree tree1(shared, root_param);
    DatasetTree tree2(shared, root_param);
    DatasetTree sub1(shared, root_param);
    DatasetTree sub2(shared, root_param);
    std::vector<double> s1(m), s2(m);

    for (std::size_t l = 1; l <= depth; ++l) {
      for (std::size_t i = 0; i < topology.layer_size(l); ++i) {
        const auto pair = ss.pair(l, i);
        const std::uint64_t gid = topology.global_id(l, i);
        auto on_chain = [&](std::size_t layer, std::size_t flat) {
          return layer < l && flat == i / layer_span(topology, layer, l);
        };
        auto below = [&](std::size_t layer, std::size_t flat) {
          return layer > l && flat / layer_span(topology, l, layer) == i;
        };

        if (conditioning == Conditioning::kSubtree) {
          // The realized subtree under each copy of the node.
          DatasetTree* subs[2] = {&sub1, &sub2};
          for (int c = 0; c < 2; ++c) {
            fill_tree(
                *subs[c], kernel,
                [&](std::size_t layer, std::size_t flat) -> std::optional<double> {
                  if (below(layer, flat)) return std::nullopt;
                  return layer == l && flat == i ? pair[c] : 0.0;
                },
                [&](std::size_t layer, std::size_t flat) {
                  return Stream(seed, {d, static_cast<std::uint32_t>(layer), flat,
                                       Purpose::kSubtreeCopy, static_cast<std::uint64_t>(c),
                                       gid});
                });
          }
        }

        for (std::size_t r = 0; r < m; ++r) {
          auto stream_for = [&](std::size_t layer, std::size_t flat) {
            return Stream(seed, {d, static_cast<std::uint32_t>(layer), flat, Purpose::kInner,
                                 gid, r});
          };
          fill_tree(
              tree1, kernel,
              [&](std::size_t layer, std::size_t flat) -> std::optional<double> {
                if (on_chain(layer, flat)) return ss.selected(layer, flat);
                if (layer == l && flat == i) return pair[0];
                if (conditioning == Conditioning::kSubtree && below(layer, flat)) {
                  return sub1.value(layer, flat);
                }
                return std::nullopt;
              },
              stream_for);
          // Branch u = 2 differs only at the node and below; the rest of the
          // tree and the descendant streams are shared with branch u = 1.
          fill_tree(
              tree2, kernel,
              [&](std::size_t layer, std::size_t flat) -> std::optional<double> {
                if (layer == l && flat == i) return pair[1];
                if (below(layer, flat)) {
                  if (conditioning == Conditioning::kSubtree) return sub2.value(layer, flat);
                  return std::nullopt;
                }
                return tree1.value(layer, flat);
              },
              stream_for);
          const StreamKey key{d, static_cast<std::uint32_t>(l), i, Purpose::kAlgorithm, gid, r};
          s1[r] = train(algorithm, tree1, seed, key);
          s2[r] = train(algorithm, tree2, seed, key);
        }
        terms[d * nodes + gid - 1] = mixture_term(s1, s2, options.metric);
      }
    }
  });

  BoundReport report;
  report.family = conditioning == Conditioning::kPair ? "wasserstein" : "subtree";
  report.metric = metric_name(options.metric);
  report.lipschitz_used = lipschitz;
  std::vector<double> column(draws);
  std::vector<double> layer_rows(draws);
  std::vector<double> totals(draws, 0.0);
  for (std::size_t l = 1; l <= depth; ++l) {
    const double weight = 2.0 * lipschitz / static_cast<double>(topology.layer_size(l));
    std::vector<CompensatedSum> per_draw(draws);
    for (std::size_t i = 0; i < topology.layer_size(l); ++i) {
      const std::size_t g = static_cast<std::size_t>(topology.global_id(l, i) - 1);
      for (std::size_t d = 0; d < draws; ++d) {
        column[d] = terms[d * nodes + g];
        per_draw[d].add(column[d]);
      }
      const GenEstimate e = summarize(column);
      report.per_node.push_back({l, i, e.mean, e.std_error});
    }
    for (std::size_t d = 0; d < draws; ++d) {
      layer_rows[d] = weight * per_draw[d].value();
      totals[d] += layer_rows[d];
    }
    const GenEstimate e = summarize(layer_rows);
    report.per_layer.push_back({l, e.mean, e.std_error});
  }
  finalize_total(report);
  report.total_std_error = summarize(totals).std_error;
  return report;
}

}  // namespace detail

// 2 L_Lip sum_l (1/N_l) sum_i E W(P_{W | X, U}, P_{W | X}), where X is the
// node pair together with the selected payloads of its ancestors. The two
// conditional laws are sampled with common random numbers for everything
// outside the node, and D(P_u, mixture) is evaluated on the empirical laws.
inline BoundReport wasserstein_bound_mc(const Topology& topology, const Kernel& kernel,
                                        double root_param, const Algorithm& algorithm,
                                        double lipschitz, std::size_t draws, std::uint64_t seed,
                                        const BoundMcOptions& options = {}) {
  return detail::conditional_bound_mc(topology, kernel, root_param, algorithm, lipschitz, draws,
                                      seed, options, detail::Conditioning::kPair);
}

// As wasserstein_bound_mc, but additionally conditioning on the realized
// subtree below each copy of the node, so only U and the randomness outside
// the subtree remain.
inline BoundReport subtree_bound_mc(const Topology& topology, const Kernel& kernel,
                                    double root_param, const Algorithm& algorithm,
                                    double lipschitz, std::size_t draws, std::uint64_t seed,
                                    const BoundMcOptions& options = {}) {
  return detail::conditional_bound_mc(topology, kernel, root_param, algorithm, lipschitz, draws,
                                      seed, options, detail::Conditioning::kSubtree);
}

// ---------------------------------------------------------------------------
// Exact evaluation on finite kernels.

inline constexpr std::size_t kMaxExactConfigurations = std::size_t{1} << 22;

// Joint law of (W, U, X, Y) for one node: W the leaf average, U the node's
// selector, X the selected ancestor chain plus the node pair, Y the chain
// plus the leaves of the subtrees below both copies. Index of W is the sum
// of leaf symbols.
inline DiscreteJoint exact_node_joint(const Topology& topology, const DiscreteFinite& kernel,
                                      double root_param, std::size_t layer, std::size_t flat) {
  validate_kernel(kernel, topology, root_param);
  if (layer < 1 || layer > topology.depth() || flat >= topology.layer_size(layer)) {
    throw std::out_of_range("exact_node_joint: node out of range");
  }
  const std::size_t depth = topology.depth();
  const std::size_t k_sym = kernel.alphabet_size(depth);
  for (std::size_t l = 1; l <= depth; ++l) {
    if (kernel.alphabet_size(l) != k_sym) {
      throw UnsupportedConfiguration("exact evaluation needs one alphabet across layers");
    }
  }
  const std::size_t root_symbol = static_cast<std::size_t>(root_param);

  // Variables in top-down order. Nodes outside the subtree are single
  // variables; the node and its descendants have one variable per copy.
  struct Var {
    std::size_t layer;
    int parent;  // -1: the root
    int copy;    // 0 outside the subtree, 1 or 2 inside
    bool leaf;
    bool chain;
  };
  std::vector<Var> vars;
  std::vector<std::vector<int>> index(depth + 1);
  std::vector<std::vector<int>> copy_index[2];
  copy_index[0].resize(depth + 1);
  copy_index[1].resize(depth + 1);
  std::size_t subtree_leaves = 0;
  for (std::size_t l = 1; l <= depth; ++l) {
    const std::size_t n = topology.branching_at(l);
    index[l].assign(topology.layer_size(l), -1);
    copy_index[0][l].assign(topology.layer_size(l), -1);
    copy_index[1][l].assign(topology.layer_size(l), -1);
    for (std::size_t f = 0; f < topology.layer_size(l); ++f) {
      const std::size_t pf = f / n;
      const bool inside = l >= layer && f / detail::layer_span(topology, layer, l) == flat;
      if (!inside) {
        const int parent = l == 1 ? -1 : index[l - 1][pf];
        const bool chain = l < layer && f == flat / detail::layer_span(topology, l, layer);
        index[l][f] = static_cast<int>(vars.size());
        vars.push_back({l, parent, 0, l == depth, chain});
        continue;
      }
      for (int c = 0; c < 2; ++c) {
        int parent;
        if (l == layer) {
          parent = l == 1 ? -1 : index[l - 1][pf];
        } else {
          parent = copy_index[c][l - 1][pf];
        }
        copy_index[c][l][f] = static_cast<int>(vars.size());
        vars.push_back({l, parent, c + 1, l == depth, false});
      }
      if (l == depth) ++subtree_leaves;
    }
  }

  double configurations = std::pow(static_cast<double>(k_sym), static_cast<double>(vars.size()));
  if (configurations * 2.0 > static_cast<double>(kMaxExactConfigurations)) {
    throw UnsupportedConfiguration("exact enumeration exceeds " +
                                   std::to_string(kMaxExactConfigurations) + " configurations");
  }

  std::vector<int> chain_vars;
  for (std::size_t v = 0; v < vars.size(); ++v) {
    if (vars[v].chain) chain_vars.push_back(static_cast<int>(v));
  }
  const int node1 = copy_index[0][layer][flat];
  const int node2 = copy_index[1][layer][flat];
  std::vector<int> leaves_outside, leaves_copy[2];
  for (std::size_t f = 0; f < topology.layer_size(depth); ++f) {
    if (index[depth][f] >= 0) leaves_outside.push_back(index[depth][f]);
    if (copy_index[0][depth][f] >= 0) {
      leaves_copy[0].push_back(copy_index[0][depth][f]);
      leaves_copy[1].push_back(copy_index[1][depth][f]);
    }
  }

  std::size_t chain_codes = 1;
  for (std::size_t c = 0; c < chain_vars.size(); ++c) chain_codes *= k_sym;
  std::size_t subtree_codes = 1;
  for (std::size_t c = 0; c < 2 * subtree_leaves; ++c) subtree_codes *= k_sym;
  const std::size_t w_size = (k_sym - 1) * topology.leaf_count() + 1;
  const std::size_t x_size = chain_codes * k_sym * k_sym;
  const std::size_t y_size = chain_codes * subtree_codes;
  if (static_cast<double>(w_size) * 2.0 * static_cast<double>(x_size) *
          static_cast<double>(y_size) > static_cast<double>(kMaxExactConfigurations)) {
    throw UnsupportedConfiguration("exact joint table too large");
  }
  std::vector<CompensatedSum> table(w_size * 2 * x_size * y_size);

  std::vector<std::size_t> symbol(vars.size(), 0);
  auto transition = [&](std::size_t v, std::size_t s) {
    const std::size_t parent =
        vars[v].parent < 0 ? root_symbol : symbol[static_cast<std::size_t>(vars[v].parent)];
    return kernel.transitions[vars[v].layer - 1][parent][s];
  };
  auto record = [&](double prob) {
    std::size_t chain = 0;
    for (int v : chain_vars) chain = chain * k_sym + symbol[static_cast<std::size_t>(v)];
    const std::size_t x = (chain * k_sym + symbol[static_cast<std::size_t>(node1)]) * k_sym +
                          symbol[static_cast<std::size_t>(node2)];
    std::size_t y = chain;
    for (int c = 0; c < 2; ++c) {
      for (int v : leaves_copy[c]) y = y * k_sym + symbol[static_cast<std::size_t>(v)];
    }
    std::size_t outside = 0;
    for (int v : leaves_outside) outside += symbol[static_cast<std::size_t>(v)];
    for (int u = 0; u < 2; ++u) {
      std::size_t w = outside;
      for (int v : leaves_copy[u]) w += symbol[static_cast<std::size_t>(v)];
      table[((w * 2 + static_cast<std::size_t>(u)) * x_size + x) * y_size + y].add(0.5 * prob);
    }
  };
  // Depth-first enumeration; zero-probability branches are pruned.
  auto recurse = [&](auto&& self, std::size_t v, double prob) -> void {
    if (v == vars.size()) {
      record(prob);
      return;
    }
    for (std::size_t s = 0; s < k_sym; ++s) {
      const double p = transition(v, s);
      if (p == 0.0) continue;
      symbol[v] = s;
      self(self, v + 1, prob * p);
    }
  };
  recurse(recurse, 0, 1.0);

  std::vector<double> probs(table.size());
  double total = 0.0;
  for (std::size_t c = 0; c < table.size(); ++c) {
    probs[c] = table[c].value();
    total += probs[c];
  }
  for (double& p : probs) p /= total;
  return DiscreteJoint({"W", "U", "X", "Y"}, {w_size, 2, x_size, y_size}, std::move(probs));
}

namespace detail {

// E_{g, s} TV(P_{target | g, s}, P_{target | g}).
inline double expected_conditional_tv(const DiscreteJoint& joint, const std::string& target,
                                      const std::string& selector, const std::string& given) {
  const DiscreteJoint m = joint.marginal({given, selector, target});
  const std::size_t g_size = m.shape()[0];
  const std::size_t s_size = m.shape()[1];
  const std::size_t t_size = m.shape()[2];
  const auto& p = m.probs();
  CompensatedSum total;
  for (std::size_t g = 0; g < g_size; ++g) {
    std::vector<double> given_law(t_size, 0.0);
    double p_g = 0.0;
    for (std::size_t s = 0; s < s_size; ++s) {
      for (std::size_t t = 0; t < t_size; ++t) {
        given_law[t] += p[(g * s_size + s) * t_size + t];
        p_g += p[(g * s_size + s) * t_size + t];
      }
    }
    if (p_g <= 0.0) continue;
    for (std::size_t s = 0; s < s_size; ++s) {
      double p_gs = 0.0;
      for (std::size_t t = 0; t < t_size; ++t) p_gs += p[(g * s_size + s) * t_size + t];
      if (p_gs <= 0.0) continue;
      double tv_sum = 0.0;
      for (std::size_t t = 0; t < t_size; ++t) {
        tv_sum += std::abs(p[(g * s_size + s) * t_size + t] / p_gs - given_law[t] / p_g);
      }
      total.add(p_gs * 0.5 * tv_sum);
    }
  }
  return total.value();
}

// Slices of I(a; b | given = g) with their probabilities.
inline NodeCmi conditional_mi_slices(const DiscreteJoint& joint, const std::string& a,
                                     const std::string& b, const std::string& given) {
  const DiscreteJoint m = joint.marginal({given, a, b});
  const std::size_t g_size = m.shape()[0];
  const std::size_t a_size = m.shape()[1];
  const std::size_t b_size = m.shape()[2];
  const auto& p = m.probs();
  NodeCmi out;
  for (std::size_t g = 0; g < g_size; ++g) {
    std::vector<double> slice(p.begin() + static_cast<std::ptrdiff_t>(g * a_size * b_size),
                              p.begin() + static_cast<std::ptrdiff_t>((g + 1) * a_size * b_size));
    const double mass = compensated_sum(slice);
    if (mass <= 0.0) continue;
    for (double& v : slice) v /= mass;
    // Guard against rounding in the renormalized slice.
    const double norm = compensated_sum(slice);
    for (double& v : slice) v /= norm;
    const DiscreteJoint cond({a, b}, {a_size, b_size}, std::move(slice));
    out.values.push_back(mi_discrete(cond, a, b));
    out.weights.push_back(mass);
  }
  return out;
}

inline double weighted_sqrt_two(const NodeCmi& slices) {
  CompensatedSum total;
  for (std::size_t k = 0; k < slices.values.size(); ++k) {
    total.add(slices.weights[k] * std::sqrt(2.0 * slices.values[k]));
  }
  return total.value();
}

}  // namespace detail

struct ExactNodeTerms {
  std::size_t layer = 0;
  std::size_t flat = 0;
  // E TV(P_{W|X,U}, P_{W|X}) and E TV(P_{W|Y,U}, P_{W|Y}).
  double tv_given_pair = 0.0;
  double tv_given_subtrees = 0.0;
  // I(W; U | X), I(W; U | Y) in nats.
  double cmi_given_pair = 0.0;
  double cmi_given_subtrees = 0.0;
  // E_X sqrt(2 I(W; U | X = x)) and the same over Y.
  double sqrt_cmi_given_pair = 0.0;
  double sqrt_cmi_given_subtrees = 0.0;
};

struct ExactDiscreteBounds {
  std::vector<ExactNodeTerms> nodes;
  BoundReport wasserstein;   // discrete metric
  BoundReport cmi;
  BoundReport subtree;       // discrete metric
  BoundReport subtree_cmi;
};

// Exact per-node terms for a finite kernel and the leaf average. Throws
// UnsupportedConfiguration for other kernels or algorithms and when the
// enumeration is too large.
inline ExactDiscreteBounds exact_discrete_bounds(const Topology& topology, const Kernel& kernel,
                                                 double root_param, const Algorithm& algorithm,
                                                 double lipschitz = 1.0) {
  detail::require_positive_lipschitz(lipschitz);
  const auto* finite = std::get_if<DiscreteFinite>(&kernel);
  if (finite == nullptr) {
    throw UnsupportedConfiguration("exact bounds need a discrete_finite kernel, got " +
                                   kernel_name(kernel));
  }
  if (!is_deterministic(algorithm)) {
    throw UnsupportedConfiguration("exact bounds need a deterministic algorithm");
  }
  ExactDiscreteBounds out;
  auto start = [&](const char* family, const char* metric, bool lip) {
    BoundReport r;
    r.family = family;
    r.metric = metric;
    if (lip) r.lipschitz_used = lipschitz;
    return r;
  };
  out.wasserstein = start("wasserstein", "discrete", true);
  out.cmi = start("cmi", "none", false);
  out.subtree = start("subtree", "discrete", true);
  out.subtree_cmi = start("subtree_cmi", "none", false);
  out.cmi.loss_bound_used = Interval{0.0, 1.0};
  out.subtree_cmi.loss_bound_used = Interval{0.0, 1.0};

  for (std::size_t l = 1; l <= topology.depth(); ++l) {
    const double n_l = static_cast<double>(topology.layer_size(l));
    CompensatedSum w_sum, c_sum, s_sum, sc_sum;
    for (std::size_t i = 0; i < topology.layer_size(l); ++i) {
      const DiscreteJoint joint = exact_node_joint(topology, *finite, root_param, l, i);
      ExactNodeTerms t;
      t.layer = l;
      t.flat = i;
      t.tv_given_pair = detail::expected_conditional_tv(joint, "W", "U", "X");
      t.tv_given_subtrees = detail::expected_conditional_tv(joint, "W", "U", "Y");
      t.cmi_given_pair = cmi_discrete(joint, "W", "U", "X");
      t.cmi_given_subtrees = cmi_discrete(joint, "W", "U", "Y");
      t.sqrt_cmi_given_pair =
          detail::weighted_sqrt_two(detail::conditional_mi_slices(joint, "W", "U", "X"));
      t.sqrt_cmi_given_subtrees =
          detail::weighted_sqrt_two(detail::conditional_mi_slices(joint, "W", "U", "Y"));
      out.wasserstein.per_node.push_back({l, i, t.tv_given_pair, 0.0});
      out.cmi.per_node.push_back({l, i, t.sqrt_cmi_given_pair, 0.0});
      out.subtree.per_node.push_back({l, i, t.tv_given_subtrees, 0.0});
      out.subtree_cmi.per_node.push_back({l, i, t.sqrt_cmi_given_subtrees, 0.0});
      w_sum.add(t.tv_given_pair);
      c_sum.add(t.sqrt_cmi_given_pair);
      s_sum.add(t.tv_given_subtrees);
      sc_sum.add(t.sqrt_cmi_given_subtrees);
      out.nodes.push_back(t);
    }
    out.wasserstein.per_layer.push_back({l, 2.0 * lipschitz * w_sum.value() / n_l, 0.0});
    out.cmi.per_layer.push_back({l, c_sum.value() / n_l, 0.0});
    out.subtree.per_layer.push_back({l, 2.0 * lipschitz * s_sum.value() / n_l, 0.0});
    out.subtree_cmi.per_layer.push_back({l, sc_sum.value() / n_l, 0.0});
  }
  for (BoundReport* r : {&out.wasserstein, &out.cmi, &out.subtree, &out.subtree_cmi}) {
    detail::finalize_total(*r);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Differential privacy.

// Layer l contributes 2 sqrt(min(eps_l, eps_l (e^eps_l - 1))). The summand
// does not depend on the node, so the per-layer node average is the summand.
inline BoundReport dp_bound(std::span<const double> epsilons) {
  BoundReport report;
  report.family = "dp";
  report.loss_bound_used = Interval{0.0, 1.0};
  for (std::size_t l = 0; l < epsilons.size(); ++l) {
    const double eps = epsilons[l];
    if (!(eps >= 0.0)) throw std::invalid_argument("dp_bound: epsilons must be >= 0");
    const double info = std::min(eps, eps * std::expm1(eps));
    report.per_layer.push_back({l + 1, 2.0 * std::sqrt(info), 0.0});
  }
  detail::finalize_total(report);
  return report;
}

inline BoundReport dp_bound(std::initializer_list<double> epsilons) {
  const std::vector<double> v(epsilons);
  return dp_bound(std::span<const double>(v));
}

struct DpComparison {
  GenEstimate gen;
  BoundReport bound;
  // |gen| <= bound + 3 SE.
  bool dominates = false;
};

// Measured generalization error of the hierarchical DP aggregation against
// the DP bound for its epsilon schedule.
inline DpComparison dp_empirical_vs_bound(const Topology& topology, const Kernel& kernel,
                                          double root_param, const AggregationPlan& plan,
                                          const Loss& loss, std::size_t trials,
                                          std::uint64_t seed,
                                          std::size_t inner_test_samples = 16,
                                          Parallelism par = {}) {
  if (!bounded_in_unit_interval(loss)) {
    throw ContractError("the DP comparison needs a loss bounded in [0, 1], got " +
                        loss_name(loss));
  }
  if (is_gaussian_location(kernel)) {
    throw ContractError("the DP comparison needs data bounded in [0, 1]");
  }
  if (const auto* d = std::get_if<DiscreteFinite>(&kernel)) {
    if (d->alphabet_size(topology.depth()) > 2) {
      throw ContractError("the DP comparison needs leaf symbols in {0, 1}");
    }
  }
  validate_plan(plan, topology);
  DpComparison out;
  out.gen = gen_error_mc(topology, kernel, root_param, HierarchicalDP{plan}, loss, trials,
                         inner_test_samples, seed, par);
  const std::vector<double> eps = plan.epsilons();
  out.bound = dp_bound(std::span<const double>(eps));
  out.dominates = std::abs(out.gen.mean) <= out.bound.total + 3.0 * out.gen.std_error;
  return out;
}

}  // namespace hflgen
