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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "hflgen/errors.hpp"
#include "hflgen/random.hpp"
#include "hflgen/topology.hpp"

namespace hflgen {

// Child of a node with value m at layer l-1 is N(m + shift, sigma_l^2).
// Internal node payloads are identified with the mean of the Gaussian they
// stand for.
struct GaussianLocation {
  std::vector<double> sigmas;
  // Optional position-dependent table: position_shift[l-1][i_l - 1] is added
  // to the mean of the child with sibling index i_l at layer l. Empty means
  // position independent; an empty inner vector leaves that layer unshifted.
  std::vector<std::vector<double>> position_shift;
};

// Payloads are probabilities in [0, 1]. Internal layers draw
// Beta(c p, c (1 - p)) around the parent probability p; the leaf layer draws
// Bernoulli(p). Degenerate p in {0, 1} is copied exactly.
struct BoundedBernoulli {
  double concentration = 4.0;
};

// Finite alphabets. transitions[l-1][a][b] is the probability that a child at
// layer l has symbol b given its parent has symbol a. The root symbol is the
// root parameter.
struct DiscreteFinite {
  std::vector<std::vector<std::vector<double>>> transitions;

  std::size_t alphabet_size(std::size_t layer) const {
    return layer == 0 ? transitions.front().size()
                      : transitions[layer - 1].front().size();
  }
};

using Kernel = std::variant<GaussianLocation, BoundedBernoulli, DiscreteFinite>;

inline std::string kernel_name(const Kernel& kernel) {
  struct {
    std::string operator()(const GaussianLocation&) const { return "gaussian_location"; }
    std::string operator()(const BoundedBernoulli&) const { return "bounded_bernoulli"; }
    std::string operator()(const DiscreteFinite&) const { return "discrete_finite"; }
  } visitor;
  return std::visit(visitor, kernel);
}

// True when every payload (hence every leaf) takes finitely many values.
inline bool is_finite_valued(const Kernel& kernel) {
  return !std::holds_alternative<GaussianLocation>(kernel);
}

inline bool is_gaussian_location(const Kernel& kernel) {
  return std::holds_alternative<GaussianLocation>(kernel);
}

// Throws ConfigError when the kernel parameters do not fit the topology or
// the root parameter.
inline void validate_kernel(const Kernel& kernel, const Topology& topology,
                            double root_param) {
  const std::size_t depth = topology.depth();
  if (const auto* g = std::get_if<GaussianLocation>(&kernel)) {
    if (g->sigmas.size() != depth) {
      throw ConfigError("gaussian_location: expected " + std::to_string(depth) +
                        " sigmas, got " + std::to_string(g->sigmas.size()));
    }
    for (double s : g->sigmas) {
      if (!(s >= 0.0) || !std::isfinite(s)) {
        throw ConfigError("gaussian_location: sigmas must be finite and >= 0");
      }
    }
    if (!g->position_shift.empty()) {
      if (g->position_shift.size() != depth) {
        throw ConfigError("gaussian_location: position table depth mismatch");
      }
      for (std::size_t l = 1; l <= depth; ++l) {
        const auto& row = g->position_shift[l - 1];
        if (!row.empty() && row.size() != topology.branching_at(l)) {
          throw ConfigError("gaussian_location: position table row " +
                            std::to_string(l) + " must have n_l entries");
        }
      }
    }
    if (!std::isfinite(root_param)) throw ConfigError("root parameter must be finite");
  } else if (const auto* b = std::get_if<BoundedBernoulli>(&kernel)) {
    if (!(b->concentration > 0.0)) {
      throw ConfigError("bounded_bernoulli: concentration must be > 0");
    }
    if (!(root_param >= 0.0 && root_param <= 1.0)) {
      throw ConfigError("bounded_bernoulli: root parameter must lie in [0, 1]");
    }
  } else {
    const auto& d = std::get<DiscreteFinite>(kernel);
    if (d.transitions.size() != depth) {
      throw ConfigError("discrete_finite: expected " + std::to_string(depth) +
                        " transition matrices, got " +
                        std::to_string(d.transitions.size()));
    }
    for (std::size_t l = 0; l < depth; ++l) {
      const auto& matrix = d.transitions[l];
      if (matrix.empty() || matrix.front().empty()) {
        throw ConfigError("discrete_finite: empty transition matrix");
      }
      if (l > 0 && matrix.size() != d.transitions[l - 1].front().size()) {
        throw ConfigError("discrete_finite: alphabet sizes of consecutive layers differ");
      }
      for (const auto& row : matrix) {
        if (row.size() != matrix.front().size()) {
          throw ConfigError("discrete_finite: ragged transition matrix");
        }
        double total = 0.0;
        for (double p : row) {
          if (!(p >= 0.0)) throw ConfigError("discrete_finite: negative probability");
          total += p;
        }
        if (std::abs(total - 1.0) > 1e-12) {
          throw ConfigError("discrete_finite: transition rows must sum to 1");
        }
      }
    }
    const double symbols = static_cast<double>(d.transitions.front().size());
    if (root_param < 0.0 || root_param >= symbols || root_param != std::floor(root_param)) {
      throw ConfigError("discrete_finite: root parameter must be a symbol index");
    }
  }
}

// Draws the payload of a child at `layer` (1-based) with sibling index
// `sibling` (1-based) below a parent whose payload is `parent`.
inline double sample_child(const Kernel& kernel, std::size_t layer, std::size_t depth,
                           double parent, std::uint32_t sibling, Stream& stream) {
  if (const auto* g = std::get_if<GaussianLocation>(&kernel)) {
    double mean = parent;
    if (!g->position_shift.empty() && !g->position_shift[layer - 1].empty()) {
      mean += g->position_shift[layer - 1][sibling - 1];
    }
    const double sigma = g->sigmas[layer - 1];
    return sigma == 0.0 ? mean : stream.normal(mean, sigma);
  }
  if (const auto* b = std::get_if<BoundedBernoulli>(&kernel)) {
    if (layer == depth) return stream.bernoulli(parent) ? 1.0 : 0.0;
    if (parent <= 0.0) return 0.0;
    if (parent >= 1.0) return 1.0;
    return stream.beta(b->concentration * parent, b->concentration * (1.0 - parent));
  }
  const auto& row = std::get<DiscreteFinite>(kernel)
                        .transitions[layer - 1][static_cast<std::size_t>(parent)];
  const double u = stream.uniform();
  double cumulative = 0.0;
  for (std::size_t s = 0; s < row.size(); ++s) {
    cumulative += row[s];
    if (u < cumulative) return static_cast<double>(s);
  }
  // Rounding left u above the last cumulative value; take the last symbol
  // with positive mass.
  for (std::size_t s = row.size(); s-- > 0;) {
    if (row[s] > 0.0) return static_cast<double>(s);
  }
  return 0.0;
}

// True when sampling depends on sibling indices, in which case fresh test
// chains draw their sibling indices uniformly.
inline bool is_position_dependent(const Kernel& kernel) {
  const auto* g = std::get_if<GaussianLocation>(&kernel);
  return g != nullptr && !g->position_shift.empty();
}

}  // namespace hflgen
