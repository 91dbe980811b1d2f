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

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hflgen/kernel.hpp"
#include "hflgen/random.hpp"
#include "hflgen/topology.hpp"

namespace hflgen {

// Payloads of one realized sampling tree. Layers 1..L are stored; layer 0 is
// the root parameter of the meta-distribution. Leaves (layer L) are the data
// points.
class DatasetTree {
 public:
  DatasetTree(std::shared_ptr<const Topology> topology, double root_param)
      : topology_(std::move(topology)),
        root_param_(root_param),
        values_(topology_->node_count(), 0.0) {
    offsets_.assign(topology_->depth() + 1, 0);
    for (std::size_t l = 2; l <= topology_->depth(); ++l) {
      offsets_[l] = offsets_[l - 1] + topology_->layer_size(l - 1);
    }
  }

  const Topology& topology() const { return *topology_; }
  const std::shared_ptr<const Topology>& topology_ptr() const { return topology_; }
  double root_param() const { return root_param_; }

  double value(std::size_t layer, std::size_t flat) const {
    return layer == 0 ? root_param_ : values_[offsets_[layer] + flat];
  }
  void set(std::size_t layer, std::size_t flat, double v) {
    values_[offsets_[layer] + flat] = v;
  }

  double at(const NodePath& path) const {
    return value(path.layer(), topology_->flat_index(path));
  }

  std::span<const double> layer_values(std::size_t layer) const {
    return {values_.data() + offsets_[layer], topology_->layer_size(layer)};
  }
  std::span<const double> leaves() const { return layer_values(topology_->depth()); }

  bool operator==(const DatasetTree& other) const {
    return *topology_ == *other.topology_ && root_param_ == other.root_param_ &&
           values_ == other.values_;
  }

 private:
  std::shared_ptr<const Topology> topology_;
  double root_param_;
  std::vector<double> values_;
  std::vector<std::size_t> offsets_;
};

// Two i.i.d. copies per node plus the selector U in {1, 2}. Both copies at a
// node are drawn from the selected copy of its parent.
class SupersampleTree {
 public:
  using Pair = std::array<double, 2>;

  SupersampleTree(std::shared_ptr<const Topology> topology, double root_param)
      : first_(topology, root_param), second_(topology, root_param),
        selector_(topology->node_count(), 1) {}

  const Topology& topology() const { return first_.topology(); }
  double root_param() const { return first_.root_param(); }

  Pair pair(std::size_t layer, std::size_t flat) const {
    return {first_.value(layer, flat), second_.value(layer, flat)};
  }
  Pair pair(const NodePath& path) const {
    return pair(path.layer(), topology().flat_index(path));
  }
  void set_pair(std::size_t layer, std::size_t flat, Pair p) {
    first_.set(layer, flat, p[0]);
    second_.set(layer, flat, p[1]);
  }

  int selector(std::size_t layer, std::size_t flat) const {
    return selector_[index(layer, flat)];
  }
  int selector(const NodePath& path) const {
    return selector(path.layer(), topology().flat_index(path));
  }
  void set_selector(std::size_t layer, std::size_t flat, int u) {
    if (u != 1 && u != 2) throw std::invalid_argument("selector must be 1 or 2");
    selector_[index(layer, flat)] = static_cast<std::uint8_t>(u);
  }

  double selected(std::size_t layer, std::size_t flat) const {
    return pair(layer, flat)[selector(layer, flat) - 1];
  }
  double ghost(std::size_t layer, std::size_t flat) const {
    return pair(layer, flat)[2 - selector(layer, flat)];
  }

  // Same pairs with every selector replaced by 3 - U.
  SupersampleTree flipped() const {
    SupersampleTree out = *this;
    for (auto& u : out.selector_) u = static_cast<std::uint8_t>(3 - u);
    return out;
  }

 private:
  std::size_t index(std::size_t layer, std::size_t flat) const {
    return static_cast<std::size_t>(topology().global_id(layer, flat) - 1);
  }

  DatasetTree first_;
  DatasetTree second_;
  std::vector<std::uint8_t> selector_;
};

inline constexpr int flipped(int u) { return 3 - u; }

// Fills a tree top-down. For every node, `pinned(layer, flat)` may return a
// fixed payload; otherwise the payload is drawn from the kernel below the
// parent payload using the stream returned by `stream_for(layer, flat)`.
// `tree` is overwritten in place so callers in hot loops can reuse storage.
template <typename Pinned, typename StreamFor>
void fill_tree(DatasetTree& tree, const Kernel& kernel, Pinned&& pinned,
               StreamFor&& stream_for) {
  const Topology& topology = tree.topology();
  const std::size_t depth = topology.depth();
  for (std::size_t layer = 1; layer <= depth; ++layer) {
    const std::size_t n = topology.branching_at(layer);
    for (std::size_t flat = 0; flat < topology.layer_size(layer); ++flat) {
      if (const std::optional<double> fixed = pinned(layer, flat)) {
        tree.set(layer, flat, *fixed);
        continue;
      }
      Stream stream = stream_for(layer, flat);
      const double parent = tree.value(layer - 1, flat / n);
      const auto sibling = static_cast<std::uint32_t>(flat % n + 1);
      tree.set(layer, flat, sample_child(kernel, layer, depth, parent, sibling, stream));
    }
  }
}

inline std::shared_ptr<const Topology> share(const Topology& topology) {
  return std::make_shared<const Topology>(topology);
}

// One stream per (trial, node): identical (topology, kernel, root, seed,
// trial) give bit-identical trees.
inline DatasetTree sample_tree(const Topology& topology, const Kernel& kernel,
                               double root_param, std::uint64_t seed,
                               std::uint64_t trial = 0) {
  validate_kernel(kernel, topology, root_param);
  DatasetTree tree(share(topology), root_param);
  fill_tree(
      tree, kernel, [](std::size_t, std::size_t) { return std::optional<double>{}; },
      [&](std::size_t layer, std::size_t flat) {
        return Stream(seed, {trial, static_cast<std::uint32_t>(layer), flat, Purpose::kTree});
      });
  return tree;
}

struct SupersampleOptions {
  // Test hook: pin every selector to this value instead of drawing it.
  std::optional<int> force_selector;
};

inline SupersampleTree sample_supersample(const Topology& topology, const Kernel& kernel,
                                          double root_param, std::uint64_t seed,
                                          std::uint64_t trial = 0,
                                          SupersampleOptions options = {}) {
  validate_kernel(kernel, topology, root_param);
  SupersampleTree ss(share(topology), root_param);
  const std::size_t depth = topology.depth();
  for (std::size_t layer = 1; layer <= depth; ++layer) {
    const std::size_t n = topology.branching_at(layer);
    for (std::size_t flat = 0; flat < topology.layer_size(layer); ++flat) {
      const double parent =
          layer == 1 ? root_param : ss.selected(layer - 1, flat / n);
      const auto sibling = static_cast<std::uint32_t>(flat % n + 1);
      SupersampleTree::Pair pair{};
      for (int copy = 0; copy < 2; ++copy) {
        Stream stream(seed, {trial, static_cast<std::uint32_t>(layer), flat,
                             Purpose::kSupersampleCopy, static_cast<std::uint64_t>(copy)});
        pair[copy] = sample_child(kernel, layer, depth, parent, sibling, stream);
      }
      ss.set_pair(layer, flat, pair);
      int u = 1;
      if (options.force_selector) {
        u = *options.force_selector;
      } else {
        Stream stream(seed, {trial, static_cast<std::uint32_t>(layer), flat, Purpose::kSelector});
        u = stream.bernoulli(0.5) ? 2 : 1;
      }
      ss.set_selector(layer, flat, u);
    }
  }
  return ss;
}

// The training tree: copy U at every node.
inline DatasetTree select(const SupersampleTree& ss) {
  DatasetTree tree(share(ss.topology()), ss.root_param());
  for (std::size_t layer = 1; layer <= ss.topology().depth(); ++layer) {
    for (std::size_t flat = 0; flat < ss.topology().layer_size(layer); ++flat) {
      tree.set(layer, flat, ss.selected(layer, flat));
    }
  }
  return tree;
}

// Copy 3 - U at every node.
inline DatasetTree ghost_select(const SupersampleTree& ss) {
  return select(ss.flipped());
}

// Copy 3 - U at `layer` only, copy U everywhere else.
inline DatasetTree ghost_select(const SupersampleTree& ss, std::size_t layer) {
  DatasetTree tree = select(ss);
  for (std::size_t flat = 0; flat < ss.topology().layer_size(layer); ++flat) {
    tree.set(layer, flat, ss.ghost(layer, flat));
  }
  return tree;
}

// Draws the leaf at the end of a fresh chain started at a node of `layer`
// with payload `value`. For the root pass layer 0 and the root parameter. A
// leaf returns its own value. Sibling indices along the chain are uniform
// when the kernel is position dependent.
inline double draw_test_leaf(const Kernel& kernel, const Topology& topology,
                             std::size_t layer, double value, Stream& stream) {
  const std::size_t depth = topology.depth();
  const bool positional = is_position_dependent(kernel);
  for (std::size_t l = layer + 1; l <= depth; ++l) {
    std::uint32_t sibling = 1;
    if (positional) {
      sibling = static_cast<std::uint32_t>(stream.below(topology.branching_at(l)) + 1);
    }
    value = sample_child(kernel, l, depth, value, sibling, stream);
  }
  return value;
}

enum class ResampleScope {
  // Only the descendants of the node are redrawn, from the node's payload.
  kDescendants,
  // The node itself is redrawn from its parent as well (no-op difference at
  // the root).
  kIncludingNode,
};

// Copy of `tree` whose subtree under `at` is freshly drawn; every payload
// outside that subtree is bit-identical to the input.
inline DatasetTree resample_subtree(const DatasetTree& tree, const NodePath& at,
                                    const Kernel& kernel, std::uint64_t seed,
                                    std::uint64_t trial = 0,
                                    ResampleScope scope = ResampleScope::kDescendants) {
  const Topology& topology = tree.topology();
  if (!topology.contains(at)) throw std::out_of_range("resample_subtree: invalid path");
  const std::size_t at_layer = at.layer();
  const std::size_t at_flat = topology.flat_index(at);
  DatasetTree out = tree;
  const std::size_t first_layer =
      scope == ResampleScope::kIncludingNode && at_layer > 0 ? at_layer : at_layer + 1;
  auto inside = [&](std::size_t layer, std::size_t flat) {
    if (layer < first_layer) return false;
    std::size_t span = 1;
    for (std::size_t l = at_layer + 1; l <= layer; ++l) span *= topology.branching_at(l);
    return flat / span == at_flat;
  };
  fill_tree(
      out, kernel,
      [&](std::size_t layer, std::size_t flat) -> std::optional<double> {
        if (inside(layer, flat)) return std::nullopt;
        return tree.value(layer, flat);
      },
      [&](std::size_t layer, std::size_t flat) {
        return Stream(seed, {trial, static_cast<std::uint32_t>(layer), flat,
                             Purpose::kResample, topology.global_id(at_layer, at_flat)});
      });
  return out;
}

}  // namespace hflgen
