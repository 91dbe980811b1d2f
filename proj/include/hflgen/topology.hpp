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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hflgen {

// Address of a node in the sampling tree: the 1-based child index taken at
// each layer on the way down from the root. The root (the meta-distribution)
// has layer 0 and no indices.
class NodePath {
 public:
  NodePath() = default;
  NodePath(std::initializer_list<std::uint32_t> indices) : indices_(indices) {}
  explicit NodePath(std::vector<std::uint32_t> indices)
      : indices_(std::move(indices)) {}

  static NodePath root() { return {}; }

  std::size_t layer() const { return indices_.size(); }
  bool is_root() const { return indices_.empty(); }
  const std::vector<std::uint32_t>& indices() const { return indices_; }
  std::uint32_t last() const { return indices_.back(); }

  NodePath child(std::uint32_t index) const {
    NodePath out = *this;
    out.indices_.push_back(index);
    return out;
  }

  // Drops the last index. Throws std::domain_error on the root.
  NodePath parent() const {
    if (is_root()) throw std::domain_error("NodePath::parent: root has no parent");
    NodePath out = *this;
    out.indices_.pop_back();
    return out;
  }

  std::string to_string() const {
    std::string out = "(";
    for (std::size_t k = 0; k < indices_.size(); ++k) {
      if (k) out += ',';
      out += std::to_string(indices_[k]);
    }
    return out + ")";
  }

  // Shorter paths first, then lexicographic by indices. Within one layer this
  // is plain lexicographic order.
  auto operator<=>(const NodePath& other) const {
    if (auto c = indices_.size() <=> other.indices_.size(); c != 0) return c;
    return indices_ <=> other.indices_;
  }
  bool operator==(const NodePath&) const = default;

 private:
  std::vector<std::uint32_t> indices_;
};

inline NodePath parent(const NodePath& path) { return path.parent(); }

// Constant-branching tree shape. branching[l-1] is the number of children of
// every node at layer l-1; layer 0 is the root.
class Topology {
 public:
  Topology() = default;

  explicit Topology(std::vector<std::size_t> branching)
      : branching_(std::move(branching)) {
    if (branching_.empty()) {
      throw std::invalid_argument("Topology: depth must be at least 1");
    }
    layer_sizes_.assign(1, 1);
    for (std::size_t n : branching_) {
      if (n < 1) throw std::invalid_argument("Topology: branching factors must be >= 1");
      layer_sizes_.push_back(layer_sizes_.back() * n);
    }
  }

  std::size_t depth() const { return branching_.size(); }
  const std::vector<std::size_t>& branching() const { return branching_; }

  // n_l: children per node of layer l-1, for 1 <= l <= depth.
  std::size_t branching_at(std::size_t layer) const {
    if (layer < 1 || layer > depth()) {
      throw std::out_of_range("Topology::branching_at: layer out of range");
    }
    return branching_[layer - 1];
  }

  // N_l = n_1 * ... * n_l, with N_0 = 1.
  std::size_t layer_size(std::size_t layer) const {
    check_layer(layer);
    return layer_sizes_[layer];
  }

  std::size_t leaf_count() const { return layer_sizes_.back(); }

  std::size_t node_count() const {
    std::size_t total = 0;
    for (std::size_t l = 1; l <= depth(); ++l) total += layer_sizes_[l];
    return total;
  }

  bool contains(const NodePath& path) const {
    if (path.layer() > depth()) return false;
    for (std::size_t k = 0; k < path.layer(); ++k) {
      const auto i = path.indices()[k];
      if (i < 1 || i > branching_[k]) return false;
    }
    return true;
  }

  // Position of a path among the nodes of its layer, in lexicographic order.
  std::size_t flat_index(const NodePath& path) const {
    if (!contains(path)) throw std::out_of_range("Topology::flat_index: invalid path");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < path.layer(); ++k) {
      flat = flat * branching_[k] + (path.indices()[k] - 1);
    }
    return flat;
  }

  NodePath path_at(std::size_t layer, std::size_t flat) const {
    check_layer(layer);
    if (flat >= layer_sizes_[layer]) {
      throw std::out_of_range("Topology::path_at: flat index out of range");
    }
    std::vector<std::uint32_t> indices(layer);
    for (std::size_t k = layer; k-- > 0;) {
      indices[k] = static_cast<std::uint32_t>(flat % branching_[k] + 1);
      flat /= branching_[k];
    }
    return NodePath(std::move(indices));
  }

  // All N_l paths of layer l in lexicographic order.
  std::vector<NodePath> enumerate_paths(std::size_t layer) const {
    check_layer(layer);
    std::vector<NodePath> out;
    out.reserve(layer_sizes_[layer]);
    for (std::size_t flat = 0; flat < layer_sizes_[layer]; ++flat) {
      out.push_back(path_at(layer, flat));
    }
    return out;
  }

  // Flat index of the parent of node `flat` at `layer` (layer >= 1).
  std::size_t parent_flat(std::size_t layer, std::size_t flat) const {
    return flat / branching_at(layer);
  }

  // Flat indices of the children of node `flat` at `layer` are
  // [first_child_flat, first_child_flat + n_{layer+1}).
  std::size_t first_child_flat(std::size_t layer, std::size_t flat) const {
    return flat * branching_at(layer + 1);
  }

  // Range of leaf flat indices under node `flat` at `layer`.
  std::pair<std::size_t, std::size_t> leaf_range(std::size_t layer,
                                                 std::size_t flat) const {
    check_layer(layer);
    const std::size_t span = layer_sizes_.back() / layer_sizes_[layer];
    return {flat * span, (flat + 1) * span};
  }

  // Unique id over all nodes of all layers, root = 0.
  std::uint64_t global_id(std::size_t layer, std::size_t flat) const {
    std::uint64_t offset = 0;
    for (std::size_t l = 0; l < layer; ++l) offset += layer_sizes_[l];
    return offset + flat;
  }

  bool operator==(const Topology&) const = default;

 private:
  void check_layer(std::size_t layer) const {
    if (layer > depth()) throw std::out_of_range("Topology: layer out of range");
  }

  std::vector<std::size_t> branching_;
  std::vector<std::size_t> layer_sizes_;
};

inline std::size_t layer_size(const Topology& topology, std::size_t layer) {
  return topology.layer_size(layer);
}

inline std::vector<NodePath> enumerate_paths(const Topology& topology,
                                             std::size_t layer) {
  return topology.enumerate_paths(layer);
}

}  // namespace hflgen
