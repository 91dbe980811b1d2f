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

#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "hflgen/topology.hpp"

namespace hflgen {
namespace {

TEST(Topology, LayerSizes) {
  EXPECT_EQ(layer_size(Topology({3, 2}), 2), 6u);
  EXPECT_EQ(layer_size(Topology({3, 2}), 0), 1u);
  EXPECT_EQ(layer_size(Topology({5, 4, 3}), 3), 60u);
  EXPECT_THROW(layer_size(Topology({3, 2}), 3), std::out_of_range);
}

TEST(Topology, RejectsInvalidBranching) {
  EXPECT_THROW(Topology(std::vector<std::size_t>{}), std::invalid_argument);
  EXPECT_THROW(Topology({2, 0}), std::invalid_argument);
}

TEST(Topology, EnumeratePaths) {
  EXPECT_EQ(enumerate_paths(Topology({2}), 1), (std::vector<NodePath>{{1}, {2}}));
  EXPECT_EQ(enumerate_paths(Topology({2, 2}), 2),
            (std::vector<NodePath>{{1, 1}, {1, 2}, {2, 1}, {2, 2}}));
  EXPECT_EQ(enumerate_paths(Topology({3, 2}), 2).size(), 6u);
  EXPECT_EQ(enumerate_paths(Topology({3, 2}), 0), (std::vector<NodePath>{NodePath::root()}));
  EXPECT_THROW(enumerate_paths(Topology({3, 2}), 3), std::out_of_range);
}

TEST(Topology, Parent) {
  EXPECT_EQ(parent(NodePath{1, 2}), (NodePath{1}));
  EXPECT_EQ(parent(NodePath{3}), NodePath::root());
  EXPECT_EQ(parent(NodePath{2, 1, 4}), (NodePath{2, 1}));
  EXPECT_THROW(parent(NodePath::root()), std::domain_error);
}

TEST(Topology, FlatIndexRoundTrip) {
  const Topology t({3, 2, 4});
  for (std::size_t l = 0; l <= t.depth(); ++l) {
    const auto paths = t.enumerate_paths(l);
    ASSERT_EQ(paths.size(), t.layer_size(l));
    for (std::size_t f = 0; f < paths.size(); ++f) {
      EXPECT_EQ(t.flat_index(paths[f]), f);
      EXPECT_EQ(t.path_at(l, f), paths[f]);
      EXPECT_EQ(paths[f].layer(), l);
      if (l > 0) {
        EXPECT_EQ(t.flat_index(paths[f].parent()), t.parent_flat(l, f));
      }
    }
  }
}

TEST(Topology, ContainsRejectsOutOfRangeIndices) {
  const Topology t({3, 2});
  EXPECT_TRUE(t.contains(NodePath{3, 2}));
  EXPECT_FALSE(t.contains(NodePath{4, 1}));
  EXPECT_FALSE(t.contains(NodePath{1, 0}));
  EXPECT_FALSE(t.contains(NodePath{1, 1, 1}));
  EXPECT_THROW(t.flat_index(NodePath{4}), std::out_of_range);
}

TEST(Topology, GlobalIdsAreDistinctAndDense) {
  const Topology t({2, 3});
  std::vector<bool> seen(t.node_count() + 1, false);
  for (std::size_t l = 0; l <= t.depth(); ++l) {
    for (std::size_t f = 0; f < t.layer_size(l); ++f) {
      const auto id = t.global_id(l, f);
      ASSERT_LT(id, seen.size());
      EXPECT_FALSE(seen[id]);
      seen[id] = true;
    }
  }
  EXPECT_EQ(t.global_id(0, 0), 0u);
}

TEST(Topology, LeafRange) {
  const Topology t({2, 3});
  const auto [first, last] = t.leaf_range(1, 1);
  EXPECT_EQ(first, 3u);
  EXPECT_EQ(last, 6u);
}

}  // namespace
}  // namespace hflgen
