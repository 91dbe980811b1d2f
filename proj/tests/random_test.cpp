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
#include <cstdint>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "hflgen/parallel.hpp"
#include "hflgen/random.hpp"

namespace hflgen {
namespace {

using Counter = Philox4x32::Counter;
using Key = Philox4x32::Key;

// Known-answer vectors published with the Random123 reference
// implementation (philox4x32, 10 rounds).
TEST(Philox, KnownAnswerZero) {
  const Counter out = Philox4x32::block({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
}

TEST(Philox, KnownAnswerAllOnes) {
  const Counter out = Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                                        {0xffffffff, 0xffffffff});
  EXPECT_EQ(out, (Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
}

TEST(Philox, KnownAnswerPi) {
  const Counter out = Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                                        {0xa4093822, 0x299f31d0});
  EXPECT_EQ(out, (Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Stream, SameKeyReproduces) {
  Stream a(42, {7, 2, 3, Purpose::kTree});
  Stream b(42, {7, 2, 3, Purpose::kTree});
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a(), b());
}

TEST(Stream, KeysAndSeedsSeparate) {
  std::set<std::uint64_t> firsts;
  for (std::uint64_t seed : {1ULL, 2ULL}) {
    for (std::uint64_t trial = 0; trial < 4; ++trial) {
      for (auto purpose : {Purpose::kTree, Purpose::kSelector, Purpose::kTestLeaf}) {
        Stream s(seed, {trial, 1, 0, purpose});
        firsts.insert(s());
      }
    }
  }
  EXPECT_EQ(firsts.size(), 24u);
}

TEST(Stream, UniformIsOpenInterval) {
  Stream s(3, {});
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Stream, NormalMoments) {
  Stream s(11, {});
  std::vector<double> x(200000);
  for (auto& v : x) v = s.normal(1.5, 2.0);
  const GenEstimate e = summarize(x);
  EXPECT_NEAR(e.mean, 1.5, 4 * e.std_error);
  double var = 0.0;
  for (double v : x) var += (v - e.mean) * (v - e.mean);
  var /= static_cast<double>(x.size() - 1);
  EXPECT_NEAR(var, 4.0, 0.05);
}

TEST(Stream, LaplaceVariance) {
  Stream s(12, {});
  const double b = 0.7;
  std::vector<double> x(1000000);
  for (auto& v : x) v = s.laplace(b);
  double m2 = 0.0;
  for (double v : x) m2 += v * v;
  m2 /= static_cast<double>(x.size());
  EXPECT_NEAR(m2 / (2 * b * b), 1.0, 0.01);
}

TEST(Stream, BelowIsUniform) {
  Stream s(13, {});
  std::vector<int> counts(5, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[s.below(5)];
  for (int c : counts) EXPECT_NEAR(c / static_cast<double>(n), 0.2, 0.006);
}

TEST(Stream, BetaMean) {
  Stream s(14, {});
  std::vector<double> x(100000);
  for (auto& v : x) v = s.beta(1.2, 2.8);
  const GenEstimate e = summarize(x);
  EXPECT_NEAR(e.mean, 0.3, 4 * e.std_error);
  for (double v : x) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Summarize, StandardErrorOfKnownSample) {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  const GenEstimate e = summarize(x);
  EXPECT_DOUBLE_EQ(e.mean, 2.5);
  EXPECT_NEAR(e.std_error, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(e.trials, 4u);
}

TEST(Summarize, SingleValueHasZeroError) {
  const std::vector<double> x{7.0};
  EXPECT_EQ(summarize(x).std_error, 0.0);
}

TEST(ParallelFor, ResultsIndependentOfThreads) {
  auto run = [](std::size_t threads) {
    std::vector<double> out(1000);
    parallel_for(out.size(), Parallelism{threads}, [&](std::size_t i) {
      Stream s(5, {i});
      out[i] = s.normal();
    });
    return out;
  };
  EXPECT_EQ(run(1), run(8));
}

TEST(ParallelFor, PropagatesExceptions) {
  EXPECT_THROW(parallel_for(10, Parallelism{4},
                            [](std::size_t i) {
                              if (i == 3) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
}

}  // namespace
}  // namespace hflgen
