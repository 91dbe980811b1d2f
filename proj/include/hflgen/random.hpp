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
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

// Counter-based random streams.
//
// Every draw in the library comes from a Stream addressed by
// (seed, StreamKey). The key names the Monte Carlo trial, the tree node and
// the purpose of the draw, so the values drawn for one node never depend on
// how many values were drawn elsewhere. That is what lets subtree resampling
// and the U = 1 / U = 2 branches of the bound estimators share randomness.
//
// The generator is Philox4x32-10 (Salmon et al., SC 2011).

namespace hflgen {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW32A;
        key[1] += kW32B;
      }
      ctr = single_round(ctr, key);
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kW32A = 0x9E3779B9;
  static constexpr std::uint32_t kW32B = 0xBB67AE85;
  static constexpr std::uint32_t kM4x32A = 0xD2511F53;
  static constexpr std::uint32_t kM4x32B = 0xCD9E8D57;

  static Counter single_round(const Counter& ctr, const Key& key) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM4x32A) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM4x32B) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
};

// What a stream is used for. Distinct purposes at the same node never share
// draws.
enum class Purpose : std::uint32_t {
  kTree = 1,
  kSupersampleCopy = 2,
  kSelector = 3,
  kResample = 4,
  kTestLeaf = 5,
  kAlgorithm = 6,
  kInner = 7,
  kSubtreeCopy = 8,
  kMechanism = 9,
  kPropertySweep = 10,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct StreamKey {
  std::uint64_t trial = 0;
  std::uint32_t layer = 0;
  std::uint64_t node = 0;
  Purpose purpose = Purpose::kTree;
  std::uint64_t sub_a = 0;
  std::uint64_t sub_b = 0;

  std::uint64_t id() const {
    std::uint64_t h = splitmix64(trial);
    h = splitmix64(h ^ (static_cast<std::uint64_t>(layer) << 32 |
                        static_cast<std::uint32_t>(purpose)));
    h = splitmix64(h ^ node);
    h = splitmix64(h ^ sub_a);
    h = splitmix64(h ^ sub_b);
    return h;
  }
};

// UniformRandomBitGenerator over a single (seed, key) stream, plus the
// handful of variate generators the library needs. The variates are written
// out here rather than taken from <random> so that draws are bit-identical
// across standard library implementations.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, const StreamKey& key)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_id_(key.id()) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    if (cursor_ == 2) refill();
    return buffer_[cursor_++];
  }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Laplace(0, scale) by inversion.
  double laplace(double scale) {
    const double u = uniform() - 0.5;
    const double magnitude = -scale * std::log1p(-2.0 * std::abs(u));
    return u < 0.0 ? -magnitude : magnitude;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Lemire's nearly divisionless method.
    unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>((*this)()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Marsaglia-Tsang; shape > 0.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = 0.0;
      double v = 0.0;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

 private:
  void refill() {
    const Philox4x32::Counter ctr{
        static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
        static_cast<std::uint32_t>(stream_id_),
        static_cast<std::uint32_t>(stream_id_ >> 32)};
    const auto out = Philox4x32::block(ctr, key_);
    buffer_[0] = static_cast<std::uint64_t>(out[0]) << 32 | out[1];
    buffer_[1] = static_cast<std::uint64_t>(out[2]) << 32 | out[3];
    ++block_;
    cursor_ = 0;
  }

  Philox4x32::Key key_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int cursor_ = 2;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace hflgen
