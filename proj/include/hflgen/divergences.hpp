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
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hflgen/parallel.hpp"
#include "hflgen/random.hpp"

// Distances and information quantities. Logarithms are natural throughout, so
// KL divergences and mutual informations are in nats.

namespace hflgen {

inline constexpr double kNormalizationTolerance = 1e-12;

class DiscreteDist {
 public:
  explicit DiscreteDist(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw std::invalid_argument("DiscreteDist: empty support");
    CompensatedSum total;
    for (double p : probs_) {
      if (!(p >= 0.0)) throw std::invalid_argument("DiscreteDist: negative probability");
      total.add(p);
    }
    if (std::abs(total.value() - 1.0) > kNormalizationTolerance) {
      throw std::invalid_argument("DiscreteDist: probabilities must sum to 1");
    }
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }

 private:
  std::vector<double> probs_;
};

namespace detail {
inline void require_same_support(const DiscreteDist& p, const DiscreteDist& q) {
  if (p.size() != q.size()) throw std::invalid_argument("support sizes differ");
}
}  // namespace detail

// Total variation, (1/2) sum |p_i - q_i|.
inline double tv(const DiscreteDist& p, const DiscreteDist& q) {
  detail::require_same_support(p, q);
  CompensatedSum total;
  for (std::size_t i = 0; i < p.size(); ++i) total.add(std::abs(p[i] - q[i]));
  return std::min(1.0, 0.5 * total.value());
}

// KL(p || q) in nats; +infinity when p is not absolutely continuous w.r.t. q.
inline double kl(const DiscreteDist& p, const DiscreteDist& q) {
  detail::require_same_support(p, q);
  CompensatedSum total;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) return std::numeric_limits<double>::infinity();
    total.add(p[i] * std::log(p[i] / q[i]));
  }
  return std::max(0.0, total.value());
}

// Exact W1 between the empirical measures of x and y on the real line. Equal
// sizes use the sorted (quantile) coupling; unequal sizes integrate
// |F_x^{-1} - F_y^{-1}| over the merged grid of quantile breakpoints.
inline double w1_empirical(std::span<const double> x_in, std::span<const double> y_in) {
  if (x_in.empty() || y_in.empty()) throw std::invalid_argument("w1_empirical: empty sample");
  std::vector<double> x(x_in.begin(), x_in.end());
  std::vector<double> y(y_in.begin(), y_in.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const std::size_t n = x.size();
  const std::size_t m = y.size();
  CompensatedSum total;
  if (n == m) {
    for (std::size_t i = 0; i < n; ++i) total.add(std::abs(x[i] - y[i]));
    return total.value() / static_cast<double>(n);
  }
  // Quantile level t = k / (n m); x_i covers [i m, (i+1) m), y_j covers
  // [j n, (j+1) n).
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t level = 0;
  const std::size_t end = n * m;
  while (level < end) {
    const std::size_t next = std::min((i + 1) * m, (j + 1) * n);
    total.add(static_cast<double>(next - level) * std::abs(x[i] - y[j]));
    level = next;
    if (level == (i + 1) * m) ++i;
    if (level == (j + 1) * n) ++j;
  }
  return total.value() / static_cast<double>(end);
}

// W1 under the discrete metric rho(a, b) = 1[a != b] equals total variation.
inline double w1_discrete_metric(const DiscreteDist& p, const DiscreteDist& q) {
  return tv(p, q);
}

// Finite joint distribution over at most four named variables, stored
// row-major (last axis fastest).
class DiscreteJoint {
 public:
  static constexpr std::size_t kMaxAxes = 4;

  DiscreteJoint(std::vector<std::string> axes, std::vector<std::size_t> shape,
                std::vector<double> probs)
      : axes_(std::move(axes)), shape_(std::move(shape)), probs_(std::move(probs)) {
    if (axes_.empty() || axes_.size() > kMaxAxes) {
      throw std::invalid_argument("DiscreteJoint: between 1 and 4 axes required");
    }
    if (axes_.size() != shape_.size()) {
      throw std::invalid_argument("DiscreteJoint: axes and shape differ in length");
    }
    for (std::size_t a = 0; a < axes_.size(); ++a) {
      for (std::size_t b = a + 1; b < axes_.size(); ++b) {
        if (axes_[a] == axes_[b]) throw std::invalid_argument("DiscreteJoint: duplicate axis");
      }
    }
    std::size_t cells = 1;
    for (std::size_t s : shape_) {
      if (s == 0) throw std::invalid_argument("DiscreteJoint: empty axis");
      cells *= s;
    }
    if (cells != probs_.size()) {
      throw std::invalid_argument("DiscreteJoint: table size does not match shape");
    }
    CompensatedSum total;
    for (double p : probs_) {
      if (!(p >= 0.0)) throw std::invalid_argument("DiscreteJoint: negative probability");
      total.add(p);
    }
    if (std::abs(total.value() - 1.0) > kNormalizationTolerance) {
      throw std::invalid_argument("DiscreteJoint: probabilities must sum to 1");
    }
  }

  const std::vector<std::string>& axes() const { return axes_; }
  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<double>& probs() const { return probs_; }

  std::size_t axis_index(const std::string& name) const {
    const auto it = std::find(axes_.begin(), axes_.end(), name);
    if (it == axes_.end()) throw std::invalid_argument("DiscreteJoint: no axis named " + name);
    return static_cast<std::size_t>(it - axes_.begin());
  }

  // Joint of the listed axes, in the listed order.
  DiscreteJoint marginal(const std::vector<std::string>& keep) const {
    std::vector<std::size_t> idx;
    std::vector<std::size_t> shape;
    for (const auto& name : keep) {
      idx.push_back(axis_index(name));
      shape.push_back(shape_[idx.back()]);
    }
    std::size_t cells = 1;
    for (std::size_t s : shape) cells *= s;
    std::vector<CompensatedSum> sums(cells);
    for_each_cell([&](const std::vector<std::size_t>& cell, double p) {
      std::size_t flat = 0;
      for (std::size_t k = 0; k < idx.size(); ++k) flat = flat * shape[k] + cell[idx[k]];
      sums[flat].add(p);
    });
    std::vector<double> probs(cells);
    for (std::size_t c = 0; c < cells; ++c) probs[c] = sums[c].value();
    return DiscreteJoint(keep, std::move(shape), std::move(probs), Unchecked{});
  }

  DiscreteDist marginal_dist(const std::string& axis) const {
    auto probs = marginal({axis}).probs_;
    renormalize(probs);
    return DiscreteDist(std::move(probs));
  }

  // Conditional joint of the remaining axes given axis == value. Throws
  // std::domain_error when the conditioning event has probability zero.
  DiscreteJoint condition(const std::string& axis, std::size_t value) const {
    const std::size_t a = axis_index(axis);
    if (axes_.size() == 1) throw std::invalid_argument("DiscreteJoint: cannot condition away the last axis");
    if (value >= shape_[a]) throw std::out_of_range("DiscreteJoint: value out of range");
    std::vector<std::string> axes;
    std::vector<std::size_t> shape;
    for (std::size_t k = 0; k < axes_.size(); ++k) {
      if (k == a) continue;
      axes.push_back(axes_[k]);
      shape.push_back(shape_[k]);
    }
    std::vector<double> probs;
    CompensatedSum mass;
    for_each_cell([&](const std::vector<std::size_t>& cell, double p) {
      if (cell[a] != value) return;
      probs.push_back(p);
      mass.add(p);
    });
    if (mass.value() <= 0.0) throw std::domain_error("DiscreteJoint: conditioning on a null event");
    for (double& p : probs) p /= mass.value();
    renormalize(probs);
    return DiscreteJoint(std::move(axes), std::move(shape), std::move(probs), Unchecked{});
  }

  double probability_of(const std::string& axis, std::size_t value) const {
    return marginal({axis}).probs_.at(value);
  }

  template <typename Fn>
  void for_each_cell(Fn&& fn) const {
    std::vector<std::size_t> cell(shape_.size(), 0);
    for (double p : probs_) {
      fn(static_cast<const std::vector<std::size_t>&>(cell), p);
      for (std::size_t k = shape_.size(); k-- > 0;) {
        if (++cell[k] < shape_[k]) break;
        cell[k] = 0;
      }
    }
  }

 private:
  struct Unchecked {};
  DiscreteJoint(std::vector<std::string> axes, std::vector<std::size_t> shape,
                std::vector<double> probs, Unchecked)
      : axes_(std::move(axes)), shape_(std::move(shape)), probs_(std::move(probs)) {}

  static void renormalize(std::vector<double>& probs) {
    const double total = compensated_sum(probs);
    if (total > 0.0) {
      for (double& p : probs) p /= total;
    }
  }

  std::vector<std::string> axes_;
  std::vector<std::size_t> shape_;
  std::vector<double> probs_;
};

// I(A; B | C) for groups of axes, by exact summation:
// sum p(a,b,c) ln[p(a,b,c) p(c) / (p(a,c) p(b,c))]. An empty C gives the
// plain mutual information.
inline double conditional_mutual_information(const DiscreteJoint& joint,
                                             const std::vector<std::string>& a,
                                             const std::vector<std::string>& b,
                                             const std::vector<std::string>& given) {
  if (a.empty() || b.empty()) throw std::invalid_argument("mutual information needs two axis groups");
  std::vector<std::string> all;
  for (const auto* group : {&a, &b, &given}) {
    for (const auto& name : *group) {
      joint.axis_index(name);
      if (std::find(all.begin(), all.end(), name) != all.end()) {
        throw std::invalid_argument("axis " + name + " appears in more than one group");
      }
      all.push_back(name);
    }
  }
  // The marginal over (a, b, c) has at most four axes since every axis
  // belongs to the joint.
  const DiscreteJoint abc = joint.marginal(all);
  std::vector<std::string> ac = a;
  ac.insert(ac.end(), given.begin(), given.end());
  std::vector<std::string> bc = b;
  bc.insert(bc.end(), given.begin(), given.end());

  std::size_t size_a = 1, size_b = 1, size_c = 1;
  for (const auto& n : a) size_a *= joint.shape()[joint.axis_index(n)];
  for (const auto& n : b) size_b *= joint.shape()[joint.axis_index(n)];
  for (const auto& n : given) size_c *= joint.shape()[joint.axis_index(n)];

  const auto& p_abc = abc.probs();
  // Row-major flattening of (a, b, c) groups: index = (ia * size_b + ib) * size_c + ic.
  std::vector<double> p_ac(size_a * size_c, 0.0), p_bc(size_b * size_c, 0.0), p_c(size_c, 0.0);
  {
    std::vector<CompensatedSum> s_ac(p_ac.size()), s_bc(p_bc.size()), s_c(p_c.size());
    for (std::size_t ia = 0; ia < size_a; ++ia) {
      for (std::size_t ib = 0; ib < size_b; ++ib) {
        for (std::size_t ic = 0; ic < size_c; ++ic) {
          const double p = p_abc[(ia * size_b + ib) * size_c + ic];
          s_ac[ia * size_c + ic].add(p);
          s_bc[ib * size_c + ic].add(p);
          s_c[ic].add(p);
        }
      }
    }
    for (std::size_t k = 0; k < p_ac.size(); ++k) p_ac[k] = s_ac[k].value();
    for (std::size_t k = 0; k < p_bc.size(); ++k) p_bc[k] = s_bc[k].value();
    for (std::size_t k = 0; k < p_c.size(); ++k) p_c[k] = s_c[k].value();
  }
  CompensatedSum total;
  for (std::size_t ia = 0; ia < size_a; ++ia) {
    for (std::size_t ib = 0; ib < size_b; ++ib) {
      for (std::size_t ic = 0; ic < size_c; ++ic) {
        const double p = p_abc[(ia * size_b + ib) * size_c + ic];
        if (p <= 0.0) continue;
        total.add(p * std::log(p * p_c[ic] / (p_ac[ia * size_c + ic] * p_bc[ib * size_c + ic])));
      }
    }
  }
  return std::max(0.0, total.value());
}

inline double mi_discrete(const DiscreteJoint& joint, const std::string& a,
                          const std::string& b) {
  return conditional_mutual_information(joint, {a}, {b}, {});
}

inline double cmi_discrete(const DiscreteJoint& joint, const std::string& a,
                           const std::string& b, const std::string& given) {
  return conditional_mutual_information(joint, {a}, {b}, {given});
}

// Equal-weight mixture of N(m1, s^2) and N(m2, s^2).
struct GaussianMixturePair {
  double m1 = 0.0;
  double m2 = 0.0;
  double s = 1.0;
};

namespace detail {

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// Composite Simpson over [-10, 10] with `intervals` (even) subintervals of
// E_z softplus(-delta^2 / 2 - delta z), z ~ N(0, 1).
inline double mixture_softplus_expectation(double delta, std::size_t intervals) {
  constexpr double kHalfWidth = 10.0;
  const double h = 2.0 * kHalfWidth / static_cast<double>(intervals);
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  auto f = [&](double z) {
    return norm * std::exp(-0.5 * z * z) * softplus(-0.5 * delta * delta - delta * z);
  };
  CompensatedSum total;
  total.add(f(-kHalfWidth));
  total.add(f(kHalfWidth));
  for (std::size_t k = 1; k < intervals; ++k) {
    const double z = -kHalfWidth + h * static_cast<double>(k);
    total.add((k % 2 == 1 ? 4.0 : 2.0) * f(z));
  }
  return total.value() * h / 3.0;
}

}  // namespace detail

// I(W; U) for U uniform on {1, 2} and W | U = u ~ N(m_u, s^2), i.e.
// (1/2) sum_u KL(N(m_u, s^2) || mixture). Writing x = m_u + s z, each KL
// term is ln 2 - E_z softplus(-delta^2/2 - delta z) with delta = |m1 - m2| / s,
// so the quadrature grid covers each mean +- 10 s. The grid starts at
// `quadrature_points` and doubles until successive values differ by < 1e-8.
// s == 0 is treated as a pair of point masses.
inline double cmi_gaussian_mixture(const GaussianMixturePair& pair,
                                   std::size_t quadrature_points = 64) {
  if (quadrature_points < 64) {
    throw std::invalid_argument("cmi_gaussian_mixture: at least 64 quadrature points");
  }
  if (!(pair.s >= 0.0)) throw std::invalid_argument("cmi_gaussian_mixture: s must be >= 0");
  if (pair.m1 == pair.m2) return 0.0;
  if (pair.s == 0.0) return std::numbers::ln2;
  const double delta = std::abs(pair.m1 - pair.m2) / pair.s;
  std::size_t intervals = quadrature_points + quadrature_points % 2;
  double previous = detail::mixture_softplus_expectation(delta, intervals);
  constexpr std::size_t kMaxIntervals = std::size_t{1} << 22;
  while (intervals < kMaxIntervals) {
    intervals *= 2;
    const double current = detail::mixture_softplus_expectation(delta, intervals);
    const bool converged = std::abs(current - previous) < 1e-8;
    previous = current;
    if (converged) break;
  }
  return std::clamp(std::numbers::ln2 - previous, 0.0, std::numbers::ln2);
}

struct PinskerCheck {
  double tv_value = 0.0;
  double kl_bound_value = 0.0;  // sqrt(KL(p || q) / 2)
  bool holds = false;
};

inline PinskerCheck pinsker_check(const DiscreteDist& p, const DiscreteDist& q) {
  PinskerCheck out;
  out.tv_value = tv(p, q);
  out.kl_bound_value = std::sqrt(kl(p, q) / 2.0);
  out.holds = out.tv_value <= out.kl_bound_value + 1e-12;
  return out;
}

// Piecewise-linear test function through the given knots, constant beyond
// the first and last knot. Construction rejects slopes above 1 in magnitude.
class LipschitzFunction {
 public:
  LipschitzFunction(std::vector<double> knots, std::vector<double> values)
      : knots_(std::move(knots)), values_(std::move(values)) {
    if (knots_.empty() || knots_.size() != values_.size()) {
      throw std::invalid_argument("LipschitzFunction: need matching non-empty knots and values");
    }
    for (std::size_t k = 1; k < knots_.size(); ++k) {
      const double dt = knots_[k] - knots_[k - 1];
      if (!(dt > 0.0)) throw std::invalid_argument("LipschitzFunction: knots must increase");
      const double slack = 1e-12 * (1.0 + std::abs(values_[k]) + std::abs(knots_[k]));
      if (std::abs(values_[k] - values_[k - 1]) > dt * (1.0 + 1e-12) + slack) {
        throw std::invalid_argument("LipschitzFunction: slope exceeds 1");
      }
    }
  }

  double operator()(double t) const {
    if (t <= knots_.front()) return values_.front();
    if (t >= knots_.back()) return values_.back();
    const auto hi = static_cast<std::size_t>(
        std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin());
    const std::size_t lo = hi - 1;
    const double frac = (t - knots_[lo]) / (knots_[hi] - knots_[lo]);
    return values_[lo] + frac * (values_[hi] - values_[lo]);
  }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
};

// t -> sign * clamp(t, lo, hi).
inline LipschitzFunction clipped_identity(double lo, double hi, double sign = 1.0) {
  return LipschitzFunction({lo, hi}, {sign * lo, sign * hi});
}

// The 1-Lipschitz potential attaining the dual of W1(x, y) on the line:
// slope sign(F_y - F_x) between consecutive sample points.
inline LipschitzFunction optimal_dual_potential(std::span<const double> x_in,
                                                std::span<const double> y_in) {
  std::vector<double> x(x_in.begin(), x_in.end());
  std::vector<double> y(y_in.begin(), y_in.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::vector<double> grid = x;
  grid.insert(grid.end(), y.begin(), y.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::vector<double> values(grid.size(), 0.0);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double t = grid[k - 1];
    const double fx = static_cast<double>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) /
                      static_cast<double>(x.size());
    const double fy = static_cast<double>(std::upper_bound(y.begin(), y.end(), t) - y.begin()) /
                      static_cast<double>(y.size());
    const double slope = fy > fx ? 1.0 : (fy < fx ? -1.0 : 0.0);
    values[k] = values[k - 1] + slope * (grid[k] - grid[k - 1]);
  }
  return LipschitzFunction(std::move(grid), std::move(values));
}

struct KrDualityCheck {
  double primal = 0.0;
  double dual_lower = 0.0;
  bool holds = false;
};

// dual_lower = max over the family of mean f(x) - mean f(y), which
// Kantorovich-Rubinstein caps at primal = W1(x, y).
inline KrDualityCheck kr_duality_check(std::span<const double> x, std::span<const double> y,
                                       const std::vector<LipschitzFunction>& family) {
  if (family.empty()) throw std::invalid_argument("kr_duality_check: empty test family");
  KrDualityCheck out;
  out.primal = w1_empirical(x, y);
  out.dual_lower = -std::numeric_limits<double>::infinity();
  for (const auto& f : family) {
    CompensatedSum fx, fy;
    for (double v : x) fx.add(f(v));
    for (double v : y) fy.add(f(v));
    const double gap = fx.value() / static_cast<double>(x.size()) -
                       fy.value() / static_cast<double>(y.size());
    out.dual_lower = std::max(out.dual_lower, gap);
  }
  out.holds = out.dual_lower <= out.primal + 1e-9;
  return out;
}

struct MixtureWassersteinCheck {
  double left = 0.0;   // W1(P1/2 + P2/2, P1)
  double right = 0.0;  // W1(P2, P1) / 2
  bool holds = false;
};

// Convexity of W1 in one argument. The mixture is the pooled sample, which is
// exactly the equal-weight mixture of the two empirical measures when the
// sets have equal size, so the inequality is exact up to rounding.
inline MixtureWassersteinCheck mixture_wasserstein_check(std::span<const double> p1,
                                                         std::span<const double> p2,
                                                         double tolerance = 1e-12) {
  if (p1.size() != p2.size()) {
    throw std::invalid_argument("mixture_wasserstein_check: sample sets must have equal size");
  }
  std::vector<double> pooled(p1.begin(), p1.end());
  pooled.insert(pooled.end(), p2.begin(), p2.end());
  MixtureWassersteinCheck out;
  out.left = w1_empirical(pooled, p1);
  out.right = 0.5 * w1_empirical(p2, p1);
  out.holds = out.left <= out.right + tolerance * (1.0 + out.right);
  return out;
}

struct GaussianSpec {
  double mean = 0.0;
  double sd = 1.0;
};

// Gaussian inputs are represented by `samples` draws from each law.
inline MixtureWassersteinCheck mixture_wasserstein_check(GaussianSpec p1, GaussianSpec p2,
                                                         std::size_t samples,
                                                         std::uint64_t seed) {
  std::vector<double> x(samples), y(samples);
  Stream sx(seed, {0, 0, 0, Purpose::kPropertySweep, 1});
  Stream sy(seed, {0, 0, 0, Purpose::kPropertySweep, 2});
  for (auto& v : x) v = sx.normal(p1.mean, p1.sd);
  for (auto& v : y) v = sy.normal(p2.mean, p2.sd);
  return mixture_wasserstein_check(x, y);
}

}  // namespace hflgen
