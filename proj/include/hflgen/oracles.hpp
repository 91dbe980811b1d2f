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
#include <span>
#include <stdexcept>
#include <vector>

#include "hflgen/parallel.hpp"
#include "hflgen/random.hpp"

// Brute-force reference computations. They share no code paths with the
// estimators they are used to check.

namespace hflgen::oracles {

// Minimum-cost transport between p and q for a K x K cost matrix (row-major),
// by successive shortest augmenting paths on the residual network.
inline double min_cost_coupling(std::span<const double> p, std::span<const double> q,
                                std::span<const double> cost) {
  const std::size_t k = p.size();
  if (q.size() != k || cost.size() != k * k) {
    throw std::invalid_argument("min_cost_coupling: size mismatch");
  }
  // Nodes: 0 source, 1..k supply, k+1..2k demand, 2k+1 sink.
  struct Edge {
    std::size_t to;
    double cap;
    double cost;
    std::size_t rev;
  };
  const std::size_t nodes = 2 * k + 2;
  const std::size_t source = 0, sink = 2 * k + 1;
  std::vector<std::vector<Edge>> graph(nodes);
  auto add = [&](std::size_t a, std::size_t b, double cap, double c) {
    graph[a].push_back({b, cap, c, graph[b].size()});
    graph[b].push_back({a, 0.0, -c, graph[a].size() - 1});
  };
  for (std::size_t i = 0; i < k; ++i) add(source, 1 + i, p[i], 0.0);
  for (std::size_t j = 0; j < k; ++j) add(1 + k + j, sink, q[j], 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) add(1 + i, 1 + k + j, 2.0, cost[i * k + j]);
  }
  constexpr double kEps = 1e-15;
  const double inf = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (;;) {
    std::vector<double> dist(nodes, inf);
    std::vector<std::size_t> prev_node(nodes), prev_edge(nodes);
    dist[source] = 0.0;
    for (std::size_t round = 0; round + 1 < nodes; ++round) {
      bool changed = false;
      for (std::size_t a = 0; a < nodes; ++a) {
        if (dist[a] == inf) continue;
        for (std::size_t e = 0; e < graph[a].size(); ++e) {
          const Edge& edge = graph[a][e];
          if (edge.cap <= kEps) continue;
          if (dist[a] + edge.cost < dist[edge.to] - 1e-15) {
            dist[edge.to] = dist[a] + edge.cost;
            prev_node[edge.to] = a;
            prev_edge[edge.to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[sink] == inf) break;
    double push = inf;
    for (std::size_t v = sink; v != source; v = prev_node[v]) {
      push = std::min(push, graph[prev_node[v]][prev_edge[v]].cap);
    }
    for (std::size_t v = sink; v != source; v = prev_node[v]) {
      Edge& edge = graph[prev_node[v]][prev_edge[v]];
      edge.cap -= push;
      graph[v][edge.rev].cap += push;
    }
    total += push * dist[sink];
  }
  return total;
}

// Transport cost under rho(a, b) = 1[a != b].
inline double discrete_metric_transport(std::span<const double> p, std::span<const double> q) {
  const std::size_t k = p.size();
  std::vector<double> cost(k * k, 1.0);
  for (std::size_t i = 0; i < k; ++i) cost[i * k + i] = 0.0;
  return min_cost_coupling(p, q, cost);
}

// Uniform draw from the probability simplex on k points.
inline std::vector<double> random_simplex(std::size_t k, Stream& stream) {
  std::vector<double> out(k);
  double total = 0.0;
  for (auto& v : out) {
    v = -std::log(stream.uniform());
    total += v;
  }
  for (auto& v : out) v /= total;
  // Exact normalization up to one rounding: fold the residual into the
  // largest entry.
  double sum = 0.0;
  for (double v : out) sum += v;
  *std::max_element(out.begin(), out.end()) += 1.0 - sum;
  return out;
}

// Row-stochastic matrix with `rows` rows on `cols` symbols.
inline std::vector<std::vector<double>> random_channel(std::size_t rows, std::size_t cols,
                                                       Stream& stream) {
  std::vector<std::vector<double>> out(rows);
  for (auto& row : out) row = random_simplex(cols, stream);
  return out;
}

// Monte Carlo I(W; U) for the equal mixture of N(m1, s^2) and N(m2, s^2):
// average of ln p_u(x) - ln((p_1(x) + p_2(x)) / 2) with u uniform and
// x ~ N(m_u, s^2).
inline GenEstimate gaussian_mixture_mi_mc(double m1, double m2, double s, std::size_t samples,
                                          std::uint64_t seed) {
  Stream stream(seed, {0, 0, 0, Purpose::kPropertySweep, 0x6d6978});
  std::vector<double> values(samples);
  auto log_density = [s](double x, double m) {
    const double z = (x - m) / s;
    return -0.5 * z * z - std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi);
  };
  for (auto& v : values) {
    const bool first = stream.bernoulli(0.5);
    const double m = first ? m1 : m2;
    const double x = stream.normal(m, s);
    const double l1 = log_density(x, m1);
    const double l2 = log_density(x, m2);
    const double hi = std::max(l1, l2);
    const double log_mix = hi + std::log(0.5 * (std::exp(l1 - hi) + std::exp(l2 - hi)));
    v = (first ? l1 : l2) - log_mix;
  }
  return summarize(values);
}

// CDF of Laplace(0, b).
inline double laplace_cdf(double x, double b) {
  return x < 0.0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
}

// Probability of (lo, hi] under Laplace(b), computed on the tail side to
// keep relative precision far from the origin.
inline double laplace_bin_mass(double lo, double hi, double b) {
  if (lo >= 0.0) return -0.5 * std::exp(-lo / b) * std::expm1(-(hi - lo) / b);
  if (hi <= 0.0) return -0.5 * std::exp(hi / b) * std::expm1(-(hi - lo) / b);
  return laplace_cdf(hi, b) - laplace_cdf(lo, b);
}

// Largest ratio of bin probabilities of v + Laplace(b) and v + delta +
// Laplace(b), in both directions, over bins of width `bin` covering
// [-half_range, half_range] around v.
inline double laplace_bin_ratio(double delta, double b, double bin, double half_range) {
  double worst = 0.0;
  const auto bins = static_cast<std::size_t>(std::ceil(2.0 * half_range / bin));
  for (std::size_t k = 0; k < bins; ++k) {
    const double lo = -half_range + bin * static_cast<double>(k);
    const double hi = lo + bin;
    const double p = laplace_bin_mass(lo, hi, b);
    const double q = laplace_bin_mass(lo - delta, hi - delta, b);
    if (p <= 0.0 || q <= 0.0) continue;
    worst = std::max({worst, p / q, q / p});
  }
  return worst;
}

// One-sample Kolmogorov-Smirnov statistic of a sample against a CDF.
template <typename Cdf>
double ks_statistic(std::span<const double> sample_in, Cdf&& cdf) {
  std::vector<double> sample(sample_in.begin(), sample_in.end());
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Asymptotic one-sample KS critical value sqrt(-ln(alpha / 2) / 2) / sqrt(n).
inline double ks_critical(std::size_t n, double alpha) {
  return std::sqrt(-std::log(alpha / 2.0) / 2.0) / std::sqrt(static_cast<double>(n));
}

// Two-sample Kolmogorov-Smirnov statistic sup |F_x - F_y|.
inline double ks_two_sample(std::span<const double> x_in, std::span<const double> y_in) {
  std::vector<double> x(x_in.begin(), x_in.end());
  std::vector<double> y(y_in.begin(), y_in.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == t) ++i;
    while (j < y.size() && y[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

// Asymptotic two-sample KS critical value c(alpha) sqrt((n + m) / (n m)).
inline double ks_two_sample_critical(std::size_t n, std::size_t m, double alpha) {
  const double c = std::sqrt(-std::log(alpha / 2.0) / 2.0);
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

}  // namespace hflgen::oracles
