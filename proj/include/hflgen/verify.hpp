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
#include <string>
#include <utility>
#include <vector>

#include "hflgen/bounds.hpp"
#include "hflgen/divergences.hpp"
#include "hflgen/dp_round.hpp"
#include "hflgen/errors.hpp"
#include "hflgen/oracles.hpp"
#include "hflgen/parallel.hpp"
#include "hflgen/random.hpp"
#include "hflgen/risk.hpp"

namespace hflgen {

// Unknown suite names and similar command-line misuse.
class UsageError : public ConfigError {
 public:
  explicit UsageError(const std::string& what) : ConfigError(what) {}
};

// Outcome of one property suite. `worst_slack` is the smallest margin seen
// (bound minus checked quantity, or tolerance minus deviation); negative
// means a failure.
struct SuiteResult {
  explicit SuiteResult(std::string suite = {}) : name(std::move(suite)) {}

  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::string note;

  bool passed() const { return failures == 0 && cases > 0; }

  void record(double slack) {
    ++cases;
    worst_slack = std::min(worst_slack, slack);
    if (!(slack >= 0.0)) ++failures;
  }
};

struct VerifyOptions {
  std::uint64_t seed = 20260101;
  // Monte Carlo budget for the telescoping suite.
  std::size_t telescoping_trials = 20000;
  Parallelism par{};
};

namespace verify_detail {

inline Stream sweep_stream(std::uint64_t seed, std::uint64_t suite, std::uint64_t item) {
  return Stream(seed, {item, 0, 0, Purpose::kPropertySweep, suite, 0});
}

// Random distribution on k points; every third one has forced zeros so the
// sweep also covers boundary points of the simplex.
inline std::vector<double> sparse_simplex(std::size_t k, std::size_t item, Stream& s) {
  std::vector<double> p = oracles::random_simplex(k, s);
  if (item % 3 == 0 && k > 2) {
    p[s.below(k)] = 0.0;
    const double total = compensated_sum(p);
    for (double& v : p) v /= total;
  }
  return p;
}

inline SuiteResult pinsker(const VerifyOptions& opt) {
  SuiteResult r{"pinsker"};
  for (std::size_t i = 0; i < 1000; ++i) {
    Stream s = sweep_stream(opt.seed, 1, i);
    const std::size_t k = 2 + s.below(7);
    const DiscreteDist p(sparse_simplex(k, i, s));
    const DiscreteDist q(oracles::random_simplex(k, s));
    const PinskerCheck c = pinsker_check(p, q);
    r.record(c.holds ? c.kl_bound_value + 1e-12 - c.tv_value : -1.0);
  }
  return r;
}

inline SuiteResult kr_duality(const VerifyOptions& opt) {
  SuiteResult r{"kr-duality"};
  for (std::size_t i = 0; i < 200; ++i) {
    Stream s = sweep_stream(opt.seed, 2, i);
    std::vector<double> x(100), y(100);
    const double shift = s.normal(0.0, 2.0), scale = 0.2 + 2.0 * s.uniform();
    for (auto& v : x) v = s.normal();
    for (auto& v : y) v = s.normal(shift, scale);
    // The identity, clipped outside the data so it acts as f(t) = +-t.
    const auto [xlo, xhi] = std::minmax_element(x.begin(), x.end());
    const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
    const double lo = std::min(*xlo, *ylo) - std::abs(shift) - 1.0;
    const double hi = std::max(*xhi, *yhi) + std::abs(shift) + 1.0;
    std::vector<LipschitzFunction> family{clipped_identity(lo, hi, 1.0),
                                          clipped_identity(lo, hi, -1.0)};
    for (int f = 0; f < 8; ++f) {
      const double a = s.normal(0.0, 3.0), b = a + 6.0 * s.uniform();
      family.push_back(clipped_identity(a, b, s.uniform() < 0.5 ? 1.0 : -1.0));
    }
    const KrDualityCheck weak = kr_duality_check(x, y, family);
    r.record(weak.holds ? weak.primal + 1e-9 - weak.dual_lower : -1.0);
    // The optimal potential closes the gap.
    const KrDualityCheck tight = kr_duality_check(x, y, {optimal_dual_potential(x, y)});
    r.record(1e-9 * (1.0 + tight.primal) - std::abs(tight.primal - tight.dual_lower));
    // A translated copy is closed by the identity alone.
    std::vector<double> z(x);
    for (auto& v : z) v += shift;
    const KrDualityCheck moved = kr_duality_check(z, x, family);
    r.record(1e-9 * (1.0 + moved.primal) - std::abs(moved.primal - moved.dual_lower));
  }
  return r;
}

inline SuiteResult coupling_oracle(const VerifyOptions& opt) {
  SuiteResult r{"coupling-oracle"};
  for (std::size_t i = 0; i < 200; ++i) {
    Stream s = sweep_stream(opt.seed, 3, i);
    const std::size_t k = 2 + s.below(4);
    const std::vector<double> p = sparse_simplex(k, i, s);
    const std::vector<double> q = oracles::random_simplex(k, s);
    const double analytic = w1_discrete_metric(DiscreteDist(p), DiscreteDist(q));
    r.record(1e-9 - std::abs(analytic - oracles::discrete_metric_transport(p, q)));
  }
  return r;
}

inline SuiteResult telescoping(const VerifyOptions& opt) {
  SuiteResult r{"telescoping"};
  const Topology topology({2, 2});
  const Kernel kernel = GaussianLocation{{1.0, 1.0}, {}};
  const Decomposition d =
      decomposition_terms_mc(topology, kernel, 0.0, LeafAverage{}, AbsoluteLoss{},
                             opt.telescoping_trials, 1, opt.seed, opt.par);
  const GenEstimate gen = gen_error_mc(topology, kernel, 0.0, LeafAverage{}, AbsoluteLoss{},
                                       opt.telescoping_trials, 1, opt.seed, opt.par);
  const double se = std::max(d.signed_total.std_error, gen.std_error);
  r.record(3.0 * se - std::abs(d.signed_total.mean - gen.mean));
  // The same-trial identity is exact up to rounding.
  r.record(1e-12 * (1.0 + std::abs(d.gen.mean)) - std::abs(d.signed_total.mean - d.gen.mean));
  r.note = "signed_total=" + std::to_string(d.signed_total.mean) +
           " gen=" + std::to_string(gen.mean) + " se=" + std::to_string(se);
  return r;
}

// U uniform and independent of (X, Y), X drawn from Y through a random
// channel, W from (Y, U) through another. Axes W, U, X, Y.
inline DiscreteJoint random_markov_joint(Stream& s) {
  const std::size_t kw = 2 + s.below(3), ku = 2, kx = 2 + s.below(3), ky = 2 + s.below(3);
  const std::vector<double> py = oracles::random_simplex(ky, s);
  const auto x_given_y = oracles::random_channel(ky, kx, s);
  const auto w_given_yu = oracles::random_channel(ky * ku, kw, s);
  std::vector<double> probs = std::vector<double>(kw * ku * kx * ky);
  for (std::size_t w = 0; w < kw; ++w)
    for (std::size_t u = 0; u < ku; ++u)
      for (std::size_t x = 0; x < kx; ++x)
        for (std::size_t y = 0; y < ky; ++y)
          probs[((w * ku + u) * kx + x) * ky + y] =
              py[y] * 0.5 * x_given_y[y][x] * w_given_yu[y * ku + u][w];
  const double total = compensated_sum(probs);
  for (double& p : probs) p /= total;
  return DiscreteJoint({"W", "U", "X", "Y"}, {kw, ku, kx, ky}, std::move(probs));
}

// J1, J2 independent uniform and independent of Z; W from (J1, J2, Z).
inline DiscreteJoint random_chain_joint(Stream& s) {
  const std::size_t kw = 2 + s.below(3), kj = 2 + s.below(2), kz = 1 + s.below(3);
  const std::vector<double> pz = oracles::random_simplex(kz, s);
  const auto w_given = oracles::random_channel(kj * kj * kz, kw, s);
  std::vector<double> probs = std::vector<double>(kw * kj * kj * kz);
  const double pj = 1.0 / static_cast<double>(kj * kj);
  for (std::size_t w = 0; w < kw; ++w)
    for (std::size_t a = 0; a < kj; ++a)
      for (std::size_t b = 0; b < kj; ++b)
        for (std::size_t z = 0; z < kz; ++z)
          probs[((w * kj + a) * kj + b) * kz + z] = pj * pz[z] * w_given[(a * kj + b) * kz + z][w];
  const double total = compensated_sum(probs);
  for (double& p : probs) p /= total;
  return DiscreteJoint({"W", "J1", "J2", "Z"}, {kw, kj, kj, kz}, std::move(probs));
}

inline DiscreteFinite random_binary_kernel(std::size_t depth, Stream& s) {
  DiscreteFinite k;
  for (std::size_t l = 0; l < depth; ++l) k.transitions.push_back(oracles::random_channel(2, 2, s));
  return k;
}

inline SuiteResult cmi_orderings(const VerifyOptions& opt) {
  constexpr double kTol = 1e-10;
  SuiteResult r{"cmi-orderings"};
  for (std::size_t i = 0; i < 200; ++i) {
    Stream s = sweep_stream(opt.seed, 5, i);
    const DiscreteJoint j = random_markov_joint(s);
    r.record(cmi_discrete(j, "U", "W", "Y") + kTol - cmi_discrete(j, "U", "W", "X"));
  }
  for (std::size_t i = 0; i < 200; ++i) {
    Stream s = sweep_stream(opt.seed, 6, i);
    const DiscreteJoint j = random_chain_joint(s);
    const double joint_term = conditional_mutual_information(j, {"W"}, {"J1", "J2"}, {"Z"});
    const double split = cmi_discrete(j, "W", "J1", "Z") + cmi_discrete(j, "W", "J2", "Z");
    r.record(joint_term + kTol - split);
  }
  const std::vector<std::vector<std::size_t>> shapes{{1}, {2}, {3}, {2, 2}, {1, 3}, {2, 1, 2}};
  for (std::size_t i = 0; i < 24; ++i) {
    Stream s = sweep_stream(opt.seed, 7, i);
    const Topology topology(shapes[i % shapes.size()]);
    const DiscreteFinite kernel = random_binary_kernel(topology.depth(), s);
    const ExactDiscreteBounds b = exact_discrete_bounds(topology, kernel, 0.0, LeafAverage{});
    for (const auto& n : b.nodes) {
      r.record(n.sqrt_cmi_given_pair + kTol - 2.0 * n.tv_given_pair);
      r.record(n.cmi_given_subtrees + kTol - n.cmi_given_pair);
    }
    r.record(b.cmi.total + kTol - b.wasserstein.total);
  }
  for (std::size_t i = 0; i < 50; ++i) {
    Stream s = sweep_stream(opt.seed, 8, i);
    const double s1 = 0.05 + 3.0 * s.uniform(), s2 = s1 + 3.0 * s.uniform();
    const double lo = cmi_gaussian_mixture({0.0, s1, 1.0});
    const double hi = cmi_gaussian_mixture({0.0, s2, 1.0});
    r.record(hi + 1e-8 - lo);
    r.record(std::numbers::ln2 + 1e-12 - hi);
  }
  return r;
}

inline SuiteResult mixture_inequality(const VerifyOptions& opt) {
  SuiteResult r{"mixture-inequality"};
  for (std::size_t i = 0; i < 200; ++i) {
    Stream s = sweep_stream(opt.seed, 9, i);
    const GaussianSpec p1{s.normal(0.0, 2.0), 0.1 + 2.0 * s.uniform()};
    const GaussianSpec p2{s.normal(0.0, 2.0), 0.1 + 2.0 * s.uniform()};
    const MixtureWassersteinCheck c = mixture_wasserstein_check(p1, p2, 500, opt.seed + i);
    r.record(c.holds ? c.right - c.left + 1e-12 * (1.0 + c.right) : -1.0);
  }
  const std::vector<double> zero{0.0}, one{1.0};
  const MixtureWassersteinCheck c = mixture_wasserstein_check(zero, one);
  r.record(1e-15 - std::abs(c.left - c.right));
  return r;
}

inline SuiteResult dp_likelihood_ratio(const VerifyOptions&) {
  SuiteResult r{"dp-likelihood-ratio"};
  for (double eps : {0.1, 0.5, 1.0, 2.0}) {
    const double bound = std::exp(eps);
    const double ratio = oracles::laplace_bin_ratio(1.0, 1.0 / eps, 1e-3, 30.0 / eps);
    r.record(bound * (1.0 + 1e-6) - ratio);
    // The bound is attained in the tails, so the check is not vacuous.
    r.record(ratio - 0.99 * bound);
    for (std::size_t k : {2u, 3u, 5u}) {
      const double keep = rr_keep_probability(eps, k);
      const double other = (1.0 - keep) / static_cast<double>(k - 1);
      r.record(1e-12 - std::abs(keep / other - bound));
    }
  }
  return r;
}

inline SuiteResult glm_dominance(const VerifyOptions& opt) {
  SuiteResult r{"glm-dominance"};
  for (std::size_t i = 0; i < 40; ++i) {
    Stream s = sweep_stream(opt.seed, 10, i);
    const std::size_t depth = 1 + s.below(3);
    std::vector<std::size_t> branching(depth);
    std::vector<double> sigmas(depth);
    for (std::size_t l = 0; l < depth; ++l) {
      branching[l] = 2 + s.below(3);
      sigmas[l] = 0.1 + 1.9 * s.uniform();
    }
    const GlmParams p{s.normal(), sigmas, Topology(branching)};
    r.record(glm_wasserstein_bound(p).total - glm_true_gen(p));
  }
  return r;
}

}  // namespace verify_detail

inline const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names{
      "pinsker",       "kr-duality",         "coupling-oracle",     "telescoping",
      "cmi-orderings", "mixture-inequality", "dp-likelihood-ratio", "glm-dominance"};
  return names;
}

inline SuiteResult run_verify_suite(const std::string& name, const VerifyOptions& opt = {}) {
  namespace d = verify_detail;
  if (name == "pinsker") return d::pinsker(opt);
  if (name == "kr-duality") return d::kr_duality(opt);
  if (name == "coupling-oracle") return d::coupling_oracle(opt);
  if (name == "telescoping") return d::telescoping(opt);
  if (name == "cmi-orderings") return d::cmi_orderings(opt);
  if (name == "mixture-inequality") return d::mixture_inequality(opt);
  if (name == "dp-likelihood-ratio") return d::dp_likelihood_ratio(opt);
  if (name == "glm-dominance") return d::glm_dominance(opt);
  throw UsageError("unknown verification suite '" + name + "'");
}

// "all" or a single suite name.
inline std::vector<SuiteResult> run_verify(const std::string& which,
                                           const VerifyOptions& opt = {}) {
  std::vector<SuiteResult> out;
  if (which == "all") {
    for (const auto& name : verify_suite_names()) out.push_back(run_verify_suite(name, opt));
  } else {
    out.push_back(run_verify_suite(which, opt));
  }
  return out;
}

}  // namespace hflgen
