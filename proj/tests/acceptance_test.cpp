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


// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Expects HFLGEN_CLI and HFLGEN_SOURCE_DIR at compile time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "hflgen/bounds.hpp"
#include "hflgen/oracles.hpp"
#include "hflgen/risk.hpp"
#include "hflgen/verify.hpp"

namespace fs = std::filesystem;
using namespace hflgen;

namespace {

const double kSqrtPi = std::sqrt(std::numbers::pi);

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw std::runtime_error("missing column " + name);
}

// y pixel coordinates of the polyline with the given id.
std::vector<double> polyline_y(const std::string& svg, const std::string& id) {
  const auto at = svg.find("id=\"" + id + "\"");
  if (at == std::string::npos) return {};
  const auto start = svg.find("points=\"", at) + 8;
  const auto end = svg.find('"', start);
  std::istringstream in(svg.substr(start, end - start));
  std::vector<double> ys;
  for (std::string pair; in >> pair;) ys.push_back(std::stod(pair.substr(pair.find(',') + 1)));
  return ys;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HFLGEN_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path config_path(const char* name) {
  return fs::path(HFLGEN_SOURCE_DIR) / "configs" / name;
}

Outcome glm_exactness() {
  Outcome o;
  for (std::size_t n : {2u, 4u, 16u}) {
    const auto t0 = std::chrono::steady_clock::now();
    const Topology t({n});
    const GlmParams p{0.0, {1.0}, t};
    const GenEstimate mc = gen_error_mc(t, GaussianLocation{{1.0}, {}}, 0.0, LeafAverage{},
                                        AbsoluteLoss{}, 100000, 1, 1000 + n);
    const double elapsed = seconds_since(t0);
    const double truth = glm_true_gen(p);
    o.require(std::abs(mc.mean - truth) <= 3 * mc.std_error,
              "n=" + std::to_string(n) + " mc " + fmt(mc.mean) + " vs " + fmt(truth));
    o.require(elapsed < 30.0, "n=" + std::to_string(n) + " took " + fmt(elapsed) + " s");
    o.detail += (o.detail.empty() ? "" : ", ") + std::string("n=") + std::to_string(n) + ": " +
                fmt(mc.mean) + "+-" + fmt(mc.std_error) + " vs " + fmt(truth);
  }
  return o;
}

Outcome wasserstein_per_node() {
  Outcome o;
  struct Case {
    std::vector<std::size_t> n;
    std::vector<double> sigma;
  };
  const std::vector<Case> cases{{{4}, {1.0}}, {{2, 2}, {1.0, 1.0}}, {{3, 4}, {1.5, 0.5}}};
  double worst = 0.0;
  for (const auto& c : cases) {
    const Topology t(c.n);
    const BoundReport r = wasserstein_bound_mc(t, GaussianLocation{c.sigma, {}}, 0.0, LeafAverage{},
                                               1.0, 100000, 77, {.inner_replicates = 1});
    for (const NodeTerm& node : r.per_node) {
      const double expected =
          c.sigma[node.layer - 1] / (kSqrtPi * static_cast<double>(t.layer_size(node.layer)));
      worst = std::max(worst, std::abs(node.value / expected - 1.0));
    }
    const double total = glm_wasserstein_bound({0.0, c.sigma, t}).total;
    worst = std::max(worst, std::abs(r.total / total - 1.0));
  }
  o.require(worst <= 0.02, "worst relative error " + fmt(worst));
  if (o.pass) o.detail = "worst relative error " + fmt(worst);
  return o;
}

Outcome dominance() {
  Outcome o;
  Stream s(31337, {0, 0, 0, Purpose::kPropertySweep, 77});
  std::size_t configs = 0;
  for (; configs < 25; ++configs) {
    const std::size_t depth = 1 + s.below(3);
    std::vector<std::size_t> n(depth);
    std::vector<double> sigma(depth);
    for (std::size_t l = 0; l < depth; ++l) {
      n[l] = 2 + s.below(3);
      sigma[l] = 0.1 + 1.9 * s.uniform();
    }
    const GlmParams p{s.normal(), sigma, Topology(n)};
    o.require(glm_true_gen(p) <= glm_wasserstein_bound(p).total,
              "config " + std::to_string(configs));
  }
  if (o.pass) o.detail = std::to_string(configs) + " configs";
  return o;
}

Outcome homogeneous_ratio() {
  Outcome o;
  for (std::size_t depth = 1; depth <= 3; ++depth) {
    const GlmParams p{0.0, std::vector<double>(depth, 0.7), Topology(std::vector<std::size_t>(depth, 3))};
    const double ratio = glm_wasserstein_bound(p).total / glm_taylor_gen(p);
    o.require(std::abs(ratio - std::sqrt(2.0 * depth)) <= 1e-9,
              "L=" + std::to_string(depth) + " ratio " + fmt(ratio));
  }
  const GlmParams p{0.0, {1.0}, Topology({100})};
  o.require(glm_delta(p) / glm_total_variance(p) <= 0.01, "delta/V too large");
  const double r = glm_wasserstein_bound(p).total / glm_true_gen(p);
  o.require(r >= std::numbers::sqrt2 * 0.99 && r <= std::numbers::sqrt2 * 1.01,
            "L=1 bound/true " + fmt(r));
  if (o.pass) o.detail = "L=1 n=100 bound/true " + fmt(r);
  return o;
}

Outcome telescoping() {
  Outcome o;
  const Topology t({2, 2});
  const Kernel k = GaussianLocation{{1.0, 1.0}, {}};
  const Decomposition d =
      decomposition_terms_mc(t, k, 0.0, LeafAverage{}, AbsoluteLoss{}, 100000, 1, 2024);
  const GenEstimate gen = gen_error_mc(t, k, 0.0, LeafAverage{}, AbsoluteLoss{}, 100000, 1, 2024);
  const double se = std::max(d.signed_total.std_error, gen.std_error);
  o.require(std::abs(d.signed_total.mean - gen.mean) <= 3 * se,
            "signed " + fmt(d.signed_total.mean) + " vs gen " + fmt(gen.mean));
  o.detail += "signed " + fmt(d.signed_total.mean) + " gen " + fmt(gen.mean) + " closed form " +
              fmt(glm_true_gen({0.0, {1.0, 1.0}, t}));
  return o;
}

Outcome suites(std::initializer_list<std::pair<const char*, std::size_t>> wanted) {
  Outcome o;
  for (const auto& [name, min_cases] : wanted) {
    const SuiteResult r = run_verify_suite(name);
    o.require(r.passed(), std::string(name) + " failed " + std::to_string(r.failures) + "/" +
                              std::to_string(r.cases));
    o.require(r.cases >= min_cases, std::string(name) + " ran " + std::to_string(r.cases));
    if (o.pass) {
      o.detail += (o.detail.empty() ? "" : ", ") + std::string(name) + " " + std::to_string(r.cases);
    }
  }
  return o;
}

Outcome dp() {
  Outcome o;
  const double value = dp_bound({0.1, 0.1}).total;
  const long double e = std::expm1(0.1L);
  const double oracle = static_cast<double>(4.0L * std::sqrt(0.1L * e));
  o.require(std::abs(value - 0.41024) <= 1e-4, "dp_bound " + fmt(value));
  o.require(std::abs(value - oracle) <= 1e-12, "dp_bound vs long double oracle");
  for (double eps : {0.1, 0.5, 1.0}) {
    const double ratio = oracles::laplace_bin_ratio(1.0, 1.0 / eps, 1e-3, 30.0 / eps);
    o.require(ratio <= std::exp(eps) * (1 + 1e-6) && ratio >= 0.99 * std::exp(eps),
              "likelihood ratio at eps " + fmt(eps) + " = " + fmt(ratio));
  }
  const Topology t({4, 4});
  for (double eps : {0.1, 0.5, 1.0, 4.0, 16.0}) {
    const AggregationPlan plan{{LaplaceOnMean{eps, 0.0, 1.0}, LaplaceOnMean{eps, 0.0, 1.0}}};
    const DpComparison c = dp_empirical_vs_bound(t, BoundedBernoulli{4.0}, 0.5, plan,
                                                 SquaredClippedLoss{1.0}, 20000, 3);
    o.require(c.dominates, "not dominated at eps " + fmt(eps));
  }
  if (o.pass) o.detail = "dp_bound([0.1,0.1]) = " + fmt(value);
  return o;
}

Outcome figure(const fs::path& work) {
  Outcome o;
  const fs::path out = work / "glm";
  const int code = run_cli("glm --config " + config_path("glm_n_sweep.json").string() +
                           " --trials 20000 --out " + out.string());
  o.require(code == 0, "cli exit " + std::to_string(code));
  if (!o.pass) return o;
  const auto rows = read_csv(out / "results.csv");
  o.require(rows.size() >= 3, "too few sweep points");
  const std::size_t ti = column(rows[0], "true_gen"), bi = column(rows[0], "wasserstein_bound");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    o.require(std::stod(rows[r][ti]) < std::stod(rows[r][bi]), "row " + std::to_string(r));
  }
  const std::string svg = slurp(out / "comparison.svg");
  const auto truth = polyline_y(svg, "series-true-gen");
  const auto bound = polyline_y(svg, "series-wasserstein-bound");
  o.require(truth.size() == rows.size() - 1 && bound.size() == truth.size(), "svg curves");
  for (std::size_t i = 0; i < truth.size() && i < bound.size(); ++i) {
    // SVG y grows downwards.
    o.require(truth[i] > bound[i], "svg point " + std::to_string(i));
  }
  o.require(svg.find("Wasserstein bound") != std::string::npos, "legend");
  o.require(svg.find("branching factor n") != std::string::npos, "x label");
  o.require(svg.find("generalization error") != std::string::npos, "y label");
  o.require(svg.find("href") == std::string::npos, "external reference");
  if (o.pass) o.detail = std::to_string(rows.size() - 1) + " sweep points";
  return o;
}

Outcome determinism(const fs::path& work) {
  Outcome o;
  const std::vector<std::pair<std::string, std::string>> runs{
      {"glm", "glm_n_sweep.json"}, {"bounds", "bounds_glm.json"}, {"dp", "dp_bernoulli.json"}};
  for (const auto& [cmd, cfg] : runs) {
    std::string csv[2];
    int k = 0;
    for (int threads : {1, 8}) {
      const fs::path out = work / (cmd + "_t" + std::to_string(threads));
      const int code = run_cli(cmd + " --config " + config_path(cfg.c_str()).string() +
                               " --trials 4000 --threads " + std::to_string(threads) + " --out " +
                               out.string());
      o.require(code == 0, cmd + " exit " + std::to_string(code));
      csv[k++] = slurp(out / "results.csv");
    }
    o.require(!csv[0].empty() && csv[0] == csv[1], cmd + " csv differs");
  }
  if (o.pass) o.detail = "glm, bounds, dp byte-identical at 1 and 8 threads";
  return o;
}

}  // namespace

int main() {
  const fs::path work = fs::temp_directory_path() / ("hflgen-acceptance-" + std::to_string(::getpid()));
  fs::create_directories(work);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"GLM exactness", glm_exactness},
      {"per-node Wasserstein term", wasserstein_per_node},
      {"dominance sweep", dominance},
      {"homogeneous-case ratio", homogeneous_ratio},
      {"telescoping identity", telescoping},
      {"divergence property suite",
       [] { return suites({{"pinsker", 1000}, {"coupling-oracle", 200}, {"mixture-inequality", 200}}); }},
      {"information-ordering suite", [] { return suites({{"cmi-orderings", 400}}); }},
      {"differential privacy", dp},
      {"figure reproduction", [&] { return figure(work); }},
      {"determinism", [&] { return determinism(work); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << " ("
              << o.detail << "; " << fmt(seconds_since(t0)) << " s)" << std::endl;
  }
  fs::remove_all(work);
  return failures == 0 ? 0 : 1;
}
