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

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hflgen/dp_round.hpp"
#include "hflgen/errors.hpp"
#include "hflgen/kernel.hpp"
#include "hflgen/risk.hpp"
#include "hflgen/topology.hpp"

namespace hflgen {

inline constexpr const char* kConfigSchema = "hflgen.experiment/1";

struct TrialCounts {
  // Outer Monte Carlo trials for generalization-error estimates.
  std::size_t outer = 10000;
  // Fresh test leaves per trial for the population risk.
  std::size_t inner = 1;
  // Supersample draws for the Monte Carlo bound estimators.
  std::size_t draws = 10000;
  std::size_t inner_replicates = 8;
};

// axis: none | n | sigma. "n" sets every branching factor, "sigma" every
// GLM layer standard deviation.
struct SweepSpec {
  std::string axis = "none";
  std::vector<double> values;
};

struct DpSpec {
  std::string mechanism = "laplace_on_mean";
  std::vector<std::vector<double>> epsilon_grid;
  double lo = 0.0;
  double hi = 1.0;
  std::size_t alphabet_size = 2;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::vector<std::size_t> branching;
  double root = 0.0;
  Kernel kernel;
  Algorithm algorithm = LeafAverage{};
  Loss loss = AbsoluteLoss{};
  std::optional<double> lipschitz;
  std::optional<Metric> metric;
  std::vector<std::string> bounds;
  TrialCounts trials;
  SweepSpec sweep;
  std::optional<DpSpec> dp;
  std::string output;
  // The validated document; its compact dump is what gets hashed.
  nlohmann::json document;

  std::size_t sweep_points() const {
    return sweep.axis == "none" ? 1 : sweep.values.size();
  }
};

namespace config_detail {

using nlohmann::json;

inline void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const std::string& where) {
  require_object(j, where);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

inline const json& required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline bool non_negative_integer(const json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

inline std::size_t count(const json& j, const std::string& where) {
  if (!non_negative_integer(j)) throw ConfigError(where + ": expected a non-negative integer");
  return j.get<std::size_t>();
}

inline std::string text(const json& j, const std::string& where) {
  if (!j.is_string()) throw ConfigError(where + ": expected a string");
  return j.get<std::string>();
}

inline std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(number(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline Kernel parse_kernel(const json& j) {
  const std::string where = "kernel";
  require_object(j, where);
  const std::string type = text(required(j, "type", where), where + ".type");
  if (type == "gaussian_location") {
    check_keys(j, {"type", "sigmas"}, where);
    return GaussianLocation{numbers(required(j, "sigmas", where), where + ".sigmas"), {}};
  }
  if (type == "bounded_bernoulli") {
    check_keys(j, {"type", "concentration"}, where);
    BoundedBernoulli k;
    if (j.contains("concentration")) k.concentration = number(j["concentration"], where + ".concentration");
    return k;
  }
  if (type == "discrete_finite") {
    check_keys(j, {"type", "transitions"}, where);
    const json& t = required(j, "transitions", where);
    if (!t.is_array() || t.empty()) throw ConfigError(where + ".transitions: expected a non-empty array");
    DiscreteFinite k;
    for (std::size_t l = 0; l < t.size(); ++l) {
      const std::string at = where + ".transitions[" + std::to_string(l) + "]";
      if (!t[l].is_array() || t[l].empty()) throw ConfigError(at + ": expected a non-empty matrix");
      std::vector<std::vector<double>> matrix;
      for (std::size_t r = 0; r < t[l].size(); ++r) {
        matrix.push_back(numbers(t[l][r], at + "[" + std::to_string(r) + "]"));
        if (matrix.back().empty()) throw ConfigError(at + ": empty row");
      }
      k.transitions.push_back(std::move(matrix));
    }
    return k;
  }
  throw ConfigError(where + ".type: unknown kernel '" + type + "'");
}

inline DpMechanism make_mechanism(const std::string& name, double eps, double lo, double hi,
                                  std::size_t alphabet, const std::string& where) {
  if (name == "laplace_on_mean") return LaplaceOnMean{eps, lo, hi};
  if (name == "randomized_response") return RandomizedResponse{eps, alphabet};
  throw ConfigError(where + ": unknown mechanism '" + name + "'");
}

inline Algorithm parse_algorithm(const json& j) {
  const std::string where = "algorithm";
  require_object(j, where);
  const std::string type = text(required(j, "type", where), where + ".type");
  if (type == "leaf_average") {
    check_keys(j, {"type"}, where);
    return LeafAverage{};
  }
  if (type == "noisy_leaf_average") {
    check_keys(j, {"type", "noise_sd"}, where);
    return NoisyLeafAverage{number(required(j, "noise_sd", where), where + ".noise_sd")};
  }
  if (type == "hierarchical_dp") {
    check_keys(j, {"type", "mechanism", "epsilons", "lo", "hi", "alphabet_size"}, where);
    const std::string mech = j.contains("mechanism") ? text(j["mechanism"], where + ".mechanism")
                                                     : std::string("laplace_on_mean");
    const double lo = j.contains("lo") ? number(j["lo"], where + ".lo") : 0.0;
    const double hi = j.contains("hi") ? number(j["hi"], where + ".hi") : 1.0;
    const std::size_t k = j.contains("alphabet_size") ? count(j["alphabet_size"], where) : 2;
    HierarchicalDP alg;
    for (double eps : numbers(required(j, "epsilons", where), where + ".epsilons")) {
      alg.plan.mechanisms.push_back(make_mechanism(mech, eps, lo, hi, k, where));
    }
    return alg;
  }
  throw ConfigError(where + ".type: unknown algorithm '" + type + "'");
}

inline Loss parse_loss(const json& j) {
  const std::string where = "loss";
  require_object(j, where);
  const std::string type = text(required(j, "type", where), where + ".type");
  if (type == "absolute") {
    check_keys(j, {"type"}, where);
    return AbsoluteLoss{};
  }
  if (type == "squared_clipped") {
    check_keys(j, {"type", "cap"}, where);
    SquaredClippedLoss l;
    if (j.contains("cap")) l.cap = number(j["cap"], where + ".cap");
    if (!(l.cap > 0.0)) throw ConfigError(where + ".cap: must be > 0");
    return l;
  }
  if (type == "zero_one") {
    check_keys(j, {"type", "threshold"}, where);
    ZeroOneLoss l;
    if (j.contains("threshold")) l.threshold = number(j["threshold"], where + ".threshold");
    return l;
  }
  throw ConfigError(where + ".type: unknown loss '" + type + "'");
}

inline TrialCounts parse_trials(const json& j) {
  check_keys(j, {"outer", "inner", "draws", "inner_replicates"}, "trials");
  TrialCounts t;
  if (j.contains("outer")) t.outer = count(j["outer"], "trials.outer");
  if (j.contains("inner")) t.inner = count(j["inner"], "trials.inner");
  if (j.contains("draws")) t.draws = count(j["draws"], "trials.draws");
  if (j.contains("inner_replicates")) {
    t.inner_replicates = count(j["inner_replicates"], "trials.inner_replicates");
  }
  if (t.outer == 0 || t.inner == 0 || t.inner_replicates == 0) {
    throw ConfigError("trials: counts must be positive");
  }
  if (t.draws < 2) throw ConfigError("trials.draws: need at least 2");
  return t;
}

inline SweepSpec parse_sweep(const json& j) {
  check_keys(j, {"axis", "values"}, "sweep");
  SweepSpec s;
  s.axis = text(required(j, "axis", "sweep"), "sweep.axis");
  if (s.axis == "none") {
    if (j.contains("values")) throw ConfigError("sweep: axis 'none' takes no values");
    return s;
  }
  if (s.axis != "n" && s.axis != "sigma") {
    throw ConfigError("sweep.axis: expected none, n or sigma, got '" + s.axis + "'");
  }
  s.values = numbers(required(j, "values", "sweep"), "sweep.values");
  if (s.values.empty()) throw ConfigError("sweep.values: empty");
  for (double v : s.values) {
    if (s.axis == "n" && !(v >= 1.0 && v == static_cast<double>(static_cast<std::size_t>(v)))) {
      throw ConfigError("sweep.values: branching factors must be positive integers");
    }
    if (s.axis == "sigma" && !(v >= 0.0)) throw ConfigError("sweep.values: sigma must be >= 0");
  }
  return s;
}

inline DpSpec parse_dp(const json& j) {
  const std::string where = "dp";
  check_keys(j, {"mechanism", "epsilon_grid", "lo", "hi", "alphabet_size"}, where);
  DpSpec d;
  if (j.contains("mechanism")) d.mechanism = text(j["mechanism"], where + ".mechanism");
  if (j.contains("lo")) d.lo = number(j["lo"], where + ".lo");
  if (j.contains("hi")) d.hi = number(j["hi"], where + ".hi");
  if (j.contains("alphabet_size")) d.alphabet_size = count(j["alphabet_size"], where + ".alphabet_size");
  const json& grid = required(j, "epsilon_grid", where);
  if (!grid.is_array() || grid.empty()) throw ConfigError(where + ".epsilon_grid: expected a non-empty array");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    d.epsilon_grid.push_back(numbers(grid[i], where + ".epsilon_grid[" + std::to_string(i) + "]"));
  }
  make_mechanism(d.mechanism, 1.0, d.lo, d.hi, d.alphabet_size, where);
  return d;
}

}  // namespace config_detail

// Validates a configuration document. Unknown keys anywhere are rejected.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace config_detail;
  check_keys(j, {"schema", "seed", "topology", "root", "kernel", "algorithm", "loss",
                 "lipschitz", "metric", "bounds", "trials", "sweep", "dp", "output"},
             "config");
  const std::string schema = text(required(j, "schema", "config"), "schema");
  if (schema != kConfigSchema) {
    throw ConfigError("schema: expected '" + std::string(kConfigSchema) + "', got '" + schema + "'");
  }
  ExperimentConfig c;
  const json& seed = required(j, "seed", "config");
  if (!non_negative_integer(seed)) throw ConfigError("seed: expected an unsigned 64-bit integer");
  c.seed = seed.get<std::uint64_t>();

  const json& topo = required(j, "topology", "config");
  check_keys(topo, {"branching"}, "topology");
  const std::vector<double> branching = numbers(required(topo, "branching", "topology"), "topology.branching");
  if (branching.empty()) throw ConfigError("topology.branching: need at least one layer");
  for (double b : branching) {
    if (!(b >= 1.0) || b != static_cast<double>(static_cast<std::size_t>(b))) {
      throw ConfigError("topology.branching: entries must be positive integers");
    }
    c.branching.push_back(static_cast<std::size_t>(b));
  }
  if (j.contains("root")) c.root = number(j["root"], "root");
  c.kernel = parse_kernel(required(j, "kernel", "config"));
  if (j.contains("algorithm")) c.algorithm = parse_algorithm(j["algorithm"]);
  if (j.contains("loss")) c.loss = parse_loss(j["loss"]);
  if (j.contains("lipschitz")) {
    c.lipschitz = number(j["lipschitz"], "lipschitz");
    if (!(*c.lipschitz > 0.0)) throw ConfigError("lipschitz: must be > 0");
  }
  if (j.contains("metric")) {
    const std::string m = text(j["metric"], "metric");
    if (m == "absolute") {
      c.metric = Metric::kAbsolute;
    } else if (m == "discrete") {
      c.metric = Metric::kDiscrete;
    } else {
      throw ConfigError("metric: expected absolute or discrete");
    }
  }
  if (j.contains("bounds")) {
    if (!j["bounds"].is_array()) throw ConfigError("bounds: expected an array");
    for (const auto& b : j["bounds"]) {
      const std::string name = text(b, "bounds[]");
      if (name != "wasserstein" && name != "subtree" && name != "cmi" && name != "exact") {
        throw ConfigError("bounds: unknown family '" + name + "'");
      }
      c.bounds.push_back(name);
    }
  }
  if (j.contains("trials")) c.trials = parse_trials(j["trials"]);
  if (j.contains("sweep")) c.sweep = parse_sweep(j["sweep"]);
  if (c.sweep.axis == "sigma" && !std::holds_alternative<GaussianLocation>(c.kernel)) {
    throw ConfigError("sweep.axis sigma needs a gaussian_location kernel");
  }
  if (j.contains("dp")) c.dp = parse_dp(j["dp"]);
  if (j.contains("output")) c.output = text(j["output"], "output");
  c.document = j;
  return c;
}

inline nlohmann::json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Topology and kernel at one sweep point.
struct SweepPoint {
  std::size_t index = 0;
  std::optional<double> value;
  Topology topology;
  Kernel kernel;
};

inline SweepPoint sweep_point(const ExperimentConfig& c, std::size_t index) {
  SweepPoint p;
  p.index = index;
  std::vector<std::size_t> branching = c.branching;
  p.kernel = c.kernel;
  if (c.sweep.axis != "none") {
    const double v = c.sweep.values.at(index);
    p.value = v;
    if (c.sweep.axis == "n") {
      for (auto& b : branching) b = static_cast<std::size_t>(v);
    } else {
      for (auto& s : std::get<GaussianLocation>(p.kernel).sigmas) s = v;
    }
  }
  p.topology = Topology(std::move(branching));
  validate_kernel(p.kernel, p.topology, c.root);
  validate_algorithm(c.algorithm, p.topology);
  return p;
}

}  // namespace hflgen
