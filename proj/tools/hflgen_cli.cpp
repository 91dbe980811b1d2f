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


// Command-line entry point: glm, bounds, dp and verify subcommands.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration or usage
// error, 3 unsupported configuration.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hflgen/config.hpp"
#include "hflgen/digest.hpp"
#include "hflgen/errors.hpp"
#include "hflgen/experiments.hpp"
#include "hflgen/verify.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kVerificationFailed = 1;
constexpr int kConfigError = 2;
constexpr int kUnsupported = 3;

struct CommonFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_config) {
  auto* config = cmd->add_option("--config", f.config, "experiment configuration (JSON)");
  if (needs_config) config->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--seed", f.seed, "override the configured seed");
  cmd->add_option("--trials", f.trials, "override the main Monte Carlo budget")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--threads", f.threads, "worker threads (default: HFLGEN_THREADS or 1)")
      ->check(CLI::PositiveNumber);
}

hflgen::Parallelism threads_of(const CommonFlags& f) {
  if (f.threads) return {*f.threads};
  return hflgen::Parallelism::from_environment();
}

// Reads the config, applies command-line overrides to the document, then
// validates it. `trials_key` names the budget --trials replaces.
hflgen::RunContext load_context(const CommonFlags& f, const std::string& command,
                                const char* trials_key) {
  const std::string raw = hflgen::read_file(f.config);
  nlohmann::json doc = hflgen::parse_json_text(raw, f.config);
  if (doc.is_object()) {
    if (f.seed) doc["seed"] = *f.seed;
    if (f.trials) {
      if (!doc.contains("trials")) doc["trials"] = nlohmann::json::object();
      doc["trials"][trials_key] = *f.trials;
    }
  }
  hflgen::RunContext ctx;
  ctx.config = hflgen::parse_config(doc);
  ctx.config_hash = hflgen::config_hash(ctx.config);
  ctx.input_digest = hflgen::git_blob_sha1(raw);
  ctx.par = threads_of(f);
  if (!f.out.empty()) {
    ctx.out_dir = f.out;
  } else if (!ctx.config.output.empty()) {
    ctx.out_dir = ctx.config.output;
  } else {
    ctx.out_dir = std::filesystem::path("hflgen-out") / command;
  }
  return ctx;
}

void print_summary(const hflgen::RunRecord& r, const hflgen::RunContext& ctx) {
  std::cout << r.command << ": " << r.rows.size() << " rows -> "
            << (ctx.out_dir / "results.csv").string() << "\n"
            << "config_hash " << r.config_hash << "\n"
            << "summary " << r.summary.dump() << "\n";
}

int run_verify(const std::string& which, const CommonFlags& f) {
  hflgen::VerifyOptions opt;
  if (f.seed) opt.seed = *f.seed;
  if (f.trials) opt.telescoping_trials = *f.trials;
  opt.par = threads_of(f);
  const auto results = hflgen::run_verify(which, opt);
  bool ok = true;
  nlohmann::json suites = nlohmann::json::array();
  for (const auto& r : results) {
    ok = ok && r.passed();
    suites.push_back({{"name", r.name},
                      {"passed", r.passed()},
                      {"cases", r.cases},
                      {"failures", r.failures},
                      {"worst_slack", r.worst_slack},
                      {"note", r.note}});
  }
  const nlohmann::json report = {{"schema", "hflgen.verify/1"},
                                 {"suite", which},
                                 {"seed", opt.seed},
                                 {"passed", ok},
                                 {"suites", suites}};
  std::cout << report.dump(2) << "\n";
  if (!f.out.empty()) {
    std::filesystem::create_directories(f.out);
    hflgen::write_text(std::filesystem::path(f.out) / "report.json", report.dump(2) + "\n");
    hflgen::CsvWriter csv(std::filesystem::path(f.out) / "results.csv",
                          {"suite", "passed", "cases", "failures", "worst_slack"});
    for (const auto& r : results) {
      csv.append({{r.name, r.passed() ? "true" : "false", std::to_string(r.cases),
                   std::to_string(r.failures), hflgen::format_double(r.worst_slack)}});
    }
  }
  return ok ? kOk : kVerificationFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical federated learning generalization experiments"};
  app.require_subcommand(1);

  CommonFlags glm_flags, bounds_flags, dp_flags, verify_flags;
  auto* glm = app.add_subcommand("glm", "GLM closed forms against Monte Carlo, with figure");
  add_common(glm, glm_flags, true);
  auto* bounds = app.add_subcommand("bounds", "Monte Carlo and exact bound evaluators");
  add_common(bounds, bounds_flags, true);
  auto* dp = app.add_subcommand("dp", "DP bound against measured generalization error");
  add_common(dp, dp_flags, true);
  auto* verify = app.add_subcommand("verify", "run property suites");
  std::string suite = "all";
  verify->add_option("suite", suite, "suite name or 'all'");
  add_common(verify, verify_flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*glm) {
      const auto ctx = load_context(glm_flags, "glm", "outer");
      print_summary(hflgen::run_glm(ctx), ctx);
    } else if (*bounds) {
      const auto ctx = load_context(bounds_flags, "bounds", "draws");
      print_summary(hflgen::run_bounds(ctx), ctx);
    } else if (*dp) {
      const auto ctx = load_context(dp_flags, "dp", "outer");
      print_summary(hflgen::run_dp(ctx), ctx);
    } else {
      return run_verify(suite, verify_flags);
    }
  } catch (const hflgen::UnsupportedConfiguration& e) {
    std::cerr << "unsupported configuration: " << e.what() << "\n";
    return kUnsupported;
  } catch (const hflgen::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const hflgen::ContractError& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
  return kOk;
}
