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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <unistd.h>

#include "hflgen/config.hpp"
#include "hflgen/digest.hpp"
#include "hflgen/experiments.hpp"

namespace fs = std::filesystem;

namespace hflgen {
namespace {

using nlohmann::json;

json base_config() {
  return json::parse(R"({
    "schema": "hflgen.experiment/1",
    "seed": 1,
    "topology": {"branching": [4]},
    "kernel": {"type": "gaussian_location", "sigmas": [1.0]},
    "trials": {"outer": 2000, "draws": 200}
  })");
}

class Workdir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hflgen-cli-" + std::to_string(::getpid()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const json& j, const std::string& name = "config.json") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  int cli(const std::string& args) {
    const std::string cmd = std::string(HFLGEN_CLI) + " " + args + " > " +
                            (dir_ / "stdout.txt").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  RunContext context(const json& j) {
    RunContext ctx;
    ctx.config = parse_config(j);
    ctx.config_hash = config_hash(ctx.config);
    ctx.input_digest = git_blob_sha1(j.dump());
    ctx.out_dir = dir_ / "out";
    return ctx;
  }

  fs::path dir_;
};

TEST(Digest, KnownValues) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  // `git hash-object` of an empty file and of "hello\n".
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(FormatDouble, SeventeenSignificantDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(2.0), "2");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Config, ParsesDefaults) {
  const ExperimentConfig c = parse_config(base_config());
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.branching, std::vector<std::size_t>{4});
  EXPECT_TRUE(std::holds_alternative<LeafAverage>(c.algorithm));
  EXPECT_TRUE(std::holds_alternative<AbsoluteLoss>(c.loss));
  EXPECT_EQ(c.sweep_points(), 1u);
}

TEST(Config, RejectsUnknownKeysAtAnyDepth) {
  json top = base_config();
  top["colour"] = 1;
  EXPECT_THROW(parse_config(top), ConfigError);
  json nested = base_config();
  nested["kernel"]["mean"] = 0.0;
  EXPECT_THROW(parse_config(nested), ConfigError);
  json trials = base_config();
  trials["trials"]["outre"] = 3;
  EXPECT_THROW(parse_config(trials), ConfigError);
}

TEST(Config, SeedIsMandatoryAndUnsigned) {
  json j = base_config();
  j.erase("seed");
  EXPECT_THROW(parse_config(j), ConfigError);
  j["seed"] = -4;
  EXPECT_THROW(parse_config(j), ConfigError);
  j["seed"] = 18446744073709551615ULL;
  EXPECT_EQ(parse_config(j).seed, 18446744073709551615ULL);
}

TEST(Config, SchemaVersionChecked) {
  json j = base_config();
  j["schema"] = "hflgen.experiment/0";
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, SweepValidation) {
  json j = base_config();
  j["sweep"] = {{"axis", "n"}, {"values", {2, 2.5}}};
  EXPECT_THROW(parse_config(j), ConfigError);
  j["sweep"] = {{"axis", "depth"}, {"values", {2}}};
  EXPECT_THROW(parse_config(j), ConfigError);
  j["kernel"] = {{"type", "bounded_bernoulli"}};
  j["sweep"] = {{"axis", "sigma"}, {"values", {1.0}}};
  EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, HashIgnoresOutputDirectory) {
  json a = base_config(), b = base_config();
  a["output"] = "x";
  b["output"] = "y";
  EXPECT_EQ(config_hash(parse_config(a)), config_hash(parse_config(b)));
  b["seed"] = 2;
  EXPECT_NE(config_hash(parse_config(a)), config_hash(parse_config(b)));
}

TEST_F(Workdir, GlmRowMatchesClosedFormsAndCarriesHash) {
  const RunRecord r = run_glm(context(base_config()));
  ASSERT_EQ(r.rows.size(), 1u);
  const auto& row = r.rows[0];
  EXPECT_EQ(row[0], r.config_hash);
  EXPECT_NEAR(std::stod(row[7]), 0.2011, 1e-4);
  EXPECT_NEAR(std::stod(row[9]), 0.2821, 1e-4);
  EXPECT_EQ(row[15], "true");
  EXPECT_TRUE(fs::exists(dir_ / "out" / "comparison.svg"));
  const json report = json::parse(read(dir_ / "out" / "report.json"));
  EXPECT_EQ(report["config_hash"], r.config_hash);
  EXPECT_TRUE(report.contains("wall_time_seconds"));
}

TEST_F(Workdir, GlmZeroVarianceGivesZeroColumns) {
  json j = base_config();
  j["kernel"]["sigmas"] = {0.0};
  j["sweep"] = {{"axis", "n"}, {"values", {2, 4, 8}}};
  for (const auto& row : run_glm(context(j)).rows) {
    for (std::size_t col : {7u, 8u, 9u, 10u, 11u, 12u, 13u}) EXPECT_EQ(row[col], "0") << col;
  }
}

TEST_F(Workdir, GlmHomogeneousThreeLayerRatio) {
  json j = base_config();
  j["topology"]["branching"] = {2, 3, 2};
  j["kernel"]["sigmas"] = {0.5, 0.5, 0.5};
  j["sweep"] = {{"axis", "sigma"}, {"values", {0.5, 1.0, 2.0}}};
  for (const auto& row : run_glm(context(j)).rows) {
    EXPECT_NEAR(std::stod(row[10]), std::sqrt(6.0), 1e-12);
  }
}

TEST_F(Workdir, GlmRejectsOtherKernels) {
  json j = base_config();
  j["kernel"] = {{"type", "bounded_bernoulli"}};
  EXPECT_THROW(run_glm(context(j)), ConfigError);
}

TEST_F(Workdir, BoundsOnGlmMatchClosedForm) {
  json j = base_config();
  j["bounds"] = {"wasserstein"};
  j["trials"]["draws"] = 20000;
  j["trials"]["inner_replicates"] = 1;
  const RunRecord r = run_bounds(context(j));
  double mc = 0, closed = 0;
  for (const auto& row : r.rows) {
    if (row[7] != "total") continue;
    if (row[4] == "wasserstein") mc = std::stod(row[8]);
    if (row[4] == "glm_wasserstein") closed = std::stod(row[8]);
  }
  EXPECT_NEAR(mc / closed, 1.0, 0.02);
}

TEST_F(Workdir, BoundsOnDiscreteToyOrderCmiAboveWasserstein) {
  json j = base_config();
  j["topology"]["branching"] = {2, 2};
  j["kernel"] = {{"type", "discrete_finite"},
                 {"transitions", {{{0.6, 0.4}, {0.3, 0.7}}, {{0.8, 0.2}, {0.25, 0.75}}}}};
  j["root"] = 0;
  j["loss"] = {{"type", "zero_one"}, {"threshold", 0.0}};
  j["bounds"] = {"exact"};
  double w = 0, c = 0;
  for (const auto& row : run_bounds(context(j)).rows) {
    if (row[7] != "total") continue;
    if (row[4] == "exact_wasserstein") w = std::stod(row[8]);
    if (row[4] == "exact_cmi") c = std::stod(row[8]);
  }
  EXPECT_GT(w, 0.0);
  EXPECT_GE(c, w);
}

TEST_F(Workdir, BoundsZeroVarianceAllZero) {
  json j = base_config();
  j["kernel"]["sigmas"] = {0.0};
  j["bounds"] = {"wasserstein", "subtree"};
  for (const auto& row : run_bounds(context(j)).rows) EXPECT_EQ(std::stod(row[8]), 0.0);
}

TEST_F(Workdir, DpRowsAndMissingSection) {
  json j = base_config();
  j["topology"]["branching"] = {3, 3};
  j["root"] = 0.5;
  j["kernel"] = {{"type", "bounded_bernoulli"}};
  j["loss"] = {{"type", "squared_clipped"}, {"cap", 1.0}};
  EXPECT_THROW(run_dp(context(j)), ConfigError);
  j["dp"] = {{"epsilon_grid", {{0.1, 0.1}, {8.0, 8.0}}}};
  const RunRecord r = run_dp(context(j));
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_NEAR(std::stod(r.rows[0][4]), 0.4102, 1e-4);
  EXPECT_EQ(r.rows[0][8], "true");
  EXPECT_EQ(r.rows[1][8], "true");
  EXPECT_GT(std::stod(r.rows[1][4]), std::stod(r.rows[0][4]));
  j["loss"] = {{"type", "absolute"}};
  EXPECT_THROW(run_dp(context(j)), ContractError);
}

TEST_F(Workdir, SvgIsSelfContained) {
  run_glm(context(base_config()));
  const std::string svg = read(dir_ / "out" / "comparison.svg");
  EXPECT_EQ(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0), 0u);
  EXPECT_EQ(svg.find("href"), std::string::npos);
  EXPECT_EQ(svg.find("url("), std::string::npos);
  EXPECT_NE(svg.find("<polyline id=\"series-true-gen\""), std::string::npos);
  EXPECT_NE(svg.find("Wasserstein bound"), std::string::npos);
}

TEST_F(Workdir, ExitCodes) {
  EXPECT_EQ(cli("verify pinsker"), 0);
  EXPECT_EQ(cli("verify unknown-name"), 2);
  EXPECT_EQ(cli("frobnicate"), 2);
  json unknown = base_config();
  unknown["extra"] = true;
  EXPECT_EQ(cli("glm --config " + write_config(unknown).string() + " --out " + (dir_ / "a").string()), 2);
  EXPECT_EQ(cli("glm --config " + (dir_ / "missing.json").string()), 2);
  std::ofstream(dir_ / "broken.json") << "{ not json";
  EXPECT_EQ(cli("glm --config " + (dir_ / "broken.json").string()), 2);
  json bern = base_config();
  bern["kernel"] = {{"type", "bounded_bernoulli"}};
  bern["root"] = 0.5;
  bern["bounds"] = {"cmi"};
  EXPECT_EQ(cli("bounds --config " + write_config(bern).string() + " --out " + (dir_ / "b").string()), 3);
  EXPECT_EQ(cli("dp --config " + write_config(bern).string() + " --out " + (dir_ / "c").string()), 2);
}

TEST_F(Workdir, OverridesAndThreadsEnvironment) {
  const fs::path cfg = write_config(base_config());
  ASSERT_EQ(cli("glm --config " + cfg.string() + " --seed 9 --trials 500 --out " + (dir_ / "a").string()), 0);
  const json report = json::parse(read(dir_ / "a" / "report.json"));
  EXPECT_EQ(report["seed"], 9);
  EXPECT_EQ(report["config"]["trials"]["outer"], 500);
  EXPECT_EQ(report["threads"], 1);
  ASSERT_EQ(::setenv("HFLGEN_THREADS", "3", 1), 0);
  ASSERT_EQ(cli("glm --config " + cfg.string() + " --seed 9 --trials 500 --out " + (dir_ / "b").string()), 0);
  ::unsetenv("HFLGEN_THREADS");
  EXPECT_EQ(json::parse(read(dir_ / "b" / "report.json"))["threads"], 3);
  EXPECT_EQ(read(dir_ / "a" / "results.csv"), read(dir_ / "b" / "results.csv"));
}

TEST_F(Workdir, VerifyWritesJsonReport) {
  ASSERT_EQ(cli("verify glm-dominance --out " + (dir_ / "v").string()), 0);
  const json report = json::parse(read(dir_ / "v" / "report.json"));
  EXPECT_TRUE(report["passed"].get<bool>());
  EXPECT_EQ(report["suites"][0]["name"], "glm-dominance");
  const std::string csv = read(dir_ / "v" / "results.csv");
  EXPECT_EQ(csv.rfind("suite,passed,cases,failures,worst_slack\nglm-dominance,true,40,0,", 0), 0u);
}

}  // namespace
}  // namespace hflgen
