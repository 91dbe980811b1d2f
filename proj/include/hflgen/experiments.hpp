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
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "hflgen/bounds.hpp"
#include "hflgen/config.hpp"
#include "hflgen/digest.hpp"
#include "hflgen/errors.hpp"
#include "hflgen/parallel.hpp"
#include "hflgen/risk.hpp"

namespace hflgen {

// Shortest text that round-trips any double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

template <typename T>
std::string join_numbers(const std::vector<T>& values, const char* sep) {
  std::vector<std::string> items;
  for (const T& v : values) {
    if constexpr (std::is_floating_point_v<T>) {
      items.push_back(format_double(v));
    } else {
      items.push_back(std::to_string(v));
    }
  }
  return join(items, sep);
}

// Config hash: SHA-256 of the compact dump of the document without its
// output directory, so relocating a run does not change it.
inline std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json doc = c.document;
  doc.erase("output");
  return sha256_hex(doc.dump());
}

struct RunContext {
  ExperimentConfig config;
  std::string config_hash;
  // git blob id of the configuration file as read from disk.
  std::string input_digest;
  std::filesystem::path out_dir;
  Parallelism par{};
};

using CsvRow = std::vector<std::string>;

struct RunRecord {
  std::string command;
  std::string config_hash;
  std::string input_digest;
  std::uint64_t seed = 0;
  std::vector<std::string> columns;
  std::vector<CsvRow> rows;
  double wall_time_seconds = 0.0;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> outputs;
};

// Appends rows and flushes after every sweep point.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
      : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    write(columns);
    out_.flush();
  }

  void append(const std::vector<CsvRow>& rows) {
    for (const auto& r : rows) write(r);
    out_.flush();
  }

 private:
  void write(const CsvRow& row) { out_ << join(row, ",") << '\n'; }

  std::ofstream out_;
};

// Runs sweep points concurrently. `emit` sees the points in index order,
// one at a time, as soon as all earlier points are done.
template <typename Result, typename Compute, typename Emit>
void run_sweep(std::size_t points, Parallelism par, Compute&& compute, Emit&& emit) {
  const std::size_t outer = std::max<std::size_t>(1, std::min(par.threads, points));
  const Parallelism inner{std::max<std::size_t>(1, par.threads / outer)};
  std::vector<std::optional<Result>> done(points);
  std::size_t next = 0;
  std::mutex mutex;
  parallel_for(points, Parallelism{outer}, [&](std::size_t i) {
    Result r = compute(i, inner);
    std::lock_guard<std::mutex> lock(mutex);
    done[i] = std::move(r);
    while (next < points && done[next]) {
      emit(next, *done[next]);
      done[next].reset();
      ++next;
    }
  });
}

// ---------------------------------------------------------------------------
// SVG line charts.

struct SvgSeries {
  std::string name;
  std::string id;
  std::vector<double> x;
  std::vector<double> y;
};

namespace svg_detail {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace svg_detail

// Self-contained chart: axes, ticks, labels, one polyline with point markers
// per series and a legend. The x axis is logarithmic when requested and all
// x values are positive.
inline std::string render_svg(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<SvgSeries>& series,
                              bool log_x) {
  using svg_detail::escape;
  using svg_detail::px;
  constexpr double kWidth = 720, kHeight = 460, kLeft = 80, kRight = 200, kTop = 50, kBottom = 70;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymax = 0.0;
  for (const auto& s : series) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
      if (!(v > 0.0)) log_x = false;
    }
    for (double v : s.y) ymax = std::max(ymax, v);
  }
  if (!std::isfinite(xmin)) xmin = 0.0, xmax = 1.0;
  if (ymax <= 0.0) ymax = 1.0;
  ymax *= 1.1;
  auto fx = [&](double v) { return log_x ? std::log(v) : v; };
  double lo = fx(xmin), hi = fx(xmax);
  if (hi - lo <= 0.0) lo -= 1.0, hi += 1.0;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  auto sx = [&](double v) { return kLeft + (fx(v) - lo) / (hi - lo) * plot_w; };
  auto sy = [&](double v) { return kTop + (1.0 - v / ymax) * plot_h; };

  std::string o;
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + px(kWidth) + "\" height=\"" +
       px(kHeight) + "\" viewBox=\"0 0 " + px(kWidth) + " " + px(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + px(kLeft + plot_w / 2) + "\" y=\"28\" text-anchor=\"middle\" font-size=\"15\">" +
       escape(title) + "</text>\n";
  const std::string x0 = px(kLeft), x1 = px(kLeft + plot_w), y0 = px(kTop + plot_h), y1 = px(kTop);
  o += "<line x1=\"" + x0 + "\" y1=\"" + y0 + "\" x2=\"" + x1 + "\" y2=\"" + y0 + "\" stroke=\"black\"/>\n";
  o += "<line x1=\"" + x0 + "\" y1=\"" + y0 + "\" x2=\"" + x0 + "\" y2=\"" + y1 + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double yv = ymax * k / 5.0;
    const std::string y = px(sy(yv));
    o += "<line x1=\"" + px(kLeft - 5) + "\" y1=\"" + y + "\" x2=\"" + x0 + "\" y2=\"" + y +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + px(kLeft - 8) + "\" y=\"" + y + "\" text-anchor=\"end\" dy=\"4\">" +
         svg_detail::tick_label(yv) + "</text>\n";
  }
  std::vector<double> xticks;
  for (const auto& s : series) xticks.insert(xticks.end(), s.x.begin(), s.x.end());
  std::sort(xticks.begin(), xticks.end());
  xticks.erase(std::unique(xticks.begin(), xticks.end()), xticks.end());
  if (xticks.size() > 12) {
    std::vector<double> thinned;
    for (std::size_t i = 0; i < xticks.size(); i += (xticks.size() + 9) / 10) thinned.push_back(xticks[i]);
    xticks = thinned;
  }
  for (double xv : xticks) {
    const std::string x = px(sx(xv));
    o += "<line x1=\"" + x + "\" y1=\"" + y0 + "\" x2=\"" + x + "\" y2=\"" + px(kTop + plot_h + 5) +
         "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + x + "\" y=\"" + px(kTop + plot_h + 20) + "\" text-anchor=\"middle\">" +
         svg_detail::tick_label(xv) + "</text>\n";
  }
  o += "<text x=\"" + px(kLeft + plot_w / 2) + "\" y=\"" + px(kHeight - 20) +
       "\" text-anchor=\"middle\">" + escape(x_label + (log_x ? " (log scale)" : "")) + "</text>\n";
  o += "<text x=\"20\" y=\"" + px(kTop + plot_h / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " +
       px(kTop + plot_h / 2) + ")\">" + escape(y_label) + "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % std::size(kColors)];
    std::string points;
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (i) points += ' ';
      points += px(sx(series[s].x[i])) + "," + px(sy(series[s].y[i]));
    }
    o += "<polyline id=\"" + escape(series[s].id) + "\" fill=\"none\" stroke=\"" + color +
         "\" stroke-width=\"2\" points=\"" + points + "\"/>\n";
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      o += "<circle cx=\"" + px(sx(series[s].x[i])) + "\" cy=\"" + px(sy(series[s].y[i])) +
           "\" r=\"3\" fill=\"" + color + "\"/>\n";
    }
    const double ly = kTop + 10 + 22.0 * static_cast<double>(s);
    const double lx = kLeft + plot_w + 15;
    o += "<line x1=\"" + px(lx) + "\" y1=\"" + px(ly) + "\" x2=\"" + px(lx + 24) + "\" y2=\"" +
         px(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
    o += "<text x=\"" + px(lx + 30) + "\" y=\"" + px(ly + 4) + "\">" + escape(series[s].name) +
         "</text>\n";
  }
  o += "</svg>\n";
  return o;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------
// Runners.

namespace run_detail {

inline std::string sweep_value(const SweepPoint& p) {
  return p.value ? format_double(*p.value) : std::string();
}

inline double sweep_x(const SweepPoint& p) {
  return p.value ? *p.value : static_cast<double>(p.index);
}

inline std::string axis_label(const ExperimentConfig& c) {
  if (c.sweep.axis == "n") return "branching factor n";
  if (c.sweep.axis == "sigma") return "layer standard deviation sigma";
  return "sweep point";
}

inline void finish(RunRecord& record, const RunContext& ctx,
                   std::chrono::steady_clock::time_point start) {
  record.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  nlohmann::json report = {
      {"schema", "hflgen.report/1"},
      {"command", record.command},
      {"config_hash", record.config_hash},
      {"input_digest", record.input_digest},
      {"seed", record.seed},
      {"threads", ctx.par.threads},
      {"columns", record.columns},
      {"rows", record.rows.size()},
      {"wall_time_seconds", record.wall_time_seconds},
      {"summary", record.summary},
      {"config", ctx.config.document},
  };
  record.outputs.push_back("report.json");
  report["outputs"] = record.outputs;
  write_text(ctx.out_dir / "report.json", report.dump(2) + "\n");
}

inline RunRecord begin(const std::string& command, const RunContext& ctx,
                       std::vector<std::string> columns) {
  std::filesystem::create_directories(ctx.out_dir);
  RunRecord r;
  r.command = command;
  r.config_hash = ctx.config_hash;
  r.input_digest = ctx.input_digest;
  r.seed = ctx.config.seed;
  r.columns = std::move(columns);
  return r;
}

}  // namespace run_detail

// Closed forms for the leaf average under absolute loss, with a Monte Carlo
// cross-check of the exact generalization error at each sweep point.
inline RunRecord run_glm(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  if (!std::holds_alternative<GaussianLocation>(c.kernel)) {
    throw ConfigError("glm needs a gaussian_location kernel, got " + kernel_name(c.kernel));
  }
  if (!std::holds_alternative<LeafAverage>(c.algorithm) ||
      !std::holds_alternative<AbsoluteLoss>(c.loss)) {
    throw ConfigError("glm closed forms hold for the leaf_average algorithm with absolute loss");
  }
  const auto start = std::chrono::steady_clock::now();
  RunRecord record = run_detail::begin(
      "glm", ctx,
      {"config_hash", "point", "axis", "value", "depth", "branching", "sigmas", "true_gen",
       "taylor_gen", "wasserstein_bound", "bound_over_taylor", "bound_over_true", "mc_gen",
       "mc_std_error", "mc_trials", "mc_within_3se"});
  CsvWriter csv(ctx.out_dir / "results.csv", record.columns);

  struct Point {
    SweepPoint where;
    double true_gen, taylor, bound;
    GenEstimate mc;
  };
  SvgSeries truth{"true generalization error", "series-true-gen", {}, {}};
  SvgSeries bound{"Wasserstein bound", "series-wasserstein-bound", {}, {}};
  bool all_below = true;
  std::size_t mc_agree = 0;
  run_sweep<Point>(
      c.sweep_points(), ctx.par,
      [&](std::size_t i, Parallelism inner) {
        Point p{sweep_point(c, i), 0, 0, 0, {}};
        const GlmParams g = glm_params(p.where.topology, p.where.kernel, c.root);
        p.true_gen = glm_true_gen(g);
        p.taylor = glm_total_variance(g) > 0.0 ? glm_taylor_gen(g) : 0.0;
        p.bound = glm_wasserstein_bound(g).total;
        p.mc = gen_error_mc(p.where.topology, p.where.kernel, c.root, c.algorithm, c.loss,
                            c.trials.outer, c.trials.inner, c.seed, inner);
        return p;
      },
      [&](std::size_t i, const Point& p) {
        const double tol = std::max(3.0 * p.mc.std_error, 1e-12);
        const bool agree = std::abs(p.mc.mean - p.true_gen) <= tol;
        mc_agree += agree;
        all_below = all_below && p.true_gen < p.bound;
        const auto& g = std::get<GaussianLocation>(p.where.kernel);
        const CsvRow row{ctx.config_hash, std::to_string(i), c.sweep.axis,
                         run_detail::sweep_value(p.where), std::to_string(p.where.topology.depth()),
                         join_numbers(p.where.topology.branching(), "x"),
                         join_numbers(g.sigmas, ";"), format_double(p.true_gen),
                         format_double(p.taylor), format_double(p.bound),
                         format_double(p.taylor > 0.0 ? p.bound / p.taylor : 0.0),
                         format_double(p.true_gen > 0.0 ? p.bound / p.true_gen : 0.0),
                         format_double(p.mc.mean), format_double(p.mc.std_error),
                         std::to_string(p.mc.trials), agree ? "true" : "false"};
        csv.append({row});
        record.rows.push_back(row);
        truth.x.push_back(run_detail::sweep_x(p.where));
        truth.y.push_back(p.true_gen);
        bound.x.push_back(run_detail::sweep_x(p.where));
        bound.y.push_back(p.bound);
      });
  write_text(ctx.out_dir / "comparison.svg",
             render_svg("Generalization error vs Wasserstein bound (GLM)",
                        run_detail::axis_label(c), "generalization error", {truth, bound},
                        c.sweep.axis == "n"));
  record.outputs = {"results.csv", "comparison.svg"};
  record.summary = {{"points", truth.x.size()},
                    {"true_below_bound_everywhere", all_below},
                    {"mc_within_3se", mc_agree}};
  run_detail::finish(record, ctx, start);
  return record;
}

inline RunRecord run_bounds(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  const LossContract contract_of_loss = contract(c.loss);
  const Metric metric = c.metric.value_or(contract_of_loss.metric);
  const std::optional<double> lipschitz =
      c.lipschitz ? c.lipschitz : contract_of_loss.lipschitz;
  if (!lipschitz) throw ConfigError("bounds: the loss has no Lipschitz constant; set 'lipschitz'");
  const bool discrete = std::holds_alternative<DiscreteFinite>(c.kernel);
  const bool glm = std::holds_alternative<GaussianLocation>(c.kernel);
  std::vector<std::string> families = c.bounds;
  if (families.empty()) {
    families = {"wasserstein", "subtree"};
    if (discrete || glm) families.push_back("cmi");
  }
  for (const auto& f : families) {
    if (f == "cmi" && !discrete && !glm) {
      throw UnsupportedConfiguration("exact CMI needs a discrete_finite or gaussian_location kernel, got " +
                                     kernel_name(c.kernel));
    }
    if (f == "exact" && !discrete) {
      throw UnsupportedConfiguration("exact bounds need a discrete_finite kernel, got " +
                                     kernel_name(c.kernel));
    }
  }
  const bool closed_form = glm && std::holds_alternative<LeafAverage>(c.algorithm);

  const auto start = std::chrono::steady_clock::now();
  RunRecord record = run_detail::begin(
      "bounds", ctx,
      {"config_hash", "point", "axis", "value", "family", "metric", "lipschitz", "layer",
       "contribution", "std_error"});
  CsvWriter csv(ctx.out_dir / "results.csv", record.columns);

  struct Point {
    SweepPoint where;
    std::vector<BoundReport> reports;
  };
  std::vector<SvgSeries> series;
  run_sweep<Point>(
      c.sweep_points(), ctx.par,
      [&](std::size_t i, Parallelism inner) {
        Point p{sweep_point(c, i), {}};
        const Topology& t = p.where.topology;
        const BoundMcOptions options{c.trials.inner_replicates, metric, inner};
        std::optional<ExactDiscreteBounds> exact;
        auto exact_bounds = [&]() -> const ExactDiscreteBounds& {
          if (!exact) exact = exact_discrete_bounds(t, p.where.kernel, c.root, c.algorithm, *lipschitz);
          return *exact;
        };
        if (closed_form) {
          p.reports.push_back(glm_wasserstein_bound(glm_params(t, p.where.kernel, c.root)));
        }
        for (const auto& f : families) {
          if (f == "wasserstein") {
            p.reports.push_back(wasserstein_bound_mc(t, p.where.kernel, c.root, c.algorithm,
                                                     *lipschitz, c.trials.draws, c.seed, options));
          } else if (f == "subtree") {
            p.reports.push_back(subtree_bound_mc(t, p.where.kernel, c.root, c.algorithm,
                                                 *lipschitz, c.trials.draws, c.seed, options));
          } else if (f == "cmi" && discrete) {
            BoundReport r = exact_bounds().cmi;
            r.family = "exact_cmi";
            p.reports.push_back(std::move(r));
          } else if (f == "cmi") {
            double noise = 0.0;
            if (const auto* n = std::get_if<NoisyLeafAverage>(&c.algorithm)) noise = n->noise_sd;
            if (std::holds_alternative<HierarchicalDP>(c.algorithm)) {
              throw UnsupportedConfiguration("GLM CMI needs a leaf-average algorithm");
            }
            p.reports.push_back(glm_cmi_bound(glm_params(t, p.where.kernel, c.root),
                                              c.trials.draws, c.seed, noise, inner));
          } else if (f == "exact") {
            const ExactDiscreteBounds& e = exact_bounds();
            for (BoundReport r : {e.wasserstein, e.subtree, e.cmi, e.subtree_cmi}) {
              r.family = "exact_" + r.family;
              p.reports.push_back(std::move(r));
            }
          }
        }
        return p;
      },
      [&](std::size_t i, const Point& p) {
        std::vector<CsvRow> rows;
        const CsvRow prefix{ctx.config_hash, std::to_string(i), c.sweep.axis,
                            run_detail::sweep_value(p.where)};
        for (const BoundReport& r : p.reports) {
          const std::string lip = r.lipschitz_used ? format_double(*r.lipschitz_used) : "";
          auto row = [&](const std::string& layer, double v, double se) {
            CsvRow out = prefix;
            out.insert(out.end(), {r.family, r.metric, lip, layer, format_double(v), format_double(se)});
            return out;
          };
          for (const auto& lc : r.per_layer) {
            rows.push_back(row(std::to_string(lc.layer), lc.contribution, lc.std_error));
          }
          rows.push_back(row("total", r.total, r.total_std_error));
          auto it = std::find_if(series.begin(), series.end(),
                                 [&](const SvgSeries& s) { return s.id == "series-" + r.family; });
          if (it == series.end()) {
            series.push_back({r.family + " bound", "series-" + r.family, {}, {}});
            it = series.end() - 1;
          }
          it->x.push_back(run_detail::sweep_x(p.where));
          it->y.push_back(r.total);
        }
        csv.append(rows);
        record.rows.insert(record.rows.end(), rows.begin(), rows.end());
      });
  write_text(ctx.out_dir / "comparison.svg",
             render_svg("Bound totals", run_detail::axis_label(c), "bound value", series,
                        c.sweep.axis == "n"));
  record.outputs = {"results.csv", "comparison.svg"};
  nlohmann::json totals = nlohmann::json::object();
  for (const auto& s : series) totals[s.id.substr(7)] = s.y;
  record.summary = {{"points", c.sweep_points()}, {"totals", totals}, {"metric", metric_name(metric)}};
  run_detail::finish(record, ctx, start);
  return record;
}

// Measured generalization error of the DP aggregation against the DP bound,
// one row per epsilon schedule.
inline RunRecord run_dp(const RunContext& ctx) {
  const ExperimentConfig& c = ctx.config;
  if (!c.dp) throw ConfigError("dp: the config has no 'dp' section");
  if (c.sweep.axis != "none") throw ConfigError("dp: sweep over the epsilon grid only; set sweep.axis to none");
  if (!bounded_in_unit_interval(c.loss)) {
    throw ContractError("dp needs a loss bounded in [0, 1], got " + loss_name(c.loss));
  }
  const DpSpec& dp = *c.dp;
  const SweepPoint where = sweep_point(c, 0);
  std::vector<AggregationPlan> plans;
  for (const auto& schedule : dp.epsilon_grid) {
    if (schedule.size() != where.topology.depth()) {
      throw ConfigError("dp.epsilon_grid: each schedule needs one epsilon per layer");
    }
    AggregationPlan plan;
    for (double eps : schedule) {
      plan.mechanisms.push_back(
          config_detail::make_mechanism(dp.mechanism, eps, dp.lo, dp.hi, dp.alphabet_size, "dp"));
    }
    validate_plan(plan, where.topology);
    plans.push_back(std::move(plan));
  }

  const auto start = std::chrono::steady_clock::now();
  RunRecord record = run_detail::begin(
      "dp", ctx,
      {"config_hash", "point", "mechanism", "epsilons", "bound", "gen", "gen_std_error",
       "gen_trials", "dominates"});
  CsvWriter csv(ctx.out_dir / "results.csv", record.columns);
  SvgSeries bound{"DP bound", "series-dp-bound", {}, {}};
  SvgSeries measured{"measured |generalization error|", "series-gen", {}, {}};
  bool all_dominate = true;
  run_sweep<DpComparison>(
      plans.size(), ctx.par,
      [&](std::size_t i, Parallelism inner) {
        return dp_empirical_vs_bound(where.topology, where.kernel, c.root, plans[i], c.loss,
                                     c.trials.outer, c.trials.inner, c.seed, inner);
      },
      [&](std::size_t i, const DpComparison& r) {
        all_dominate = all_dominate && r.dominates;
        const CsvRow row{ctx.config_hash, std::to_string(i), dp.mechanism,
                         join_numbers(dp.epsilon_grid[i], ";"), format_double(r.bound.total),
                         format_double(r.gen.mean), format_double(r.gen.std_error),
                         std::to_string(r.gen.trials), r.dominates ? "true" : "false"};
        csv.append({row});
        record.rows.push_back(row);
        bound.x.push_back(static_cast<double>(i));
        bound.y.push_back(r.bound.total);
        measured.x.push_back(static_cast<double>(i));
        measured.y.push_back(std::abs(r.gen.mean));
      });
  write_text(ctx.out_dir / "comparison.svg",
             render_svg("DP bound vs measured generalization error", "epsilon schedule index",
                        "generalization error", {measured, bound}, false));
  record.outputs = {"results.csv", "comparison.svg"};
  record.summary = {{"points", plans.size()}, {"all_dominate", all_dominate}};
  run_detail::finish(record, ctx, start);
  return record;
}

}  // namespace hflgen
