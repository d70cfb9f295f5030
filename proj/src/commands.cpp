#include "driftbench/commands.hpp"

#include <array>
#include <cstdlib>
#include <ostream>
#include <stdexcept>

#include "driftbench/report.hpp"

namespace driftbench::cli {

namespace fs = std::filesystem;
using report::ConfigError;
using report::json;

namespace {

json error_doc(const std::string& kind, const std::string& message, const std::string& field = "") {
  json e{{"kind", kind}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  return json{{"error", e}};
}

// Loads the config and applies --out / DRIFTBENCH_SEED.
report::ExperimentConfig prepare(const CommandOptions& opts) {
  auto cfg = report::load_config(opts.config);
  if (opts.out) cfg.output_dir = opts.out->string();
  if (opts.seed_override) report::apply_seed_override(cfg, *opts.seed_override);
  if (cfg.dataset_path && fs::path(*cfg.dataset_path).is_relative()) {
    cfg.dataset_path = (opts.config.parent_path() / *cfg.dataset_path).string();
  }
  return cfg;
}

Dataset load_dataset(const report::ExperimentConfig& cfg) {
  if (cfg.scenario) return generate(*cfg.scenario);
  if (cfg.dataset_path) return report::read_dataset(*cfg.dataset_path);
  throw ConfigError("scenario", "either scenario or dataset is required");
}

json base_manifest(const std::string& command, const report::ExperimentConfig& cfg) {
  return json{{"command", command},
              {"version", kVersion},
              {"config", cfg.source},
              {"started_utc", report::utc_timestamp()}};
}

void finish_manifest(const fs::path& dir, json manifest, const std::vector<fs::path>& files = {}) {
  manifest["finished_utc"] = report::utc_timestamp();
  report::write_manifest(dir, std::move(manifest), files);
}

// Coverage sweep and learning curve, when configured.
void write_analyses(const fs::path& dir, const Dataset& ds, const report::ExperimentConfig& cfg, std::uint64_t seed,
                    int k_folds) {
  if (!cfg.alpha_sweep.empty()) {
    const auto sweep = replay::coverage_sweep(ds, cfg.alpha_sweep, cfg.train_size_sweep, cfg.analysis_hp, k_folds,
                                              mix_seed(seed, 0x5EE9), cfg.sweep_test_size);
    report::write_coverage_sweep_csv(dir / "coverage_sweep.csv", sweep);
  }
  if (!cfg.learning_curve_sizes.empty()) {
    const auto lc = replay::learning_curve(ds, cfg.learning_curve_sizes, cfg.analysis_hp, 5, mix_seed(seed, 0x1C));
    report::write_learning_curve_csv(dir / "learning_curve.csv", lc);
  }
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& ex) {
    err << error_doc("config", ex.what(), ex.field()).dump() << "\n";
    return kConfigError;
  } catch (const pca::DegenerateColumn& ex) {
    json doc = error_doc("degenerate_column", ex.what());
    doc["error"]["column"] = ex.column();
    err << doc.dump() << "\n";
    return kRuntimeError;
  } catch (const std::exception& ex) {
    err << error_doc("runtime", ex.what()).dump() << "\n";
    return kRuntimeError;
  }
}

}  // namespace

std::optional<std::uint64_t> seed_from_env() {
  const char* raw = std::getenv("DRIFTBENCH_SEED");
  if (raw == nullptr || *raw == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const std::string s(raw);
    if (s.front() == '-') throw std::invalid_argument("negative");
    const auto v = std::stoull(s, &used, 10);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("DRIFTBENCH_SEED", std::string("not an unsigned integer: '") + raw + "'");
  }
}

int cmd_generate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = prepare(opts);
    if (!cfg.scenario) throw ConfigError("scenario", "generate needs an inline scenario");
    auto manifest = base_manifest("generate", cfg);
    const auto ds = generate(*cfg.scenario);
    const fs::path dir = cfg.output_dir;
    report::write_dataset(dir, ds);
    manifest["seed"] = cfg.scenario->seed;
    // The output directory may hold other runs; only the dataset files are ours.
    finish_manifest(dir, std::move(manifest), {"dataset.csv", "dataset.json"});
    out << json{{"status", "ok"}, {"output_dir", dir.string()}, {"n_batches", ds.size()}}.dump() << "\n";
    return kOk;
  });
}

int cmd_run(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = prepare(opts);
    if (!cfg.policy) throw ConfigError("policy", "run needs a policy");
    auto manifest = base_manifest("run", cfg);
    const auto ds = load_dataset(cfg);
    const auto rep = replay::run_replay(ds, *cfg.policy);
    const fs::path dir = report::make_run_dir(fs::path(cfg.output_dir) / "runs", cfg.source);
    report::write_replay_outputs(dir, rep);
    write_analyses(dir, ds, cfg, cfg.policy->seed, cfg.policy->conformal_folds);
    manifest["seed"] = cfg.policy->seed;
    manifest["scenario"] = report::to_json(ds.scenario);
    manifest["policy"] = report::to_json(*cfg.policy);
    manifest["train_seconds"] = rep.train_seconds();
    finish_manifest(dir, std::move(manifest));
    out << json{{"status", "ok"}, {"run_dir", dir.string()}}.dump() << "\n";
    return kOk;
  });
}

int cmd_grid(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = prepare(opts);
    if (!cfg.grid) throw ConfigError("grid", "grid command needs a grid");
    const auto& grid = *cfg.grid;
    auto manifest = base_manifest("grid", cfg);
    const auto result = replay::run_grid(grid, opts.jobs);
    const fs::path dir = report::make_run_dir(fs::path(cfg.output_dir) / "runs", cfg.source);

    // Workers have joined; per-cell outputs are written here, one directory each.
    json failures = json::array();
    for (const auto& run : result.runs) {
      const fs::path cell = dir / "cells" / run.key.id(grid) / ("rep" + std::to_string(run.replication));
      if (run.report) {
        report::write_replay_outputs(cell, *run.report);
      } else {
        report::write_text(cell / "error.json", error_doc("runtime", run.error).dump(2) + "\n");
        failures.push_back(json{{"cell", run.key.id(grid)}, {"replication", run.replication}, {"message", run.error}});
      }
    }
    report::write_grid_summary_csv(dir / "grid_summary.csv", grid, result);

    if (!cfg.alpha_sweep.empty() || !cfg.learning_curve_sizes.empty()) {
      const auto ds = cfg.scenario ? generate(*cfg.scenario) : generate(grid.scenarios.front().scenario);
      write_analyses(dir, ds, cfg, grid.seed, grid.conformal_folds);
    }

    manifest["seed"] = grid.seed;
    manifest["jobs"] = opts.jobs;
    manifest["failures"] = failures;
    finish_manifest(dir, std::move(manifest));

    const std::size_t total = result.runs.size();
    json status{{"status", result.failed_runs == 0 ? "ok" : "partial"},
                {"run_dir", dir.string()},
                {"runs", total},
                {"failed_runs", result.failed_runs}};
    if (result.failed_runs == 0) {
      out << status.dump() << "\n";
      return kOk;
    }
    if (result.failed_runs == total) {
      err << error_doc("runtime", "every grid run failed; see cells/*/error.json").dump() << "\n";
      return kRuntimeError;
    }
    err << json{{"error", {{"kind", "partial_failure"}, {"failed_runs", result.failed_runs}, {"failures", failures}}}}.dump()
        << "\n";
    out << status.dump() << "\n";
    return kPartialFailure;
  });
}

int cmd_pca(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = prepare(opts);
    auto manifest = base_manifest("pca", cfg);
    const auto ds = load_dataset(cfg);
    std::vector<std::vector<double>> rows;
    rows.reserve(ds.size());
    for (const auto& b : ds.batches) rows.push_back(b.features);
    const auto model = pca::fit_pca(rows, cfg.pca.n_components, cfg.pca.standardize);
    std::vector<std::array<double, 2>> scores;
    scores.reserve(rows.size());
    for (const auto& r : rows) {
      const auto s = pca::project(model, r);
      scores.push_back({s[0], s[1]});
    }
    const auto blocks = pca::block_summaries(scores, cfg.pca.n_blocks);
    const fs::path dir = report::make_run_dir(fs::path(cfg.output_dir) / "runs", cfg.source);
    report::write_pca_outputs(dir, ds, model, blocks);
    manifest["seed"] = ds.scenario.seed;
    finish_manifest(dir, std::move(manifest));
    out << json{{"status", "ok"}, {"run_dir", dir.string()}}.dump() << "\n";
    return kOk;
  });
}

}  // namespace driftbench::cli
