#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftbench/datagen.hpp"
#include "driftbench/pca.hpp"
#include "driftbench/replay.hpp"

namespace driftbench::report {

namespace fs = std::filesystem;
using nlohmann::json;

/// Invalid configuration; `field` is a dotted path into the config document.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

struct PcaOptions {
  std::size_t n_blocks = 8;
  std::size_t n_components = 2;
  bool standardize = true;
};

struct ExperimentConfig {
  std::optional<DriftScenario> scenario;
  std::optional<std::string> dataset_path;  // alternative to an inline scenario
  std::optional<replay::ReplayPolicy> policy;
  std::optional<replay::GridSpec> grid;
  std::string output_dir = "out";
  std::vector<double> alpha_sweep;
  std::vector<std::size_t> train_size_sweep;
  std::size_t sweep_test_size = 200;
  std::vector<std::size_t> learning_curve_sizes;
  forest::Hyperparams analysis_hp;  // for sweeps and learning curves
  PcaOptions pca;
  json source;  // the document as read, echoed into manifests
};

// Numbers print in shortest round-trip form.
std::string format_double(double v);

json to_json(const DriftScenario& s);
DriftScenario scenario_from_json(const json& j, const std::string& path = "scenario");
json to_json(const forest::Hyperparams& hp);
json to_json(const replay::ReplayPolicy& p);

ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config(const fs::path& file);
// DRIFTBENCH_SEED replaces every seed in the config when set.
void apply_seed_override(ExperimentConfig& config, std::uint64_t seed);

// dataset.csv (index,f0..f{k-1},target) plus dataset.json sidecar.
void write_dataset(const fs::path& dir, const Dataset& ds);
Dataset read_dataset(const fs::path& csv_path);

void write_predictions_csv(const fs::path& file, const replay::ReplayReport& r);
std::vector<replay::BatchRecord> read_predictions_csv(const fs::path& file);
void write_retrain_events_csv(const fs::path& file, const replay::ReplayReport& r);
json metrics_json(const replay::ReplayReport& r);
std::string metrics_text(const replay::ReplayReport& r);
void write_conditional_csv(const fs::path& file, const metrics::ConditionalReport& c);

// Writes predictions.csv, retrain_events.csv, metrics.json, metrics.txt and,
// for conformal runs, conditional.csv into dir.
void write_replay_outputs(const fs::path& dir, const replay::ReplayReport& r);

void write_grid_summary_csv(const fs::path& file, const replay::GridSpec& grid, const replay::GridResult& result);
void write_coverage_sweep_csv(const fs::path& file, const std::vector<replay::SweepPoint>& sweep);
void write_learning_curve_csv(const fs::path& file, const replay::LearningCurve& lc);

void write_pca_outputs(const fs::path& dir, const Dataset& ds, const pca::PcaModel& model,
                       const std::vector<pca::BlockSummary>& blocks);

std::string sha256_file(const fs::path& file);
std::string sha256_hex(const std::string& bytes);

// Hashes `files` (relative to dir; default: every regular file below dir
// except manifest.json) and writes manifest.json last.
void write_manifest(const fs::path& dir, json manifest, const std::vector<fs::path>& files = {});
// Paths whose hash no longer matches the manifest (empty when intact).
std::vector<std::string> verify_manifest(const fs::path& dir);

std::string utc_timestamp();
// <UTC timestamp>-<8 hex of config hash>, suffixed when the directory exists.
fs::path make_run_dir(const fs::path& root, const json& config);

void write_text(const fs::path& file, const std::string& content);
std::string read_text(const fs::path& file);
std::vector<std::vector<std::string>> read_csv(const fs::path& file);

}  // namespace driftbench::report
