#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftbench/conformal.hpp"
#include "driftbench/datagen.hpp"
#include "driftbench/forest.hpp"
#include "driftbench/metrics.hpp"

namespace driftbench::replay {

struct Window {
  enum class Kind { Fixed, Expanding };
  Kind kind = Kind::Fixed;
  int size = 100;  // Fixed only

  static Window fixed(int size) { return {Kind::Fixed, size}; }
  static Window expanding() { return {Kind::Expanding, 0}; }
  std::string label() const;
  bool operator==(const Window&) const = default;
};

enum class HpPolicy { Frozen, Retune };
std::string to_string(HpPolicy p);

struct ModelKind {
  enum class Kind { Point, Conformal };
  Kind kind = Kind::Point;
  double alpha = 0.1;  // Conformal only

  static ModelKind point() { return {Kind::Point, 0.1}; }
  static ModelKind conformal(double alpha) { return {Kind::Conformal, alpha}; }
  bool is_conformal() const noexcept { return kind == Kind::Conformal; }
  std::string label() const;
  bool operator==(const ModelKind&) const = default;
};

// nullopt cadence means the model is never retrained.
using Cadence = std::optional<int>;
std::string cadence_label(const Cadence& c);

struct ReplayPolicy {
  Cadence cadence = 5;
  Window window = Window::fixed(100);
  HpPolicy hp_policy = HpPolicy::Frozen;
  ModelKind model = ModelKind::point();
  int warmup = 100;
  std::uint64_t seed = 0;
  forest::SearchSpace search;
  int cv_folds = 5;
  int conformal_folds = 5;
  // When set, replaces the initial tuning on the warmup window.
  std::optional<forest::Hyperparams> hyperparams;

  void validate() const;
};

struct BatchRecord {
  std::size_t index = 0;
  double actual = 0.0;
  double point = 0.0;
  std::optional<double> lower;
  std::optional<double> upper;
  metrics::Tier tier = metrics::Tier::Good;
  std::optional<metrics::Tier> width_tier;
  std::optional<conformal::Decision> decision;
};

struct RetrainEvent {
  std::size_t at_index = 0;  // first batch predicted by the new model
  std::size_t window_begin = 0;
  std::size_t window_end = 0;  // exclusive
  forest::Hyperparams hp;
  std::optional<double> cv_score;  // set when hyperparameters were searched
  double train_seconds = 0.0;
};

struct Aggregates {
  metrics::TierReport tiers;
  std::optional<metrics::TierReport> width_tiers;
  std::optional<double> coverage;
  std::optional<double> mean_width_ratio;
  std::size_t n_ooc = 0;
  std::optional<double> sensitivity_point;     // undefined without OOC actuals
  std::optional<double> sensitivity_interval;  // conformal only
  double rmse_ratio = 0.0;
};

struct ReplayReport {
  std::vector<BatchRecord> records;  // one per post-warmup batch
  RetrainEvent initial;              // training on [0, warmup)
  std::vector<RetrainEvent> retrain_events;
  Aggregates aggregates;
  ControlLimits limits;

  double train_seconds() const;
  std::vector<conformal::PredictionInterval> intervals() const;
  std::vector<double> actuals() const;
  std::vector<double> points() const;
};

// Recomputes every aggregate from per-batch records.
Aggregates aggregate(std::span<const BatchRecord> records, const ControlLimits& limits);

// Chronological replay: each batch is predicted before its target is
// revealed; after every `cadence` revealed batches the model is retrained on
// the policy window ending at the newest revealed batch.
ReplayReport run_replay(const Dataset& dataset, const ReplayPolicy& policy);

struct NamedScenario {
  std::string name;
  DriftScenario scenario;
};

struct GridSpec {
  std::vector<NamedScenario> scenarios;
  std::vector<Cadence> cadences;
  std::vector<Window> windows;
  std::vector<HpPolicy> hp_policies;
  std::vector<ModelKind> model_kinds;
  int replications = 1;
  int warmup = 100;
  std::uint64_t seed = 0;
  forest::SearchSpace search;
  int cv_folds = 5;
  int conformal_folds = 5;
  std::optional<forest::Hyperparams> hyperparams;

  void validate() const;
};

struct CellKey {
  std::size_t scenario = 0;
  Cadence cadence;
  Window window;
  HpPolicy hp_policy = HpPolicy::Frozen;
  ModelKind model;

  std::string id(const GridSpec& grid) const;
};

struct CellRun {
  CellKey key;
  int replication = 0;
  std::optional<ReplayReport> report;
  std::string error;  // non-empty on failure
};

struct CellSummary {
  CellKey key;
  bool baseline_only = false;  // Never cadence added because the grid omitted it
  int replications_ok = 0;
  int replications_failed = 0;
  metrics::TierReport tiers;  // pooled over replications
  std::array<std::optional<double>, metrics::kTierCount> pct_of_baseline;
  std::optional<double> coverage;
  std::optional<double> mean_width_ratio;
  std::optional<double> sensitivity_point;
  std::optional<double> sensitivity_interval;
  std::optional<double> rmse_ratio;
  double train_seconds = 0.0;  // mean per replication
};

struct GridResult {
  std::vector<CellRun> runs;
  std::vector<CellSummary> summary;
  std::size_t failed_runs = 0;
};

// Policy used for one grid cell and replication.
ReplayPolicy cell_policy(const GridSpec& grid, const CellKey& key, int replication);
DriftScenario replication_scenario(const DriftScenario& base, int replication);

// Cells run concurrently on `jobs` OpenMP threads (0 = runtime default).
GridResult run_grid(const GridSpec& grid, int jobs = 0);
GridResult run_grid_serial(const GridSpec& grid);

struct LearningPoint {
  std::size_t size = 0;
  double cv_rmse = 0.0;
};

struct LearningCurve {
  std::vector<LearningPoint> points;  // ascending size
  // First size after which the next gain drops below a quarter of the first gain.
  std::optional<std::size_t> plateau_size;
};

// Pooled out-of-fold RMSE of k-fold CV.
double kfold_rmse(const TrainingSet& data, const forest::Hyperparams& hp, int k, std::uint64_t seed);

LearningCurve learning_curve(const Dataset& dataset, std::span<const std::size_t> sizes,
                             const forest::Hyperparams& hp, int k, std::uint64_t seed);

struct SweepPoint {
  std::size_t train_size = 0;
  double alpha = 0.0;
  double coverage = 0.0;
  double mean_width_ratio = 0.0;
};

// Coverage/width across alpha and training size. Every size trains on the
// batches immediately before a shared test block [max_size, max_size + test_size).
std::vector<SweepPoint> coverage_sweep(const Dataset& dataset, std::span<const double> alphas,
                                       std::span<const std::size_t> sizes,
                                       const forest::Hyperparams& hp, int k_folds,
                                       std::uint64_t seed, std::size_t test_size);

}  // namespace driftbench::replay
