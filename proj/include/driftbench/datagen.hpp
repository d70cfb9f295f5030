#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "driftbench/common.hpp"

namespace driftbench {

enum class DriftKind { None, SuddenShift, GradualDrift, Combined };

std::string to_string(DriftKind kind);
DriftKind drift_kind_from_string(const std::string& s);

/// Configuration of one synthetic production history.
///
/// Features are standardized raw-material QC parameters (driven by a few
/// shared latent factors) plus environmental factors. The target is linear in
/// the features plus one pairwise interaction, a seasonal sinusoid and
/// Gaussian noise. Drift acts on the feature means (data drift) and on the
/// coefficient vector (concept drift).
struct DriftScenario {
  DriftKind kind = DriftKind::SuddenShift;
  int n_batches = 1200;
  int n_features = 12;
  double change_point_fraction = 0.7;  // SuddenShift / Combined only
  double shift_magnitude = 2.0;        // feature-mean offset, in feature sigma
  double concept_rotation = 0.5;       // blend fraction toward the alternate coefficients
  double walk_step = 0.0;              // per-batch random-walk sigma (GradualDrift / Combined)
  double seasonal_amplitude = 0.4;
  int seasonal_period = 240;
  double noise_sigma = 0.5;
  std::uint64_t seed = 0;

  static DriftScenario stationary(int n_batches, std::uint64_t seed);
  static DriftScenario sudden(int n_batches, double change_point_fraction, std::uint64_t seed);
  static DriftScenario gradual(int n_batches, double walk_step, std::uint64_t seed);

  bool has_change_point() const noexcept {
    return kind == DriftKind::SuddenShift || kind == DriftKind::Combined;
  }
  // Index of the first post-shift batch; n_batches when there is no change point.
  int change_point() const noexcept;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct Batch {
  std::size_t index = 0;
  std::vector<double> features;
  double target = 0.0;
};

class ControlLimits {
 public:
  ControlLimits() = default;
  ControlLimits(double lcl, double ucl);

  double lcl() const noexcept { return lcl_; }
  double ucl() const noexcept { return ucl_; }
  double clr() const noexcept { return ucl_ - lcl_; }
  bool contains(double v) const noexcept { return v >= lcl_ && v <= ucl_; }

  // mean +- 3 sample standard deviations.
  static ControlLimits from_targets(std::span<const double> targets);

 private:
  double lcl_ = 0.0;
  double ucl_ = 1.0;
};

struct Dataset {
  std::vector<Batch> batches;
  ControlLimits limits;
  DriftScenario scenario;

  std::size_t size() const noexcept { return batches.size(); }
  std::size_t n_features() const noexcept {
    return batches.empty() ? 0 : batches.front().features.size();
  }
  // Rows [begin, end) as a training set.
  TrainingSet slice(std::size_t begin, std::size_t end) const;
  std::vector<double> targets() const;
};

/// Fixed (seed-independent) structure of the simulated process. Replications
/// of one scenario share it; only the sampled realization changes.
struct ProcessStructure {
  std::vector<double> coef_baseline;   // unit norm, sums to kBaselineShiftResponse
  std::vector<double> coef_alternate;  // unit norm, sums to kAlternateShiftResponse
  std::vector<std::vector<double>> loadings;  // n_features x kLatentFactors, unit rows
  double interaction = 0.25;                  // on features 0 and 1
  double level = 10.0;

  static constexpr int kLatentFactors = 3;
  static constexpr double kLatentShare = 0.6;
  static constexpr double kBaselineShiftResponse = -0.5;
  static constexpr double kAlternateShiftResponse = 1.5;

  static ProcessStructure for_features(int n_features);
};

Dataset generate(const DriftScenario& scenario);

// Pre-change-point range for scenarios with a change point, the first 20% otherwise.
std::pair<std::size_t, std::size_t> baseline_segment(const Dataset& dataset);

}  // namespace driftbench
