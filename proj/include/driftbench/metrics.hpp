#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "driftbench/conformal.hpp"
#include "driftbench/datagen.hpp"

namespace driftbench::metrics {

// Ordered Good < Mediocre < Poor. Every boundary is inclusive on the better tier.
enum class Tier { Good = 0, Mediocre = 1, Poor = 2 };

inline constexpr std::size_t kTierCount = 3;
std::string to_string(Tier t);
Tier tier_from_string(const std::string& s);

struct TierReport {
  std::array<std::size_t, kTierCount> counts{};
  std::size_t n = 0;

  double fraction(Tier t) const noexcept {
    return n == 0 ? 0.0 : static_cast<double>(counts[static_cast<std::size_t>(t)]) / static_cast<double>(n);
  }
  static TierReport from(std::span<const Tier> tiers);
};

double normalized_residual(double actual, double predicted, const ControlLimits& cl);

// Good: r <= clr/4, Mediocre: r <= clr/2, Poor beyond.
Tier classify_point(double abs_residual, double clr);
// Good: w <= clr/2, Mediocre: w <= clr, Poor beyond.
Tier classify_width(double width, double clr);

double coverage(std::span<const conformal::PredictionInterval> intervals, std::span<const double> actuals);
double mean_width_ratio(std::span<const conformal::PredictionInterval> intervals, const ControlLimits& cl);

struct ConditionalBin {
  double target_min = 0.0;
  double target_max = 0.0;
  double coverage = 0.0;
  double rmse = 0.0;
  std::size_t n = 0;
};

struct ConditionalReport {
  std::vector<ConditionalBin> bins;  // ascending target
};

// Records sorted by actual and cut into n_bins contiguous groups; the
// remainder n % n_bins goes one-per-bin to the lowest bins.
ConditionalReport conditional_report(std::span<const conformal::PredictionInterval> intervals,
                                     std::span<const double> points, std::span<const double> actuals,
                                     std::size_t n_bins = 20);

enum class OocMode { Point, Interval };

// True-positive rate of out-of-control prediction. Point mode flags
// point outside the limits; Interval mode flags any decision other than
// InControl. Throws std::domain_error when no actual is out of control.
double ooc_sensitivity(std::span<const conformal::PredictionInterval> predictions,
                       std::span<const double> actuals, const ControlLimits& cl, OocMode mode);
double ooc_sensitivity(std::span<const double> points, std::span<const double> actuals,
                       const ControlLimits& cl);

// 100 * fraction_strategy / fraction_baseline per tier; nullopt where the
// baseline tier is empty.
std::array<std::optional<double>, kTierCount> relative_to_baseline(const TierReport& report,
                                                                   const TierReport& baseline);

double rmse(std::span<const double> predicted, std::span<const double> actuals);
double rmse_ratio(std::span<const double> predicted, std::span<const double> actuals, const ControlLimits& cl);

}  // namespace driftbench::metrics
