#include "driftbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace driftbench::metrics {

std::string to_string(Tier t) {
  switch (t) {
    case Tier::Good: return "good";
    case Tier::Mediocre: return "mediocre";
    case Tier::Poor: return "poor";
  }
  return "poor";
}

Tier tier_from_string(const std::string& s) {
  if (s == "good") return Tier::Good;
  if (s == "mediocre") return Tier::Mediocre;
  if (s == "poor") return Tier::Poor;
  throw std::invalid_argument("unknown tier '" + s + "'");
}

TierReport TierReport::from(std::span<const Tier> tiers) {
  TierReport r;
  for (Tier t : tiers) ++r.counts[static_cast<std::size_t>(t)];
  r.n = tiers.size();
  return r;
}

namespace {

void require_clr(double clr) {
  if (!(clr > 0.0)) throw std::invalid_argument("control limit range must be > 0");
}

void require_same_nonempty(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
  if (a == 0) throw std::invalid_argument(std::string(what) + ": empty input");
}

}  // namespace

double normalized_residual(double actual, double predicted, const ControlLimits& cl) {
  require_clr(cl.clr());
  return std::abs(actual - predicted) / cl.clr();
}

Tier classify_point(double abs_residual, double clr) {
  require_clr(clr);
  if (abs_residual < 0.0) throw std::invalid_argument("negative residual");
  if (abs_residual <= clr / 4.0) return Tier::Good;
  if (abs_residual <= clr / 2.0) return Tier::Mediocre;
  return Tier::Poor;
}

Tier classify_width(double width, double clr) {
  require_clr(clr);
  if (width < 0.0) throw std::invalid_argument("negative interval width");
  if (width <= clr / 2.0) return Tier::Good;
  if (width <= clr) return Tier::Mediocre;
  return Tier::Poor;
}

double coverage(std::span<const conformal::PredictionInterval> intervals, std::span<const double> actuals) {
  require_same_nonempty(intervals.size(), actuals.size(), "coverage");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) hit += intervals[i].contains(actuals[i]) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(intervals.size());
}

double mean_width_ratio(std::span<const conformal::PredictionInterval> intervals, const ControlLimits& cl) {
  if (intervals.empty()) throw std::invalid_argument("mean_width_ratio: empty input");
  require_clr(cl.clr());
  double s = 0.0;
  for (const auto& pi : intervals) s += pi.width() / cl.clr();
  return s / static_cast<double>(intervals.size());
}

ConditionalReport conditional_report(std::span<const conformal::PredictionInterval> intervals,
                                     std::span<const double> points, std::span<const double> actuals,
                                     std::size_t n_bins) {
  require_same_nonempty(intervals.size(), actuals.size(), "conditional_report");
  if (points.size() != actuals.size()) throw std::invalid_argument("conditional_report: length mismatch");
  if (n_bins == 0) throw std::invalid_argument("conditional_report: n_bins must be positive");
  const std::size_t n = actuals.size();
  if (n < n_bins) throw std::invalid_argument("conditional_report: fewer records than bins");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return actuals[a] < actuals[b]; });

  ConditionalReport report;
  const std::size_t base = n / n_bins;
  const std::size_t extra = n % n_bins;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    ConditionalBin bin;
    bin.n = size;
    bin.target_min = actuals[order[pos]];
    bin.target_max = actuals[order[pos + size - 1]];
    std::size_t hit = 0;
    double ss = 0.0;
    for (std::size_t i = pos; i < pos + size; ++i) {
      const std::size_t r = order[i];
      hit += intervals[r].contains(actuals[r]) ? 1 : 0;
      ss += (points[r] - actuals[r]) * (points[r] - actuals[r]);
    }
    bin.coverage = static_cast<double>(hit) / static_cast<double>(size);
    bin.rmse = std::sqrt(ss / static_cast<double>(size));
    report.bins.push_back(bin);
    pos += size;
  }
  return report;
}

double ooc_sensitivity(std::span<const conformal::PredictionInterval> predictions,
                       std::span<const double> actuals, const ControlLimits& cl, OocMode mode) {
  require_same_nonempty(predictions.size(), actuals.size(), "ooc_sensitivity");
  std::size_t actual_ooc = 0;
  std::size_t caught = 0;
  for (std::size_t i = 0; i < actuals.size(); ++i) {
    if (cl.contains(actuals[i])) continue;
    ++actual_ooc;
    const bool flagged = mode == OocMode::Point
                             ? !cl.contains(predictions[i].point)
                             : conformal::decide(predictions[i], cl) != conformal::Decision::InControl;
    caught += flagged ? 1 : 0;
  }
  if (actual_ooc == 0) throw std::domain_error("ooc_sensitivity undefined: no out-of-control actuals");
  return static_cast<double>(caught) / static_cast<double>(actual_ooc);
}

double ooc_sensitivity(std::span<const double> points, std::span<const double> actuals,
                       const ControlLimits& cl) {
  std::vector<conformal::PredictionInterval> as_intervals;
  as_intervals.reserve(points.size());
  for (double p : points) as_intervals.push_back({p, p, p});
  return ooc_sensitivity(as_intervals, actuals, cl, OocMode::Point);
}

std::array<std::optional<double>, kTierCount> relative_to_baseline(const TierReport& report,
                                                                   const TierReport& baseline) {
  std::array<std::optional<double>, kTierCount> out;
  for (std::size_t t = 0; t < kTierCount; ++t) {
    if (baseline.counts[t] == 0 || report.n == 0) continue;
    // Cross-multiplied counts keep identical reports at exactly 100.
    const double num = static_cast<double>(report.counts[t]) * static_cast<double>(baseline.n);
    const double den = static_cast<double>(baseline.counts[t]) * static_cast<double>(report.n);
    out[t] = 100.0 * (num / den);
  }
  return out;
}

double rmse(std::span<const double> predicted, std::span<const double> actuals) {
  require_same_nonempty(predicted.size(), actuals.size(), "rmse");
  double ss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    ss += (predicted[i] - actuals[i]) * (predicted[i] - actuals[i]);
  }
  return std::sqrt(ss / static_cast<double>(predicted.size()));
}

double rmse_ratio(std::span<const double> predicted, std::span<const double> actuals, const ControlLimits& cl) {
  require_clr(cl.clr());
  return rmse(predicted, actuals) / cl.clr();
}

}  // namespace driftbench::metrics
