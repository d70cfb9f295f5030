#include "driftbench/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace driftbench {

std::string to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::None: return "none";
    case DriftKind::SuddenShift: return "sudden_shift";
    case DriftKind::GradualDrift: return "gradual_drift";
    case DriftKind::Combined: return "combined";
  }
  return "none";
}

DriftKind drift_kind_from_string(const std::string& s) {
  if (s == "none") return DriftKind::None;
  if (s == "sudden_shift") return DriftKind::SuddenShift;
  if (s == "gradual_drift") return DriftKind::GradualDrift;
  if (s == "combined") return DriftKind::Combined;
  throw std::invalid_argument("unknown drift kind '" + s + "'");
}

DriftScenario DriftScenario::stationary(int n_batches, std::uint64_t seed) {
  DriftScenario s;
  s.kind = DriftKind::None;
  s.n_batches = n_batches;
  s.shift_magnitude = 0.0;
  s.concept_rotation = 0.0;
  s.walk_step = 0.0;
  s.seasonal_amplitude = 0.0;
  s.seed = seed;
  return s;
}

DriftScenario DriftScenario::sudden(int n_batches, double change_point_fraction, std::uint64_t seed) {
  DriftScenario s;
  s.kind = DriftKind::SuddenShift;
  s.n_batches = n_batches;
  s.change_point_fraction = change_point_fraction;
  s.seed = seed;
  return s;
}

DriftScenario DriftScenario::gradual(int n_batches, double walk_step, std::uint64_t seed) {
  DriftScenario s;
  s.kind = DriftKind::GradualDrift;
  s.n_batches = n_batches;
  s.walk_step = walk_step;
  s.seed = seed;
  return s;
}

int DriftScenario::change_point() const noexcept {
  if (!has_change_point()) return n_batches;
  // The epsilon absorbs representation error, e.g. 0.7 * 1200 -> 840.
  return static_cast<int>(std::floor(change_point_fraction * n_batches + 1e-9));
}

void DriftScenario::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument("scenario." + field + ": " + why);
  };
  if (n_batches < 30) fail("n_batches", "n_batches < 30 (cannot form a baseline segment)");
  if (n_features < 1) fail("n_features", "must be positive");
  if (!(noise_sigma > 0.0)) fail("noise_sigma", "must be > 0");
  if (shift_magnitude < 0.0) fail("shift_magnitude", "must be >= 0");
  if (concept_rotation < 0.0) fail("concept_rotation", "must be >= 0");
  if (walk_step < 0.0) fail("walk_step", "must be >= 0");
  if (seasonal_amplitude < 0.0) fail("seasonal_amplitude", "must be >= 0");
  if (seasonal_period < 1) fail("seasonal_period", "must be positive");
  if (has_change_point()) {
    if (!(change_point_fraction > 0.0 && change_point_fraction < 1.0)) {
      fail("change_point_fraction", "must lie in (0, 1)");
    }
    const int cp = change_point();
    if (cp < 2 || cp >= n_batches) fail("change_point_fraction", "leaves an empty segment");
  }
  if ((kind == DriftKind::GradualDrift || kind == DriftKind::Combined) && !(walk_step > 0.0)) {
    fail("walk_step", "gradual drift requires walk_step > 0");
  }
  if (kind == DriftKind::None &&
      (shift_magnitude != 0.0 || walk_step != 0.0 || concept_rotation != 0.0)) {
    fail("kind", "kind none requires shift_magnitude = walk_step = concept_rotation = 0");
  }
}

ControlLimits::ControlLimits(double lcl, double ucl) : lcl_(lcl), ucl_(ucl) {
  if (!(ucl > lcl)) throw std::invalid_argument("control limits require ucl > lcl");
}

ControlLimits ControlLimits::from_targets(std::span<const double> targets) {
  const double m = mean(targets);
  const double s = stddev(targets);
  return ControlLimits(m - 3.0 * s, m + 3.0 * s);
}

TrainingSet Dataset::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > batches.size()) throw std::out_of_range("dataset slice out of range");
  TrainingSet ts(n_features());
  ts.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) ts.add(batches[i].features, batches[i].target);
  return ts;
}

std::vector<double> Dataset::targets() const {
  std::vector<double> out;
  out.reserve(batches.size());
  for (const auto& b : batches) out.push_back(b.target);
  return out;
}

namespace {

std::vector<double> unit_vector_with_sum(int k, double sum, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  const double inv_sqrt_k = 1.0 / std::sqrt(static_cast<double>(k));
  std::vector<double> v(k);
  for (int j = 0; j < k; ++j) v[j] = normal(rng) * std::exp(-j / 4.0);
  // Remove the all-ones component so the prescribed sum is set exactly by c.
  double along = 0.0;
  for (double x : v) along += x * inv_sqrt_k;
  double norm2 = 0.0;
  for (double& x : v) {
    x -= along * inv_sqrt_k;
    norm2 += x * x;
  }
  const double c = std::clamp(sum * inv_sqrt_k, -0.95, 0.95);
  std::vector<double> out(k);
  if (norm2 < 1e-24) {
    std::fill(out.begin(), out.end(), (c >= 0 ? 1.0 : -1.0) * inv_sqrt_k);
    return out;
  }
  const double scale = std::sqrt(1.0 - c * c) / std::sqrt(norm2);
  for (int j = 0; j < k; ++j) out[j] = c * inv_sqrt_k + scale * v[j];
  return out;
}

}  // namespace

ProcessStructure ProcessStructure::for_features(int n_features) {
  std::mt19937_64 rng(mix_seed(0x5EEDF00DULL, static_cast<std::uint64_t>(n_features)));
  ProcessStructure p;
  p.coef_baseline = unit_vector_with_sum(n_features, kBaselineShiftResponse, rng);
  p.coef_alternate = unit_vector_with_sum(n_features, kAlternateShiftResponse, rng);
  std::normal_distribution<double> normal;
  p.loadings.assign(n_features, std::vector<double>(kLatentFactors));
  for (auto& row : p.loadings) {
    double n2 = 0.0;
    for (double& w : row) {
      w = normal(rng);
      n2 += w * w;
    }
    for (double& w : row) w /= std::sqrt(n2);
  }
  if (n_features < 2) p.interaction = 0.0;
  return p;
}

Dataset generate(const DriftScenario& scenario) {
  scenario.validate();
  const int n = scenario.n_batches;
  const int k = scenario.n_features;
  const ProcessStructure proc = ProcessStructure::for_features(k);
  const int cp = scenario.change_point();
  const bool walks = scenario.kind == DriftKind::GradualDrift || scenario.kind == DriftKind::Combined;
  const double own_share = std::sqrt(1.0 - ProcessStructure::kLatentShare * ProcessStructure::kLatentShare);

  std::mt19937_64 rng(scenario.seed);
  std::normal_distribution<double> normal;

  Dataset ds;
  ds.scenario = scenario;
  ds.batches.resize(n);
  std::vector<double> walk(k, 0.0);
  std::vector<double> z(ProcessStructure::kLatentFactors);
  std::vector<double> coef(k);

  for (int t = 0; t < n; ++t) {
    for (double& v : z) v = normal(rng);
    if (walks && t > 0) {
      for (double& w : walk) w += scenario.walk_step * normal(rng);
    }
    const double shift = (t >= cp) ? scenario.shift_magnitude : 0.0;

    Batch& b = ds.batches[t];
    b.index = static_cast<std::size_t>(t);
    b.features.resize(k);
    for (int j = 0; j < k; ++j) {
      double latent = 0.0;
      for (int f = 0; f < ProcessStructure::kLatentFactors; ++f) latent += proc.loadings[j][f] * z[f];
      b.features[j] = ProcessStructure::kLatentShare * latent + own_share * normal(rng) + shift + walk[j];
    }

    double rotation = 0.0;
    if (scenario.has_change_point()) {
      rotation = (t >= cp) ? scenario.concept_rotation : 0.0;
    } else if (scenario.kind == DriftKind::GradualDrift) {
      rotation = scenario.concept_rotation * t / static_cast<double>(n - 1);
    }
    for (int j = 0; j < k; ++j) {
      coef[j] = (1.0 - rotation) * proc.coef_baseline[j] + rotation * proc.coef_alternate[j];
    }

    double y = proc.level;
    for (int j = 0; j < k; ++j) y += coef[j] * b.features[j];
    if (k >= 2) y += proc.interaction * b.features[0] * b.features[1];
    y += scenario.seasonal_amplitude *
         std::sin(2.0 * std::numbers::pi * t / static_cast<double>(scenario.seasonal_period));
    y += scenario.noise_sigma * normal(rng);
    b.target = y;
  }

  const auto [begin, end] = baseline_segment(ds);
  const auto targets = ds.targets();
  ds.limits = ControlLimits::from_targets(std::span(targets).subspan(begin, end - begin));
  return ds;
}

std::pair<std::size_t, std::size_t> baseline_segment(const Dataset& dataset) {
  const std::size_t n = dataset.size();
  if (dataset.scenario.has_change_point()) {
    const auto cp = static_cast<std::size_t>(
        std::floor(dataset.scenario.change_point_fraction * static_cast<double>(n) + 1e-9));
    return {0, std::min(cp, n)};
  }
  return {0, n / 5};
}

}  // namespace driftbench
