#include <doctest.h>

#include <cmath>

#include "driftbench/datagen.hpp"

using namespace driftbench;

namespace {

std::vector<double> column(const Dataset& ds, std::size_t j, std::size_t begin, std::size_t end) {
  std::vector<double> v;
  for (std::size_t t = begin; t < end; ++t) v.push_back(ds.batches[t].features[j]);
  return v;
}

// Variance across 8 chronological blocks of the block means, averaged over features.
double block_mean_variance(const Dataset& ds) {
  const std::size_t blocks = 8, size = ds.size() / blocks;
  double total = 0.0;
  for (std::size_t j = 0; j < ds.n_features(); ++j) {
    std::vector<double> means;
    for (std::size_t b = 0; b < blocks; ++b) means.push_back(mean(column(ds, j, b * size, (b + 1) * size)));
    const double s = stddev(means);
    total += s * s;
  }
  return total / static_cast<double>(ds.n_features());
}

}  // namespace

TEST_CASE("change point of the default sudden shift") {
  DriftScenario s = DriftScenario::sudden(1200, 0.7, 1);
  CHECK(s.change_point() == 840);
  const auto ds = generate(s);
  CHECK(ds.size() == 1200);
  CHECK(baseline_segment(ds) == std::pair<std::size_t, std::size_t>{0, 840});
}

TEST_CASE("baseline segment definitions") {
  CHECK(baseline_segment(generate(DriftScenario::stationary(1000, 2))) == std::pair<std::size_t, std::size_t>{0, 200});
  DriftScenario c;
  c.kind = DriftKind::Combined;
  c.n_batches = 500;
  c.change_point_fraction = 0.5;
  c.walk_step = 0.02;
  CHECK(baseline_segment(generate(c)) == std::pair<std::size_t, std::size_t>{0, 250});
}

TEST_CASE("stationary features stay at their configured mean") {
  DriftScenario s = DriftScenario::stationary(10000, 3);
  s.seasonal_amplitude = 0.0;
  const auto ds = generate(s);
  const double tol = 5.0 / std::sqrt(10000.0);
  for (std::size_t j = 0; j < ds.n_features(); ++j) {
    const auto col = column(ds, j, 0, ds.size());
    CHECK(std::abs(mean(col)) < tol * stddev(col));
  }
}

TEST_CASE("no-drift null: halves agree within 5 standard errors") {
  const auto ds = generate(DriftScenario::stationary(2000, 11));
  for (std::size_t j = 0; j < ds.n_features(); ++j) {
    const auto a = column(ds, j, 0, 1000), b = column(ds, j, 1000, 2000);
    const double se = std::sqrt((stddev(a) * stddev(a) + stddev(b) * stddev(b)) / 1000.0);
    CHECK(std::abs(mean(a) - mean(b)) < 5.0 * se);
  }
}

TEST_CASE("gradual drift spreads block means more than the stationary case") {
  const auto drift = generate(DriftScenario::gradual(800, 0.05, 7));
  const auto still = generate(DriftScenario::stationary(800, 7));
  CHECK(block_mean_variance(drift) > block_mean_variance(still));
}

TEST_CASE("sudden shift separates feature means by more than one sigma") {
  const auto ds = generate(DriftScenario::sudden(1200, 0.7, 5));
  for (std::size_t j = 0; j < ds.n_features(); ++j) {
    const auto pre = column(ds, j, 0, 840), post = column(ds, j, 840, 1200);
    CHECK(mean(post) - mean(pre) > stddev(pre));
  }
}

TEST_CASE("generation is bit-identical for equal scenarios") {
  const auto s = DriftScenario::sudden(300, 0.5, 42);
  const auto a = generate(s), b = generate(s);
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a.batches[t].features == b.batches[t].features);
    CHECK(a.batches[t].target == b.batches[t].target);
  }
  CHECK(a.limits.lcl() == b.limits.lcl());
  const auto c = generate(DriftScenario::sudden(300, 0.5, 43));
  CHECK(c.batches[0].target != a.batches[0].target);
}

TEST_CASE("control limits come from the baseline segment") {
  for (const auto& s : {DriftScenario::sudden(600, 0.5, 1), DriftScenario::gradual(500, 0.05, 2),
                        DriftScenario::stationary(400, 3)}) {
    const auto ds = generate(s);
    const auto [b, e] = baseline_segment(ds);
    std::vector<double> y;
    for (std::size_t t = b; t < e; ++t) y.push_back(ds.batches[t].target);
    const double m = mean(y), sd = stddev(y);
    CHECK(ds.limits.lcl() == doctest::Approx(m - 3 * sd).epsilon(1e-12));
    CHECK(ds.limits.ucl() == doctest::Approx(m + 3 * sd).epsilon(1e-12));
  }
}

TEST_CASE("process structure is fixed per feature count") {
  const auto a = ProcessStructure::for_features(12), b = ProcessStructure::for_features(12);
  CHECK(a.coef_baseline == b.coef_baseline);
  double norm = 0.0, sum = 0.0, alt_sum = 0.0;
  for (std::size_t j = 0; j < a.coef_baseline.size(); ++j) {
    norm += a.coef_baseline[j] * a.coef_baseline[j];
    sum += a.coef_baseline[j];
    alt_sum += a.coef_alternate[j];
  }
  CHECK(norm == doctest::Approx(1.0));
  CHECK(sum == doctest::Approx(ProcessStructure::kBaselineShiftResponse));
  CHECK(alt_sum == doctest::Approx(ProcessStructure::kAlternateShiftResponse));
}

TEST_CASE("scenario validation names the field") {
  auto msg = [](DriftScenario s) {
    try {
      s.validate();
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  DriftScenario s;
  s.n_batches = 10;
  CHECK(msg(s).find("n_batches < 30") != std::string::npos);
  s = DriftScenario{};
  s.noise_sigma = 0.0;
  CHECK(msg(s).find("noise_sigma") != std::string::npos);
  s = DriftScenario::stationary(100, 0);
  s.shift_magnitude = 1.0;
  CHECK(msg(s).find("shift_magnitude") != std::string::npos);
  s = DriftScenario::gradual(100, 0.0, 0);
  CHECK(msg(s).find("walk_step") != std::string::npos);
  s = DriftScenario{};
  s.change_point_fraction = 1.0;
  CHECK(msg(s).find("change_point_fraction") != std::string::npos);
  CHECK_THROWS_AS(generate(s), std::invalid_argument);
}

TEST_CASE("drift kind strings round-trip") {
  for (auto k : {DriftKind::None, DriftKind::SuddenShift, DriftKind::GradualDrift, DriftKind::Combined}) {
    CHECK(drift_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(drift_kind_from_string("sideways"), std::invalid_argument);
}

TEST_CASE("control limits reject an empty range") {
  CHECK_THROWS_AS(ControlLimits(1.0, 1.0), std::invalid_argument);
  const ControlLimits cl(0.0, 5.0);
  CHECK(cl.clr() == 5.0);
  CHECK(cl.contains(0.0));
  CHECK(cl.contains(5.0));
  CHECK_FALSE(cl.contains(5.0000001));
}
