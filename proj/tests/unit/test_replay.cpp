#include <doctest.h>

#include <cmath>
#include <set>

#include "driftbench/replay.hpp"

using namespace driftbench;
using namespace driftbench::replay;

namespace {

ReplayPolicy quick_policy(Cadence cadence, ModelKind model = ModelKind::point()) {
  ReplayPolicy p;
  p.cadence = cadence;
  p.model = model;
  p.warmup = 60;
  p.window = Window::fixed(40);
  p.seed = 5;
  p.hyperparams = forest::Hyperparams{15, 6};
  return p;
}

forest::SearchSpace tiny_space() { return {{5, 15}, {2, 6}, true, 2}; }

}  // namespace

TEST_CASE("never cadence has no retraining events") {
  const auto ds = generate(DriftScenario::sudden(120, 0.5, 1));
  const auto r = run_replay(ds, quick_policy(std::nullopt));
  CHECK(r.retrain_events.empty());
  CHECK(r.records.size() == 60);
  CHECK(r.records.front().index == 60);
}

TEST_CASE("cadence 5 over 20 post-warmup batches retrains four times") {
  const auto ds = generate(DriftScenario::sudden(80, 0.5, 2));
  const auto r = run_replay(ds, quick_policy(5));
  REQUIRE(r.retrain_events.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r.retrain_events[i].at_index == 60 + 5 * (i + 1));
    CHECK(r.retrain_events[i].window_end == r.retrain_events[i].at_index);
    CHECK(r.retrain_events[i].window_end - r.retrain_events[i].window_begin == 40);
  }
}

TEST_CASE("expanding window starts at zero") {
  const auto ds = generate(DriftScenario::sudden(100, 0.5, 3));
  auto p = quick_policy(10);
  p.window = Window::expanding();
  const auto r = run_replay(ds, p);
  for (const auto& e : r.retrain_events) CHECK(e.window_begin == 0);
}

TEST_CASE("never cadence equals a one-shot warmup fit") {
  const auto ds = generate(DriftScenario::gradual(110, 0.05, 4));
  for (auto hp : {HpPolicy::Frozen, HpPolicy::Retune}) {
    for (auto w : {Window::fixed(30), Window::expanding()}) {
      auto p = quick_policy(std::nullopt);
      p.hp_policy = hp;
      p.window = w;
      const auto r = run_replay(ds, p);
      const auto model = forest::fit(ds.slice(0, 60), *p.hyperparams, mix_seed(p.seed, 0xE0, 0));
      for (const auto& rec : r.records) CHECK(rec.point == model.predict(ds.batches[rec.index].features));
    }
  }
}

TEST_CASE("frozen reuses tuned hyperparameters; retune searches every event") {
  const auto ds = generate(DriftScenario::sudden(100, 0.5, 5));
  auto p = quick_policy(10);
  p.hyperparams.reset();
  p.search = tiny_space();
  const auto frozen = run_replay(ds, p);
  REQUIRE(frozen.initial.cv_score.has_value());
  for (const auto& e : frozen.retrain_events) {
    CHECK(e.hp == frozen.initial.hp);
    CHECK_FALSE(e.cv_score.has_value());
  }
  p.hp_policy = HpPolicy::Retune;
  const auto retune = run_replay(ds, p);
  for (const auto& e : retune.retrain_events) CHECK(e.cv_score.has_value());
}

TEST_CASE("conformal replay logs intervals and decisions") {
  const auto ds = generate(DriftScenario::sudden(100, 0.5, 6));
  const auto r = run_replay(ds, quick_policy(10, ModelKind::conformal(0.1)));
  for (const auto& rec : r.records) {
    REQUIRE(rec.lower.has_value());
    CHECK(*rec.lower <= *rec.upper);
    CHECK(rec.decision.has_value());
    CHECK(rec.width_tier.has_value());
  }
  CHECK(r.aggregates.coverage.has_value());
  CHECK(r.aggregates.mean_width_ratio.has_value());
}

TEST_CASE("replay is deterministic") {
  const auto ds = generate(DriftScenario::sudden(100, 0.5, 7));
  const auto p = quick_policy(7, ModelKind::conformal(0.2));
  const auto a = run_replay(ds, p), b = run_replay(ds, p);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].point == b.records[i].point);
    CHECK(a.records[i].lower == b.records[i].lower);
    CHECK(a.records[i].upper == b.records[i].upper);
  }
}

TEST_CASE("future targets never influence a prediction") {
  const auto ds = generate(DriftScenario::sudden(110, 0.5, 8));
  auto p = quick_policy(5, ModelKind::conformal(0.1));
  const auto base = run_replay(ds, p);
  for (std::size_t t : {60u, 73u, 91u, 109u}) {
    Dataset mutated = ds;
    for (std::size_t u = t + 1; u < mutated.size(); ++u) mutated.batches[u].target += 1000.0;
    const auto r = run_replay(mutated, p);
    const auto& a = base.records[t - 60];
    const auto& b = r.records[t - 60];
    CHECK(a.point == b.point);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
  }
}

TEST_CASE("aggregates recompute from records") {
  const auto ds = generate(DriftScenario::sudden(150, 0.5, 9));
  const auto r = run_replay(ds, quick_policy(10, ModelKind::conformal(0.1)));
  const auto again = aggregate(r.records, r.limits);
  CHECK(again.tiers.counts == r.aggregates.tiers.counts);
  CHECK(again.coverage == r.aggregates.coverage);
  CHECK(again.rmse_ratio == r.aggregates.rmse_ratio);
}

TEST_CASE("policy validation") {
  const auto ds = generate(DriftScenario::sudden(100, 0.5, 1));
  auto p = quick_policy(5);
  p.window = Window::fixed(61);
  CHECK_THROWS_AS(run_replay(ds, p), std::invalid_argument);
  p = quick_policy(0);
  CHECK_THROWS_AS(run_replay(ds, p), std::invalid_argument);
  p = quick_policy(5, ModelKind::conformal(1.5));
  CHECK_THROWS_AS(run_replay(ds, p), std::invalid_argument);
  p = quick_policy(5);
  p.warmup = 100;
  p.window = Window::fixed(50);
  CHECK_THROWS_AS(run_replay(ds, p), std::invalid_argument);
}

namespace {

GridSpec small_grid() {
  GridSpec g;
  g.scenarios = {{"sudden", DriftScenario::sudden(100, 0.5, 3)}};
  g.cadences = {10, 25};
  g.windows = {Window::fixed(40), Window::expanding()};
  g.hp_policies = {HpPolicy::Frozen};
  g.model_kinds = {ModelKind::point()};
  g.warmup = 60;
  g.seed = 4;
  g.hyperparams = forest::Hyperparams{10, 5};
  return g;
}

}  // namespace

TEST_CASE("grid adds never-cadence baselines and counts cells") {
  const auto g = small_grid();
  const auto r = run_grid(g);
  CHECK(r.failed_runs == 0);
  CHECK(r.summary.size() == 6);  // 2 cadences x 2 windows + 2 baselines
  int baselines = 0;
  for (const auto& s : r.summary) {
    if (s.baseline_only) {
      ++baselines;
      CHECK_FALSE(s.key.cadence.has_value());
      for (const auto& pct : s.pct_of_baseline)
        if (pct) CHECK(*pct == 100.0);
    }
  }
  CHECK(baselines == 2);
}

TEST_CASE("one-cell grid equals run_replay") {
  auto g = small_grid();
  g.cadences = {std::nullopt};
  g.windows = {Window::fixed(40)};
  const auto r = run_grid(g);
  REQUIRE(r.runs.size() == 1);
  const auto direct = run_replay(generate(replication_scenario(g.scenarios[0].scenario, 0)),
                                 cell_policy(g, r.runs[0].key, 0));
  REQUIRE(r.runs[0].report.has_value());
  for (std::size_t i = 0; i < direct.records.size(); ++i) CHECK(direct.records[i].point == r.runs[0].report->records[i].point);
}

TEST_CASE("replications differ but reproduce; grid is order-independent") {
  auto g = small_grid();
  g.replications = 3;
  g.cadences = {10};
  g.windows = {Window::fixed(40)};
  const auto a = run_grid(g), b = run_grid_serial(g);
  REQUIRE(a.runs.size() == b.runs.size());
  for (std::size_t i = 0; i < a.runs.size(); ++i) {
    REQUIRE(a.runs[i].report.has_value());
    CHECK(a.runs[i].report->records.front().point == b.runs[i].report->records.front().point);
  }
  std::set<double> firsts;
  for (const auto& run : a.runs)
    if (run.key.cadence) firsts.insert(run.report->records.front().actual);
  CHECK(firsts.size() == 3);
  for (std::size_t i = 0; i < a.summary.size(); ++i) CHECK(a.summary[i].tiers.counts == b.summary[i].tiers.counts);
}

TEST_CASE("a failing cell does not abort the grid") {
  auto g = small_grid();
  g.scenarios.push_back({"short", DriftScenario::sudden(60, 0.5, 1)});  // no post-warmup batch
  const auto r = run_grid(g);
  CHECK(r.failed_runs > 0);
  CHECK(r.failed_runs < r.runs.size());
  for (const auto& run : r.runs) {
    if (g.scenarios[run.key.scenario].name == "short") {
      CHECK_FALSE(run.report.has_value());
      CHECK_FALSE(run.error.empty());
    }
  }
}

TEST_CASE("grid validation rejects empty axes") {
  auto g = small_grid();
  g.windows.clear();
  CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("learning curve") {
  const auto ds = generate(DriftScenario{});
  const std::size_t single[] = {80};
  const auto one = learning_curve(ds, single, {20, std::nullopt}, 5, 3);
  REQUIRE(one.points.size() == 1);
  CHECK(one.points[0].cv_rmse == kfold_rmse(ds.slice(0, 80), {20, std::nullopt}, 5, mix_seed(3, 80)));

  Dataset flat = ds;
  for (auto& b : flat.batches) b.target = 7.0;
  const std::size_t sizes[] = {25, 50, 100};
  for (const auto& p : learning_curve(flat, sizes, {10, 4}, 5, 1).points) CHECK(p.cv_rmse == 0.0);

  const std::size_t too_big[] = {5000};
  CHECK_THROWS_AS(learning_curve(ds, too_big, {10, 4}, 5, 1), std::invalid_argument);
}

TEST_CASE("pooled k-fold RMSE matches a direct computation") {
  const auto ds = generate(DriftScenario::stationary(200, 2));
  const auto ts = ds.slice(0, 60);
  const forest::Hyperparams hp{10, 4};
  const auto folds = forest::kfold_assignment(60, 5, mix_seed(9, 0xF0));
  double ss = 0.0;
  for (int f = 0; f < 5; ++f) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < 60; ++i) (folds[i] == f ? out : in).push_back(i);
    const auto m = forest::fit(ts.subset(in), hp, mix_seed(9, 0xF1, static_cast<std::uint64_t>(f)));
    for (std::size_t i : out) ss += std::pow(m.predict(ts.row(i)) - ts.target(i), 2);
  }
  CHECK(std::abs(kfold_rmse(ts, hp, 5, 9) - std::sqrt(ss / 60.0)) <= 1e-12);
}

TEST_CASE("coverage sweep shares one test block") {
  const auto ds = generate(DriftScenario::stationary(400, 5));
  const double alphas[] = {0.1, 0.3};
  const std::size_t sizes[] = {50, 100};
  const auto sweep = coverage_sweep(ds, alphas, sizes, {15, std::nullopt}, 5, 2, 100);
  REQUIRE(sweep.size() == 4);
  for (const auto& p : sweep) {
    CHECK(p.coverage >= 0.0);
    CHECK(p.coverage <= 1.0);
  }
  CHECK(sweep[0].mean_width_ratio >= sweep[1].mean_width_ratio);  // alpha 0.1 wider than 0.3
  const std::size_t huge[] = {350};
  CHECK_THROWS_AS(coverage_sweep(ds, alphas, huge, {15, std::nullopt}, 5, 2, 100), std::invalid_argument);
}
