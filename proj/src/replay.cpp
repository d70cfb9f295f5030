#include "driftbench/replay.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <variant>

namespace driftbench::replay {

std::string Window::label() const {
  return kind == Kind::Fixed ? "fixed" + std::to_string(size) : "expanding";
}

std::string to_string(HpPolicy p) { return p == HpPolicy::Frozen ? "frozen" : "retune"; }

std::string ModelKind::label() const {
  if (kind == Kind::Point) return "point";
  std::ostringstream os;
  os << "conformal" << alpha;
  return os.str();
}

std::string cadence_label(const Cadence& c) { return c ? std::to_string(*c) : "never"; }

void ReplayPolicy::validate() const {
  if (cadence && *cadence < 1) throw std::invalid_argument("policy.cadence must be positive or never");
  if (warmup < 1) throw std::invalid_argument("policy.warmup must be positive");
  if (window.kind == Window::Kind::Fixed) {
    if (window.size < 1) throw std::invalid_argument("policy.window.size must be positive");
    if (window.size > warmup) throw std::invalid_argument("policy.window.size must not exceed warmup");
  }
  if (model.is_conformal() && !(model.alpha > 0.0 && model.alpha < 1.0)) {
    throw std::invalid_argument("policy.model.alpha must lie in (0, 1)");
  }
  if (cv_folds < 2) throw std::invalid_argument("policy.cv_folds must be >= 2");
  if (conformal_folds < 2) throw std::invalid_argument("policy.conformal_folds must be >= 2");
  search.validate();
  if (hyperparams) hyperparams->validate();
}

double ReplayReport::train_seconds() const {
  double s = initial.train_seconds;
  for (const auto& e : retrain_events) s += e.train_seconds;
  return s;
}

std::vector<conformal::PredictionInterval> ReplayReport::intervals() const {
  std::vector<conformal::PredictionInterval> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.lower.value_or(r.point), r.upper.value_or(r.point), r.point});
  return out;
}

std::vector<double> ReplayReport::actuals() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.actual);
  return out;
}

std::vector<double> ReplayReport::points() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.point);
  return out;
}

Aggregates aggregate(std::span<const BatchRecord> records, const ControlLimits& limits) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  Aggregates agg;
  std::vector<metrics::Tier> tiers;
  std::vector<metrics::Tier> width_tiers;
  std::vector<conformal::PredictionInterval> intervals;
  std::vector<double> actuals, points;
  const bool conformal = records.front().lower.has_value();
  for (const auto& r : records) {
    tiers.push_back(metrics::classify_point(std::abs(r.actual - r.point), limits.clr()));
    actuals.push_back(r.actual);
    points.push_back(r.point);
    if (r.lower.has_value() != conformal || r.upper.has_value() != conformal) {
      throw std::invalid_argument("aggregate: mixed point and interval records");
    }
    if (conformal) {
      intervals.push_back({*r.lower, *r.upper, r.point});
      width_tiers.push_back(metrics::classify_width(*r.upper - *r.lower, limits.clr()));
    }
    if (!limits.contains(r.actual)) ++agg.n_ooc;
  }
  agg.tiers = metrics::TierReport::from(tiers);
  agg.rmse_ratio = metrics::rmse_ratio(points, actuals, limits);
  if (agg.n_ooc > 0) agg.sensitivity_point = metrics::ooc_sensitivity(points, actuals, limits);
  if (conformal) {
    agg.width_tiers = metrics::TierReport::from(width_tiers);
    agg.coverage = metrics::coverage(intervals, actuals);
    agg.mean_width_ratio = metrics::mean_width_ratio(intervals, limits);
    if (agg.n_ooc > 0) {
      agg.sensitivity_interval = metrics::ooc_sensitivity(intervals, actuals, limits, metrics::OocMode::Interval);
    }
  }
  return agg;
}

namespace {

using Clock = std::chrono::steady_clock;
using Model = std::variant<forest::ForestModel, conformal::ConformalModel>;

struct Trained {
  Model model;
  RetrainEvent event;
};

Trained train(const Dataset& ds, const ReplayPolicy& policy, std::size_t begin, std::size_t end,
              std::size_t at_index, std::uint64_t event_no, const std::optional<forest::Hyperparams>& frozen) {
  const auto start = Clock::now();
  const TrainingSet rows = ds.slice(begin, end);
  Trained out;
  out.event.at_index = at_index;
  out.event.window_begin = begin;
  out.event.window_end = end;
  if (frozen) {
    out.event.hp = *frozen;
  } else {
    const auto search = forest::random_search_cv(rows, policy.search, policy.cv_folds,
                                                 mix_seed(policy.seed, 0x7E, event_no));
    out.event.hp = search.best;
    out.event.cv_score = search.cv_score;
  }
  const std::uint64_t fit_seed = mix_seed(policy.seed, 0xE0, event_no);
  if (policy.model.is_conformal()) {
    out.model = conformal::fit_cvplus(rows, out.event.hp, policy.conformal_folds, fit_seed);
  } else {
    out.model = forest::fit(rows, out.event.hp, fit_seed);
  }
  out.event.train_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

}  // namespace

ReplayReport run_replay(const Dataset& ds, const ReplayPolicy& policy) {
  policy.validate();
  const std::size_t n = ds.size();
  const auto warmup = static_cast<std::size_t>(policy.warmup);
  if (n < warmup + 1) throw std::invalid_argument("run_replay: dataset shorter than warmup + 1");

  ReplayReport report;
  report.limits = ds.limits;

  Trained current = train(ds, policy, 0, warmup, warmup, 0, policy.hyperparams);
  const forest::Hyperparams tuned = current.event.hp;
  report.initial = current.event;

  const double clr = ds.limits.clr();
  int since = 0;
  std::uint64_t event_no = 0;
  report.records.reserve(n - warmup);
  for (std::size_t t = warmup; t < n; ++t) {
    const Batch& b = ds.batches[t];
    BatchRecord rec;
    rec.index = b.index;
    rec.actual = b.target;
    if (const auto* cm = std::get_if<conformal::ConformalModel>(&current.model)) {
      const auto pi = conformal::predict_interval(*cm, b.features, policy.model.alpha);
      rec.point = pi.point;
      rec.lower = pi.lower;
      rec.upper = pi.upper;
      rec.width_tier = metrics::classify_width(pi.width(), clr);
      rec.decision = conformal::decide(pi, ds.limits);
    } else {
      rec.point = std::get<forest::ForestModel>(current.model).predict(b.features);
    }
    rec.tier = metrics::classify_point(std::abs(rec.actual - rec.point), clr);
    report.records.push_back(rec);

    // Batch t is now revealed.
    if (!policy.cadence || ++since < *policy.cadence) continue;
    since = 0;
    ++event_no;
    const std::size_t end = t + 1;
    std::size_t begin = 0;
    if (policy.window.kind == Window::Kind::Fixed) {
      const auto size = static_cast<std::size_t>(policy.window.size);
      if (size > end) throw std::logic_error("fixed window larger than revealed history");
      begin = end - size;
    }
    const std::optional<forest::Hyperparams> hp =
        policy.hp_policy == HpPolicy::Frozen ? std::optional(tuned) : std::nullopt;
    current = train(ds, policy, begin, end, end, event_no, hp);
    report.retrain_events.push_back(current.event);
  }
  report.aggregates = aggregate(report.records, ds.limits);
  return report;
}

// ---------------------------------------------------------------- grid

void GridSpec::validate() const {
  if (scenarios.empty()) throw std::invalid_argument("grid.scenarios must not be empty");
  if (cadences.empty()) throw std::invalid_argument("grid.cadences must not be empty");
  if (windows.empty()) throw std::invalid_argument("grid.windows must not be empty");
  if (hp_policies.empty()) throw std::invalid_argument("grid.hp_policies must not be empty");
  if (model_kinds.empty()) throw std::invalid_argument("grid.model_kinds must not be empty");
  if (replications < 1) throw std::invalid_argument("grid.replications must be >= 1");
  for (const auto& s : scenarios) s.scenario.validate();
  for (const auto& c : cadences) {
    if (c && *c < 1) throw std::invalid_argument("grid.cadences entries must be positive or never");
  }
  for (const auto& w : windows) {
    if (w.kind == Window::Kind::Fixed && (w.size < 1 || w.size > warmup)) {
      throw std::invalid_argument("grid.windows: fixed size must lie in [1, warmup]");
    }
  }
  search.validate();
}

std::string CellKey::id(const GridSpec& grid) const {
  return grid.scenarios.at(scenario).name + "_c" + cadence_label(cadence) + "_" + window.label() + "_" +
         to_string(hp_policy) + "_" + model.label();
}

DriftScenario replication_scenario(const DriftScenario& base, int replication) {
  DriftScenario s = base;
  s.seed = base.seed + static_cast<std::uint64_t>(replication);
  return s;
}

ReplayPolicy cell_policy(const GridSpec& grid, const CellKey& key, int replication) {
  ReplayPolicy p;
  p.cadence = key.cadence;
  p.window = key.window;
  p.hp_policy = key.hp_policy;
  p.model = key.model;
  p.warmup = grid.warmup;
  p.seed = mix_seed(grid.seed, static_cast<std::uint64_t>(replication));
  p.search = grid.search;
  p.cv_folds = grid.cv_folds;
  p.conformal_folds = grid.conformal_folds;
  p.hyperparams = grid.hyperparams;
  return p;
}

namespace {

struct Expanded {
  std::vector<CellKey> cells;
  std::vector<bool> baseline_only;
};

Expanded expand(const GridSpec& grid) {
  std::vector<Cadence> cadences = grid.cadences;
  const bool has_never = std::find(cadences.begin(), cadences.end(), Cadence{}) != cadences.end();
  if (!has_never) cadences.insert(cadences.begin(), Cadence{});
  Expanded e;
  for (std::size_t s = 0; s < grid.scenarios.size(); ++s)
    for (const auto& c : cadences)
      for (const auto& w : grid.windows)
        for (auto hp : grid.hp_policies)
          for (const auto& m : grid.model_kinds) {
            e.cells.push_back({s, c, w, hp, m});
            e.baseline_only.push_back(!has_never && !c);
          }
  return e;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

GridResult grid_impl(const GridSpec& grid, int jobs, bool parallel) {
  grid.validate();
  const Expanded cells = expand(grid);
  const int reps = grid.replications;

  std::vector<Dataset> datasets;
  for (const auto& s : grid.scenarios)
    for (int r = 0; r < reps; ++r) datasets.push_back(generate(replication_scenario(s.scenario, r)));

  GridResult result;
  result.runs.resize(cells.cells.size() * static_cast<std::size_t>(reps));
  const int n_tasks = static_cast<int>(result.runs.size());
  const int threads = jobs > 0 ? jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (parallel)
  for (int task = 0; task < n_tasks; ++task) {
    const std::size_t c = static_cast<std::size_t>(task / reps);
    const int r = task % reps;
    CellRun& run = result.runs[task];
    run.key = cells.cells[c];
    run.replication = r;
    try {
      const Dataset& ds = datasets[run.key.scenario * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)];
      run.report = run_replay(ds, cell_policy(grid, run.key, r));
    } catch (const std::exception& ex) {
      run.error = run.key.id(grid) + " replication " + std::to_string(r) + ": " + ex.what();
    }
  }

  for (std::size_t c = 0; c < cells.cells.size(); ++c) {
    CellSummary s;
    s.key = cells.cells[c];
    s.baseline_only = cells.baseline_only[c];
    std::vector<double> cov, width, sp, si, rr, secs;
    for (int r = 0; r < reps; ++r) {
      const CellRun& run = result.runs[c * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)];
      if (!run.report) {
        ++s.replications_failed;
        ++result.failed_runs;
        continue;
      }
      ++s.replications_ok;
      const Aggregates& a = run.report->aggregates;
      for (std::size_t t = 0; t < metrics::kTierCount; ++t) s.tiers.counts[t] += a.tiers.counts[t];
      s.tiers.n += a.tiers.n;
      if (a.coverage) cov.push_back(*a.coverage);
      if (a.mean_width_ratio) width.push_back(*a.mean_width_ratio);
      if (a.sensitivity_point) sp.push_back(*a.sensitivity_point);
      if (a.sensitivity_interval) si.push_back(*a.sensitivity_interval);
      rr.push_back(a.rmse_ratio);
      secs.push_back(run.report->train_seconds());
    }
    s.coverage = mean_of(cov);
    s.mean_width_ratio = mean_of(width);
    s.sensitivity_point = mean_of(sp);
    s.sensitivity_interval = mean_of(si);
    s.rmse_ratio = mean_of(rr);
    s.train_seconds = mean_of(secs).value_or(0.0);
    result.summary.push_back(s);
  }

  // Baseline: the never-retrained cell of the same scenario/window/hp/model slice.
  for (auto& s : result.summary) {
    for (const auto& b : result.summary) {
      if (b.key.cadence || b.key.scenario != s.key.scenario || !(b.key.window == s.key.window) ||
          b.key.hp_policy != s.key.hp_policy || !(b.key.model == s.key.model)) {
        continue;
      }
      if (b.tiers.n > 0 && s.tiers.n > 0) s.pct_of_baseline = metrics::relative_to_baseline(s.tiers, b.tiers);
    }
  }
  return result;
}

}  // namespace

GridResult run_grid(const GridSpec& grid, int jobs) { return grid_impl(grid, jobs, true); }
GridResult run_grid_serial(const GridSpec& grid) { return grid_impl(grid, 1, false); }

// ------------------------------------------------------- learning curve

double kfold_rmse(const TrainingSet& data, const forest::Hyperparams& hp, int k, std::uint64_t seed) {
  const auto folds = forest::kfold_assignment(data.size(), k, mix_seed(seed, 0xF0));
  double ss = 0.0;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == f ? out : in).push_back(i);
    const auto model = forest::fit(data.subset(in), hp, mix_seed(seed, 0xF1, static_cast<std::uint64_t>(f)));
    for (std::size_t i : out) {
      const double d = model.predict(data.row(i)) - data.target(i);
      ss += d * d;
    }
  }
  return std::sqrt(ss / static_cast<double>(data.size()));
}

LearningCurve learning_curve(const Dataset& dataset, std::span<const std::size_t> sizes,
                             const forest::Hyperparams& hp, int k, std::uint64_t seed) {
  if (sizes.empty()) throw std::invalid_argument("learning_curve: no sizes");
  std::vector<std::size_t> sorted(sizes.begin(), sizes.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  if (sorted.back() > dataset.size()) throw std::invalid_argument("learning_curve: size exceeds dataset");
  if (sorted.front() < static_cast<std::size_t>(k)) throw std::invalid_argument("learning_curve: size below k");

  LearningCurve lc;
  for (std::size_t s : sorted) {
    lc.points.push_back({s, kfold_rmse(dataset.slice(0, s), hp, k, mix_seed(seed, s))});
  }
  if (lc.points.size() >= 3) {
    const double first_gain = lc.points[0].cv_rmse - lc.points[1].cv_rmse;
    for (std::size_t i = 1; i + 1 < lc.points.size(); ++i) {
      if (lc.points[i].cv_rmse - lc.points[i + 1].cv_rmse < 0.25 * first_gain) {
        lc.plateau_size = lc.points[i].size;
        break;
      }
    }
  }
  return lc;
}

std::vector<SweepPoint> coverage_sweep(const Dataset& dataset, std::span<const double> alphas,
                                       std::span<const std::size_t> sizes,
                                       const forest::Hyperparams& hp, int k_folds,
                                       std::uint64_t seed, std::size_t test_size) {
  if (alphas.empty() || sizes.empty()) throw std::invalid_argument("coverage_sweep: empty sweep");
  const std::size_t anchor = *std::max_element(sizes.begin(), sizes.end());
  if (test_size == 0 || anchor + test_size > dataset.size()) {
    throw std::invalid_argument("coverage_sweep: dataset too short for the largest size plus test block");
  }
  std::vector<SweepPoint> out;
  const auto test_actuals = [&] {
    std::vector<double> v;
    for (std::size_t t = anchor; t < anchor + test_size; ++t) v.push_back(dataset.batches[t].target);
    return v;
  }();
  for (std::size_t s : sizes) {
    const auto cm = conformal::fit_cvplus(dataset.slice(anchor - s, anchor), hp, k_folds, mix_seed(seed, s));
    for (double a : alphas) {
      std::vector<conformal::PredictionInterval> pis;
      for (std::size_t t = anchor; t < anchor + test_size; ++t) {
        pis.push_back(conformal::predict_interval(cm, dataset.batches[t].features, a));
      }
      out.push_back({s, a, metrics::coverage(pis, test_actuals), metrics::mean_width_ratio(pis, dataset.limits)});
    }
  }
  return out;
}

}  // namespace driftbench::replay
