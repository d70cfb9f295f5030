#include "driftbench/conformal.hpp"

#include <algorithm>
#include <cmath>

namespace driftbench::conformal {

std::string to_string(Decision d) {
  switch (d) {
    case Decision::InControl: return "in_control";
    case Decision::OutOfControl: return "out_of_control";
    case Decision::Warning: return "warning";
  }
  return "warning";
}

Decision decision_from_string(const std::string& s) {
  if (s == "in_control") return Decision::InControl;
  if (s == "out_of_control") return Decision::OutOfControl;
  if (s == "warning") return Decision::Warning;
  throw std::invalid_argument("unknown decision '" + s + "'");
}

namespace {

ConformalModel fit_impl(const TrainingSet& train, const forest::Hyperparams& hp, int k_folds,
                        std::uint64_t seed, forest::FitOptions options, bool parallel) {
  if (k_folds < 2) throw std::invalid_argument("CV+ requires k_folds >= 2");
  if (train.size() < static_cast<std::size_t>(k_folds)) {
    throw std::invalid_argument("CV+ requires at least k_folds training rows");
  }
  ConformalModel cm;
  cm.fold_of = forest::kfold_assignment(train.size(), k_folds, mix_seed(seed, 0xF01D));
  cm.fold_models.resize(static_cast<std::size_t>(k_folds));
  cm.scores.assign(train.size(), 0.0);

  // Task k_folds is the full-data model.
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int f = 0; f <= k_folds; ++f) {
    if (f == k_folds) {
      cm.full_model = forest::fit_serial(train, hp, mix_seed(seed, 0xA11), options);
      continue;
    }
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < train.size(); ++i) (cm.fold_of[i] == f ? out : in).push_back(i);
    cm.fold_models[f] = forest::fit_serial(train.subset(in), hp,
                                           mix_seed(seed, 0xF0, static_cast<std::uint64_t>(f)), options);
    for (std::size_t i : out) {
      cm.scores[i] = std::abs(train.target(i) - cm.fold_models[f].predict(train.row(i)));
    }
  }
  return cm;
}

}  // namespace

ConformalModel fit_cvplus(const TrainingSet& train, const forest::Hyperparams& hp, int k_folds,
                          std::uint64_t seed, forest::FitOptions options) {
  return fit_impl(train, hp, k_folds, seed, options, true);
}

ConformalModel fit_cvplus_serial(const TrainingSet& train, const forest::Hyperparams& hp,
                                 int k_folds, std::uint64_t seed, forest::FitOptions options) {
  return fit_impl(train, hp, k_folds, seed, options, false);
}

std::pair<std::size_t, std::size_t> quantile_ranks(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (n == 0) throw std::invalid_argument("no conformity scores");
  const double np1 = static_cast<double>(n + 1);
  // Small epsilons keep exact products such as 0.1 * 10 on the intended integer.
  auto lo = static_cast<long long>(std::floor(alpha * np1 + 1e-9));
  auto hi = static_cast<long long>(std::ceil((1.0 - alpha) * np1 - 1e-9));
  const auto nn = static_cast<long long>(n);
  lo = std::clamp(lo, 1LL, nn);
  hi = std::clamp(hi, 1LL, nn);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

PredictionInterval predict_interval(const ConformalModel& cm, std::span<const double> x,
                                    double alpha) {
  const auto [lo_rank, hi_rank] = quantile_ranks(cm.n_train(), alpha);
  std::vector<double> fold_pred(cm.fold_models.size());
  for (std::size_t f = 0; f < fold_pred.size(); ++f) fold_pred[f] = cm.fold_models[f].predict(x);

  const std::size_t n = cm.n_train();
  std::vector<double> lows(n), highs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double mu = fold_pred[static_cast<std::size_t>(cm.fold_of[i])];
    lows[i] = mu - cm.scores[i];
    highs[i] = mu + cm.scores[i];
  }
  std::nth_element(lows.begin(), lows.begin() + static_cast<long>(lo_rank - 1), lows.end());
  std::nth_element(highs.begin(), highs.begin() + static_cast<long>(hi_rank - 1), highs.end());
  PredictionInterval pi;
  pi.lower = lows[lo_rank - 1];
  pi.upper = highs[hi_rank - 1];
  pi.point = cm.full_model.predict(x);
  return pi;
}

Decision decide(const PredictionInterval& interval, const ControlLimits& limits) {
  if (interval.point < limits.lcl() || interval.point > limits.ucl()) return Decision::OutOfControl;
  if (interval.lower >= limits.lcl() && interval.upper <= limits.ucl()) return Decision::InControl;
  return Decision::Warning;
}

}  // namespace driftbench::conformal
