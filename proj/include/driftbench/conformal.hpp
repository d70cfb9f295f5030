#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "driftbench/datagen.hpp"
#include "driftbench/forest.hpp"

namespace driftbench::conformal {

/// CV+ regressor: K fold models, each trained without one fold, plus the
/// out-of-fold absolute residual of every training row.
struct ConformalModel {
  std::vector<forest::ForestModel> fold_models;
  std::vector<int> fold_of;     // fold id per training row
  std::vector<double> scores;   // |y_i - mu_{-fold(i)}(x_i)|
  double alpha_default = 0.1;
  forest::ForestModel full_model;  // trained on every row; supplies the point prediction

  int k_folds() const noexcept { return static_cast<int>(fold_models.size()); }
  std::size_t n_train() const noexcept { return scores.size(); }
};

struct PredictionInterval {
  double lower = 0.0;
  double upper = 0.0;
  double point = 0.0;

  double width() const noexcept { return upper - lower; }
  bool contains(double v) const noexcept { return v >= lower && v <= upper; }
};

enum class Decision { InControl, OutOfControl, Warning };

std::string to_string(Decision d);
Decision decision_from_string(const std::string& s);

ConformalModel fit_cvplus(const TrainingSet& train, const forest::Hyperparams& hp, int k_folds,
                          std::uint64_t seed, forest::FitOptions options = {});
// Fold models fitted one after another; identical output to fit_cvplus().
ConformalModel fit_cvplus_serial(const TrainingSet& train, const forest::Hyperparams& hp,
                                 int k_folds, std::uint64_t seed, forest::FitOptions options = {});

// 1-based order-statistic ranks (lower, upper) for n scores at level alpha:
// floor(alpha (n + 1)) and ceil((1 - alpha)(n + 1)), each clamped to [1, n].
std::pair<std::size_t, std::size_t> quantile_ranks(std::size_t n, double alpha);

PredictionInterval predict_interval(const ConformalModel& cm, std::span<const double> x,
                                    double alpha);

// OutOfControl when the point leaves the limits, InControl when the whole
// interval sits inside them, Warning otherwise.
Decision decide(const PredictionInterval& interval, const ControlLimits& limits);

}  // namespace driftbench::conformal
