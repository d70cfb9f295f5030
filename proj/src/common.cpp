#include "driftbench/common.hpp"

#include <cmath>
#include <numeric>

namespace driftbench {

void TrainingSet::add(std::span<const double> x, double y) {
  if (x.size() != n_features_) {
    throw std::invalid_argument("feature vector length " + std::to_string(x.size()) +
                                " does not match " + std::to_string(n_features_));
  }
  x_.insert(x_.end(), x.begin(), x.end());
  y_.push_back(y);
}

TrainingSet TrainingSet::subset(std::span<const std::size_t> rows) const {
  TrainingSet out(n_features_);
  out.reserve(rows.size());
  for (std::size_t r : rows) out.add(row(r), y_[r]);
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of empty sequence");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("stddev needs at least two values");
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace driftbench
