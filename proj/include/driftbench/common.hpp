#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace driftbench {

inline constexpr const char* kVersion = "0.1.0";

// Derives an independent child seed; used so that per-tree / per-fold seeds
// are fixed before any parallel dispatch.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
  return mix_seed(mix_seed(seed, a), b);
}

/// Dense row-major design matrix plus target column.
class TrainingSet {
 public:
  TrainingSet() = default;
  explicit TrainingSet(std::size_t n_features) : n_features_(n_features) {}

  void reserve(std::size_t rows) {
    x_.reserve(rows * n_features_);
    y_.reserve(rows);
  }

  void add(std::span<const double> x, double y);

  std::size_t size() const noexcept { return y_.size(); }
  bool empty() const noexcept { return y_.empty(); }
  std::size_t n_features() const noexcept { return n_features_; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {x_.data() + i * n_features_, n_features_};
  }
  double feature(std::size_t i, std::size_t j) const noexcept { return x_[i * n_features_ + j]; }
  double target(std::size_t i) const noexcept { return y_[i]; }
  std::span<const double> targets() const noexcept { return y_; }

  TrainingSet subset(std::span<const std::size_t> rows) const;

 private:
  std::size_t n_features_ = 0;
  std::vector<double> x_;
  std::vector<double> y_;
};

double mean(std::span<const double> v);
// Sample standard deviation (n - 1 denominator).
double stddev(std::span<const double> v);

}  // namespace driftbench
