#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <span>
#include <vector>

namespace driftbench::pca {

struct PcaModel {
  std::vector<double> mean;
  std::vector<double> scale;  // column std devs when standardized, else 1
  std::vector<std::vector<double>> components;  // rows, orthonormal
  std::vector<double> eigenvalues;              // all of them, descending
  bool standardized = true;

  std::size_t dimension() const noexcept { return mean.size(); }
};

// Thrown when standardization meets a zero-variance column.
class DegenerateColumn : public std::invalid_argument {
 public:
  explicit DegenerateColumn(std::size_t column);
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

// Eigendecomposition of the sample covariance (correlation matrix when
// standardized). Each component's largest-magnitude entry is made positive.
PcaModel fit_pca(std::span<const std::vector<double>> rows, std::size_t n_components,
                 bool standardize = true);

std::vector<double> project(const PcaModel& model, std::span<const double> x);
// Inverse of project() in standardized coordinates (exact with all components).
std::vector<double> reconstruct_standardized(const PcaModel& model, std::span<const double> scores);

struct BlockSummary {
  std::size_t block_index = 0;
  std::array<double, 2> mean{};
  std::array<std::array<double, 2>, 2> cov{};  // sample covariance
  std::size_t n = 0;
};

// Contiguous equal blocks in the given order; the remainder joins the last block.
std::vector<BlockSummary> block_summaries(std::span<const std::array<double, 2>> scores,
                                          std::size_t n_blocks = 8);

}  // namespace driftbench::pca
