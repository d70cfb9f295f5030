#include "driftbench/pca.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace driftbench::pca {

DegenerateColumn::DegenerateColumn(std::size_t column)
    : std::invalid_argument("column " + std::to_string(column) +
                            " has zero variance; cannot standardize"),
      column_(column) {}

PcaModel fit_pca(std::span<const std::vector<double>> rows, std::size_t n_components, bool standardize) {
  if (rows.size() < 2) throw std::invalid_argument("fit_pca needs at least two rows");
  const std::size_t d = rows.front().size();
  if (d == 0) throw std::invalid_argument("fit_pca: zero-dimensional rows");
  if (n_components < 1 || n_components > d) {
    throw std::invalid_argument("fit_pca: n_components must lie in [1, dimension]");
  }
  const std::size_t n = rows.size();

  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != d) throw std::invalid_argument("fit_pca: ragged rows");
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rows[i][j];
  }

  PcaModel model;
  model.standardized = standardize;
  model.mean.resize(d);
  model.scale.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    const double m = x.col(j).mean();
    model.mean[j] = m;
    x.col(j).array() -= m;
    if (standardize) {
      const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(n - 1));
      if (!(sd > 0.0)) throw DegenerateColumn(j);
      model.scale[j] = sd;
      x.col(j) /= sd;
    }
  }

  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw std::runtime_error("fit_pca: eigendecomposition failed");

  // Eigen returns ascending order.
  for (std::size_t r = 0; r < d; ++r) {
    const auto col = static_cast<Eigen::Index>(d - 1 - r);
    const double lambda = eig.eigenvalues()(col);
    model.eigenvalues.push_back(lambda < 0.0 ? 0.0 : lambda);
    if (r >= n_components) continue;
    Eigen::VectorXd v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.components.emplace_back(v.data(), v.data() + d);
  }
  return model;
}

std::vector<double> project(const PcaModel& model, std::span<const double> x) {
  if (x.size() != model.dimension()) throw std::invalid_argument("project: dimension mismatch");
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - model.mean[j]) / model.scale[j];
  std::vector<double> out;
  out.reserve(model.components.size());
  for (const auto& c : model.components) {
    double s = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) s += c[j] * z[j];
    out.push_back(s);
  }
  return out;
}

std::vector<double> reconstruct_standardized(const PcaModel& model, std::span<const double> scores) {
  if (scores.size() != model.components.size()) throw std::invalid_argument("reconstruct: score count mismatch");
  std::vector<double> z(model.dimension(), 0.0);
  for (std::size_t c = 0; c < scores.size(); ++c)
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += scores[c] * model.components[c][j];
  return z;
}

std::vector<BlockSummary> block_summaries(std::span<const std::array<double, 2>> scores, std::size_t n_blocks) {
  if (n_blocks < 1) throw std::invalid_argument("block_summaries: n_blocks must be positive");
  if (scores.size() < 2 * n_blocks) throw std::invalid_argument("block_summaries: too few points");
  const std::size_t base = scores.size() / n_blocks;
  std::vector<BlockSummary> out;
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t begin = b * base;
    const std::size_t end = (b + 1 == n_blocks) ? scores.size() : begin + base;
    BlockSummary s;
    s.block_index = b;
    s.n = end - begin;
    for (std::size_t i = begin; i < end; ++i) {
      s.mean[0] += scores[i][0];
      s.mean[1] += scores[i][1];
    }
    s.mean[0] /= static_cast<double>(s.n);
    s.mean[1] /= static_cast<double>(s.n);
    for (std::size_t i = begin; i < end; ++i) {
      const double a = scores[i][0] - s.mean[0];
      const double c = scores[i][1] - s.mean[1];
      s.cov[0][0] += a * a;
      s.cov[0][1] += a * c;
      s.cov[1][1] += c * c;
    }
    const double denom = static_cast<double>(s.n - 1);
    s.cov[0][0] /= denom;
    s.cov[0][1] /= denom;
    s.cov[1][1] /= denom;
    s.cov[1][0] = s.cov[0][1];
    out.push_back(s);
  }
  return out;
}

}  // namespace driftbench::pca
