#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "driftbench/common.hpp"

namespace driftbench::forest {

struct Hyperparams {
  int n_estimators = 100;
  std::optional<int> max_depth;  // nullopt: unbounded

  void validate() const;
  bool operator==(const Hyperparams&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // mean target of the training rows routed here

  bool is_leaf() const noexcept { return feature < 0; }
};

/// CART regression tree stored as a flat node array; node 0 is the root.
class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const noexcept;
  // Edges on the longest root-to-leaf path.
  int depth() const;
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

struct FitOptions {
  // Disabling the bootstrap is a test hook: each tree then sees the rows as given.
  bool bootstrap = true;
};

class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<Tree> trees, Hyperparams hp, std::uint64_t seed, std::size_t n_features);

  double predict(std::span<const double> x) const;
  std::vector<double> predict(const TrainingSet& rows) const;

  const std::vector<Tree>& trees() const noexcept { return trees_; }
  const Hyperparams& hyperparams() const noexcept { return hp_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t n_features() const noexcept { return n_features_; }

 private:
  std::vector<Tree> trees_;
  Hyperparams hp_;
  std::uint64_t seed_ = 0;
  std::size_t n_features_ = 0;
};

// Features examined per split: ceil(k / 3).
std::size_t split_feature_count(std::size_t n_features) noexcept;

Tree fit_tree(const TrainingSet& train, std::optional<int> max_depth, std::uint64_t seed,
              bool bootstrap);

// Trees are fitted concurrently (OpenMP); per-tree seeds are mix_seed(seed, tree).
ForestModel fit(const TrainingSet& train, const Hyperparams& hp, std::uint64_t seed,
                FitOptions options = {});
// Single-threaded reference; produces a model identical to fit().
ForestModel fit_serial(const TrainingSet& train, const Hyperparams& hp, std::uint64_t seed,
                       FitOptions options = {});

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct SearchSpace {
  IntRange n_estimators{50, 300};
  IntRange max_depth{3, 20};
  bool include_unbounded = true;
  int n_iter = 10;

  void validate() const;
};

struct Candidate {
  Hyperparams hp;
  double cv_score = 0.0;
};

struct SearchResult {
  Hyperparams best;
  double cv_score = 0.0;
  std::vector<Candidate> candidates;  // in sampling order
};

// Fold id (0..k-1) per row: seeded shuffle cut into near-equal contiguous groups.
std::vector<int> kfold_assignment(std::size_t n, int k, std::uint64_t seed);

std::vector<Hyperparams> sample_candidates(const SearchSpace& space, std::uint64_t seed);

// Seed of the model fitted for `candidate` on the complement of `fold`.
std::uint64_t fold_fit_seed(std::uint64_t seed, std::size_t candidate, int fold) noexcept;

// Lowest score; ties go to fewer trees, then shallower depth (unbounded deepest).
std::size_t select_best(std::span<const Candidate> candidates);

// Mean over folds of the per-fold RMSE.
double cv_score(const TrainingSet& train, const Hyperparams& hp, std::span<const int> folds, int k,
                std::uint64_t seed, std::size_t candidate_index = 0);

SearchResult random_search_cv(const TrainingSet& train, const SearchSpace& space, int k,
                              std::uint64_t seed);
SearchResult random_search_cv_serial(const TrainingSet& train, const SearchSpace& space, int k,
                                     std::uint64_t seed);

double nested_cv_evaluate(const TrainingSet& data, const SearchSpace& space, int k_outer,
                          int k_inner, std::uint64_t seed);

double rmse(std::span<const double> predicted, std::span<const double> actual);

nlohmann::json to_json(const Tree& tree);
nlohmann::json to_json(const ForestModel& model);
ForestModel model_from_json(const nlohmann::json& doc);

}  // namespace driftbench::forest
