#include "driftbench/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

namespace driftbench::forest {

void Hyperparams::validate() const {
  if (n_estimators < 1) throw std::invalid_argument("n_estimators must be >= 1");
  if (max_depth && *max_depth < 1) throw std::invalid_argument("max_depth must be >= 1 when bounded");
}

double Tree::predict(std::span<const double> x) const noexcept {
  int i = 0;
  while (!nodes_[i].is_leaf()) {
    const TreeNode& n = nodes_[i];
    i = (x[n.feature] <= n.threshold) ? n.left : n.right;
  }
  return nodes_[i].value;
}

int Tree::depth() const {
  if (nodes_.empty()) return 0;
  int deepest = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes_[i].is_leaf()) {
      stack.emplace_back(nodes_[i].left, d + 1);
      stack.emplace_back(nodes_[i].right, d + 1);
    }
  }
  return deepest;
}

ForestModel::ForestModel(std::vector<Tree> trees, Hyperparams hp, std::uint64_t seed,
                         std::size_t n_features)
    : trees_(std::move(trees)), hp_(hp), seed_(seed), n_features_(n_features) {
  if (trees_.size() != static_cast<std::size_t>(hp_.n_estimators)) {
    throw std::invalid_argument("tree count does not match n_estimators");
  }
}

double ForestModel::predict(std::span<const double> x) const {
  if (x.size() != n_features_) {
    throw std::invalid_argument("predict: expected " + std::to_string(n_features_) +
                                " features, got " + std::to_string(x.size()));
  }
  double sum = 0.0;
  for (const Tree& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> ForestModel::predict(const TrainingSet& rows) const {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = predict(rows.row(i));
  return out;
}

std::size_t split_feature_count(std::size_t n_features) noexcept {
  return std::max<std::size_t>(1, (n_features + 2) / 3);
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // sum_L^2/n_L + sum_R^2/n_R
};

class TreeBuilder {
 public:
  TreeBuilder(const TrainingSet& data, std::optional<int> max_depth, std::uint64_t seed)
      : data_(data),
        max_depth_(max_depth),
        rng_(seed),
        n_try_(split_feature_count(data.n_features())),
        features_(data.n_features()) {}

  Tree build(bool bootstrap) {
    const std::size_t n = data_.size();
    std::vector<std::size_t> rows(n);
    if (bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng_);
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    rows_ = std::move(rows);
    grow(0, n, 0);
    return Tree(std::move(nodes_));
  }

 private:
  int grow(std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const std::size_t n = end - begin;

    double sum = 0.0;
    bool constant = true;
    const double first = data_.target(rows_[begin]);
    for (std::size_t i = begin; i < end; ++i) {
      const double y = data_.target(rows_[i]);
      sum += y;
      constant = constant && (y == first);
    }
    nodes_[id].value = sum / static_cast<double>(n);

    if (n < 2 || constant || (max_depth_ && depth >= *max_depth_)) return id;

    const Split best = choose_split(begin, end, sum);
    if (best.feature < 0) return id;

    const auto mid = std::partition(rows_.begin() + begin, rows_.begin() + end, [&](std::size_t r) {
      return data_.feature(r, best.feature) <= best.threshold;
    });
    const auto split_at = static_cast<std::size_t>(mid - rows_.begin());

    nodes_[id].feature = best.feature;
    nodes_[id].threshold = best.threshold;
    const int left = grow(begin, split_at, depth + 1);
    const int right = grow(split_at, end, depth + 1);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  Split choose_split(std::size_t begin, std::size_t end, double sum) {
    const std::size_t k = features_.size();
    std::iota(features_.begin(), features_.end(), 0);
    for (std::size_t i = 0; i + 1 < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, k - 1);
      std::swap(features_[i], features_[pick(rng_)]);
    }
    const double parent = sum * sum / static_cast<double>(end - begin);

    // The sampled subset is scanned in ascending feature order so that ties
    // resolve to the lowest feature index, then the lowest threshold.
    std::vector<int> subset(features_.begin(), features_.begin() + static_cast<long>(n_try_));
    std::sort(subset.begin(), subset.end());
    Split best;
    for (int f : subset) scan_feature(f, begin, end, sum, parent, best);
    // No admissible split among the sample: keep drawing until one is found.
    for (std::size_t i = n_try_; best.feature < 0 && i < k; ++i) {
      scan_feature(features_[i], begin, end, sum, parent, best);
    }
    return best;
  }

  void scan_feature(int f, std::size_t begin, std::size_t end, double sum, double parent,
                    Split& best) {
    const std::size_t n = end - begin;
    scratch_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t r = rows_[begin + i];
      scratch_[i] = {data_.feature(r, f), data_.target(r)};
    }
    std::sort(scratch_.begin(), scratch_.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += scratch_[i].second;
      const double a = scratch_[i].first;
      const double b = scratch_[i + 1].first;
      if (!(a < b)) continue;
      const double nl = static_cast<double>(i + 1);
      const double nr = static_cast<double>(n - i - 1);
      const double right_sum = sum - left_sum;
      const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
      if (score <= parent) continue;
      if (best.feature < 0 || score > best.score) {
        double t = 0.5 * (a + b);
        if (!(t < b)) t = a;
        best = {f, t, score};
      }
    }
  }

  const TrainingSet& data_;
  std::optional<int> max_depth_;
  std::mt19937_64 rng_;
  std::size_t n_try_;
  std::vector<int> features_;
  std::vector<std::size_t> rows_;
  std::vector<TreeNode> nodes_;
  std::vector<std::pair<double, double>> scratch_;
};

void check_train(const TrainingSet& train) {
  if (train.empty()) throw std::invalid_argument("training set is empty");
  if (train.n_features() == 0) throw std::invalid_argument("training set has no features");
}

ForestModel fit_impl(const TrainingSet& train, const Hyperparams& hp, std::uint64_t seed,
                     FitOptions options, bool parallel) {
  check_train(train);
  hp.validate();
  const int n_trees = hp.n_estimators;
  std::vector<Tree> trees(static_cast<std::size_t>(n_trees));
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int t = 0; t < n_trees; ++t) {
    trees[t] = fit_tree(train, hp.max_depth, mix_seed(seed, static_cast<std::uint64_t>(t)),
                        options.bootstrap);
  }
  return ForestModel(std::move(trees), hp, seed, train.n_features());
}

}  // namespace

Tree fit_tree(const TrainingSet& train, std::optional<int> max_depth, std::uint64_t seed,
              bool bootstrap) {
  check_train(train);
  TreeBuilder builder(train, max_depth, seed);
  return builder.build(bootstrap);
}

ForestModel fit(const TrainingSet& train, const Hyperparams& hp, std::uint64_t seed,
                FitOptions options) {
  return fit_impl(train, hp, seed, options, true);
}

ForestModel fit_serial(const TrainingSet& train, const Hyperparams& hp, std::uint64_t seed,
                       FitOptions options) {
  return fit_impl(train, hp, seed, options, false);
}

void SearchSpace::validate() const {
  if (n_iter < 1) throw std::invalid_argument("search.n_iter must be >= 1");
  if (n_estimators.lo < 1 || n_estimators.hi < n_estimators.lo) {
    throw std::invalid_argument("search.n_estimators range is empty or non-positive");
  }
  if (max_depth.lo < 1 || max_depth.hi < max_depth.lo) {
    throw std::invalid_argument("search.max_depth range is empty or non-positive");
  }
}

std::vector<int> kfold_assignment(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k-fold requires k >= 2");
  if (n < static_cast<std::size_t>(k)) throw std::invalid_argument("fewer rows than folds");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold(n);
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) fold[order[pos++]] = f;
  }
  return fold;
}

std::vector<Hyperparams> sample_candidates(const SearchSpace& space, std::uint64_t seed) {
  space.validate();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> trees(space.n_estimators.lo, space.n_estimators.hi);
  const int bounded = space.max_depth.hi - space.max_depth.lo + 1;
  std::uniform_int_distribution<int> depth(0, bounded - (space.include_unbounded ? 0 : 1));
  std::vector<Hyperparams> out;
  out.reserve(static_cast<std::size_t>(space.n_iter));
  for (int i = 0; i < space.n_iter; ++i) {
    Hyperparams hp;
    hp.n_estimators = trees(rng);
    const int d = depth(rng);
    if (d < bounded) hp.max_depth = space.max_depth.lo + d;
    out.push_back(hp);
  }
  return out;
}

std::uint64_t fold_fit_seed(std::uint64_t seed, std::size_t candidate, int fold) noexcept {
  return mix_seed(seed, 1000 + candidate, static_cast<std::uint64_t>(fold));
}

std::size_t select_best(std::span<const Candidate> candidates) {
  if (candidates.empty()) throw std::invalid_argument("no candidates to select from");
  auto depth_key = [](const Hyperparams& hp) {
    return hp.max_depth ? static_cast<long>(*hp.max_depth) : std::numeric_limits<long>::max();
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const Candidate& a = candidates[i];
    const Candidate& b = candidates[best];
    if (a.cv_score != b.cv_score) {
      if (a.cv_score < b.cv_score) best = i;
    } else if (a.hp.n_estimators != b.hp.n_estimators) {
      if (a.hp.n_estimators < b.hp.n_estimators) best = i;
    } else if (depth_key(a.hp) < depth_key(b.hp)) {
      best = i;
    }
  }
  return best;
}

double rmse(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw std::invalid_argument("rmse: length mismatch");
  if (predicted.empty()) throw std::invalid_argument("rmse: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - actual[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(predicted.size()));
}

namespace {

double fold_rmse(const TrainingSet& train, const Hyperparams& hp, std::span<const int> folds,
                 int fold, std::uint64_t fit_seed, bool parallel) {
  std::vector<std::size_t> in, out;
  for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == fold ? out : in).push_back(i);
  const TrainingSet fit_rows = train.subset(in);
  const TrainingSet test_rows = train.subset(out);
  const ForestModel m = parallel ? fit(fit_rows, hp, fit_seed) : fit_serial(fit_rows, hp, fit_seed);
  const auto pred = m.predict(test_rows);
  return rmse(pred, test_rows.targets());
}

SearchResult search_impl(const TrainingSet& train, const SearchSpace& space, int k,
                         std::uint64_t seed, bool parallel) {
  check_train(train);
  if (train.size() < static_cast<std::size_t>(k)) {
    throw std::invalid_argument("random_search_cv: fewer rows than folds");
  }
  const auto hps = sample_candidates(space, mix_seed(seed, 0xCA));
  const auto folds = kfold_assignment(train.size(), k, mix_seed(seed, 0xF0));
  const int n_tasks = static_cast<int>(hps.size()) * k;
  std::vector<double> scores(static_cast<std::size_t>(n_tasks));
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int task = 0; task < n_tasks; ++task) {
    const auto c = static_cast<std::size_t>(task / k);
    const int f = task % k;
    scores[task] = fold_rmse(train, hps[c], folds, f, fold_fit_seed(seed, c, f), false);
  }
  SearchResult result;
  for (std::size_t c = 0; c < hps.size(); ++c) {
    double s = 0.0;
    for (int f = 0; f < k; ++f) s += scores[c * static_cast<std::size_t>(k) + f];
    result.candidates.push_back({hps[c], s / k});
  }
  const std::size_t best = select_best(result.candidates);
  result.best = result.candidates[best].hp;
  result.cv_score = result.candidates[best].cv_score;
  return result;
}

}  // namespace

double cv_score(const TrainingSet& train, const Hyperparams& hp, std::span<const int> folds, int k,
                std::uint64_t seed, std::size_t candidate_index) {
  if (folds.size() != train.size()) throw std::invalid_argument("cv_score: fold vector length mismatch");
  double s = 0.0;
  for (int f = 0; f < k; ++f) {
    s += fold_rmse(train, hp, folds, f, fold_fit_seed(seed, candidate_index, f), true);
  }
  return s / k;
}

SearchResult random_search_cv(const TrainingSet& train, const SearchSpace& space, int k,
                              std::uint64_t seed) {
  return search_impl(train, space, k, seed, true);
}

SearchResult random_search_cv_serial(const TrainingSet& train, const SearchSpace& space, int k,
                                     std::uint64_t seed) {
  return search_impl(train, space, k, seed, false);
}

double nested_cv_evaluate(const TrainingSet& data, const SearchSpace& space, int k_outer,
                          int k_inner, std::uint64_t seed) {
  if (k_outer < 2 || k_inner < 2) throw std::invalid_argument("nested CV requires k >= 2");
  if (data.size() < static_cast<std::size_t>(k_outer) * static_cast<std::size_t>(k_inner)) {
    throw std::invalid_argument("nested_cv_evaluate: insufficient data for k_outer * k_inner");
  }
  const auto outer = kfold_assignment(data.size(), k_outer, mix_seed(seed, 0x0E));
  double total = 0.0;
  for (int o = 0; o < k_outer; ++o) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < outer.size(); ++i) (outer[i] == o ? out : in).push_back(i);
    const TrainingSet train = data.subset(in);
    const TrainingSet test = data.subset(out);
    const auto search = random_search_cv(train, space, k_inner, mix_seed(seed, 0x1A, o));
    const ForestModel m = fit(train, search.best, mix_seed(seed, 0x2B, o));
    total += rmse(m.predict(test), test.targets());
  }
  return total / k_outer;
}

namespace {

nlohmann::json node_json(const std::vector<TreeNode>& nodes, int i) {
  const TreeNode& n = nodes[i];
  nlohmann::json j;
  if (n.is_leaf()) {
    j["value"] = n.value;
    return j;
  }
  j["feature"] = n.feature;
  j["threshold"] = n.threshold;
  j["value"] = n.value;
  j["left"] = node_json(nodes, n.left);
  j["right"] = node_json(nodes, n.right);
  return j;
}

int node_from_json(const nlohmann::json& j, std::vector<TreeNode>& nodes) {
  const int id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  nodes[id].value = j.at("value").get<double>();
  if (j.contains("feature")) {
    nodes[id].feature = j.at("feature").get<int>();
    nodes[id].threshold = j.at("threshold").get<double>();
    const int l = node_from_json(j.at("left"), nodes);
    const int r = node_from_json(j.at("right"), nodes);
    nodes[id].left = l;
    nodes[id].right = r;
  }
  return id;
}

}  // namespace

nlohmann::json to_json(const Tree& tree) { return node_json(tree.nodes(), 0); }

nlohmann::json to_json(const ForestModel& model) {
  nlohmann::json j;
  j["n_estimators"] = model.hyperparams().n_estimators;
  j["max_depth"] = model.hyperparams().max_depth ? nlohmann::json(*model.hyperparams().max_depth)
                                                 : nlohmann::json(nullptr);
  j["seed"] = model.seed();
  j["n_features"] = model.n_features();
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const Tree& t : model.trees()) trees.push_back(to_json(t));
  return j;
}

ForestModel model_from_json(const nlohmann::json& doc) {
  Hyperparams hp;
  hp.n_estimators = doc.at("n_estimators").get<int>();
  if (!doc.at("max_depth").is_null()) hp.max_depth = doc.at("max_depth").get<int>();
  std::vector<Tree> trees;
  for (const auto& t : doc.at("trees")) {
    std::vector<TreeNode> nodes;
    node_from_json(t, nodes);
    trees.emplace_back(std::move(nodes));
  }
  return ForestModel(std::move(trees), hp, doc.at("seed").get<std::uint64_t>(),
                     doc.at("n_features").get<std::size_t>());
}

}  // namespace driftbench::forest
