#include <doctest.h>

#include <random>

#include "../oracles/stump_cvplus.hpp"
#include "driftbench/conformal.hpp"

using namespace driftbench;
using namespace driftbench::conformal;

namespace {

const forest::Hyperparams kStump{1, 1};
const forest::FitOptions kNoBootstrap{.bootstrap = false};

TrainingSet from_xy(const std::vector<double>& x, const std::vector<double>& y) {
  TrainingSet ts(1);
  for (std::size_t i = 0; i < x.size(); ++i) ts.add(std::span<const double>(&x[i], 1), y[i]);
  return ts;
}

PredictionInterval at(const ConformalModel& cm, double x, double alpha) {
  return predict_interval(cm, std::span<const double>(&x, 1), alpha);
}

}  // namespace

TEST_CASE("quantile ranks follow the clamped order-statistic convention") {
  CHECK(quantile_ranks(4, 0.1) == std::pair<std::size_t, std::size_t>{1, 4});
  CHECK(quantile_ranks(9, 0.1) == std::pair<std::size_t, std::size_t>{1, 9});
  CHECK(quantile_ranks(19, 0.1) == std::pair<std::size_t, std::size_t>{2, 18});
  CHECK(quantile_ranks(99, 0.1) == std::pair<std::size_t, std::size_t>{10, 90});
  CHECK(quantile_ranks(100, 0.1) == std::pair<std::size_t, std::size_t>{10, 91});
  CHECK(quantile_ranks(5, 0.5) == std::pair<std::size_t, std::size_t>{3, 3});
}

TEST_CASE("n=4 hand example gives [1, 8]") {
  // mu = 3 for every fold model; residuals chosen so mu - R = {1,2,3,4}... and
  // mu + R = {5,6,7,8} cannot share one mu, so build the model by hand.
  ConformalModel cm;
  cm.fold_models.resize(4);
  for (int f = 0; f < 4; ++f) {
    const double v = 3.0 + f;  // mu_f
    cm.fold_models[f] = forest::ForestModel({forest::Tree({forest::TreeNode{-1, 0, -1, -1, v}})}, {1, 1}, 0, 1);
  }
  cm.fold_of = {0, 1, 2, 3};
  cm.scores = {2.0, 2.0, 2.0, 2.0};  // mu - R = {1,2,3,4}, mu + R = {5,6,7,8}
  cm.full_model = cm.fold_models[0];
  const auto pi = at(cm, 0.0, 0.1);
  CHECK(pi.lower == 1.0);
  CHECK(pi.upper == 8.0);
}

TEST_CASE("constant targets collapse every interval") {
  const auto ts = from_xy({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, std::vector<double>(10, 2.5));
  const auto cm = fit_cvplus(ts, {20, std::nullopt}, 5, 3);
  for (double s : cm.scores) CHECK(s == 0.0);
  for (double a : {0.05, 0.1, 0.5, 0.9}) {
    const auto pi = at(cm, 4.2, a);
    CHECK(pi.lower == 2.5);
    CHECK(pi.upper == 2.5);
    CHECK(pi.point == 2.5);
  }
}

TEST_CASE("six-point two-fold stump scores and alpha=0.2 interval match the oracle") {
  const std::vector<double> x{0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
  const std::vector<double> y{0.1, 0.3, 0.2, 2.9, 3.2, 3.0};
  const auto cm = fit_cvplus(from_xy(x, y), kStump, 2, 17, kNoBootstrap);
  const auto ref = oracle::fit_cvplus(x, y, cm.fold_of, 2);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(cm.scores[i] - ref.scores[i]) <= 1e-12);
  for (double probe : {-1.0, 0.5, 2.5, 4.5, 9.0}) {
    const auto pi = at(cm, probe, 0.2);
    const auto o = oracle::predict(ref, probe, 1, 5);
    CHECK(std::abs(pi.lower - o.lower) <= 1e-12);
    CHECK(std::abs(pi.upper - o.upper) <= 1e-12);
    CHECK(std::abs(pi.point - o.point) <= 1e-12);
  }
}

TEST_CASE("folds are near-equal and every score is non-negative") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  std::vector<double> x, y;
  for (int i = 0; i < 23; ++i) {
    x.push_back(g(rng));
    y.push_back(x.back() * 2 + g(rng));
  }
  const auto cm = fit_cvplus(from_xy(x, y), {10, 4}, 5, 8);
  CHECK(cm.k_folds() == 5);
  std::vector<int> count(5, 0);
  for (int f : cm.fold_of) ++count[f];
  CHECK(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()) <= 1);
  CHECK(cm.scores.size() == 23);
  for (double s : cm.scores) CHECK(s >= 0.0);
}

TEST_CASE("k = n is jackknife+ with leave-one-out residuals") {
  const std::vector<double> x{0, 1, 2, 3, 4, 5, 6};
  const std::vector<double> y{1, 0, 2, 5, 4, 6, 5};
  const auto cm = fit_cvplus(from_xy(x, y), kStump, 7, 2, kNoBootstrap);
  std::vector<int> seen(7, 0);
  for (int f : cm.fold_of) ++seen[f];
  for (int c : seen) CHECK(c == 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> xi, yi;
    for (std::size_t j = 0; j < x.size(); ++j)
      if (j != i) xi.push_back(x[j]), yi.push_back(y[j]);
    const auto stump = oracle::fit_stump(xi, yi);
    CHECK(std::abs(cm.scores[i] - std::abs(y[i] - stump(x[i]))) <= 1e-12);
  }
}

TEST_CASE("intervals nest as alpha grows") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  std::vector<double> x, y;
  for (int i = 0; i < 60; ++i) {
    x.push_back(g(rng));
    y.push_back(std::sin(x.back()) + 0.3 * g(rng));
  }
  const auto cm = fit_cvplus(from_xy(x, y), {15, 5}, 5, 1);
  for (double probe = -2.0; probe <= 2.0; probe += 0.25) {
    auto prev = at(cm, probe, 0.02);
    for (double a : {0.05, 0.1, 0.2, 0.4, 0.7}) {
      const auto cur = at(cm, probe, a);
      CHECK(cur.lower >= prev.lower);
      CHECK(cur.upper <= prev.upper);
      CHECK(cur.lower <= cur.upper);
      prev = cur;
    }
  }
}

TEST_CASE("parallel and serial CV+ agree exactly") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  TrainingSet ts(3);
  for (int i = 0; i < 50; ++i) {
    const double r[3] = {g(rng), g(rng), g(rng)};
    ts.add(r, r[0] - r[2] + g(rng));
  }
  const auto a = fit_cvplus(ts, {12, 5}, 5, 11), b = fit_cvplus_serial(ts, {12, 5}, 5, 11);
  CHECK(a.scores == b.scores);
  CHECK(a.fold_of == b.fold_of);
  const double probe[3] = {0.1, 0.2, 0.3};
  const auto pa = predict_interval(a, probe, 0.1), pb = predict_interval(b, probe, 0.1);
  CHECK(pa.lower == pb.lower);
  CHECK(pa.upper == pb.upper);
  CHECK(pa.point == pb.point);
}

TEST_CASE("precondition errors") {
  const auto ts = from_xy({0, 1, 2}, {0, 1, 2});
  CHECK_THROWS_AS(fit_cvplus(ts, kStump, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(fit_cvplus(ts, kStump, 4, 0), std::invalid_argument);
  const auto cm = fit_cvplus(ts, kStump, 3, 0);
  CHECK_THROWS_AS(at(cm, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(at(cm, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("decisions") {
  CHECK(decide({2, 4, 3}, ControlLimits(1, 5)) == Decision::InControl);
  CHECK(decide({-1, 2, -0.5}, ControlLimits(0, 5)) == Decision::OutOfControl);
  CHECK(decide({3, 7, 4.5}, ControlLimits(0, 5)) == Decision::Warning);
  CHECK(decide({0, 5, 2}, ControlLimits(0, 5)) == Decision::InControl);  // inclusive limits
  CHECK(decide({4, 6, 5.5}, ControlLimits(0, 5)) == Decision::OutOfControl);
  for (auto d : {Decision::InControl, Decision::OutOfControl, Decision::Warning}) {
    CHECK(decision_from_string(to_string(d)) == d);
  }
}
