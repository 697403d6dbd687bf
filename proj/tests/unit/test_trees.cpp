#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "disentlab/common/error.hpp"
#include "disentlab/common/random.hpp"
#include "disentlab/trees/gbt.hpp"

using namespace disentlab;
using trees::FeatureMatrix;

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return s;
}

// Exhaustive search over every feature and every midpoint between distinct
// sorted values, first strict maximum wins.
Split brute_force_split(const FeatureMatrix& x, const std::vector<double>& y) {
  Split best;
  const double total = sse(y);
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::vector<double> values(x.col(f).data(), x.col(f).data() + x.rows());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double thr = 0.5 * (values[i] + values[i + 1]);
      std::vector<double> left, right;
      for (Eigen::Index r = 0; r < x.rows(); ++r) (x(r, f) <= thr ? left : right).push_back(y[static_cast<std::size_t>(r)]);
      const double gain = total - sse(left) - sse(right);
      if (gain > best.gain + 1e-9) best = {static_cast<int>(f), thr, gain};
    }
  }
  return best;
}

FeatureMatrix random_matrix(Rng& rng, int rows, int cols, int levels) {
  FeatureMatrix x(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) x(r, c) = static_cast<double>(rng.uniform_index(static_cast<std::uint64_t>(levels)));
  }
  return x;
}

}  // namespace

TEST_SUITE("trees") {
  TEST_CASE("step function splits at the midpoint with the hand-computed gain") {
    FeatureMatrix x(10, 1);
    std::vector<double> y(10);
    for (int i = 0; i < 10; ++i) {
      x(i, 0) = i;
      y[static_cast<std::size_t>(i)] = i < 4 ? 1.0 : 3.0;
    }
    const auto tree = trees::fit_tree(x, y, 1);
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[0].feature == 0);
    CHECK(tree.nodes[0].threshold == doctest::Approx(3.5));
    // Total SSE: 4 * 1.2^2 + 6 * 0.8^2 = 9.6, children are pure.
    CHECK(tree.nodes[0].gain == doctest::Approx(9.6));
    CHECK(tree.predict(x, 0) == doctest::Approx(1.0));
    CHECK(tree.predict(x, 9) == doctest::Approx(3.0));
  }

  TEST_CASE("root split matches an exhaustive search") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
      const auto x = random_matrix(rng, 30, 4, 7);
      std::vector<double> y(30);
      for (auto& v : y) v = rng.normal();
      const auto oracle = brute_force_split(x, y);
      const auto tree = trees::fit_tree(x, y, 1);
      REQUIRE(oracle.feature >= 0);
      CHECK(tree.nodes[0].feature == oracle.feature);
      CHECK(tree.nodes[0].threshold == doctest::Approx(oracle.threshold));
      CHECK(tree.nodes[0].gain == doctest::Approx(oracle.gain).epsilon(1e-9));
    }
  }

  TEST_CASE("duplicate columns resolve to the lower feature index") {
    Rng rng(3);
    FeatureMatrix x(50, 3);
    std::vector<double> y(50);
    for (int r = 0; r < 50; ++r) {
      x(r, 0) = rng.normal();
      x(r, 1) = x(r, 2) = rng.normal();
      y[static_cast<std::size_t>(r)] = x(r, 1) > 0 ? 1.0 : 0.0;
    }
    const auto tree = trees::fit_tree(x, y, 3);
    for (const auto& node : tree.nodes) {
      if (!node.is_leaf()) CHECK(node.feature != 2);
    }
    CHECK(tree.nodes[0].feature == 1);
  }

  TEST_CASE("depth limit and pure nodes") {
    Rng rng(5);
    const auto x = random_matrix(rng, 64, 3, 10);
    std::vector<double> y(64);
    for (auto& v : y) v = rng.normal();
    for (int d = 0; d <= 4; ++d) CHECK(trees::fit_tree(x, y, d).depth() <= d);
    const std::vector<double> flat(64, 2.5);
    const auto t = trees::fit_tree(x, flat, 3);
    CHECK(t.nodes.size() == 1);
    CHECK(t.nodes[0].value == doctest::Approx(2.5));
  }

  TEST_CASE("zero rounds give uniform probabilities") {
    FeatureMatrix x(4, 1);
    x << 0, 1, 2, 3;
    const std::vector<int> y{0, 1, 2, 2};
    trees::GbtSettings s;
    s.rounds = 0;
    const auto model = trees::fit_gbt(x, y, s);
    const auto p = trees::predict(model, x);
    for (Eigen::Index r = 0; r < 4; ++r) {
      for (int k = 0; k < 3; ++k) CHECK(p.probabilities(r, k) == doctest::Approx(1.0 / 3.0));
      CHECK(p.labels[static_cast<std::size_t>(r)] == 0);
    }
  }

  TEST_CASE("a single training class gives a flagged constant model") {
    FeatureMatrix x(5, 2);
    x.setRandom();
    const std::vector<int> y(5, 1);
    const auto model = trees::fit_gbt(x, y, {}, 3);
    CHECK(model.constant);
    CHECK(model.constant_class == 1);
    const auto p = trees::predict(model, x);
    for (const int l : p.labels) CHECK(l == 1);
  }

  TEST_CASE("one round with an unsplittable feature uses the Newton leaf") {
    FeatureMatrix x = FeatureMatrix::Zero(4, 1);
    const std::vector<int> y{0, 0, 0, 1};
    trees::GbtSettings s;
    s.rounds = 1;
    const auto model = trees::fit_gbt(x, y, s);
    // Class 1 residuals: -0.5 x3, +0.5; leaf = (K-1)/K * sum r / sum |r|(1-|r|) = 0.5 * -1 / 1.
    const double score1 = 0.1 * -0.5;
    const double score0 = 0.1 * 0.5;
    const double p0 = std::exp(score0) / (std::exp(score0) + std::exp(score1));
    const auto p = trees::predict(model, x);
    CHECK(p.probabilities(0, 0) == doctest::Approx(p0).epsilon(1e-12));
    CHECK(p.probabilities(0, 1) == doctest::Approx(1.0 - p0).epsilon(1e-12));
  }

  TEST_CASE("XOR is learned to full training accuracy") {
    Rng rng(7);
    FeatureMatrix x(200, 2);
    std::vector<int> y(200);
    for (int r = 0; r < 200; ++r) {
      x(r, 0) = rng.uniform01();
      x(r, 1) = rng.uniform01();
      y[static_cast<std::size_t>(r)] = (x(r, 0) > 0.5) != (x(r, 1) > 0.5) ? 1 : 0;
    }
    const auto model = trees::fit_gbt(x, y);
    CHECK(trees::accuracy(trees::predict(model, x).labels, y) == doctest::Approx(1.0));
  }

  TEST_CASE("training log-loss does not increase with more rounds") {
    Rng rng(9);
    const auto x = random_matrix(rng, 120, 3, 12);
    std::vector<int> y(120);
    for (int r = 0; r < 120; ++r) y[static_cast<std::size_t>(r)] = (static_cast<int>(x(r, 0)) + static_cast<int>(rng.uniform_index(3))) % 4;
    double previous = std::log(4.0) + 1e-12;
    for (int rounds : {0, 5, 10, 20, 40}) {
      trees::GbtSettings s;
      s.rounds = rounds;
      const auto model = trees::fit_gbt(x, y, s);
      const double ll = trees::log_loss(trees::predict(model, x), y);
      CHECK(ll <= previous + 1e-12);
      previous = ll;
    }
  }

  TEST_CASE("importance sums to one and ignores noise features") {
    Rng rng(13);
    FeatureMatrix x(300, 3);
    std::vector<int> y(300);
    for (int r = 0; r < 300; ++r) {
      x(r, 0) = rng.uniform01();
      x(r, 1) = 7.0;
      x(r, 2) = rng.uniform01();
      y[static_cast<std::size_t>(r)] = x(r, 2) < 0.3 ? 0 : (x(r, 2) < 0.7 ? 1 : 2);
    }
    const auto model = trees::fit_gbt(x, y);
    const auto imp = trees::gini_importance(model);
    REQUIRE(imp.size() == 3);
    CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0));
    CHECK(imp[1] == 0.0);
    CHECK(imp[2] > 0.99);
  }

  TEST_CASE("importance is all zero without splits") {
    FeatureMatrix x = FeatureMatrix::Ones(6, 2);
    const std::vector<int> y{0, 1, 0, 1, 0, 1};
    const auto imp = trees::gini_importance(trees::fit_gbt(x, y));
    CHECK(imp == std::vector<double>{0.0, 0.0});
  }

  TEST_CASE("fitting is deterministic") {
    Rng rng(17);
    const auto x = random_matrix(rng, 80, 4, 5);
    std::vector<int> y(80);
    for (auto& v : y) v = static_cast<int>(rng.uniform_index(3));
    const auto a = trees::predict(trees::fit_gbt(x, y), x);
    const auto b = trees::predict(trees::fit_gbt(x, y), x);
    CHECK(a.labels == b.labels);
    CHECK((a.probabilities.array() == b.probabilities.array()).all());
  }

  TEST_CASE("invalid inputs are rejected") {
    FeatureMatrix x(3, 1);
    x << 1, 2, 3;
    CHECK_THROWS_AS(trees::fit_gbt(x, std::vector<int>{0, 1}), ValidationError);
    CHECK_THROWS_AS(trees::fit_gbt(x, std::vector<int>{0, -1, 1}), ValidationError);
    CHECK_THROWS_AS(trees::fit_gbt(x, std::vector<int>{0, 3, 1}, {}, 2), ValidationError);
    trees::GbtSettings s;
    s.learning_rate = 0.0;
    CHECK_THROWS_AS(trees::fit_gbt(x, std::vector<int>{0, 1, 1}, s), ValidationError);
    x(1, 0) = std::nan("");
    CHECK_THROWS_AS(trees::fit_gbt(x, std::vector<int>{0, 1, 1}), ValidationError);
  }
}
