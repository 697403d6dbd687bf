#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <utility>
#include <vector>

#include "disentlab/common/error.hpp"
#include "disentlab/common/random.hpp"
#include "disentlab/metrics/metrics.hpp"

using namespace disentlab;
using metrics::AssociationMatrix;

namespace {

// Mutual information from an explicit map of joint counts.
double mi_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> pa, pb;
  const double n = static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0 / n;
    pa[a[i]] += 1.0 / n;
    pb[b[i]] += 1.0 / n;
  }
  double mi = 0.0;
  for (const auto& [key, p] : joint) mi += p * std::log(p / (pa[key.first] * pb[key.second]));
  return mi;
}

AssociationMatrix make_assoc(const Eigen::MatrixXd& values) {
  AssociationMatrix a;
  for (Eigen::Index k = 0; k < values.rows(); ++k) a.factors.push_back("f" + std::to_string(k));
  a.values = values;
  return a;
}

// Every combination of the given cardinalities, one row each.
metrics::FactorTable full_grid(const std::vector<int>& cards) {
  metrics::FactorTable t;
  int rows = 1;
  for (std::size_t k = 0; k < cards.size(); ++k) {
    t.names.push_back("f" + std::to_string(k));
    rows *= cards[k];
  }
  t.values.resize(rows, static_cast<Eigen::Index>(cards.size()));
  for (int r = 0; r < rows; ++r) {
    int rest = r;
    for (std::size_t k = cards.size(); k-- > 0;) {
      t.values(r, static_cast<Eigen::Index>(k)) = rest % cards[k];
      rest /= cards[k];
    }
  }
  return t;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("discretize uses uniform bins with the maximum in the last bin") {
    Eigen::VectorXd v(5);
    v << 0.0, 0.25, 0.5, 0.75, 1.0;
    CHECK(metrics::discretize(v, 4) == std::vector<int>{0, 1, 2, 3, 3});
    CHECK(metrics::discretize(Eigen::VectorXd::Constant(4, 2.0), 20) == std::vector<int>(4, 0));
    Eigen::VectorXd w(20);
    for (int i = 0; i < 20; ++i) w(i) = i;
    const auto codes = metrics::discretize(w, 20);
    CHECK(codes.front() == 0);
    CHECK(codes.back() == 19);
  }

  TEST_CASE("entropy of uniform codes is log of the count") {
    CHECK(metrics::entropy(std::vector<int>{0, 1, 2, 3}) == doctest::Approx(std::log(4.0)));
    CHECK(metrics::entropy(std::vector<int>{5, 5, 5}) == 0.0);
  }

  TEST_CASE("mutual information matches the joint-histogram oracle") {
    Rng rng(21);
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<int> a(400), b(400);
      for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = static_cast<int>(rng.uniform_index(5));
        b[i] = rng.uniform01() < 0.6 ? a[i] : static_cast<int>(rng.uniform_index(5));
      }
      CHECK(std::abs(metrics::mutual_information(a, b) - mi_oracle(a, b)) < 1e-12);
    }
    // Exactly independent product grid.
    std::vector<int> a, b;
    for (int i = 0; i < 5; ++i) {
      for (int j = 0; j < 5; ++j) {
        a.push_back(i);
        b.push_back(j);
      }
    }
    CHECK(std::abs(metrics::mutual_information(a, b)) < 1e-12);
    CHECK(metrics::mutual_information(a, a) == doctest::Approx(std::log(5.0)));
  }

  TEST_CASE("mutual information is symmetric and bounded by the entropies") {
    Rng rng(4);
    std::vector<int> a(300), b(300);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = static_cast<int>(rng.uniform_index(6));
      b[i] = (a[i] + static_cast<int>(rng.uniform_index(3))) % 7;
    }
    const double ab = metrics::mutual_information(a, b);
    CHECK(ab == doctest::Approx(metrics::mutual_information(b, a)).epsilon(1e-12));
    CHECK(ab <= metrics::entropy(a) + 1e-12);
    CHECK(ab <= metrics::entropy(b) + 1e-12);
    CHECK(ab >= 0.0);
  }

  TEST_CASE("MIG formula oracle") {
    Eigen::MatrixXd v(2, 3);
    v << 0.9, 0.2, 0.1,
         0.3, 0.8, 0.0;
    const auto r = metrics::mig(make_assoc(v));
    CHECK(std::abs(r.score - 0.6) < 1e-12);
    CHECK(std::abs(r.per_factor[0] - 0.7) < 1e-12);
    CHECK_THROWS_AS(metrics::mig(make_assoc(Eigen::MatrixXd::Ones(2, 1))), ValidationError);
  }

  TEST_CASE("DCI formula oracle") {
    Eigen::MatrixXd p(2, 2);
    p << 1, 0,
         1, 1;
    const auto r = metrics::dci_from_importance(p);
    CHECK(std::abs(r.disentanglement - 1.0 / 3.0) < 1e-12);
    CHECK(std::abs(r.completeness - 1.0 / 3.0) < 1e-12);

    Eigen::MatrixXd q(3, 2);
    q << 0.2, 0.6,
         0.1, 0.0,
         0.05, 0.05;
    // Oracle: d_j = 1 + sum p log p / log K, weighted by row share.
    double d = 0.0;
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double s = q.row(j).sum();
      double h = 0.0;
      for (Eigen::Index k = 0; k < 2; ++k) {
        if (q(j, k) > 0) h -= q(j, k) / s * std::log(q(j, k) / s);
      }
      d += s / q.sum() * (1.0 - h / std::log(2.0));
    }
    CHECK(std::abs(metrics::dci_from_importance(q).disentanglement - d) < 1e-12);

    CHECK(metrics::dci_from_importance(Eigen::MatrixXd::Identity(4, 4)).disentanglement == doctest::Approx(1.0));
    CHECK(std::abs(metrics::dci_from_importance(Eigen::MatrixXd::Ones(4, 3)).disentanglement) < 1e-12);
    CHECK(metrics::dci_from_importance(Eigen::MatrixXd::Zero(3, 2)).degenerate);
  }

  TEST_CASE("OMES formula oracle") {
    Eigen::MatrixXd v(2, 3);
    v << 0.8, 0.2, 0.0,
         0.4, 0.1, 0.5;
    const auto r = metrics::omes(make_assoc(v), 0.5);
    // Factor 0: j*=0, comp 0.8/1.0, mod 0.8/1.2. Factor 1: j*=2, comp 0.5/1.0, mod 0.5/0.5.
    const double t0 = 0.8 * (0.5 * (0.8 / 1.2) + 0.5 * 0.8);
    const double t1 = 0.5 * (0.5 * 1.0 + 0.5 * 0.5);
    CHECK(std::abs(r.score - 0.5 * (t0 + t1)) < 1e-12);
    CHECK(r.best_dim == std::vector<int>{0, 2});

    for (const double alpha : {0.0, 0.3, 1.0}) {
      const auto u = metrics::omes(make_assoc(Eigen::MatrixXd::Ones(3, 5)), alpha);
      CHECK(std::abs(u.score - (alpha / 3.0 + (1.0 - alpha) / 5.0)) < 1e-12);
    }
    CHECK(metrics::omes(make_assoc(Eigen::MatrixXd::Identity(4, 6))).score == doctest::Approx(1.0));
    CHECK(metrics::omes(make_assoc(Eigen::MatrixXd::Zero(2, 3))).degenerate);
    CHECK_THROWS_AS(metrics::omes(make_assoc(v), 1.5), ValidationError);
  }

  TEST_CASE("a perfect representation scores near one") {
    const auto f = full_grid({3, 4, 5});
    const metrics::Representation z = f.values.cast<double>();
    const auto a = metrics::association_matrix(z, f);
    CHECK(a.values.isApprox(Eigen::MatrixXd::Identity(3, 3)));
    CHECK(metrics::mig(a).score == doctest::Approx(1.0));
    CHECK(metrics::omes(a).score == doctest::Approx(1.0));
    const auto d = metrics::dci(z, f);
    CHECK(d.disentanglement > 0.99);
    CHECK(d.informativeness == doctest::Approx(1.0));
  }

  TEST_CASE("constant factors are left out of the association matrix") {
    auto f = full_grid({3, 4});
    f.names.push_back("frozen");
    f.values.conservativeResize(Eigen::NoChange, 3);
    f.values.col(2).setConstant(2);
    const metrics::Representation z = f.values.cast<double>();
    const auto a = metrics::association_matrix(z, f);
    CHECK(a.factors == std::vector<std::string>{"f0", "f1"});
    CHECK(a.factor_columns == std::vector<std::size_t>{0, 1});
    CHECK(a.values.rows() == 2);
  }

  TEST_CASE("dimension labels follow the column argmax") {
    Eigen::MatrixXd v(2, 3);
    v << 0.6, 0.0, 0.1,
         0.2, 0.0, 0.3;
    const auto labels = metrics::label_dimensions(make_assoc(v));
    CHECK(labels[0].factor == "f0");
    CHECK(labels[0].confidence == doctest::Approx(0.75));
    CHECK(labels[1].factor == metrics::kInactive);
    CHECK(labels[2].factor == "f1");
    CHECK(labels[2].confidence == doctest::Approx(0.75));
  }

  TEST_CASE("pruning keeps exactly the columns with SD at or above the threshold") {
    metrics::Representation z(4, 4);
    z << 0.25, 1.0, 0.0, 0.2,
        -0.25, 1.0, 0.0, -0.2,
         0.25, 1.0, 0.0, 0.2,
        -0.25, 1.0, 0.0, -0.2;
    const auto p = metrics::prune_inactive(z, 0.25);
    CHECK(p.kept == std::vector<int>{0});
    CHECK(p.sd[0] == 0.25);
    CHECK(p.apply(z).cols() == 1);
    CHECK(metrics::prune_inactive(z, 0.05).kept == std::vector<int>{0, 3});
    CHECK_THROWS_AS(metrics::prune_inactive(z, 1.0), ValidationError);
  }

  TEST_CASE("explicitness scores test rows and skips factors constant in train") {
    const auto f = full_grid({4, 3});
    const metrics::Representation z = f.values.cast<double>();
    std::vector<std::size_t> train, test;
    // Test rows (0,1), (1,2), (3,0): every value also appears in train.
    for (std::size_t r = 0; r < 12; ++r) (r % 4 == 1 ? test : train).push_back(r);
    const auto e = metrics::explicitness(z, f, train, test);
    CHECK(e.factors == std::vector<std::string>{"f0", "f1"});
    CHECK(e.mean == doctest::Approx(1.0));

    metrics::FactorTable g = f;
    g.names.push_back("c");
    g.values.conservativeResize(Eigen::NoChange, 3);
    g.values.col(2).setZero();
    CHECK(metrics::explicitness(z, g, train, test).skipped == std::vector<std::string>{"c"});
  }

  TEST_CASE("noise representations score low") {
    Rng rng(2);
    metrics::FactorTable f;
    f.names = {"a", "b", "c"};
    f.values.resize(5000, 3);
    const int cards[] = {5, 6, 8};
    for (Eigen::Index r = 0; r < 5000; ++r) {
      for (int k = 0; k < 3; ++k) f.values(r, k) = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(cards[k])));
    }
    metrics::Representation z(5000, 6);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      for (Eigen::Index c = 0; c < z.cols(); ++c) z(r, c) = rng.normal();
    }
    const auto a = metrics::association_matrix(z, f);
    CHECK(metrics::mig(a).score < 0.1);
    CHECK(metrics::omes(a).score < 0.1);
  }
}
