#include <doctest.h>

#include <cmath>

#include "disentlab/common/error.hpp"
#include "disentlab/common/random.hpp"
#include "disentlab/downstream/downstream.hpp"

using namespace disentlab;
using downstream::LabeledSet;

namespace {

// Gaussian blobs at distinct centres along the first feature; the second
// feature is noise.
LabeledSet blobs(Rng& rng, int per_class, int classes) {
  LabeledSet s;
  s.x.resize(per_class * classes, 2);
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      s.x(r, 0) = 3.0 * c + 0.2 * rng.normal();
      s.x(r, 1) = rng.normal();
      s.y.push_back(c);
    }
  }
  return s;
}

downstream::ProtocolSettings fast_settings() {
  downstream::ProtocolSettings s;
  s.gbt.rounds = 20;
  s.mlp.hidden = {16};
  s.mlp.epochs = 150;
  s.mlp.learning_rate = 1e-2;
  return s;
}

}  // namespace

TEST_SUITE("downstream") {
  TEST_CASE("summary is in percentage points with population SD") {
    const std::vector<double> f{0.5, 0.7};
    const auto s = downstream::summarize(f);
    CHECK(s.mean == doctest::Approx(60.0));
    CHECK(s.sd == doctest::Approx(10.0));
    CHECK(s.values == std::vector<double>{50.0, 70.0});
    const std::vector<double> one{0.25};
    CHECK(downstream::summarize(one).sd == 0.0);
  }

  TEST_CASE("MLP separates blobs and is deterministic per seed") {
    Rng rng(1);
    const auto train = blobs(rng, 40, 3);
    const auto test = blobs(rng, 20, 3);
    auto settings = fast_settings().mlp;
    const auto a = downstream::mlp_classify(train, test, 3, settings);
    const auto b = downstream::mlp_classify(train, test, 3, settings);
    CHECK(a.accuracy == 1.0);
    CHECK_FALSE(a.diverged);
    CHECK(a.accuracy == b.accuracy);
    settings.batch = 0;
    CHECK_THROWS_AS(downstream::mlp_classify(train, test, 3, settings), ValidationError);
  }

  TEST_CASE("protocol prunes, evaluates and excludes dead members") {
    Rng rng(2);
    const auto train = blobs(rng, 30, 2);
    const auto test = blobs(rng, 10, 2);
    std::vector<downstream::MemberRepresentation> members;
    for (int m = 0; m < 2; ++m) {
      downstream::MemberRepresentation r;
      r.name = "m" + std::to_string(m);
      r.seed = static_cast<std::uint64_t>(m);
      r.beta = 1.0;
      r.train.resize(train.x.rows(), 3);
      r.train << train.x, Eigen::VectorXd::Constant(train.x.rows(), 0.01 * m);
      r.test.resize(test.x.rows(), 3);
      r.test << test.x, Eigen::VectorXd::Zero(test.x.rows());
      r.dim_labels = {"Shape", "Color", "inactive"};
      members.push_back(r);
    }
    downstream::MemberRepresentation dead;
    dead.name = "dead";
    dead.train = Eigen::MatrixXd::Zero(train.x.rows(), 2);
    dead.test = Eigen::MatrixXd::Zero(test.x.rows(), 2);
    members.push_back(dead);

    const auto report = downstream::evaluate_representations(members, train.y, test.y, fast_settings());
    REQUIRE(report.members.size() == 3);
    CHECK(report.members[0].kept == std::vector<int>{0, 1});
    CHECK(report.members[0].labels == std::vector<std::string>{"Shape", "Color"});
    CHECK(report.members[2].excluded);
    CHECK(report.warnings.size() == 1);
    CHECK(report.gbt.values.size() == 2);
    CHECK(report.gbt.mean == 100.0);
    CHECK(report.mlp.values.size() == 2);
    CHECK(report.importance.labels == std::vector<std::string>{"Shape", "Color"});
    CHECK(report.importance.mean[0] > 0.9);
  }

  TEST_CASE("raw-feature ablation shares the GBT result across runs") {
    Rng rng(3);
    const auto train = blobs(rng, 20, 2);
    const auto test = blobs(rng, 10, 2);
    const auto report = downstream::ablate_no_vae(train, test, fast_settings(), 3);
    CHECK(report.no_vae);
    CHECK(report.members.size() == 3);
    CHECK(report.gbt.sd == 0.0);
    CHECK(report.members[2].seed == 2);
    CHECK(report.importance.labels == std::vector<std::string>{"dim_0", "dim_1"});
  }

  TEST_CASE("grouped importance oracle") {
    downstream::MemberOutcome a;
    a.name = "a";
    a.labels = {"Shape", "Color", "Shape"};
    a.importance = {0.2, 0.5, 0.3};
    downstream::MemberOutcome b;
    b.name = "b";
    b.labels = {"Color", "Shape"};
    b.importance = {1.0, 0.0};
    const auto g = downstream::grouped_importance({a, b});
    CHECK(g.labels == std::vector<std::string>{"Shape", "Color"});
    CHECK(g.mean[0] == doctest::Approx(0.25));
    CHECK(g.mean[1] == doctest::Approx(0.75));
    CHECK(g.sd[0] == doctest::Approx(0.25));
    CHECK(g.sd[1] == doctest::Approx(0.25));
  }

  TEST_CASE("a class missing from training is rejected") {
    Rng rng(4);
    auto train = blobs(rng, 5, 2);
    auto test = blobs(rng, 5, 3);
    CHECK_THROWS_AS(downstream::ablate_no_vae(train, test, fast_settings(), 1), ValidationError);
  }
}
