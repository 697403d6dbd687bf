#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "disentlab/common/error.hpp"
#include "disentlab/common/random.hpp"
#include "disentlab/vae/checkpoint.hpp"
#include "disentlab/vae/losses.hpp"
#include "disentlab/vae/train.hpp"

using namespace disentlab;
using vae::Matrix;

namespace {

vae::VaeModel<double> small_model(vae::InputKind kind, std::uint64_t seed) {
  vae::VaeSpec spec;
  spec.input_dim = 7;
  spec.latent_dim = 3;
  spec.hidden = {6, 5};
  spec.input_kind = kind;
  Rng rng(seed);
  vae::VaeModel<double> model(spec, rng);
  // Biases start at zero, which puts all-zero input columns exactly on the
  // ReLU kink where central differences are meaningless.
  for (auto block : model.parameter_blocks()) {
    for (auto& v : block) v += 0.05 * rng.normal();
  }
  return model;
}

Matrix<double> random_batch(Rng& rng, int rows, int cols, bool binary_sparse) {
  Matrix<double> x(rows, cols);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = binary_sparse ? (rng.uniform01() < 0.15 ? rng.uniform01() : 0.0) : rng.normal();
  }
  return x;
}

Matrix<double> noise(Rng& rng, int rows, int cols) {
  Matrix<double> e(rows, cols);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
  return e;
}

// Central differences over every parameter; returns the worst relative error.
template <typename LossFn>
double max_gradient_error(vae::VaeModel<double>& model, LossFn loss) {
  auto grads = vae::VaeGradients<double>::zeros_like(model);
  loss(&grads);
  auto params = model.parameter_blocks();
  auto analytic = grads.blocks();
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double saved = params[b][i];
      params[b][i] = saved + h;
      const double up = loss(nullptr);
      params[b][i] = saved - h;
      const double down = loss(nullptr);
      params[b][i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double g = analytic[b][i];
      const double scale = std::max({std::abs(fd), std::abs(g), 1e-3});
      worst = std::max(worst, std::abs(fd - g) / scale);
    }
  }
  return worst;
}

double simpson_kl(double mu, double logvar) {
  const double sd = std::exp(0.5 * logvar);
  const double lo = mu - 14.0 * sd;
  const double hi = mu + 14.0 * sd;
  const int n = 20000;
  const double step = (hi - lo) / n;
  auto f = [&](double z) {
    const double lq = -0.5 * std::log(2.0 * M_PI) - 0.5 * logvar - 0.5 * (z - mu) * (z - mu) / (sd * sd);
    const double lp = -0.5 * std::log(2.0 * M_PI) - 0.5 * z * z;
    return std::exp(lq) * (lq - lp);
  };
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += f(lo + i * step) * (i % 2 ? 4.0 : 2.0);
  return s * step / 3.0;
}

io::Tensor random_tensor(Rng& rng, std::uint64_t rows, std::uint64_t cols) {
  io::Tensor t({rows, cols});
  for (auto& v : t.values) v = static_cast<float>(rng.normal());
  return t;
}

bool same_parameters(vae::VaeModel<float> a, vae::VaeModel<float> b) {
  const auto pa = a.parameter_blocks();
  const auto pb = b.parameter_blocks();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!std::equal(pa[i].begin(), pa[i].end(), pb[i].begin(), pb[i].end())) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("vae") {
  TEST_CASE("gauss_kl matches quadrature") {
    for (const double mu : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
      for (const double lv : {-3.0, -1.0, 0.0, 0.5, 2.0}) {
        CHECK(std::abs(vae::gauss_kl(mu, lv) - simpson_kl(mu, lv)) < 1e-6);
      }
    }
    CHECK(vae::gauss_kl(0.0, 0.0) == 0.0);
  }

  TEST_CASE("symmetric KL is zero for identical Gaussians and symmetric") {
    CHECK(vae::symmetric_kl(0.3, 2.0, 0.3, 2.0) == 0.0);
    CHECK(vae::symmetric_kl(0.1, 1.5, -0.4, 0.7) == doctest::Approx(vae::symmetric_kl(-0.4, 0.7, 0.1, 1.5)));
    // Equal variances: 0.5 * (d^2 / v).
    CHECK(vae::symmetric_kl(1.0, 2.0, 0.0, 2.0) == doctest::Approx(0.25));
  }

  TEST_CASE("ELBO gradients match finite differences") {
    for (const auto kind : {vae::InputKind::embedding, vae::InputKind::image}) {
      auto model = small_model(kind, 4);
      Rng rng(5);
      const bool image = kind == vae::InputKind::image;
      const auto x = random_batch(rng, 7, 6, image);
      const auto eps = noise(rng, 3, 6);
      const double err = max_gradient_error(model, [&](vae::VaeGradients<double>* g) {
        return vae::elbo_loss(model, x, 0.7, eps, g).loss;
      });
      CHECK(err < 1e-4);
    }
  }

  TEST_CASE("Ada-GVAE gradients match finite differences") {
    for (const auto kind : {vae::InputKind::embedding, vae::InputKind::image}) {
      auto model = small_model(kind, 6);
      Rng rng(7);
      const auto x = random_batch(rng, 7, 8, kind == vae::InputKind::image);
      const auto eps = noise(rng, 3, 8);
      const double err = max_gradient_error(model, [&](vae::VaeGradients<double>* g) {
        return vae::adagvae_loss(model, x, 1.3, eps, g).loss;
      });
      CHECK(err < 1e-4);
    }
  }

  TEST_CASE("skipping the loss value leaves gradients unchanged") {
    auto model = small_model(vae::InputKind::image, 8);
    Rng rng(9);
    const auto x = random_batch(rng, 7, 5, true);
    const auto eps = noise(rng, 3, 5);
    auto g1 = vae::VaeGradients<double>::zeros_like(model);
    auto g2 = vae::VaeGradients<double>::zeros_like(model);
    const auto full = vae::elbo_loss(model, x, 1.0, eps, &g1, true);
    const auto skipped = vae::elbo_loss(model, x, 1.0, eps, &g2, false);
    CHECK(std::isnan(skipped.loss));
    CHECK(skipped.kl == full.kl);
    const auto b1 = g1.blocks();
    const auto b2 = g2.blocks();
    for (std::size_t i = 0; i < b1.size(); ++i) CHECK(std::equal(b1[i].begin(), b1[i].end(), b2[i].begin()));
  }

  TEST_CASE("Ada-GVAE with every dim individual equals the ELBO") {
    auto model = small_model(vae::InputKind::embedding, 10);
    Rng rng(11);
    const auto x = random_batch(rng, 7, 6, false);
    const auto eps = noise(rng, 3, 6);
    const auto ada = vae::adagvae_loss<double>(model, x, 2.0, eps, nullptr, 3);
    const auto elbo = vae::elbo_loss<double>(model, x, 2.0, eps, nullptr);
    CHECK(ada.loss == doctest::Approx(elbo.loss).epsilon(1e-12));
  }

  TEST_CASE("shared-dim selection") {
    const std::vector<double> d{0.1, 5.0, 0.2, 4.0};
    CHECK(vae::select_shared_dims(d) == std::vector<bool>{true, false, true, false});
    CHECK(vae::select_shared_dims(d, 1) == std::vector<bool>{true, false, true, true});
    const std::vector<double> flat{1.0, 1.0, 1.0};
    CHECK(vae::select_shared_dims(flat) == std::vector<bool>{false, true, true});
    CHECK(vae::select_shared_dims(flat, 2) == std::vector<bool>{false, false, true});
    CHECK_THROWS_AS(vae::select_shared_dims(d, 5), ValidationError);
  }

  TEST_CASE("warm-up is linear and capped") {
    CHECK(vae::effective_beta(2.0, 0, 100) == 0.0);
    CHECK(vae::effective_beta(2.0, 50, 100) == 1.0);
    CHECK(vae::effective_beta(2.0, 500, 100) == 2.0);
    CHECK(vae::effective_beta(2.0, 0, 0) == 2.0);
  }

  TEST_CASE("training is deterministic per seed and lowers the loss") {
    Rng rng(12);
    const auto data = random_tensor(rng, 40, 8);
    vae::VaeSpec spec = vae::VaeSpec::for_embeddings(8);
    spec.hidden = {16};
    spec.latent_dim = 3;
    vae::TrainConfig cfg;
    cfg.steps = 300;
    cfg.warmup_steps = 50;
    cfg.batch = 16;
    cfg.log_every = 50;
    cfg.loss_every = 1;
    cfg.adam.learning_rate = 1e-2;
    const auto a = vae::train(spec, cfg, data, vae::Objective::beta_vae);
    const auto b = vae::train(spec, cfg, data, vae::Objective::beta_vae);
    CHECK(same_parameters(a.model, b.model));
    CHECK(a.log.window_loss == b.log.window_loss);
    REQUIRE(a.log.window_loss.size() == 6);
    CHECK(a.log.window_loss.back() < a.log.window_loss.front());
    cfg.seed = 1;
    CHECK_FALSE(same_parameters(a.model, vae::train(spec, cfg, data, vae::Objective::beta_vae).model));
  }

  TEST_CASE("Ada-GVAE training runs on a pair index") {
    synth::FactorSpace space({{"A", 4, {}}, {"B", 5, {}}});
    Rng rng(13);
    const auto data = random_tensor(rng, 20, 6);
    std::vector<std::uint64_t> rows(20);
    std::iota(rows.begin(), rows.end(), 0);
    const vae::PairIndex index(space, rows);
    vae::VaeSpec spec = vae::VaeSpec::for_embeddings(6);
    spec.hidden = {8};
    spec.latent_dim = 2;
    vae::TrainConfig cfg;
    cfg.steps = 50;
    cfg.warmup_steps = 10;
    cfg.batch = 8;
    cfg.log_every = 10;
    const auto r = vae::train(spec, cfg, data, vae::Objective::ada_gvae, &index);
    CHECK(r.log.window_shared.size() == 5);
    for (const double s : r.log.window_shared) CHECK((s >= 0.0 && s <= 1.0));
    CHECK_THROWS_AS(vae::train(spec, cfg, data, vae::Objective::ada_gvae), ValidationError);
    cfg.batch = 7;
    CHECK_THROWS_AS(vae::train(spec, cfg, data, vae::Objective::ada_gvae, &index), ValidationError);
  }

  TEST_CASE("finetuning updates the model deterministically") {
    Rng rng(14);
    const auto data = random_tensor(rng, 30, 5);
    vae::VaeSpec spec = vae::VaeSpec::for_embeddings(5);
    spec.hidden = {8};
    spec.latent_dim = 2;
    vae::TrainConfig cfg;
    cfg.steps = 20;
    cfg.warmup_steps = 0;
    cfg.batch = 10;
    const auto src = vae::train(spec, cfg, data, vae::Objective::beta_vae);
    const auto target = random_tensor(rng, 25, 5);
    const auto a = vae::finetune(src.model, target, 2, cfg);
    const auto b = vae::finetune(src.model, target, 2, cfg);
    CHECK(same_parameters(a.model, b.model));
    CHECK_FALSE(same_parameters(a.model, src.model));
    CHECK(same_parameters(vae::finetune(src.model, target, 0, cfg).model, src.model));
    CHECK_THROWS_AS(vae::finetune(src.model, random_tensor(rng, 4, 3), 1, cfg), ValidationError);
  }

  TEST_CASE("encoded means have one row per input") {
    Rng rng(15);
    const auto data = random_tensor(rng, 9, 4);
    vae::VaeSpec spec = vae::VaeSpec::for_embeddings(4);
    spec.hidden = {5};
    spec.latent_dim = 3;
    Rng init(1);
    const vae::VaeModel<float> model(spec, init);
    const auto z = vae::encode_means(model, data);
    CHECK(z.dims == std::vector<std::uint64_t>{9, 3});
    // Duplicate rows encode identically.
    auto dup = data;
    std::copy(dup.row(0).begin(), dup.row(0).end(), dup.row(1).begin());
    const auto zd = vae::encode_means(model, dup);
    CHECK(std::equal(zd.row(0).begin(), zd.row(0).end(), zd.row(1).begin()));
  }

  TEST_CASE("checkpoint round trip is exact") {
    vae::VaeSpec spec = vae::VaeSpec::for_images(12);
    spec.hidden = {6, 4};
    spec.latent_dim = 3;
    spec.beta = 0.1 + 0.2;
    spec.seed = 77;
    Rng rng(16);
    const vae::VaeModel<float> model(spec, rng);
    const auto dir = std::filesystem::temp_directory_path() / "disentlab_ckpt_test";
    std::filesystem::remove_all(dir);
    vae::save_checkpoint(dir, model, {{"objective", "ada_gvae"}});
    const auto back = vae::load_checkpoint(dir);
    CHECK(same_parameters(back.model, model));
    CHECK(back.model.spec.beta == spec.beta);
    CHECK(back.model.spec.seed == 77);
    CHECK(back.model.spec.hidden == spec.hidden);
    CHECK(back.model.spec.input_kind == vae::InputKind::image);
    CHECK(back.metadata.at("objective") == "ada_gvae");

    std::ofstream(dir / "header.txt", std::ios::app) << "colour red\n";
    CHECK_THROWS_AS(vae::load_checkpoint(dir), ValidationError);
    std::filesystem::remove_all(dir);
    CHECK_THROWS_AS(vae::load_checkpoint(dir), ValidationError);
  }
}
