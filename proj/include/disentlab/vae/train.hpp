#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "disentlab/io/manifest.hpp"
#include "disentlab/io/tensor.hpp"
#include "disentlab/synth/factor_space.hpp"
#include "disentlab/vae/losses.hpp"
#include "disentlab/vae/model.hpp"

namespace disentlab::vae {

enum class Objective { beta_vae, ada_gvae };

std::string to_string(Objective o);
Objective parse_objective(const std::string& s);

struct TrainConfig {
  double beta = 1.0;
  long steps = 30000;
  int batch = 64;
  long warmup_steps = 3750;
  nn::AdamConfig adam{};
  std::uint64_t seed = 0;
  int k = 1;
  int finetune_epochs = 20;
  int log_every = 100;
  // The full loss is evaluated on every loss_every-th step only; gradients
  // are computed on every step regardless.
  int loss_every = 10;

  // 400k steps, 50k warm-up.
  static TrainConfig paper();
  // 30k steps with the same warm-up ratio.
  static TrainConfig desk();
  void validate() const;
};

/// Linear deterministic warm-up: beta * min(1, step / warmup_steps).
double effective_beta(double beta, long step, long warmup_steps);

struct TrainLog {
  int window = 100;
  std::vector<double> window_loss;        // mean evaluated loss per window of `window` steps
  std::vector<double> window_shared;      // Ada-GVAE: mean shared-dim fraction per window
  long steps = 0;
};

struct TrainResult {
  VaeModel<float> model;
  TrainLog log;
};

/// Maps each grid cell of a factor space to the data row holding it.
class PairIndex {
 public:
  PairIndex(synth::FactorSpace space, std::vector<std::uint64_t> row_of_flat);
  // Requires the manifest's factor columns to cover every grid cell once.
  static PairIndex from_manifest(const synth::FactorSpace& space, const io::Manifest& manifest);

  const synth::FactorSpace& space() const { return space_; }
  std::uint64_t row(const synth::FactorTuple& t) const { return row_of_flat_[space_.flat_index(t)]; }

 private:
  synth::FactorSpace space_;
  std::vector<std::uint64_t> row_of_flat_;
};

/// Copy tensor rows into a (features x rows) column-major batch.
Matrix<float> gather_columns(const io::Tensor& data, std::span<const std::uint64_t> rows);
Matrix<float> to_columns(const io::Tensor& data);

using StepCallback = std::function<void(long step, const LossTerms&)>;

/// Source training. beta_vae draws shuffled minibatches of `data`; ada_gvae
/// draws batch / 2 pairs differing in `k` factors through `pairs`, so both
/// objectives see `batch` images per step. One RNG stream seeded from
/// config.seed drives init, batching and noise.
TrainResult train(const VaeSpec& spec, const TrainConfig& config, const io::Tensor& data, Objective objective,
                  const PairIndex* pairs = nullptr, const StepCallback& on_step = {});

/// Continue training every parameter with the beta-VAE objective at the
/// model's beta, no warm-up, fresh optimizer state, for `epochs` passes.
TrainResult finetune(const VaeModel<float>& source, const io::Tensor& target, int epochs, const TrainConfig& config);

/// Posterior means of every row (rows x L).
io::Tensor encode_means(const VaeModel<float>& model, const io::Tensor& data);

}  // namespace disentlab::vae
