#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "disentlab/io/tensor.hpp"
#include "disentlab/metrics/metrics.hpp"
#include "disentlab/synth/factor_space.hpp"
#include "disentlab/vae/model.hpp"

namespace acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// A rendered factor grid held in memory: one row per grid cell, in flat
/// index order.
struct Grid {
  disentlab::synth::FactorSpace space;
  disentlab::io::Tensor images;
  disentlab::metrics::FactorTable factors;
};

Grid render_grid(const disentlab::synth::FactorSpace& space);

/// State shared between criteria so that the source models trained for
/// criterion 2 are reused by criterion 3.
struct Context {
  std::filesystem::path scratch;
  std::optional<Grid> desk;
  // Ada-GVAE models at beta 1 for the criterion 2 seeds, with their source MIG.
  std::vector<disentlab::vae::VaeModel<float>> ada_models;
  std::vector<double> ada_mig;
  double ada_train_seconds = 0.0;

  const Grid& desk_grid();
};

inline constexpr std::uint64_t kSeeds[] = {0, 1, 2};

Outcome metric_oracles(Context& ctx);
Outcome weak_supervision(Context& ctx);
Outcome finetune_persistence(Context& ctx);
Outcome numerical_correctness(Context& ctx);
Outcome tree_properties(Context& ctx);
Outcome protocol_fidelity(Context& ctx);
Outcome geometry(Context& ctx);
Outcome openset_shape(Context& ctx);

}  // namespace acceptance
