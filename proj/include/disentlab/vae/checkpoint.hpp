#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "disentlab/vae/model.hpp"

namespace disentlab::vae {

/// A checkpoint is a directory holding header.txt (one "key value" pair per
/// line: layer sizes, activation, input kind, beta, seed, free-form
/// metadata) and one DTNS file per parameter block. Weights are stored
/// row-major as [outputs, inputs].
struct Checkpoint {
  VaeModel<float> model;
  std::map<std::string, std::string> metadata;  // e.g. objective
};

void save_checkpoint(const std::filesystem::path& dir, const VaeModel<float>& model,
                     const std::map<std::string, std::string>& metadata = {});
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace disentlab::vae
