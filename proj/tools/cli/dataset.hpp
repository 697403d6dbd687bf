#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "disentlab/io/manifest.hpp"
#include "disentlab/io/tensor.hpp"
#include "disentlab/metrics/metrics.hpp"
#include "disentlab/synth/factor_space.hpp"
#include "disentlab/synth/render.hpp"
#include "disentlab/vae/model.hpp"

namespace disentlab::cli {

/// A dataset directory: data.dtns (one row per item), manifest.csv,
/// dataset.json (input kind, image shape, factor space) and optionally
/// masks.dtns referenced by mask_row.
struct Dataset {
  std::filesystem::path dir;
  io::Tensor data;
  io::Manifest manifest;
  nlohmann::json meta;
  std::optional<io::Tensor> masks;

  vae::InputKind kind() const;
  int input_dim() const { return static_cast<int>(data.row_size()); }
  // Image height, width, channels; throws for embedding datasets.
  std::vector<int> image_shape() const;
  std::optional<synth::FactorSpace> factor_space() const;

  // Manifest row indices: every row, or those in a split.
  std::vector<std::size_t> all_rows() const;
  std::vector<std::size_t> rows_in(io::Split s) const;
  // Data rows for the given manifest rows, as a new tensor.
  io::Tensor gather(std::span<const std::size_t> rows) const;
  metrics::FactorTable factors(std::span<const std::size_t> rows) const;
};

inline constexpr const char* kDataFile = "data.dtns";
inline constexpr const char* kManifestFile = "manifest.csv";
inline constexpr const char* kMetaFile = "dataset.json";
inline constexpr const char* kMaskFile = "masks.dtns";

Dataset load_dataset(const std::filesystem::path& dir);
void save_dataset(const Dataset& d);

nlohmann::json factor_space_json(const synth::FactorSpace& space);
synth::FactorSpace factor_space_from_json(const nlohmann::json& j);

/// Display name of a factor value: shape, texture and color names for the
/// renderer's factors, "<Factor><value>" otherwise.
std::string value_name(const std::string& factor, int value);

/// Render the full grid of `space` into a dataset (images, masks, manifest).
Dataset render_dataset(const std::filesystem::path& dir, const synth::FactorSpace& space, const synth::RenderSpec& spec,
                       std::uint64_t max_bytes);

}  // namespace disentlab::cli
