#include "cli/dataset.hpp"

#include <array>
#include <fstream>
#include <numeric>

#include "disentlab/common/error.hpp"

namespace disentlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

vae::InputKind Dataset::kind() const { return vae::parse_input_kind(meta.value("kind", std::string("embedding"))); }

std::vector<int> Dataset::image_shape() const {
  if (kind() != vae::InputKind::image || !meta.contains("image_shape")) {
    throw ValidationError("dataset " + dir.string() + " does not hold images");
  }
  return meta.at("image_shape").get<std::vector<int>>();
}

std::optional<synth::FactorSpace> Dataset::factor_space() const {
  if (!meta.contains("factor_space")) return std::nullopt;
  return factor_space_from_json(meta.at("factor_space"));
}

std::vector<std::size_t> Dataset::all_rows() const {
  std::vector<std::size_t> r(manifest.rows.size());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

std::vector<std::size_t> Dataset::rows_in(io::Split s) const { return manifest.rows_in(s); }

io::Tensor Dataset::gather(std::span<const std::size_t> rows) const {
  const auto width = data.row_size();
  io::Tensor out({static_cast<std::uint64_t>(rows.size()), width});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = data.row(manifest.rows.at(rows[i]).tensor_row);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

metrics::FactorTable Dataset::factors(std::span<const std::size_t> rows) const {
  if (manifest.factor_names.empty()) throw ValidationError("manifest " + (dir / kManifestFile).string() + " has no factor columns");
  metrics::FactorTable t;
  t.names = manifest.factor_names;
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& f = manifest.rows.at(rows[i]).factors;
    for (std::size_t k = 0; k < f.size(); ++k) t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = f[k];
  }
  return t;
}

Dataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ValidationError("dataset directory not found: " + dir.string());
  Dataset d;
  d.dir = dir;
  const auto meta_path = dir / kMetaFile;
  if (fs::exists(meta_path)) {
    std::ifstream in(meta_path);
    try {
      d.meta = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ValidationError(meta_path.string() + " is not valid JSON: " + e.what());
    }
  } else {
    d.meta = json{{"kind", "embedding"}};
  }
  d.data = io::read_dtns(dir / kDataFile);
  if (d.data.dims.size() < 2) throw ValidationError((dir / kDataFile).string() + " must have rank >= 2");
  d.manifest = io::read_manifest(dir / kManifestFile);
  d.manifest.validate(d.data.rows());
  if (fs::exists(dir / kMaskFile)) d.masks = io::read_dtns(dir / kMaskFile);
  if (d.manifest.has_masks()) {
    if (!d.masks) throw ValidationError("manifest references masks but " + (dir / kMaskFile).string() + " is missing");
    for (const auto& r : d.manifest.rows) {
      if (r.mask_row && *r.mask_row >= d.masks->rows()) {
        throw ValidationError("row " + r.id + " points at mask_row " + std::to_string(*r.mask_row) + " beyond " +
                              (dir / kMaskFile).string());
      }
    }
  }
  if (d.kind() == vae::InputKind::image) {
    const auto shape = d.image_shape();
    if (shape.size() != 3 || static_cast<std::uint64_t>(shape[0]) * shape[1] * shape[2] != d.data.row_size()) {
      throw ValidationError(meta_path.string() + " image_shape does not match the data row size");
    }
  }
  return d;
}

void save_dataset(const Dataset& d) {
  fs::create_directories(d.dir);
  io::write_dtns(d.dir / kDataFile, d.data);
  if (d.masks) io::write_dtns(d.dir / kMaskFile, *d.masks);
  io::write_manifest(d.dir / kManifestFile, d.manifest);
  std::ofstream out(d.dir / kMetaFile);
  out << d.meta.dump(2) << '\n';
  if (!out) throw Error("cannot write " + (d.dir / kMetaFile).string());
}

json factor_space_json(const synth::FactorSpace& space) {
  json out = json::array();
  for (const auto& f : space.factors()) {
    json j{{"name", f.name}, {"cardinality", f.cardinality}};
    j["frozen"] = f.frozen ? json(*f.frozen) : json(nullptr);
    out.push_back(j);
  }
  return out;
}

synth::FactorSpace factor_space_from_json(const json& j) {
  std::vector<synth::Factor> factors;
  for (const auto& f : j) {
    synth::Factor x{f.at("name").get<std::string>(), f.at("cardinality").get<int>(), std::nullopt};
    if (f.contains("frozen") && !f.at("frozen").is_null()) x.frozen = f.at("frozen").get<int>();
    factors.push_back(std::move(x));
  }
  return synth::FactorSpace(std::move(factors));
}

std::string value_name(const std::string& factor, int value) {
  static const std::array<const char*, 3> shapes{"square", "ellipse", "heart"};
  static const std::array<const char*, 5> textures{"solid", "checker", "stripes", "dots", "noise"};
  static const std::array<const char*, 7> colors{"red", "green", "blue", "white", "yellow", "magenta", "cyan"};
  const auto pick = [&](const auto& names) -> std::string {
    if (value >= 0 && static_cast<std::size_t>(value) < names.size()) return names[static_cast<std::size_t>(value)];
    return factor + std::to_string(value);
  };
  if (factor == "Shape") return pick(shapes);
  if (factor == "Texture") return pick(textures);
  if (factor == "Color") return pick(colors);
  return factor + std::to_string(value);
}

Dataset render_dataset(const fs::path& dir, const synth::FactorSpace& space, const synth::RenderSpec& spec,
                       std::uint64_t max_bytes) {
  spec.validate();
  const auto n = space.grid_size();
  const auto side = static_cast<std::uint64_t>(spec.image_side);
  const auto bytes = n * side * side * 4 * 4;
  if (bytes > max_bytes) {
    throw ValidationError("grid of " + std::to_string(n) + " images needs " + std::to_string(bytes) +
                          " bytes, above generate.max_bytes = " + std::to_string(max_bytes));
  }
  Dataset d;
  d.dir = dir;
  d.data = io::Tensor({n, side * side * 3});
  d.masks = io::Tensor({n, side * side});
  for (const auto& f : space.factors()) d.manifest.factor_names.push_back(f.name);
  d.manifest.rows.reserve(n);
  synth::enumerate(space, spec, n, [&](std::uint64_t i, const synth::FactorTuple& t, const Image& img) {
    std::copy(img.data.begin(), img.data.end(), d.data.row(i).begin());
    auto mask = d.masks->row(i);
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      const bool fg = img.data[3 * p] != 0.0f || img.data[3 * p + 1] != 0.0f || img.data[3 * p + 2] != 0.0f;
      mask[p] = fg ? 1.0f : 0.0f;
    }
    io::ManifestRow row;
    row.id = "img" + std::to_string(i);
    row.tensor_row = i;
    row.mask_row = i;
    row.factors = t;
    d.manifest.rows.push_back(std::move(row));
  });
  d.meta = json{{"kind", "image"},
                {"image_shape", {spec.image_side, spec.image_side, 3}},
                {"factor_space", factor_space_json(space)},
                {"render", {{"image_side", spec.image_side}, {"noise_seed", spec.noise_seed}}}};
  return d;
}

}  // namespace disentlab::cli
