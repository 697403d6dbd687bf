#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace disentlab::io {

enum class Split { train, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestRow {
  std::string id;
  std::uint64_t tensor_row = 0;
  std::optional<std::string> class_label;
  std::optional<Split> split;
  std::optional<std::uint64_t> mask_row;
  std::vector<int> factors;  // aligned with Manifest::factor_names
};

/// Comma-separated table: id, tensor_row, [class_label], [split], [mask_row],
/// id_hash, factor_<name>...  Bracketed columns are written only when some
/// row carries a value. id_hash is always written and is optional on read.
struct Manifest {
  std::vector<std::string> factor_names;
  std::vector<ManifestRow> rows;

  bool has_class_labels() const;
  bool has_splits() const;
  bool has_masks() const;

  // Sorted distinct class labels; class index = position in this list.
  std::vector<std::string> class_names() const;
  std::vector<int> class_indices(const std::vector<std::string>& names) const;

  // Rows whose split equals `s`, in manifest order.
  std::vector<std::size_t> rows_in(Split s) const;

  // Throws ValidationError on duplicate ids, tensor_row >= tensor_rows,
  // partially filled factor columns or mismatched id_hash values.
  void validate(std::uint64_t tensor_rows) const;
};

/// Hex FNV-1a 64 of the id, used by external writers to prove row alignment.
std::string id_hash(const std::string& id);

void write_manifest(std::ostream& out, const Manifest& m);
Manifest read_manifest(std::istream& in);
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace disentlab::io
