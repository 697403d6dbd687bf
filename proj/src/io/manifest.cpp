#include "disentlab/io/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "disentlab/common/error.hpp"

namespace disentlab::io {

namespace {

constexpr std::string_view kFactorPrefix = "factor_";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

template <typename T>
T parse_int(const std::string& text, const std::string& column, std::size_t line_no) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ValidationError("manifest line " + std::to_string(line_no) + ": column " + column +
                          " expects an integer, got '" + text + "'");
  }
  return value;
}

void check_field(const std::string& value, const char* column) {
  if (value.find_first_of(",\n\r") != std::string::npos) {
    throw ValidationError(std::string("manifest ") + column + " may not contain commas or newlines: " + value);
  }
}

}  // namespace

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ValidationError("split must be train or test, got '" + s + "'");
}

bool Manifest::has_class_labels() const {
  return std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.class_label.has_value(); });
}
bool Manifest::has_splits() const {
  return std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.split.has_value(); });
}
bool Manifest::has_masks() const {
  return std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.mask_row.has_value(); });
}

std::vector<std::string> Manifest::class_names() const {
  std::set<std::string> names;
  for (const auto& r : rows) {
    if (r.class_label) names.insert(*r.class_label);
  }
  return {names.begin(), names.end()};
}

std::vector<int> Manifest::class_indices(const std::vector<std::string>& names) const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (!r.class_label) throw ValidationError("row " + r.id + " has no class_label");
    const auto it = std::lower_bound(names.begin(), names.end(), *r.class_label);
    if (it == names.end() || *it != *r.class_label) {
      throw ValidationError("row " + r.id + " has unknown class " + *r.class_label);
    }
    out.push_back(static_cast<int>(it - names.begin()));
  }
  return out;
}

std::vector<std::size_t> Manifest::rows_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].split == s) out.push_back(i);
  }
  return out;
}

void Manifest::validate(std::uint64_t tensor_rows) const {
  std::unordered_set<std::string> ids;
  for (const auto& r : rows) {
    if (!ids.insert(r.id).second) throw ValidationError("duplicate manifest id: " + r.id);
    if (r.tensor_row >= tensor_rows) {
      throw ValidationError("row " + r.id + " points at tensor_row " + std::to_string(r.tensor_row) +
                            " but the tensor has " + std::to_string(tensor_rows) + " rows");
    }
    if (r.factors.size() != factor_names.size()) {
      throw ValidationError("row " + r.id + " does not cover every factor column");
    }
  }
}

std::string id_hash(const std::string& id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(std::ostream& out, const Manifest& m) {
  const bool cls = m.has_class_labels();
  const bool spl = m.has_splits();
  const bool msk = m.has_masks();
  out << "id,tensor_row";
  if (cls) out << ",class_label";
  if (spl) out << ",split";
  if (msk) out << ",mask_row";
  out << ",id_hash";
  for (const auto& f : m.factor_names) out << ',' << kFactorPrefix << f;
  out << '\n';
  for (const auto& r : m.rows) {
    check_field(r.id, "id");
    out << r.id << ',' << r.tensor_row;
    if (cls) {
      if (r.class_label) check_field(*r.class_label, "class_label");
      out << ',' << r.class_label.value_or("");
    }
    if (spl) out << ',' << (r.split ? to_string(*r.split) : "");
    if (msk) out << ',' << (r.mask_row ? std::to_string(*r.mask_row) : "");
    out << ',' << id_hash(r.id);
    for (int v : r.factors) out << ',' << v;
    out << '\n';
  }
}

Manifest read_manifest(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("manifest is empty");
  const auto header = split_fields(line);
  int col_id = -1, col_row = -1, col_class = -1, col_split = -1, col_mask = -1, col_hash = -1;
  std::vector<int> factor_cols;
  Manifest m;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const auto& h = header[static_cast<std::size_t>(i)];
    if (h == "id") col_id = i;
    else if (h == "tensor_row") col_row = i;
    else if (h == "class_label") col_class = i;
    else if (h == "split") col_split = i;
    else if (h == "mask_row") col_mask = i;
    else if (h == "id_hash") col_hash = i;
    else if (h.starts_with(kFactorPrefix) && h.size() > kFactorPrefix.size()) {
      factor_cols.push_back(i);
      m.factor_names.push_back(h.substr(kFactorPrefix.size()));
    } else {
      throw ValidationError("unknown manifest column: " + h);
    }
  }
  if (col_id < 0 || col_row < 0) throw ValidationError("manifest needs id and tensor_row columns");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ValidationError("manifest line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(header.size()));
    }
    const auto field = [&](int col) -> const std::string& { return fields[static_cast<std::size_t>(col)]; };
    ManifestRow r;
    r.id = field(col_id);
    r.tensor_row = parse_int<std::uint64_t>(field(col_row), "tensor_row", line_no);
    if (col_class >= 0 && !field(col_class).empty()) r.class_label = field(col_class);
    if (col_split >= 0 && !field(col_split).empty()) r.split = parse_split(field(col_split));
    if (col_mask >= 0 && !field(col_mask).empty()) {
      r.mask_row = parse_int<std::uint64_t>(field(col_mask), "mask_row", line_no);
    }
    if (col_hash >= 0 && field(col_hash) != id_hash(r.id)) {
      throw ValidationError("manifest line " + std::to_string(line_no) + ": id_hash does not match id " + r.id);
    }
    for (std::size_t f = 0; f < factor_cols.size(); ++f) {
      const auto& text = field(factor_cols[f]);
      if (text.empty()) {
        throw ValidationError("manifest line " + std::to_string(line_no) + ": factor_" + m.factor_names[f] +
                              " is empty");
      }
      r.factors.push_back(parse_int<int>(text, "factor_" + m.factor_names[f], line_no));
    }
    m.rows.push_back(std::move(r));
  }
  return m;
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  write_manifest(out, m);
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing manifest: " + path.string());
  return read_manifest(in);
}

}  // namespace disentlab::io
