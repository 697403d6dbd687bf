#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "disentlab/downstream/downstream.hpp"
#include "disentlab/trees/gbt.hpp"
#include "disentlab/vae/train.hpp"

namespace disentlab::cli {

using nlohmann::json;

inline constexpr const char* kDataRootEnv = "DISENTLAB_DATA_ROOT";

/// Pipeline configuration. The defaults document doubles as the schema: a
/// user file or override may only set keys that exist there, with a value
/// of the same JSON type.
class Config {
 public:
  Config();

  static json defaults();

  // Merge a user document; throws ValidationError naming the first bad key.
  void merge(const json& user);
  void merge_file(const std::filesystem::path& path);
  // "section.key" with a raw value; the value is parsed as JSON when it
  // parses, otherwise taken as a string.
  void set(const std::string& dotted, const std::string& raw);
  void set_json(const std::string& dotted, const json& value);

  const json& doc() const { return doc_; }
  const json& at(const std::string& section, const std::string& key) const;
  std::string hash() const;

  // Relative paths are resolved against paths.data_root, falling back to
  // the DISENTLAB_DATA_ROOT environment variable.
  std::filesystem::path resolve(const std::filesystem::path& p) const;

  vae::TrainConfig train_config() const;
  std::vector<std::uint64_t> seeds() const;
  std::vector<double> betas() const;
  vae::Objective objective() const;
  trees::GbtSettings gbt() const;
  downstream::ProtocolSettings protocol() const;

 private:
  json doc_;
};

/// Hex FNV-1a 64 of the canonical (sorted-key, compact) dump.
std::string config_hash(const json& doc);

/// Standard report envelope: command, config echo, config hash, result.
json make_report(const std::string& command, const Config& config, json result);

}  // namespace disentlab::cli
