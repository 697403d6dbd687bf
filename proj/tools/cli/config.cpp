#include "cli/config.hpp"

#include <cstdlib>
#include <fstream>

#include "disentlab/common/error.hpp"
#include "disentlab/io/manifest.hpp"

namespace disentlab::cli {

namespace {

bool same_kind(const json& schema, const json& value) {
  if (schema.is_number()) {
    // Integer keys stay integral; real keys accept integers.
    if (schema.is_number_float()) return value.is_number();
    return value.is_number_integer() || value.is_number_unsigned();
  }
  if (schema.is_array()) {
    if (!value.is_array()) return false;
    if (schema.empty()) return true;
    for (const auto& v : value) {
      if (!same_kind(schema.front(), v)) return false;
    }
    return true;
  }
  return schema.type() == value.type();
}

const char* kind_name(const json& schema) {
  if (schema.is_number_float()) return "a number";
  if (schema.is_number()) return "an integer";
  if (schema.is_string()) return "a string";
  if (schema.is_boolean()) return "a boolean";
  if (schema.is_array()) return "a list";
  return "an object";
}

void merge_into(json& target, const json& schema, const json& user, const std::string& prefix) {
  if (!user.is_object()) throw ValidationError("config " + (prefix.empty() ? "document" : prefix) + " must be an object");
  for (const auto& [key, value] : user.items()) {
    const auto name = prefix.empty() ? key : prefix + "." + key;
    if (!schema.contains(key)) throw ValidationError("unknown config key: " + name);
    const auto& s = schema.at(key);
    if (s.is_object()) {
      merge_into(target[key], s, value, name);
      continue;
    }
    if (!same_kind(s, value)) throw ValidationError("config key " + name + " must be " + kind_name(s));
    target[key] = value;
  }
}

}  // namespace

json Config::defaults() {
  return json{
      {"generate",
       {{"scale", "desk"},
        {"freeze", json::array({"PosX", "PosY"})},
        {"class_factor", ""},
        {"split_fraction", 0.8},
        {"seed", 0},
        {"max_bytes", 2147483648ULL}}},
      {"ingest", {{"side", 64}, {"split_fraction", 0.8}, {"seed", 0}}},
      {"train",
       {{"objective", "ada_gvae"},
        {"seeds", json::array({0, 1, 2, 3, 4, 5, 6, 7, 8, 9})},
        {"betas", json::array({1.0, 2.0})},
        {"steps", 30000},
        {"warmup", 3750},
        {"batch", 64},
        {"k", 1},
        {"latent_dim", 10},
        {"hidden", json::array()},
        {"learning_rate", 1e-4},
        {"loss_every", 10},
        {"log_every", 100}}},
      {"finetune", {{"epochs", 20}}},
      {"eval",
       {{"bins", 20},
        {"prune_threshold", 0.05},
        {"omes_alpha", 0.5},
        {"gbt_rounds", 100},
        {"gbt_learning_rate", 0.1},
        {"gbt_max_depth", 3},
        {"mlp_hidden", json::array({256, 256})},
        {"mlp_epochs", 100},
        {"mlp_batch", 64},
        {"mlp_learning_rate", 1e-3},
        {"split_fraction", 0.8},
        {"seed", 0}}},
      {"paths", {{"data_root", ""}}},
  };
}

Config::Config() : doc_(defaults()) {}

void Config::merge(const json& user) { merge_into(doc_, defaults(), user, ""); }

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  json user;
  try {
    user = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  merge(user);
}

void Config::set_json(const std::string& dotted, const json& value) {
  const auto dot = dotted.find('.');
  if (dot == std::string::npos || dotted.find('.', dot + 1) != std::string::npos) {
    throw ValidationError("config override must look like section.key, got " + dotted);
  }
  merge(json{{dotted.substr(0, dot), {{dotted.substr(dot + 1), value}}}});
}

void Config::set(const std::string& dotted, const std::string& raw) {
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }
  // A string key keeps its raw text even when it happens to parse as JSON.
  const auto dot = dotted.find('.');
  if (dot != std::string::npos) {
    const auto schema = defaults();
    const auto section = dotted.substr(0, dot);
    const auto key = dotted.substr(dot + 1);
    if (schema.contains(section) && schema[section].contains(key) && schema[section][key].is_string()) value = raw;
  }
  set_json(dotted, value);
}

const json& Config::at(const std::string& section, const std::string& key) const { return doc_.at(section).at(key); }

std::string Config::hash() const { return config_hash(doc_); }

std::filesystem::path Config::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  std::string root = at("paths", "data_root").get<std::string>();
  if (root.empty()) {
    if (const char* env = std::getenv(kDataRootEnv)) root = env;
  }
  return root.empty() ? p : std::filesystem::path(root) / p;
}

vae::TrainConfig Config::train_config() const {
  vae::TrainConfig c;
  c.steps = at("train", "steps").get<long>();
  c.warmup_steps = at("train", "warmup").get<long>();
  c.batch = at("train", "batch").get<int>();
  c.k = at("train", "k").get<int>();
  c.adam.learning_rate = at("train", "learning_rate").get<double>();
  c.loss_every = at("train", "loss_every").get<int>();
  c.log_every = at("train", "log_every").get<int>();
  c.finetune_epochs = at("finetune", "epochs").get<int>();
  c.validate();
  return c;
}

std::vector<std::uint64_t> Config::seeds() const {
  const auto s = at("train", "seeds").get<std::vector<std::int64_t>>();
  std::vector<std::uint64_t> out;
  for (const auto v : s) {
    if (v < 0) throw ValidationError("train.seeds must be non-negative");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  if (out.empty()) throw ValidationError("train.seeds must list at least one seed");
  return out;
}

std::vector<double> Config::betas() const {
  auto b = at("train", "betas").get<std::vector<double>>();
  if (b.empty()) throw ValidationError("train.betas must list at least one value");
  return b;
}

vae::Objective Config::objective() const { return vae::parse_objective(at("train", "objective").get<std::string>()); }

trees::GbtSettings Config::gbt() const {
  trees::GbtSettings s;
  s.rounds = at("eval", "gbt_rounds").get<int>();
  s.learning_rate = at("eval", "gbt_learning_rate").get<double>();
  s.max_depth = at("eval", "gbt_max_depth").get<int>();
  s.seed = at("eval", "seed").get<std::uint64_t>();
  s.validate();
  return s;
}

downstream::ProtocolSettings Config::protocol() const {
  downstream::ProtocolSettings p;
  p.prune_threshold = at("eval", "prune_threshold").get<double>();
  p.gbt = gbt();
  p.mlp.hidden = at("eval", "mlp_hidden").get<std::vector<int>>();
  p.mlp.epochs = at("eval", "mlp_epochs").get<int>();
  p.mlp.batch = at("eval", "mlp_batch").get<int>();
  p.mlp.learning_rate = at("eval", "mlp_learning_rate").get<double>();
  p.mlp.seed = at("eval", "seed").get<std::uint64_t>();
  p.mlp.validate();
  return p;
}

std::string config_hash(const json& doc) { return io::id_hash(doc.dump()); }

json make_report(const std::string& command, const Config& config, json result) {
  return json{{"command", command}, {"config", config.doc()}, {"config_hash", config.hash()}, {"result", std::move(result)}};
}

}  // namespace disentlab::cli
