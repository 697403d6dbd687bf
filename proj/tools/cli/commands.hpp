#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cli/config.hpp"

namespace disentlab::cli {

namespace fs = std::filesystem;

// Each command returns its result payload; the caller wraps it with
// make_report and writes it.

json run_generate(const Config& cfg, const fs::path& out);
json run_ingest(const Config& cfg, const fs::path& images, const fs::path& labels, const fs::path& out);
json run_train_source(const Config& cfg, const fs::path& source, const fs::path& out);
json run_finetune(const Config& cfg, const fs::path& ensemble, const fs::path& target, const fs::path& out);
json run_eval_disent(const Config& cfg, const fs::path& model, const fs::path& source);
json run_eval_downstream(const Config& cfg, const fs::path& ensemble, const fs::path& target, bool finetuned, bool no_vae);
json run_correlate(const Config& cfg, const fs::path& model, const fs::path& source);
json run_openset(const Config& cfg, const fs::path& model, const fs::path& target, const std::string& holdout);
json run_scatter(const Config& cfg, const fs::path& model, const fs::path& target, const std::string& dims,
                 const fs::path& out_prefix);
// Markdown summary of previously written reports.
std::string run_report(const std::vector<fs::path>& inputs);

/// A trained model on disk: a checkpoint directory, possibly one member of
/// an ensemble directory.
struct MemberRef {
  std::string name;
  fs::path dir;
  std::uint64_t seed = 0;
  double beta = 1.0;
  bool finetuned = false;
};

/// A checkpoint directory yields one member; an ensemble directory yields
/// every member listed in its ensemble.json.
std::vector<MemberRef> list_members(const fs::path& path);

std::string member_name(std::uint64_t seed, double beta);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

}  // namespace disentlab::cli
