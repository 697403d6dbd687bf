#include "cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "cli/dataset.hpp"
#include "disentlab/analysis/analysis.hpp"
#include "disentlab/common/error.hpp"
#include "disentlab/common/random.hpp"
#include "disentlab/downstream/downstream.hpp"
#include "disentlab/io/preprocess.hpp"
#include "disentlab/metrics/metrics.hpp"
#include "disentlab/vae/checkpoint.hpp"
#include "disentlab/vae/train.hpp"

namespace disentlab::cli {

namespace {

constexpr const char* kEnsembleFile = "ensemble.json";
constexpr const char* kLabelsFile = "labels.json";

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * fraction);
  return buf;
}

json mean_sd(const std::vector<double>& v) {
  if (v.empty()) return json{{"mean", nullptr}, {"sd", nullptr}};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return json{{"mean", m}, {"sd", std::sqrt(s / static_cast<double>(v.size()))}};
}

json summary_json(const downstream::Summary& s) {
  return json{{"mean_pp", s.mean}, {"sd_pp", s.sd}, {"values_pp", s.values}};
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(item);
  return out;
}

void log(const std::string& msg) { std::cerr << msg << std::endl; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

vae::VaeModel<float> load_model(const MemberRef& m, const Dataset& ds) {
  auto ckpt = vae::load_checkpoint(m.dir);
  if (ckpt.model.input_dim() != ds.input_dim()) {
    throw ValidationError("model " + m.dir.string() + " expects input dim " + std::to_string(ckpt.model.input_dim()) +
                          " but " + ds.dir.string() + " has rows of " + std::to_string(ds.input_dim()));
  }
  return std::move(ckpt.model);
}

metrics::Representation to_matrix(const io::Tensor& t) {
  metrics::Representation z(static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.row_size()));
  for (std::uint64_t r = 0; r < t.rows(); ++r) {
    const auto row = t.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) z(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return z;
}

metrics::Representation encode_rows(const vae::VaeModel<float>& model, const Dataset& ds, std::span<const std::size_t> rows) {
  return to_matrix(vae::encode_means(model, ds.gather(rows)));
}

std::optional<std::vector<metrics::DimensionLabel>> read_labels(const fs::path& dir) {
  const auto path = dir / kLabelsFile;
  if (!fs::exists(path)) return std::nullopt;
  const auto j = read_json(path);
  std::vector<metrics::DimensionLabel> out;
  for (const auto& d : j.at("dims")) out.push_back({d.at("label").get<std::string>(), d.at("confidence").get<double>()});
  return out;
}

std::vector<std::string> label_names(const std::vector<metrics::DimensionLabel>& labels) {
  std::vector<std::string> out;
  for (const auto& l : labels) out.push_back(l.factor);
  return out;
}

// Labels stored next to the model by eval-disent, else computed from the
// dataset's factors when it has them.
std::vector<metrics::DimensionLabel> dimension_labels(const Config& cfg, const MemberRef& m, const Dataset& ds,
                                                      const metrics::Representation& z, std::span<const std::size_t> rows) {
  if (auto stored = read_labels(m.dir)) {
    if (static_cast<Eigen::Index>(stored->size()) != z.cols()) {
      throw ValidationError((m.dir / kLabelsFile).string() + " does not match the model's latent dim");
    }
    return *stored;
  }
  if (ds.manifest.factor_names.empty()) {
    std::vector<metrics::DimensionLabel> out;
    for (Eigen::Index j = 0; j < z.cols(); ++j) out.push_back({"dim_" + std::to_string(j), 0.0});
    return out;
  }
  const auto a = metrics::association_matrix(z, ds.factors(rows), cfg.at("eval", "bins").get<int>());
  return metrics::label_dimensions(a);
}

struct LabeledRows {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::string> classes;
  std::vector<int> train_y;
  std::vector<int> test_y;
};

LabeledRows labeled_splits(const Dataset& ds) {
  if (!ds.manifest.has_class_labels()) throw ValidationError("manifest " + (ds.dir / kManifestFile).string() + " has no class_label column");
  if (!ds.manifest.has_splits()) throw ValidationError("manifest " + (ds.dir / kManifestFile).string() + " has no split column");
  LabeledRows out;
  out.classes = ds.manifest.class_names();
  const auto idx = ds.manifest.class_indices(out.classes);
  for (std::size_t i = 0; i < ds.manifest.rows.size(); ++i) {
    const auto& s = ds.manifest.rows[i].split;
    if (!s) throw ValidationError("row " + ds.manifest.rows[i].id + " has no split");
    (*s == io::Split::train ? out.train : out.test).push_back(i);
    (*s == io::Split::train ? out.train_y : out.test_y).push_back(idx[i]);
  }
  return out;
}

vae::VaeSpec model_spec(const Config& cfg, const Dataset& ds) {
  auto spec = ds.kind() == vae::InputKind::image ? vae::VaeSpec::for_images(ds.input_dim())
                                                 : vae::VaeSpec::for_embeddings(ds.input_dim());
  spec.latent_dim = cfg.at("train", "latent_dim").get<int>();
  const auto hidden = cfg.at("train", "hidden").get<std::vector<int>>();
  if (!hidden.empty()) spec.hidden = hidden;
  spec.validate();
  return spec;
}

std::vector<std::size_t> finetune_rows(const Dataset& ds) {
  return ds.manifest.has_splits() ? ds.rows_in(io::Split::train) : ds.all_rows();
}

vae::VaeModel<float> finetune_member(const Config& cfg, const MemberRef& m, const vae::VaeModel<float>& model,
                                     const io::Tensor& data) {
  auto tc = cfg.train_config();
  tc.seed = m.seed;
  return vae::finetune(model, data, tc.finetune_epochs, tc).model;
}

json dims_json(const std::vector<metrics::DimensionLabel>& labels) {
  json out = json::array();
  for (const auto& l : labels) out.push_back({{"label", l.factor}, {"confidence", l.confidence}});
  return out;
}

Image image_row(const Dataset& ds, std::size_t manifest_row) {
  const auto shape = ds.image_shape();
  Image img(shape[0], shape[1], shape[2]);
  const auto src = ds.data.row(ds.manifest.rows.at(manifest_row).tensor_row);
  std::copy(src.begin(), src.end(), img.data.begin());
  return img;
}

analysis::Mask mask_row(const Dataset& ds, std::size_t manifest_row) {
  const auto& r = ds.manifest.rows.at(manifest_row);
  if (!r.mask_row || !ds.masks) throw ValidationError("row " + r.id + " has no mask");
  const auto shape = ds.image_shape();
  const auto src = ds.masks->row(*r.mask_row);
  if (src.size() != static_cast<std::size_t>(shape[0]) * static_cast<std::size_t>(shape[1])) {
    throw ValidationError((ds.dir / kMaskFile).string() + " rows do not match the image size");
  }
  analysis::Mask m{shape[0], shape[1], std::vector<std::uint8_t>(src.size())};
  for (std::size_t i = 0; i < src.size(); ++i) m.data[i] = src[i] > 0.5f ? 1 : 0;
  return m;
}

}  // namespace

std::string member_name(std::uint64_t seed, double beta) { return "model_s" + std::to_string(seed) + "_b" + shortest(beta); }

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::vector<MemberRef> list_members(const fs::path& path) {
  if (fs::exists(path / "header.txt")) {
    const auto ckpt = vae::load_checkpoint(path);
    const auto it = ckpt.metadata.find("finetuned");
    return {{path.filename().string(), path, ckpt.model.spec.seed, ckpt.model.spec.beta,
             it != ckpt.metadata.end() && it->second == "yes"}};
  }
  const auto manifest = path / kEnsembleFile;
  if (!fs::exists(manifest)) throw ValidationError("neither a checkpoint nor an ensemble: " + path.string());
  const auto j = read_json(manifest);
  const bool finetuned = j.value("finetuned", false);
  std::vector<MemberRef> out;
  for (const auto& m : j.at("members")) {
    const auto name = m.at("name").get<std::string>();
    out.push_back({name, path / name, m.at("seed").get<std::uint64_t>(), m.at("beta").get<double>(), finetuned});
  }
  if (out.empty()) throw ValidationError(manifest.string() + " lists no members");
  return out;
}

json run_generate(const Config& cfg, const fs::path& out) {
  const auto scale = cfg.at("generate", "scale").get<std::string>();
  synth::RenderSpec spec;
  int orientations = 0;
  if (scale == "desk") {
    spec = synth::RenderSpec::desk();
    orientations = 8;
  } else if (scale == "paper") {
    spec = synth::RenderSpec::paper();
    orientations = 40;
  } else {
    throw ValidationError("generate.scale must be desk or paper, got '" + scale + "'");
  }
  auto space = synth::FactorSpace::texture_dsprites(orientations);
  for (const auto& item : cfg.at("generate", "freeze").get<std::vector<std::string>>()) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      space.freeze_centered(item);
    } else {
      int v = 0;
      const auto text = item.substr(eq + 1);
      const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
      if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
        throw ValidationError("generate.freeze entry '" + item + "' needs an integer value");
      }
      space.freeze(item.substr(0, eq), v);
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto ds = render_dataset(out, space, spec, cfg.at("generate", "max_bytes").get<std::uint64_t>());
  const auto class_factor = cfg.at("generate", "class_factor").get<std::string>();
  if (!class_factor.empty()) {
    const auto k = space.index_of(class_factor);
    for (auto& r : ds.manifest.rows) r.class_label = value_name(class_factor, r.factors[k]);
    ds.manifest = io::stratified_split(ds.manifest, cfg.at("generate", "split_fraction").get<double>(),
                                       cfg.at("generate", "seed").get<std::uint64_t>());
    ds.meta["class_factor"] = class_factor;
  }
  ds.meta["scale"] = scale;
  save_dataset(ds);
  log("generate: " + std::to_string(ds.data.rows()) + " images in " + shortest(seconds_since(t0)) + " s");
  return json{{"out", out.string()},
              {"items", ds.data.rows()},
              {"image_side", spec.image_side},
              {"factor_space", factor_space_json(space)},
              {"class_factor", class_factor}};
}

json run_ingest(const Config& cfg, const fs::path& images, const fs::path& labels, const fs::path& out) {
  std::ifstream in(labels);
  if (!in) throw ValidationError("missing labels file: " + labels.string());
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("labels file is empty: " + labels.string());
  const auto header = split_list(line);
  int c_file = -1, c_class = -1, c_split = -1, c_mask = -1;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const auto& h = header[static_cast<std::size_t>(i)];
    if (h == "file") c_file = i;
    else if (h == "class_label") c_class = i;
    else if (h == "split") c_split = i;
    else if (h == "mask") c_mask = i;
    else throw ValidationError("unknown labels column: " + h);
  }
  if (c_file < 0 || c_class < 0) throw ValidationError("labels file needs file and class_label columns");
  const int side = cfg.at("ingest", "side").get<int>();
  const auto px = static_cast<std::uint64_t>(side) * static_cast<std::uint64_t>(side);
  std::vector<float> data;
  std::vector<float> masks;
  Dataset ds;
  ds.dir = out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split_list(line);
    if (f.size() != header.size()) throw ValidationError("labels line " + std::to_string(line_no) + " has the wrong field count");
    const auto& file = f[static_cast<std::size_t>(c_file)];
    const auto img = io::pad_and_resize(io::read_png(images / file), side);
    data.insert(data.end(), img.data.begin(), img.data.end());
    io::ManifestRow row;
    row.id = file;
    row.tensor_row = ds.manifest.rows.size();
    row.class_label = f[static_cast<std::size_t>(c_class)];
    if (c_split >= 0 && !f[static_cast<std::size_t>(c_split)].empty()) row.split = io::parse_split(f[static_cast<std::size_t>(c_split)]);
    if (c_mask >= 0 && !f[static_cast<std::size_t>(c_mask)].empty()) {
      const auto m = io::pad_and_resize(io::read_png(images / f[static_cast<std::size_t>(c_mask)]), side);
      row.mask_row = masks.size() / px;
      for (std::uint64_t p = 0; p < px; ++p) masks.push_back(m.data[3 * p] > 0.5f ? 1.0f : 0.0f);
    }
    ds.manifest.rows.push_back(std::move(row));
  }
  const auto n = static_cast<std::uint64_t>(ds.manifest.rows.size());
  if (n == 0) throw ValidationError("labels file lists no images: " + labels.string());
  ds.data = io::Tensor({n, px * 3}, std::move(data));
  if (!masks.empty()) ds.masks = io::Tensor({masks.size() / px, px}, std::move(masks));
  const bool complete = std::all_of(ds.manifest.rows.begin(), ds.manifest.rows.end(), [](const auto& r) { return r.split.has_value(); });
  if (!complete) {
    ds.manifest = io::stratified_split(ds.manifest, cfg.at("ingest", "split_fraction").get<double>(),
                                       cfg.at("ingest", "seed").get<std::uint64_t>());
  }
  ds.meta = json{{"kind", "image"}, {"image_shape", {side, side, 3}}, {"source", labels.string()}};
  save_dataset(ds);
  return json{{"out", out.string()}, {"items", n}, {"classes", ds.manifest.class_names()}, {"masks", ds.masks.has_value()}};
}

json run_train_source(const Config& cfg, const fs::path& source, const fs::path& out) {
  const auto ds = load_dataset(source);
  const auto spec = model_spec(cfg, ds);
  const auto objective = cfg.objective();
  const auto rows = ds.all_rows();
  const auto data = ds.gather(rows);
  std::optional<vae::PairIndex> pairs;
  if (objective == vae::Objective::ada_gvae) {
    const auto space = ds.factor_space();
    if (!space) throw ValidationError("ada_gvae needs a factor space in " + (source / kMetaFile).string());
    auto aligned = ds.manifest;
    for (std::size_t i = 0; i < aligned.rows.size(); ++i) aligned.rows[i].tensor_row = i;
    pairs = vae::PairIndex::from_manifest(*space, aligned);
  }
  fs::create_directories(out);
  json members = json::array();
  for (const double beta : cfg.betas()) {
    for (const auto seed : cfg.seeds()) {
      auto tc = cfg.train_config();
      tc.beta = beta;
      tc.seed = seed;
      const auto name = member_name(seed, beta);
      const auto t0 = std::chrono::steady_clock::now();
      const auto result = vae::train(spec, tc, data, objective, pairs ? &*pairs : nullptr);
      const double secs = seconds_since(t0);
      const double final_loss = result.log.window_loss.empty() ? 0.0 : result.log.window_loss.back();
      vae::save_checkpoint(out / name, result.model,
                           {{"objective", vae::to_string(objective)}, {"finetuned", "no"}, {"source", source.string()}});
      log("train-source: " + name + " loss " + shortest(final_loss) + " in " + shortest(secs) + " s");
      members.push_back({{"name", name}, {"seed", seed}, {"beta", beta}, {"final_loss", final_loss}, {"loss_curve", result.log.window_loss}});
    }
  }
  json ens{{"objective", vae::to_string(objective)}, {"finetuned", false}, {"config_hash", cfg.hash()}, {"members", members}};
  write_json(out / kEnsembleFile, ens);
  return ens;
}

json run_finetune(const Config& cfg, const fs::path& ensemble, const fs::path& target, const fs::path& out) {
  const auto members = list_members(ensemble);
  const auto ds = load_dataset(target);
  const auto data = ds.gather(finetune_rows(ds));
  fs::create_directories(out);
  json listed = json::array();
  for (const auto& m : members) {
    if (m.finetuned) throw ValidationError("member " + m.name + " is already finetuned");
    const auto model = load_model(m, ds);
    const auto t0 = std::chrono::steady_clock::now();
    const auto tuned = finetune_member(cfg, m, model, data);
    vae::save_checkpoint(out / m.name, tuned, {{"finetuned", "yes"}, {"target", target.string()}});
    log("finetune: " + m.name + " in " + shortest(seconds_since(t0)) + " s");
    listed.push_back({{"name", m.name}, {"seed", m.seed}, {"beta", m.beta}});
  }
  json ens{{"finetuned", true}, {"config_hash", cfg.hash()}, {"target", target.string()}, {"members", listed}};
  write_json(out / kEnsembleFile, ens);
  return ens;
}

json run_eval_disent(const Config& cfg, const fs::path& model, const fs::path& source) {
  const auto members = list_members(model);
  const auto ds = load_dataset(source);
  const auto rows = ds.all_rows();
  const auto factors = ds.factors(rows);
  const int bins = cfg.at("eval", "bins").get<int>();
  const double alpha = cfg.at("eval", "omes_alpha").get<double>();
  const auto gbt = cfg.gbt();

  std::vector<std::size_t> train, test;
  if (ds.manifest.has_splits()) {
    train = ds.rows_in(io::Split::train);
    test = ds.rows_in(io::Split::test);
  } else {
    auto order = rows;
    Rng rng(cfg.at("eval", "seed").get<std::uint64_t>());
    rng.shuffle(std::span<std::size_t>(order));
    const auto cut = static_cast<std::size_t>(std::lround(cfg.at("eval", "split_fraction").get<double>() * static_cast<double>(order.size())));
    train.assign(order.begin(), order.begin() + static_cast<long>(cut));
    test.assign(order.begin() + static_cast<long>(cut), order.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
  }

  json out_members = json::array();
  std::vector<double> migs, dcis, omess, expl;
  for (const auto& m : members) {
    const auto vm = load_model(m, ds);
    const auto z = encode_rows(vm, ds, rows);
    const auto a = metrics::association_matrix(z, factors, bins);
    const auto mig = metrics::mig(a);
    const auto dci = metrics::dci(z, factors, gbt);
    const auto omes = metrics::omes(a, alpha);
    const auto ex = metrics::explicitness(z, factors, train, test, gbt);
    const auto labels = metrics::label_dimensions(a);
    write_json(m.dir / kLabelsFile, json{{"source", source.string()}, {"dims", dims_json(labels)}});

    json per_factor = json::array();
    for (std::size_t k = 0; k < a.factors.size(); ++k) {
      per_factor.push_back({{"factor", a.factors[k]},
                            {"mig_gap", mig.per_factor[k]},
                            {"omes_best_dim", omes.best_dim[k]},
                            {"omes_modularity", omes.modularity[k]},
                            {"omes_compactness", omes.compactness[k]},
                            {"association", std::vector<double>(a.values.row(static_cast<Eigen::Index>(k)).begin(),
                                                                a.values.row(static_cast<Eigen::Index>(k)).end())}});
    }
    json explicit_json = json::object();
    for (std::size_t k = 0; k < ex.factors.size(); ++k) explicit_json[ex.factors[k]] = ex.accuracy[k];
    out_members.push_back({{"name", m.name},
                           {"seed", m.seed},
                           {"beta", m.beta},
                           {"mig", mig.score},
                           {"dci_d", dci.disentanglement},
                           {"dci_c", dci.completeness},
                           {"dci_i", dci.informativeness},
                           {"omes", omes.score},
                           {"per_factor", per_factor},
                           {"dims", dims_json(labels)},
                           {"explicitness", explicit_json},
                           {"explicitness_skipped", ex.skipped}});
    migs.push_back(mig.score);
    dcis.push_back(dci.disentanglement);
    omess.push_back(omes.score);
    expl.push_back(ex.mean);
    log("eval-disent: " + m.name + " MIG " + percent(mig.score) + " DCI-D " + percent(dci.disentanglement) + " OMES " +
        percent(omes.score));
  }
  const auto ms = mean_sd(migs);
  const auto ds_ = mean_sd(dcis);
  const auto os = mean_sd(omess);
  return json{{"members", out_members},
              {"summary", {{"mig", ms}, {"dci_d", ds_}, {"omes", os}, {"explicitness", mean_sd(expl)}}},
              {"table_pct",
               {{"MIG", percent(ms["mean"].get<double>())},
                {"DCI-D", percent(ds_["mean"].get<double>())},
                {"OMES", percent(os["mean"].get<double>())}}}};
}

json run_eval_downstream(const Config& cfg, const fs::path& ensemble, const fs::path& target, bool finetuned, bool no_vae) {
  const auto ds = load_dataset(target);
  const auto split = labeled_splits(ds);
  const auto protocol = cfg.protocol();
  downstream::EvalReport report;
  if (no_vae) {
    const downstream::LabeledSet tr{to_matrix(ds.gather(split.train)), split.train_y};
    const downstream::LabeledSet te{to_matrix(ds.gather(split.test)), split.test_y};
    const auto runs = static_cast<int>(cfg.seeds().size() * cfg.betas().size());
    report = downstream::ablate_no_vae(tr, te, protocol, runs);
  } else {
    const auto members = list_members(ensemble);
    const auto tune_data = ds.gather(split.train);
    std::vector<downstream::MemberRepresentation> reps;
    for (const auto& m : members) {
      if (m.finetuned && !finetuned) throw ValidationError("member " + m.name + " is finetuned but --finetuned no was given");
      auto model = load_model(m, ds);
      if (finetuned && !m.finetuned) model = finetune_member(cfg, m, model, tune_data);
      downstream::MemberRepresentation r;
      r.name = m.name;
      r.seed = m.seed;
      r.beta = m.beta;
      r.train = encode_rows(model, ds, split.train);
      r.test = encode_rows(model, ds, split.test);
      if (const auto labels = read_labels(m.dir)) r.dim_labels = label_names(*labels);
      reps.push_back(std::move(r));
    }
    report = downstream::evaluate_representations(reps, split.train_y, split.test_y, protocol);
  }
  report.finetuned = finetuned && !no_vae;

  json members = json::array();
  for (const auto& m : report.members) {
    members.push_back({{"name", m.name},
                       {"seed", m.seed},
                       {"beta", m.beta},
                       {"kept", m.kept},
                       {"excluded", m.excluded},
                       {"gbt_accuracy", m.gbt_accuracy},
                       {"mlp_accuracy", m.mlp_accuracy},
                       {"mlp_diverged", m.mlp_diverged},
                       {"labels", m.labels},
                       {"importance", m.importance}});
  }
  json importance = json::array();
  for (std::size_t i = 0; i < report.importance.labels.size(); ++i) {
    importance.push_back({{"label", report.importance.labels[i]}, {"mean", report.importance.mean[i]}, {"sd", report.importance.sd[i]}});
  }
  return json{{"finetuned", report.finetuned},
              {"no_vae", report.no_vae},
              {"classes", split.classes},
              {"gbt", summary_json(report.gbt)},
              {"mlp", summary_json(report.mlp)},
              {"members", members},
              {"importance", importance},
              {"warnings", report.warnings}};
}

json run_correlate(const Config& cfg, const fs::path& model, const fs::path& source) {
  const auto members = list_members(model);
  if (members.size() != 1) throw ValidationError("correlate needs a single checkpoint, got an ensemble of " + std::to_string(members.size()));
  const auto ds = load_dataset(source);
  if (!ds.manifest.has_masks()) throw ValidationError("correlate needs masks; " + (source / kManifestFile).string() + " has no mask_row");
  const auto rows = ds.all_rows();
  std::vector<analysis::HandcraftedFeatures> feats;
  feats.reserve(rows.size());
  for (const auto r : rows) feats.push_back(analysis::handcrafted(image_row(ds, r), mask_row(ds, r)));
  const auto vm = load_model(members.front(), ds);
  const auto z = encode_rows(vm, ds, rows);
  const auto labels = dimension_labels(cfg, members.front(), ds, z, rows);
  json out = json::array();
  for (const auto& c : analysis::correlate(feats, z, labels)) {
    out.push_back({{"feature", c.feature}, {"factor", c.factor}, {"dim", c.dim}, {"r", c.r ? json(*c.r) : json(nullptr)}, {"note", c.note}});
  }
  return json{{"items", rows.size()}, {"dims", dims_json(labels)}, {"correlations", out}};
}

json run_openset(const Config& cfg, const fs::path& model, const fs::path& target, const std::string& holdout) {
  const auto members = list_members(model);
  if (members.size() != 1) throw ValidationError("openset needs a single checkpoint, got an ensemble of " + std::to_string(members.size()));
  const auto ds = load_dataset(target);
  if (!ds.manifest.has_class_labels()) throw ValidationError("openset needs class labels in " + (target / kManifestFile).string());
  const auto names = ds.manifest.class_names();
  if (std::find(names.begin(), names.end(), holdout) == names.end()) throw ValidationError("holdout class not found: " + holdout);
  std::vector<std::string> kept_names;
  for (const auto& n : names) {
    if (n != holdout) kept_names.push_back(n);
  }
  std::vector<std::size_t> train, anomalies;
  std::vector<int> train_y;
  for (std::size_t i = 0; i < ds.manifest.rows.size(); ++i) {
    const auto& r = ds.manifest.rows[i];
    if (*r.class_label == holdout) {
      anomalies.push_back(i);
    } else if (!r.split || *r.split == io::Split::train) {
      train.push_back(i);
      train_y.push_back(static_cast<int>(std::lower_bound(kept_names.begin(), kept_names.end(), *r.class_label) - kept_names.begin()));
    }
  }
  if (train.empty()) throw ValidationError("openset has no training rows outside the holdout class");
  const auto vm = load_model(members.front(), ds);
  const auto z_train = encode_rows(vm, ds, train);
  const auto z_anom = encode_rows(vm, ds, anomalies);
  const auto pruning = metrics::prune_inactive(z_train, cfg.at("eval", "prune_threshold").get<double>());
  std::vector<std::string> labels;
  const auto stored = read_labels(members.front().dir);
  for (const int j : pruning.kept) {
    labels.push_back(stored ? (*stored)[static_cast<std::size_t>(j)].factor : "dim_" + std::to_string(j));
  }
  const auto r = analysis::openset_gbt(pruning.apply(z_train), train_y, pruning.apply(z_anom), labels, cfg.gbt());
  json votes = json::object();
  for (std::size_t c = 0; c < r.votes.size(); ++c) votes[kept_names[c]] = r.votes[c];
  json dims = json::array();
  for (const int j : r.ranking) {
    dims.push_back({{"dim", pruning.kept[static_cast<std::size_t>(j)]},
                    {"label", r.labels[static_cast<std::size_t>(j)]},
                    {"distance", r.distance[static_cast<std::size_t>(j)]}});
  }
  return json{{"holdout", holdout},
              {"anomalies", anomalies.size()},
              {"predicted_class", kept_names[static_cast<std::size_t>(r.predicted_class)]},
              {"votes", votes},
              {"tied", r.tied},
              {"ranking", dims}};
}

json run_scatter(const Config& cfg, const fs::path& model, const fs::path& target, const std::string& dims,
                 const fs::path& out_prefix) {
  const auto members = list_members(model);
  if (members.size() != 1) throw ValidationError("scatter needs a single checkpoint, got an ensemble of " + std::to_string(members.size()));
  const auto ds = load_dataset(target);
  const auto rows = ds.all_rows();
  const auto vm = load_model(members.front(), ds);
  const auto z = encode_rows(vm, ds, rows);
  const auto parts = split_list(dims);
  if (parts.size() != 2) throw ValidationError("--dims needs exactly two entries, got '" + dims + "'");
  std::vector<int> chosen;
  std::vector<std::string> names;
  std::optional<std::vector<metrics::DimensionLabel>> labels;
  for (const auto& p : parts) {
    int v = 0;
    const auto r = std::from_chars(p.data(), p.data() + p.size(), v);
    if (r.ec == std::errc() && r.ptr == p.data() + p.size()) {
      chosen.push_back(v);
      names.push_back("dim_" + p);
      continue;
    }
    if (!labels) labels = dimension_labels(cfg, members.front(), ds, z, rows);
    const auto d = analysis::dim_for_factor(*labels, p);
    if (!d) throw ValidationError("no latent dim is labeled " + p);
    chosen.push_back(*d);
    names.push_back(p);
  }
  std::vector<std::string> classes;
  for (const auto& r : ds.manifest.rows) classes.push_back(r.class_label.value_or("all"));
  const auto table = analysis::export_scatter(z, classes, chosen[0], chosen[1], names[0], names[1]);
  auto csv = out_prefix;
  csv += ".csv";
  auto svg = out_prefix;
  svg += ".svg";
  if (out_prefix.has_parent_path()) fs::create_directories(out_prefix.parent_path());
  std::ofstream(csv) << table.to_csv();
  std::ofstream(svg) << table.to_svg();
  return json{{"csv", csv.string()}, {"svg", svg.string()}, {"dims", chosen}, {"names", names}, {"points", rows.size()}};
}

std::string run_report(const std::vector<fs::path>& inputs) {
  if (inputs.empty()) throw ValidationError("report needs at least one input report");
  std::ostringstream md;
  md << "# disentlab report\n\n";
  std::map<std::string, int> hashes;
  for (const auto& path : inputs) {
    const auto j = read_json(path);
    if (!j.contains("command") || !j.contains("config_hash") || !j.contains("result")) {
      throw ValidationError(path.string() + " is not a disentlab report");
    }
    const auto cmd = j.at("command").get<std::string>();
    const auto hash = j.at("config_hash").get<std::string>();
    ++hashes[hash];
    const auto& r = j.at("result");
    md << "## " << cmd << " (" << path.filename().string() << ")\n\n";
    md << "config hash `" << hash << "`\n\n";
    if (cmd == "eval-disent") {
      md << "| model | MIG | DCI-D | OMES |\n|---|---|---|---|\n";
      for (const auto& m : r.at("members")) {
        md << "| " << m.at("name").get<std::string>() << " | " << percent(m.at("mig").get<double>()) << " | "
           << percent(m.at("dci_d").get<double>()) << " | " << percent(m.at("omes").get<double>()) << " |\n";
      }
      md << "| mean | " << r.at("table_pct").at("MIG").get<std::string>() << " | "
         << r.at("table_pct").at("DCI-D").get<std::string>() << " | " << r.at("table_pct").at("OMES").get<std::string>()
         << " |\n\n";
    } else if (cmd == "eval-downstream") {
      char line[160];
      std::snprintf(line, sizeof(line), "| GBT | %.2f | %.2f |\n| MLP | %.2f | %.2f |\n", r.at("gbt").at("mean_pp").get<double>(),
                    r.at("gbt").at("sd_pp").get<double>(), r.at("mlp").at("mean_pp").get<double>(),
                    r.at("mlp").at("sd_pp").get<double>());
      md << "finetuned: " << (r.at("finetuned").get<bool>() ? "yes" : "no") << ", no-vae: " << (r.at("no_vae").get<bool>() ? "yes" : "no")
         << "\n\n| classifier | accuracy (%) | SD |\n|---|---|---|\n"
         << line << '\n';
    } else if (cmd == "openset") {
      md << "holdout " << r.at("holdout").get<std::string>() << " predicted as " << r.at("predicted_class").get<std::string>()
         << "\n\n| dim | label | distance |\n|---|---|---|\n";
      for (const auto& d : r.at("ranking")) {
        md << "| " << d.at("dim").get<int>() << " | " << d.at("label").get<std::string>() << " | " << shortest(d.at("distance").get<double>())
           << " |\n";
      }
      md << '\n';
    } else if (cmd == "correlate") {
      md << "| feature | factor | dim | r |\n|---|---|---|---|\n";
      for (const auto& c : r.at("correlations")) {
        md << "| " << c.at("feature").get<std::string>() << " | " << c.at("factor").get<std::string>() << " | " << c.at("dim").get<int>()
           << " | " << (c.at("r").is_null() ? c.at("note").get<std::string>() : shortest(c.at("r").get<double>())) << " |\n";
      }
      md << '\n';
    } else {
      md << "```\n" << r.dump(2) << "\n```\n\n";
    }
  }
  if (hashes.size() > 1) md << "Reports come from " << hashes.size() << " different configurations.\n";
  return md.str();
}

}  // namespace disentlab::cli
