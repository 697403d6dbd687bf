#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "disentlab/common/allocator.hpp"
#include "disentlab/common/error.hpp"

namespace {

using namespace disentlab;
using namespace disentlab::cli;

constexpr int kValidation = 1;
constexpr int kRuntime = 2;

struct Override {
  std::string key;
  std::string value;
};

// Pull "--section.key value" and "--section.key=value" out of argv; the
// rest goes to CLI11.
std::vector<std::string> split_overrides(int argc, char** argv, std::vector<Override>& overrides) {
  std::vector<std::string> rest;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    const bool dotted = a.rfind("--", 0) == 0 && a.find('.') != std::string::npos &&
                        a.find('.') < a.find('=');
    if (!dotted) {
      rest.push_back(std::move(a));
      continue;
    }
    const auto eq = a.find('=');
    if (eq != std::string::npos) {
      overrides.push_back({a.substr(2, eq - 2), a.substr(eq + 1)});
    } else {
      if (i + 1 >= argc) throw ValidationError("override " + a + " needs a value");
      overrides.push_back({a.substr(2), argv[++i]});
    }
  }
  return rest;
}

void emit(const json& report, const std::string& out) {
  if (out.empty()) {
    std::cout << report.dump(2) << '\n';
  } else {
    write_json(out, report);
  }
}

struct Args {
  std::string config;
  std::string out;
  std::string source;
  std::string target;
  std::string model;
  std::string images;
  std::string labels;
  std::string scale;
  std::string freeze;
  std::string class_factor;
  long long seed = -1;
  std::string finetuned = "no";
  bool no_vae = false;
  std::string holdout;
  std::string dims;
  std::vector<std::string> inputs;
};

std::vector<std::string> comma_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

int run(int argc, char** argv) {
  std::vector<Override> overrides;
  auto rest = split_overrides(argc, argv, overrides);
  std::vector<std::string> reversed(rest.rbegin(), rest.rend());

  CLI::App app{"disentlab: weakly supervised disentanglement pipeline"};
  app.require_subcommand(1);
  app.footer("Config overrides: --section.key VALUE (e.g. --train.steps 1000). " + std::string(kDataRootEnv) +
             " sets the data root for relative input paths.");
  Args a;

  const auto add_config = [&](CLI::App* s) { s->add_option("--config", a.config, "JSON config file")->check(CLI::ExistingFile); };

  auto* gen = app.add_subcommand("generate", "Render the synthetic image grid");
  gen->add_option("--out", a.out, "output dataset directory")->required();
  gen->add_option("--scale", a.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  gen->add_option("--freeze", a.freeze, "comma list: Factor (centered) or Factor=value");
  gen->add_option("--class-factor", a.class_factor, "factor used as class label");
  gen->add_option("--seed", a.seed, "split seed");
  add_config(gen);

  auto* ing = app.add_subcommand("ingest", "Import PNG images and a labels CSV");
  ing->add_option("--images", a.images, "image directory")->required();
  ing->add_option("--labels", a.labels, "CSV with file,class_label[,split][,mask]")->required();
  ing->add_option("--out", a.out, "output dataset directory")->required();
  add_config(ing);

  auto* tr = app.add_subcommand("train-source", "Train the VAE ensemble on a source dataset");
  tr->add_option("--source", a.source, "source dataset directory")->required();
  tr->add_option("--out", a.out, "output ensemble directory")->required();
  add_config(tr);

  auto* ft = app.add_subcommand("finetune", "Finetune an ensemble on a target dataset");
  ft->add_option("--ensemble,--model", a.model, "ensemble or checkpoint directory")->required();
  ft->add_option("--target", a.target, "target dataset directory")->required();
  ft->add_option("--out", a.out, "output ensemble directory")->required();
  add_config(ft);

  auto* ed = app.add_subcommand("eval-disent", "Disentanglement metrics on a labeled source");
  ed->add_option("--model", a.model, "checkpoint or ensemble directory")->required();
  ed->add_option("--source", a.source, "dataset with factor labels")->required();
  ed->add_option("--out", a.out, "report path (stdout if omitted)");
  add_config(ed);

  auto* dd = app.add_subcommand("eval-downstream", "Downstream classification protocol");
  dd->add_option("--ensemble", a.model, "ensemble directory");
  dd->add_option("--target", a.target, "target dataset directory")->required();
  dd->add_option("--finetuned", a.finetuned, "finetune members on the target first")->check(CLI::IsMember({"yes", "no"}));
  dd->add_flag("--no-vae", a.no_vae, "classify the raw target rows instead of latents");
  dd->add_option("--out", a.out, "report path (stdout if omitted)");
  add_config(dd);

  auto* co = app.add_subcommand("correlate", "Correlate handcrafted features with labeled dims");
  co->add_option("--model", a.model, "checkpoint directory")->required();
  co->add_option("--source", a.source, "dataset with masks")->required();
  co->add_option("--out", a.out, "report path (stdout if omitted)");
  add_config(co);

  auto* os = app.add_subcommand("openset", "Explain a held-out class through latent dims");
  os->add_option("--model", a.model, "checkpoint directory")->required();
  os->add_option("--target", a.target, "labeled target dataset")->required();
  os->add_option("--holdout", a.holdout, "class treated as the anomaly")->required();
  os->add_option("--out", a.out, "report path (stdout if omitted)");
  add_config(os);

  auto* sc = app.add_subcommand("scatter", "Export a 2-D latent scatter");
  sc->add_option("--model", a.model, "checkpoint directory")->required();
  sc->add_option("--target", a.target, "dataset directory")->required();
  sc->add_option("--dims", a.dims, "two dims: indices or factor labels, e.g. texture,shape")->required();
  sc->add_option("--out", a.out, "output prefix for .csv and .svg")->required();
  add_config(sc);

  auto* rp = app.add_subcommand("report", "Markdown summary of report files");
  rp->add_option("inputs", a.inputs, "report JSON files")->required()->check(CLI::ExistingFile);
  rp->add_option("--out", a.out, "markdown path (stdout if omitted)");

  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  if (rp->parsed()) {
    std::vector<fs::path> inputs(a.inputs.begin(), a.inputs.end());
    const auto md = run_report(inputs);
    if (a.out.empty()) {
      std::cout << md;
    } else {
      std::ofstream(a.out) << md;
    }
    return 0;
  }

  Config cfg;
  if (!a.config.empty()) cfg.merge_file(a.config);
  if (!a.scale.empty()) cfg.set_json("generate.scale", a.scale);
  if (gen->count("--freeze") > 0) cfg.set_json("generate.freeze", comma_list(a.freeze));
  if (!a.class_factor.empty()) cfg.set_json("generate.class_factor", a.class_factor);
  if (a.seed >= 0) cfg.set_json("generate.seed", a.seed);
  for (const auto& o : overrides) cfg.set(o.key, o.value);
  // Touch the typed views so a bad value fails before any work starts.
  (void)cfg.train_config();
  (void)cfg.protocol();
  (void)cfg.seeds();
  (void)cfg.betas();

  const auto in = [&](const std::string& p) { return cfg.resolve(p); };
  std::string command;
  json result;
  std::string report_path = a.out;
  if (gen->parsed()) {
    command = "generate";
    result = run_generate(cfg, a.out);
    report_path = (fs::path(a.out) / "report.json").string();
  } else if (ing->parsed()) {
    command = "ingest";
    result = run_ingest(cfg, in(a.images), in(a.labels), a.out);
    report_path = (fs::path(a.out) / "report.json").string();
  } else if (tr->parsed()) {
    command = "train-source";
    result = run_train_source(cfg, in(a.source), a.out);
    report_path = (fs::path(a.out) / "report.json").string();
  } else if (ft->parsed()) {
    command = "finetune";
    result = run_finetune(cfg, a.model, in(a.target), a.out);
    report_path = (fs::path(a.out) / "report.json").string();
  } else if (ed->parsed()) {
    command = "eval-disent";
    result = run_eval_disent(cfg, a.model, in(a.source));
  } else if (dd->parsed()) {
    if (a.model.empty() && !a.no_vae) throw ValidationError("eval-downstream needs --ensemble unless --no-vae is given");
    command = "eval-downstream";
    result = run_eval_downstream(cfg, a.model, in(a.target), a.finetuned == "yes", a.no_vae);
  } else if (co->parsed()) {
    command = "correlate";
    result = run_correlate(cfg, a.model, in(a.source));
  } else if (os->parsed()) {
    command = "openset";
    result = run_openset(cfg, a.model, in(a.target), a.holdout);
  } else if (sc->parsed()) {
    command = "scatter";
    result = run_scatter(cfg, a.model, in(a.target), a.dims, a.out);
    report_path = a.out + ".json";
  }
  emit(make_report(command, cfg, std::move(result)), report_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  disentlab::retain_heap_memory();
  try {
    return run(argc, argv);
  } catch (const disentlab::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kRuntime;
  }
}
