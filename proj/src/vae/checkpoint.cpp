#include "disentlab/vae/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "disentlab/io/tensor.hpp"

namespace disentlab::vae {

namespace {

constexpr const char* kMagic = "disentlab-vae";
constexpr int kFormatVersion = 1;

std::string exact(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& s, const std::string& key) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ValidationError("checkpoint " + key + " is not a number: " + s);
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& key) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ValidationError("checkpoint " + key + " is not an integer: " + s);
  return v;
}

std::string block_name(const std::string& net, std::size_t layer, const char* part) {
  return net + "_" + std::to_string(layer) + "_" + part + ".dtns";
}

void save_layers(const std::filesystem::path& dir, const std::string& net, const std::vector<nn::Dense<float>>& layers) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weight;
    io::Tensor wt({static_cast<std::uint64_t>(w.rows()), static_cast<std::uint64_t>(w.cols())});
    const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = w;
    std::copy(rm.data(), rm.data() + rm.size(), wt.values.begin());
    io::write_dtns(dir / block_name(net, l, "weight"), wt);
    const auto& b = layers[l].bias;
    io::write_dtns(dir / block_name(net, l, "bias"),
                   io::Tensor({static_cast<std::uint64_t>(b.size())}, std::vector<float>(b.data(), b.data() + b.size())));
  }
}

void load_layers(const std::filesystem::path& dir, const std::string& net, std::vector<nn::Dense<float>>& layers) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& w = layers[l].weight;
    const auto wpath = dir / block_name(net, l, "weight");
    const auto wt = io::read_dtns(wpath);
    if (wt.dims != std::vector<std::uint64_t>{static_cast<std::uint64_t>(w.rows()), static_cast<std::uint64_t>(w.cols())}) {
      throw ValidationError("parameter file " + wpath.string() + " does not match the header's layer sizes");
    }
    w = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(wt.values.data(), w.rows(),
                                                                                                 w.cols());
    auto& b = layers[l].bias;
    const auto bpath = dir / block_name(net, l, "bias");
    const auto bt = io::read_dtns(bpath);
    if (bt.dims != std::vector<std::uint64_t>{static_cast<std::uint64_t>(b.size())}) {
      throw ValidationError("parameter file " + bpath.string() + " does not match the header's layer sizes");
    }
    b = Eigen::Map<const Vector<float>>(bt.values.data(), b.size());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const VaeModel<float>& model,
                     const std::map<std::string, std::string>& metadata) {
  std::filesystem::create_directories(dir);
  const auto& s = model.spec;
  std::ostringstream h;
  h << kMagic << ' ' << kFormatVersion << '\n';
  h << "input_dim " << s.input_dim << '\n';
  h << "latent_dim " << s.latent_dim << '\n';
  h << "hidden";
  for (const int v : s.hidden) h << ' ' << v;
  h << '\n';
  h << "activation " << nn::to_string(s.activation) << '\n';
  h << "input_kind " << to_string(s.input_kind) << '\n';
  h << "beta " << exact(s.beta) << '\n';
  h << "seed " << s.seed << '\n';
  for (const auto& [k, v] : metadata) {
    if (k.empty() || k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ValidationError("checkpoint metadata key/value must be single-line, key without spaces: " + k);
    }
    h << "meta." << k << ' ' << v << '\n';
  }
  save_layers(dir, "encoder", model.encoder.layers());
  save_layers(dir, "decoder", model.decoder.layers());
  // Header last: a directory with a header is complete.
  std::ofstream out(dir / "header.txt", std::ios::binary | std::ios::trunc);
  out << h.str();
  if (!out) throw Error("cannot write " + (dir / "header.txt").string());
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto hpath = dir / "header.txt";
  std::ifstream in(hpath);
  if (!in) throw ValidationError("checkpoint header not found: " + hpath.string());
  std::string line;
  if (!std::getline(in, line) || line != std::string(kMagic) + " " + std::to_string(kFormatVersion)) {
    throw ValidationError(hpath.string() + " is not a version " + std::to_string(kFormatVersion) + " checkpoint header");
  }
  VaeSpec s;
  Checkpoint ck;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    const auto key = line.substr(0, sp);
    const auto value = sp == std::string::npos ? std::string() : line.substr(sp + 1);
    if (!seen.insert(key).second) throw ValidationError("checkpoint header repeats key " + key);
    if (key == "input_dim") {
      s.input_dim = static_cast<int>(parse_u64(value, key));
    } else if (key == "latent_dim") {
      s.latent_dim = static_cast<int>(parse_u64(value, key));
    } else if (key == "hidden") {
      s.hidden.clear();
      std::istringstream vs(value);
      std::string tok;
      while (vs >> tok) s.hidden.push_back(static_cast<int>(parse_u64(tok, key)));
    } else if (key == "activation") {
      s.activation = nn::parse_activation(value);
    } else if (key == "input_kind") {
      s.input_kind = parse_input_kind(value);
    } else if (key == "beta") {
      s.beta = parse_double(value, key);
    } else if (key == "seed") {
      s.seed = parse_u64(value, key);
    } else if (key.rfind("meta.", 0) == 0) {
      ck.metadata[key.substr(5)] = value;
    } else {
      throw ValidationError("unknown checkpoint header key: " + key);
    }
  }
  for (const char* required : {"input_dim", "latent_dim", "hidden", "activation", "input_kind", "beta", "seed"}) {
    if (!seen.count(required)) throw ValidationError("checkpoint header lacks " + std::string(required));
  }
  s.validate();
  Rng rng(0);
  ck.model = VaeModel<float>(s, rng);
  load_layers(dir, "encoder", ck.model.encoder.layers());
  load_layers(dir, "decoder", ck.model.decoder.layers());
  return ck;
}

}  // namespace disentlab::vae
