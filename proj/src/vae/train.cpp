#include "disentlab/vae/train.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "disentlab/common/float_mode.hpp"

namespace disentlab::vae {

namespace {

Matrix<float> draw_noise(Rng& rng, int rows, Eigen::Index cols) {
  Matrix<float> eps(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) eps(r, c) = static_cast<float>(rng.normal());
  }
  return eps;
}

double parameter_norm(VaeModel<float>& model) {
  double sq = 0.0;
  for (const auto& block : model.parameter_blocks()) {
    for (float v : block) sq += static_cast<double>(v) * v;
  }
  return std::sqrt(sq);
}

void check_finite(const LossTerms& terms, bool evaluated, long step, VaeModel<float>& model) {
  if (!std::isfinite(evaluated ? terms.loss : terms.kl)) {
    throw Error("training diverged at step " + std::to_string(step) + " (loss " + std::to_string(terms.loss) +
                ", parameter norm " + std::to_string(parameter_norm(model)) + ")");
  }
}

class Recorder {
 public:
  explicit Recorder(TrainLog& log) : log_(log) {}
  // `loss` is NaN on steps without a loss evaluation.
  void add(double loss, double shared) {
    if (!std::isnan(loss)) {
      loss_sum_ += loss;
      ++evaluated_;
    }
    shared_sum_ += shared;
    if (++count_ == log_.window) flush();
  }
  void flush() {
    if (count_ == 0) return;
    log_.window_loss.push_back(evaluated_ > 0 ? loss_sum_ / evaluated_ : std::numeric_limits<double>::quiet_NaN());
    log_.window_shared.push_back(shared_sum_ / count_);
    loss_sum_ = shared_sum_ = 0.0;
    count_ = evaluated_ = 0;
  }

 private:
  TrainLog& log_;
  double loss_sum_ = 0.0;
  double shared_sum_ = 0.0;
  int count_ = 0;
  int evaluated_ = 0;
};

// Epoch-wise shuffled row stream.
class RowStream {
 public:
  RowStream(std::uint64_t rows, Rng& rng) : order_(rows), rng_(rng) {
    std::iota(order_.begin(), order_.end(), 0);
    rng_.shuffle(std::span<std::uint64_t>(order_));
  }
  // Next full batch; reshuffles when fewer than `batch` rows remain.
  std::vector<std::uint64_t> next(int batch) {
    const auto b = std::min<std::size_t>(static_cast<std::size_t>(batch), order_.size());
    if (pos_ + b > order_.size()) {
      rng_.shuffle(std::span<std::uint64_t>(order_));
      pos_ = 0;
    }
    std::vector<std::uint64_t> out(order_.begin() + static_cast<long>(pos_), order_.begin() + static_cast<long>(pos_ + b));
    pos_ += b;
    return out;
  }

 private:
  std::vector<std::uint64_t> order_;
  std::size_t pos_ = 0;
  Rng& rng_;
};

// Sparse (features x rows) copy of image data when most pixels are zero.
std::optional<nn::SparseMatrix<float>> sparse_copy(const VaeSpec& spec, const io::Tensor& data) {
  if (spec.input_kind != InputKind::image) return std::nullopt;
  const Eigen::Map<const Matrix<float>> all(data.values.data(), static_cast<Eigen::Index>(data.row_size()),
                                            static_cast<Eigen::Index>(data.rows()));
  const auto nnz = (all.array() != 0.0f).count();
  if (static_cast<double>(nnz) >= detail::kSparseInputDensity * static_cast<double>(all.size())) return std::nullopt;
  return nn::to_sparse<float>(all);
}

void check_data(const VaeSpec& spec, const io::Tensor& data) {
  if (data.rows() == 0) throw ValidationError("training data is empty");
  if (static_cast<long>(data.row_size()) != spec.input_dim) {
    throw ValidationError("data feature dim " + std::to_string(data.row_size()) + " does not match model input dim " +
                          std::to_string(spec.input_dim));
  }
}

}  // namespace

std::string to_string(Objective o) { return o == Objective::ada_gvae ? "ada_gvae" : "beta_vae"; }

Objective parse_objective(const std::string& s) {
  if (s == "ada_gvae" || s == "ada") return Objective::ada_gvae;
  if (s == "beta_vae" || s == "beta") return Objective::beta_vae;
  throw ValidationError("objective must be ada_gvae or beta_vae, got '" + s + "'");
}

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.steps = 400000;
  c.warmup_steps = 50000;
  return c;
}

TrainConfig TrainConfig::desk() { return TrainConfig{}; }

void TrainConfig::validate() const {
  if (!(beta >= 0.0)) throw ValidationError("train.beta must be non-negative");
  if (steps < 0) throw ValidationError("train.steps must be non-negative");
  if (batch <= 0) throw ValidationError("train.batch must be positive");
  if (warmup_steps < 0 || warmup_steps > steps) throw ValidationError("train.warmup must lie in [0, steps]");
  if (k <= 0) throw ValidationError("train.k must be positive");
  if (finetune_epochs < 0) throw ValidationError("finetune.epochs must be non-negative");
  if (!(adam.learning_rate > 0.0)) throw ValidationError("train.learning_rate must be positive");
  if (log_every <= 0) throw ValidationError("log_every must be positive");
  if (loss_every <= 0) throw ValidationError("loss_every must be positive");
  if (batch % 2 != 0) throw ValidationError("train.batch must be even to form pairs");
}

double effective_beta(double beta, long step, long warmup_steps) {
  if (warmup_steps <= 0) return beta;
  return beta * std::min(1.0, static_cast<double>(step) / static_cast<double>(warmup_steps));
}

PairIndex::PairIndex(synth::FactorSpace space, std::vector<std::uint64_t> row_of_flat)
    : space_(std::move(space)), row_of_flat_(std::move(row_of_flat)) {
  if (row_of_flat_.size() != space_.grid_size()) throw ValidationError("pair index must cover the full grid");
}

PairIndex PairIndex::from_manifest(const synth::FactorSpace& space, const io::Manifest& manifest) {
  std::vector<std::size_t> column(space.size());
  for (std::size_t k = 0; k < space.size(); ++k) {
    const auto& name = space.factor(k).name;
    const auto it = std::find(manifest.factor_names.begin(), manifest.factor_names.end(), name);
    if (it == manifest.factor_names.end()) throw ValidationError("manifest lacks factor column factor_" + name);
    column[k] = static_cast<std::size_t>(it - manifest.factor_names.begin());
  }
  constexpr auto kMissing = std::numeric_limits<std::uint64_t>::max();
  std::vector<std::uint64_t> rows(space.grid_size(), kMissing);
  for (const auto& r : manifest.rows) {
    synth::FactorTuple t(space.size());
    for (std::size_t k = 0; k < space.size(); ++k) t[k] = r.factors[column[k]];
    const auto flat = space.flat_index(t);
    if (rows[flat] != kMissing) throw ValidationError("grid cell " + std::to_string(flat) + " appears twice");
    rows[flat] = r.tensor_row;
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] == kMissing) throw ValidationError("grid cell " + std::to_string(i) + " has no data row");
  }
  return PairIndex(space, std::move(rows));
}

Matrix<float> gather_columns(const io::Tensor& data, std::span<const std::uint64_t> rows) {
  const auto d = static_cast<Eigen::Index>(data.row_size());
  Matrix<float> x(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const auto r = data.row(rows[c]);
    x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Vector<float>>(r.data(), d);
  }
  return x;
}

Matrix<float> to_columns(const io::Tensor& data) {
  std::vector<std::uint64_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return gather_columns(data, rows);
}

TrainResult train(const VaeSpec& spec, const TrainConfig& config, const io::Tensor& data, Objective objective,
                  const PairIndex* pairs, const StepCallback& on_step) {
  config.validate();
  check_data(spec, data);
  if (objective == Objective::ada_gvae && !pairs) throw ValidationError("ada_gvae training needs a pair index");
  const FlushDenormals ftz;

  Rng rng(config.seed);
  VaeSpec s = spec;
  s.beta = config.beta;
  s.seed = config.seed;
  TrainResult result{VaeModel<float>(s, rng), {}};
  result.log.window = config.log_every;
  Recorder recorder(result.log);
  auto& model = result.model;
  nn::Adam<float> adam(config.adam);
  auto params = model.parameter_blocks();
  RowStream stream(data.rows(), rng);
  auto grads = VaeGradients<float>::zeros_like(model);
  const auto sparse_data = sparse_copy(s, data);
  nn::SparseMatrix<float> sparse_batch;
  const auto* sparse_x = sparse_data ? &sparse_batch : nullptr;

  for (long step = 0; step < config.steps; ++step) {
    const double beta_eff = effective_beta(config.beta, step, config.warmup_steps);
    const bool value = step % config.loss_every == 0 || step + 1 == config.steps;
    LossTerms terms;
    double shared = 0.0;
    if (objective == Objective::beta_vae) {
      const auto rows = stream.next(config.batch);
      const auto x = gather_columns(data, rows);
      if (sparse_data) sparse_batch = nn::gather_sparse_columns<float>(*sparse_data, rows);
      const auto eps = draw_noise(rng, s.latent_dim, x.cols());
      terms = elbo_loss(model, x, beta_eff, eps, &grads, value, sparse_x);
    } else {
      const auto n = static_cast<std::size_t>(config.batch / 2);
      std::vector<std::uint64_t> rows(2 * n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto pair = synth::sample_pair(pairs->space(), rng, config.k);
        rows[i] = pairs->row(pair.first);
        rows[i + n] = pairs->row(pair.second);
      }
      const auto x = gather_columns(data, rows);
      if (sparse_data) sparse_batch = nn::gather_sparse_columns<float>(*sparse_data, rows);
      const auto eps = draw_noise(rng, s.latent_dim, x.cols());
      PairDiagnostics diag;
      terms = adagvae_loss(model, x, beta_eff, eps, &grads, std::nullopt, &diag, value, sparse_x);
      shared = diag.shared_fraction;
    }
    check_finite(terms, value, step, model);
    adam.step(params, grads.blocks());
    recorder.add(terms.loss, shared);
    if (on_step) on_step(step, terms);
  }
  recorder.flush();
  result.log.steps = config.steps;
  return result;
}

TrainResult finetune(const VaeModel<float>& source, const io::Tensor& target, int epochs, const TrainConfig& config) {
  if (static_cast<long>(target.row_size()) != source.input_dim()) {
    throw ValidationError("target feature dim " + std::to_string(target.row_size()) + " does not match model input dim " +
                          std::to_string(source.input_dim()));
  }
  if (epochs < 0) throw ValidationError("finetune epochs must be non-negative");
  if (target.rows() == 0) throw ValidationError("finetune target is empty");
  const FlushDenormals ftz;
  TrainResult result{source, {}};
  result.log.window = config.log_every;
  Recorder recorder(result.log);
  auto& model = result.model;
  Rng rng(config.seed);
  nn::Adam<float> adam(config.adam);
  auto params = model.parameter_blocks();
  std::vector<std::uint64_t> order(target.rows());
  std::iota(order.begin(), order.end(), 0);
  auto grads = VaeGradients<float>::zeros_like(model);
  const auto sparse_data = sparse_copy(model.spec, target);
  nn::SparseMatrix<float> sparse_batch;
  long step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(std::span<std::uint64_t>(order));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      const std::span<const std::uint64_t> rows(order.data() + start, end - start);
      const auto x = gather_columns(target, rows);
      if (sparse_data) sparse_batch = nn::gather_sparse_columns<float>(*sparse_data, rows);
      const auto eps = draw_noise(rng, model.latent_dim(), x.cols());
      const bool value = step % config.loss_every == 0;
      const auto terms =
          elbo_loss(model, x, model.spec.beta, eps, &grads, value, sparse_data ? &sparse_batch : nullptr);
      check_finite(terms, value, step, model);
      adam.step(params, grads.blocks());
      recorder.add(terms.loss, 0.0);
      ++step;
    }
  }
  recorder.flush();
  result.log.steps = step;
  return result;
}

io::Tensor encode_means(const VaeModel<float>& model, const io::Tensor& data) {
  check_data(model.spec, data);
  const auto L = static_cast<std::uint64_t>(model.latent_dim());
  io::Tensor out({data.rows(), L});
  constexpr std::uint64_t chunk = 1024;
  for (std::uint64_t start = 0; start < data.rows(); start += chunk) {
    const auto end = std::min(data.rows(), start + chunk);
    std::vector<std::uint64_t> rows(end - start);
    std::iota(rows.begin(), rows.end(), start);
    const auto post = encode(model, gather_columns(data, rows));
    for (std::uint64_t i = 0; i < rows.size(); ++i) {
      for (std::uint64_t j = 0; j < L; ++j) {
        out.values[(start + i) * L + j] = post.mean(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
      }
    }
  }
  return out;
}

}  // namespace disentlab::vae
