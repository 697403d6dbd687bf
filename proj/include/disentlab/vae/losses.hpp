#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "disentlab/common/error.hpp"
#include "disentlab/vae/model.hpp"

namespace disentlab::vae {

// Loss values are NaN when the caller skipped their evaluation.
struct LossTerms {
  double loss = 0.0;
  double reconstruction = 0.0;  // mean over samples
  double kl = 0.0;              // mean over samples of the summed KL
};

inline double clamp_log_variance(double lv) { return std::clamp(lv, kLogVarMin, kLogVarMax); }

/// KL(N(mu, exp(lv)) || N(0, 1)) = 0.5 (mu^2 + sigma^2 - log sigma^2 - 1).
inline double gauss_kl(double mu, double logvar) {
  const double lv = clamp_log_variance(logvar);
  return 0.5 * (mu * mu + std::exp(lv) - lv - 1.0);
}

std::vector<double> gauss_kl(std::span<const double> mu, std::span<const double> logvar);

/// Symmetrized per-dimension KL between two diagonal Gaussians:
/// 0.5 [KL(q1||q2) + KL(q2||q1)].
inline double symmetric_kl(double mu1, double var1, double mu2, double var2) {
  const double d2 = (mu1 - mu2) * (mu1 - mu2);
  return 0.25 * ((var1 + d2) / var2 + (var2 + d2) / var1 - 2.0);
}

/// Which latent dims a pair shares. Adaptive rule: threshold halfway between
/// the smallest and largest divergence, shared iff strictly below. When all
/// divergences are equal every dim is shared except the first. With
/// `k_known`, the k largest divergences are individual (ties: lower index
/// first) and the rest shared.
std::vector<bool> select_shared_dims(std::span<const double> divergence, std::optional<int> k_known = std::nullopt);

namespace detail {

template <typename Scalar>
struct EncoderOutput {
  Matrix<Scalar> raw;     // 2L x n as produced by the encoder
  Matrix<Scalar> mean;    // L x n
  Matrix<Scalar> logvar;  // L x n, clamped
  typename nn::Mlp<Scalar>::Tape tape;
  nn::SparseMatrix<Scalar> sparse_input;
};

// Below this nonzero density the first encoder layer runs on a sparse copy.
inline constexpr double kSparseInputDensity = 0.25;

// Fills `out` in place: its tape may point at out.sparse_input or at
// `sparse_x`, a caller-provided sparse copy of x that must outlive `out`.
template <typename Scalar>
void run_encoder(const VaeModel<Scalar>& model, const Matrix<Scalar>& x, bool keep_tape, EncoderOutput<Scalar>& out,
                 const nn::SparseMatrix<Scalar>* sparse_x = nullptr) {
  auto* tape = keep_tape ? &out.tape : nullptr;
  bool sparse = false;
  if (!sparse_x && model.spec.input_kind == InputKind::image) {
    const auto nnz = (x.array() != Scalar(0)).count();
    sparse = static_cast<double>(nnz) < kSparseInputDensity * static_cast<double>(x.size());
  }
  if (sparse_x) {
    if (sparse_x->rows() != x.rows() || sparse_x->cols() != x.cols()) throw Error("sparse batch copy has the wrong shape");
    out.raw = model.encoder.forward(*sparse_x, tape);
  } else if (sparse) {
    out.sparse_input = nn::to_sparse<Scalar>(x);
    out.raw = model.encoder.forward(out.sparse_input, tape);
  } else {
    out.raw = model.encoder.forward(x, tape);
  }
  const auto L = model.latent_dim();
  out.mean = out.raw.topRows(L);
  out.logvar = out.raw.bottomRows(L)
                   .array()
                   .max(static_cast<Scalar>(kLogVarMin))
                   .min(static_cast<Scalar>(kLogVarMax))
                   .matrix();
}

/// Decode reparameterized samples of the given posterior and score them.
/// Fills d(loss)/d(mean) and d(loss)/d(logvar) and writes decoder
/// gradients when `grads` is set. With `value` false and gradients requested
/// the loss itself is not evaluated.
template <typename Scalar>
LossTerms score_posterior(const VaeModel<Scalar>& model, const Matrix<Scalar>& x, const Matrix<Scalar>& mean,
                          const Matrix<Scalar>& logvar, const Matrix<Scalar>& noise, double beta_eff,
                          VaeGradients<Scalar>* grads, Matrix<Scalar>* d_mean, Matrix<Scalar>* d_logvar,
                          bool value = true) {
  value = value || !grads;
  const auto n = x.cols();
  if (noise.rows() != mean.rows() || noise.cols() != n) throw ValidationError("noise shape does not match posterior");
  const Matrix<Scalar> sigma = (logvar.array() * Scalar(0.5)).exp().matrix();
  const Matrix<Scalar> z = mean + sigma.cwiseProduct(noise);
  typename nn::Mlp<Scalar>::Tape tape;
  const Matrix<Scalar> out = model.decoder.forward(z, grads ? &tape : nullptr);

  double recon = 0.0;
  Matrix<Scalar> d_out;
  if (grads) d_out.resize(out.rows(), out.cols());
  const auto inv_n = Scalar(1) / static_cast<Scalar>(n);
  if (model.spec.input_kind == InputKind::image) {
    // Bernoulli cross-entropy on logits: softplus(l) - x l.
    const auto l = out.array();
    if (value) {
      const Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic> ce =
          l.max(Scalar(0)) + ((-l.abs()).exp() + Scalar(1)).log() - x.array() * l;
      recon = ce.colwise().sum().template cast<double>().sum();
    }
    if (grads) d_out = (((Scalar(1) + (-l).exp()).inverse() - x.array()) * inv_n).matrix();
  } else {
    const Matrix<Scalar> diff = out - x;
    for (Eigen::Index c = 0; c < n; ++c) recon += 0.5 * static_cast<double>(diff.col(c).squaredNorm());
    if (grads) d_out = diff * inv_n;
  }

  double kl = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    for (Eigen::Index j = 0; j < mean.rows(); ++j) {
      kl += gauss_kl(static_cast<double>(mean(j, c)), static_cast<double>(logvar(j, c)));
    }
  }

  LossTerms terms;
  terms.reconstruction = value ? recon / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  terms.kl = kl / static_cast<double>(n);
  terms.loss = terms.reconstruction + beta_eff * terms.kl;
  if (!grads) return terms;

  Matrix<Scalar> d_z;
  model.decoder.backward(tape, std::move(d_out), grads->decoder, &d_z);
  const auto b = static_cast<Scalar>(beta_eff) * inv_n;
  *d_mean = d_z + b * mean;
  const Matrix<Scalar> var = sigma.cwiseProduct(sigma);
  *d_logvar = (d_z.cwiseProduct(noise).cwiseProduct(sigma) * Scalar(0.5)).matrix() +
              (b * Scalar(0.5) * (var.array() - Scalar(1))).matrix();
  return terms;
}

template <typename Scalar>
void backprop_encoder(const VaeModel<Scalar>& model, const EncoderOutput<Scalar>& enc, const Matrix<Scalar>& d_mean,
                      Matrix<Scalar> d_logvar, VaeGradients<Scalar>& grads) {
  const auto L = model.latent_dim();
  // No gradient through the clamp outside its range.
  const auto raw_lv = enc.raw.bottomRows(L);
  for (Eigen::Index c = 0; c < d_logvar.cols(); ++c) {
    for (Eigen::Index j = 0; j < L; ++j) {
      const double v = static_cast<double>(raw_lv(j, c));
      if (v < kLogVarMin || v > kLogVarMax) d_logvar(j, c) = Scalar(0);
    }
  }
  Matrix<Scalar> d_raw(2 * L, d_mean.cols());
  d_raw.topRows(L) = d_mean;
  d_raw.bottomRows(L) = d_logvar;
  model.encoder.backward(enc.tape, std::move(d_raw), grads.encoder, nullptr);
}

}  // namespace detail

/// Negative ELBO with weighted KL: mean over samples of recon + beta * sum KL.
/// `noise` holds the standard-normal draws (L x n) for the reparameterization.
/// `sparse_x`, when given, is a sparse copy of x used by the first encoder layer.
template <typename Scalar>
LossTerms elbo_loss(const VaeModel<Scalar>& model, const Matrix<Scalar>& x, double beta_eff, const Matrix<Scalar>& noise,
                    VaeGradients<Scalar>* grads, bool value = true,
                    const nn::SparseMatrix<Scalar>* sparse_x = nullptr) {
  if (x.rows() != model.input_dim()) {
    throw ValidationError("batch has feature dim " + std::to_string(x.rows()) + ", model expects " +
                          std::to_string(model.input_dim()));
  }
  detail::EncoderOutput<Scalar> enc;
  detail::run_encoder(model, x, grads != nullptr, enc, sparse_x);
  Matrix<Scalar> d_mean, d_logvar;
  const auto terms =
      detail::score_posterior(model, x, enc.mean, enc.logvar, noise, beta_eff, grads, &d_mean, &d_logvar, value);
  if (grads) detail::backprop_encoder(model, enc, d_mean, std::move(d_logvar), *grads);
  return terms;
}

struct PairDiagnostics {
  // Fraction of latent dims treated as shared, averaged over pairs.
  double shared_fraction = 0.0;
};

/// Ada-GVAE objective. `pairs` holds 2n columns: column i and column i + n
/// form a pair. Dims inferred as shared are replaced in both posteriors by
/// the averaged Gaussian (mean of means, mean of variances) before sampling.
/// Loss = mean over all 2n elements of recon + beta * sum KL(modified || prior).
template <typename Scalar>
LossTerms adagvae_loss(const VaeModel<Scalar>& model, const Matrix<Scalar>& pairs, double beta_eff,
                       const Matrix<Scalar>& noise, VaeGradients<Scalar>* grads,
                       std::optional<int> k_known = std::nullopt, PairDiagnostics* diagnostics = nullptr,
                       bool value = true, const nn::SparseMatrix<Scalar>* sparse_x = nullptr) {
  if (pairs.rows() != model.input_dim()) {
    throw ValidationError("pair batch has feature dim " + std::to_string(pairs.rows()) + ", model expects " +
                          std::to_string(model.input_dim()));
  }
  if (pairs.cols() % 2 != 0 || pairs.cols() == 0) throw ValidationError("pair batch needs an even, nonzero column count");
  const auto n = pairs.cols() / 2;
  const auto L = model.latent_dim();
  detail::EncoderOutput<Scalar> enc;
  detail::run_encoder(model, pairs, grads != nullptr, enc, sparse_x);

  Matrix<Scalar> mean = enc.mean;
  Matrix<Scalar> logvar = enc.logvar;
  std::vector<std::vector<bool>> shared(static_cast<std::size_t>(n));
  std::vector<double> delta(static_cast<std::size_t>(L));
  double shared_total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a = i;
    const auto b = i + n;
    for (Eigen::Index j = 0; j < L; ++j) {
      delta[static_cast<std::size_t>(j)] =
          symmetric_kl(enc.mean(j, a), std::exp(static_cast<double>(enc.logvar(j, a))), enc.mean(j, b),
                       std::exp(static_cast<double>(enc.logvar(j, b))));
    }
    shared[static_cast<std::size_t>(i)] = select_shared_dims(delta, k_known);
    for (Eigen::Index j = 0; j < L; ++j) {
      if (!shared[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
      shared_total += 1.0;
      const Scalar m = (enc.mean(j, a) + enc.mean(j, b)) * Scalar(0.5);
      const Scalar v = (std::exp(enc.logvar(j, a)) + std::exp(enc.logvar(j, b))) * Scalar(0.5);
      mean(j, a) = mean(j, b) = m;
      logvar(j, a) = logvar(j, b) = std::log(v);
    }
  }
  if (diagnostics) diagnostics->shared_fraction = shared_total / static_cast<double>(n * L);

  Matrix<Scalar> d_mean, d_logvar;
  const auto terms =
      detail::score_posterior(model, pairs, mean, logvar, noise, beta_eff, grads, &d_mean, &d_logvar, value);
  if (!grads) return terms;

  // Chain through the averaging on shared dims.
  Matrix<Scalar> d_mean_raw = d_mean;
  Matrix<Scalar> d_logvar_raw = d_logvar;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto a = i;
    const auto b = i + n;
    for (Eigen::Index j = 0; j < L; ++j) {
      if (!shared[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) continue;
      const Scalar dm = (d_mean(j, a) + d_mean(j, b)) * Scalar(0.5);
      d_mean_raw(j, a) = d_mean_raw(j, b) = dm;
      const Scalar va = std::exp(enc.logvar(j, a));
      const Scalar vb = std::exp(enc.logvar(j, b));
      const Scalar dl = d_logvar(j, a) + d_logvar(j, b);
      d_logvar_raw(j, a) = dl * va / (va + vb);
      d_logvar_raw(j, b) = dl * vb / (va + vb);
    }
  }
  detail::backprop_encoder(model, enc, d_mean_raw, std::move(d_logvar_raw), *grads);
  return terms;
}

}  // namespace disentlab::vae
