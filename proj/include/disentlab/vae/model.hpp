#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "disentlab/vae/mlp.hpp"

namespace disentlab::vae {

using nn::Matrix;
using nn::Vector;

enum class InputKind { embedding, image };

std::string to_string(InputKind k);
InputKind parse_input_kind(const std::string& s);

inline constexpr double kLogVarMin = -20.0;
inline constexpr double kLogVarMax = 20.0;

struct VaeSpec {
  int input_dim = 768;
  int latent_dim = 10;
  std::vector<int> hidden{512, 256};
  nn::Activation activation = nn::Activation::leaky_relu;
  InputKind input_kind = InputKind::embedding;
  double beta = 1.0;
  std::uint64_t seed = 0;

  // Defaults per input kind; image hidden sizes are sized for one CPU core.
  static VaeSpec for_embeddings(int input_dim);
  static VaeSpec for_images(int input_dim);
  void validate() const;
};

/// Gaussian VAE: encoder input -> hidden -> 2L (mean, log-variance), decoder
/// L -> reversed hidden -> input.
template <typename Scalar>
struct VaeModel {
  VaeSpec spec;
  nn::Mlp<Scalar> encoder;
  nn::Mlp<Scalar> decoder;

  VaeModel() = default;
  VaeModel(const VaeSpec& s, Rng& rng) : spec(s) {
    s.validate();
    std::vector<int> enc{s.input_dim};
    enc.insert(enc.end(), s.hidden.begin(), s.hidden.end());
    enc.push_back(2 * s.latent_dim);
    std::vector<int> dec{s.latent_dim};
    dec.insert(dec.end(), s.hidden.rbegin(), s.hidden.rend());
    dec.push_back(s.input_dim);
    encoder = nn::Mlp<Scalar>(enc, s.activation, rng);
    decoder = nn::Mlp<Scalar>(dec, s.activation, rng);
  }

  int latent_dim() const { return spec.latent_dim; }
  int input_dim() const { return spec.input_dim; }

  std::vector<std::span<Scalar>> parameter_blocks() {
    std::vector<std::span<Scalar>> out;
    nn::append_blocks(encoder.layers(), out);
    nn::append_blocks(decoder.layers(), out);
    return out;
  }

  template <typename Other>
  VaeModel<Other> cast() const {
    VaeModel<Other> out;
    out.spec = spec;
    out.encoder = encoder.template cast<Other>();
    out.decoder = decoder.template cast<Other>();
    return out;
  }
};

template <typename Scalar>
struct VaeGradients {
  std::vector<nn::Dense<Scalar>> encoder;
  std::vector<nn::Dense<Scalar>> decoder;

  static VaeGradients zeros_like(const VaeModel<Scalar>& m) {
    return {m.encoder.zero_gradients(), m.decoder.zero_gradients()};
  }
  std::vector<std::span<Scalar>> blocks() {
    std::vector<std::span<Scalar>> out;
    nn::append_blocks(encoder, out);
    nn::append_blocks(decoder, out);
    return out;
  }
};

template <typename Scalar>
struct Posterior {
  Matrix<Scalar> mean;      // L x n
  Matrix<Scalar> variance;  // L x n, strictly positive
};

/// Posterior mean and variance; the mean is the representation used
/// downstream. Processes columns in chunks to bound memory.
template <typename Scalar>
Posterior<Scalar> encode(const VaeModel<Scalar>& model, const Matrix<Scalar>& x) {
  const auto L = model.latent_dim();
  Posterior<Scalar> out{Matrix<Scalar>(L, x.cols()), Matrix<Scalar>(L, x.cols())};
  constexpr Eigen::Index chunk = 512;
  for (Eigen::Index start = 0; start < x.cols(); start += chunk) {
    const auto n = std::min(chunk, x.cols() - start);
    const Matrix<Scalar> block = x.middleCols(start, n);
    const Matrix<Scalar> h = model.encoder.forward(block, nullptr);
    out.mean.middleCols(start, n) = h.topRows(L);
    out.variance.middleCols(start, n) =
        h.bottomRows(L)
            .array()
            .max(static_cast<Scalar>(kLogVarMin))
            .min(static_cast<Scalar>(kLogVarMax))
            .exp()
            .matrix();
  }
  return out;
}

}  // namespace disentlab::vae
