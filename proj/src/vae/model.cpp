#include "disentlab/vae/model.hpp"

namespace disentlab {

namespace nn {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity:
      return "identity";
    case Activation::relu:
      return "relu";
    case Activation::leaky_relu:
      return "leaky_relu";
  }
  return "unknown";
}

Activation parse_activation(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "leaky_relu") return Activation::leaky_relu;
  throw ValidationError("unknown activation: " + s);
}

}  // namespace nn

namespace vae {

std::string to_string(InputKind k) { return k == InputKind::image ? "image" : "embedding"; }

InputKind parse_input_kind(const std::string& s) {
  if (s == "image") return InputKind::image;
  if (s == "embedding") return InputKind::embedding;
  throw ValidationError("input_kind must be image or embedding, got '" + s + "'");
}

VaeSpec VaeSpec::for_embeddings(int input_dim) {
  VaeSpec s;
  s.input_dim = input_dim;
  s.hidden = {512, 256};
  s.input_kind = InputKind::embedding;
  return s;
}

VaeSpec VaeSpec::for_images(int input_dim) {
  VaeSpec s;
  s.input_dim = input_dim;
  s.hidden = {32, 32};
  s.input_kind = InputKind::image;
  return s;
}

void VaeSpec::validate() const {
  if (input_dim <= 0) throw ValidationError("input_dim must be positive");
  if (latent_dim <= 0) throw ValidationError("latent_dim must be positive");
  for (int h : hidden) {
    if (h <= 0) throw ValidationError("hidden sizes must be positive");
  }
  if (!(beta >= 0.0)) throw ValidationError("beta must be non-negative");
}

}  // namespace vae
}  // namespace disentlab
