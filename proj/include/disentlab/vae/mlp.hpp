#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "disentlab/common/error.hpp"
#include "disentlab/common/random.hpp"

namespace disentlab::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor>;

/// Column-major sparse copy of a dense matrix (exact zeros dropped).
template <typename Scalar>
SparseMatrix<Scalar> to_sparse(Eigen::Ref<const Matrix<Scalar>> x) {
  SparseMatrix<Scalar> s(x.rows(), x.cols());
  s.reserve((x.array() != Scalar(0)).count());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    s.startVec(c);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (x(r, c) != Scalar(0)) s.insertBack(r, c) = x(r, c);
    }
  }
  s.finalize();
  return s;
}

/// The given columns of a column-major sparse matrix, in order.
template <typename Scalar>
SparseMatrix<Scalar> gather_sparse_columns(const SparseMatrix<Scalar>& all, std::span<const std::uint64_t> cols) {
  SparseMatrix<Scalar> s(all.rows(), static_cast<Eigen::Index>(cols.size()));
  Eigen::Index nnz = 0;
  for (const auto c : cols) {
    const auto ci = static_cast<Eigen::Index>(c);
    nnz += all.outerIndexPtr()[ci + 1] - all.outerIndexPtr()[ci];
  }
  s.reserve(nnz);
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    s.startVec(jj);
    for (typename SparseMatrix<Scalar>::InnerIterator it(all, static_cast<Eigen::Index>(cols[j])); it; ++it) {
      s.insertBack(it.row(), jj) = it.value();
    }
  }
  s.finalize();
  return s;
}

enum class Activation { identity, relu, leaky_relu };

inline constexpr double kLeakySlope = 0.01;

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

template <typename Scalar>
struct Dense {
  Matrix<Scalar> weight;  // out x in
  Vector<Scalar> bias;    // out

  int inputs() const { return static_cast<int>(weight.cols()); }
  int outputs() const { return static_cast<int>(weight.rows()); }
};

/// Fully connected network; samples are columns. Hidden layers use the
/// chosen activation, the output layer is linear.
template <typename Scalar>
class Mlp {
 public:
  struct Tape {
    const Matrix<Scalar>* input = nullptr;
    const SparseMatrix<Scalar>* sparse_input = nullptr;
    std::vector<Matrix<Scalar>> pre;   // pre-activation of each hidden layer
    std::vector<Matrix<Scalar>> post;  // activation of each hidden layer
  };

  Mlp() = default;
  Mlp(const std::vector<int>& sizes, Activation hidden, Rng& rng) : activation_(hidden) {
    if (sizes.size() < 2) throw ValidationError("an MLP needs at least input and output sizes");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int in = sizes[l];
      const int out = sizes[l + 1];
      if (in <= 0 || out <= 0) throw ValidationError("layer sizes must be positive");
      const bool last = l + 2 == sizes.size();
      // He init for rectifier layers, LeCun for the linear head.
      const double stddev = std::sqrt((last || hidden == Activation::identity ? 1.0 : 2.0) / in);
      Dense<Scalar> layer;
      layer.weight.resize(out, in);
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
          layer.weight(r, c) = static_cast<Scalar>(stddev * rng.normal());
        }
      }
      layer.bias = Vector<Scalar>::Zero(out);
      layers_.push_back(std::move(layer));
    }
  }

  Mlp(std::vector<Dense<Scalar>> layers, Activation hidden) : activation_(hidden), layers_(std::move(layers)) {
    if (layers_.empty()) throw ValidationError("an MLP needs at least one layer");
    for (std::size_t l = 1; l < layers_.size(); ++l) {
      if (layers_[l].inputs() != layers_[l - 1].outputs()) throw ValidationError("MLP layer sizes do not chain");
    }
  }

  template <typename Other>
  Mlp<Other> cast() const {
    std::vector<Dense<Other>> out;
    for (const auto& l : layers_) out.push_back({l.weight.template cast<Other>(), l.bias.template cast<Other>()});
    return Mlp<Other>(std::move(out), activation_);
  }

  Activation activation() const { return activation_; }
  const std::vector<Dense<Scalar>>& layers() const { return layers_; }
  std::vector<Dense<Scalar>>& layers() { return layers_; }
  int input_size() const { return layers_.front().inputs(); }
  int output_size() const { return layers_.back().outputs(); }

  std::vector<int> sizes() const {
    std::vector<int> s{input_size()};
    for (const auto& l : layers_) s.push_back(l.outputs());
    return s;
  }

  // Zero-valued gradient buffers with this network's shapes.
  std::vector<Dense<Scalar>> zero_gradients() const {
    std::vector<Dense<Scalar>> g;
    for (const auto& l : layers_) {
      g.push_back({Matrix<Scalar>::Zero(l.weight.rows(), l.weight.cols()), Vector<Scalar>::Zero(l.bias.size())});
    }
    return g;
  }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, Tape* tape) const {
    if (tape) {
      tape->input = &x;
      tape->sparse_input = nullptr;
    }
    return forward_from(x, tape);
  }

  // Sparse input path for the first layer; gradients w.r.t. the input are
  // not available on this path.
  Matrix<Scalar> forward(const SparseMatrix<Scalar>& x, Tape* tape) const {
    if (tape) {
      tape->input = nullptr;
      tape->sparse_input = &x;
    }
    return forward_from(x, tape);
  }

  /// Backpropagate dL/d(output). Gradients overwrite `grads`, which must
  /// already have this network's shapes;
  /// dL/d(input) is written to `grad_input` when requested.
  void backward(const Tape& tape, Matrix<Scalar> grad, std::vector<Dense<Scalar>>& grads,
                Matrix<Scalar>* grad_input) const {
    for (std::size_t l = layers_.size(); l-- > 0;) {
      if (l == 0) {
        if (tape.sparse_input) {
          grads[0].weight.noalias() = grad * tape.sparse_input->transpose();
        } else {
          grads[0].weight.noalias() = grad * tape.input->transpose();
        }
      } else {
        grads[l].weight.noalias() = grad * tape.post[l - 1].transpose();
      }
      grads[l].bias.noalias() = grad.rowwise().sum();
      if (l == 0 && !grad_input) return;
      Matrix<Scalar> back(layers_[l].weight.cols(), grad.cols());
      back.noalias() = layers_[l].weight.transpose() * grad;
      if (l == 0) {
        if (tape.sparse_input) throw Error("input gradient is unavailable for sparse input");
        *grad_input = std::move(back);
        return;
      }
      grad = activate_backward(tape.pre[l - 1], back);
    }
  }

 private:
  template <typename Input>
  Matrix<Scalar> forward_from(const Input& x, Tape* tape) const {
    if (x.rows() != input_size()) {
      throw ValidationError("MLP expects input dim " + std::to_string(input_size()) + ", got " +
                            std::to_string(x.rows()));
    }
    if (tape) {
      tape->pre.clear();
      tape->post.clear();
    }
    Matrix<Scalar> z(layers_[0].weight.rows(), x.cols());
    z.noalias() = layers_[0].weight * x;
    z.colwise() += layers_[0].bias;
    for (std::size_t l = 1; l < layers_.size(); ++l) {
      Matrix<Scalar> a = activate(z);
      Matrix<Scalar> next(layers_[l].weight.rows(), x.cols());
      next.noalias() = layers_[l].weight * a;
      next.colwise() += layers_[l].bias;
      if (tape) {
        tape->pre.push_back(std::move(z));
        tape->post.push_back(std::move(a));
      }
      z = std::move(next);
    }
    return z;
  }

  Matrix<Scalar> activate(const Matrix<Scalar>& z) const {
    switch (activation_) {
      case Activation::identity:
        return z;
      case Activation::relu:
        return z.cwiseMax(Scalar(0));
      case Activation::leaky_relu:
        return z.unaryExpr([](Scalar v) { return v > Scalar(0) ? v : Scalar(kLeakySlope) * v; });
    }
    return z;
  }

  Matrix<Scalar> activate_backward(const Matrix<Scalar>& pre, const Matrix<Scalar>& grad) const {
    switch (activation_) {
      case Activation::identity:
        return grad;
      case Activation::relu:
        return grad.cwiseProduct(pre.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(0); }));
      case Activation::leaky_relu:
        return grad.cwiseProduct(
            pre.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(kLeakySlope); }));
    }
    return grad;
  }

  Activation activation_ = Activation::leaky_relu;
  std::vector<Dense<Scalar>> layers_;
};

/// Parameter blocks of a layer list as flat spans (weight then bias per layer).
template <typename Scalar>
void append_blocks(std::vector<Dense<Scalar>>& layers, std::vector<std::span<Scalar>>& out) {
  for (auto& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
}

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction over a fixed list of parameter blocks.
template <typename Scalar>
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  long step_count() const { return t_; }

  void step(std::span<const std::span<Scalar>> params, std::span<const std::span<Scalar>> grads) {
    if (params.size() != grads.size()) throw Error("Adam: parameter/gradient block mismatch");
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.emplace_back(Vector<Scalar>::Zero(static_cast<Eigen::Index>(p.size())));
        v_.emplace_back(Vector<Scalar>::Zero(static_cast<Eigen::Index>(p.size())));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const auto lr = static_cast<Scalar>(config_.learning_rate * std::sqrt(c2) / c1);
    const auto b1 = static_cast<Scalar>(config_.beta1);
    const auto b2 = static_cast<Scalar>(config_.beta2);
    // Epsilon is applied to the bias-corrected second moment.
    const auto eps = static_cast<Scalar>(config_.epsilon * std::sqrt(c2));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto n = static_cast<Eigen::Index>(params[i].size());
      Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> p(params[i].data(), n);
      Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> g(grads[i].data(), n);
      auto m = m_[i].array();
      auto v = v_[i].array();
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.square();
      p -= lr * m / (v.sqrt() + eps);
    }
  }

 private:
  AdamConfig config_;
  long t_ = 0;
  std::vector<Vector<Scalar>> m_;
  std::vector<Vector<Scalar>> v_;
};

}  // namespace disentlab::nn
