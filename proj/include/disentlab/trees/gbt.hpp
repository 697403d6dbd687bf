#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace disentlab::trees {

// Samples in rows, features in columns.
using FeatureMatrix = Eigen::MatrixXd;

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output
  double gain = 0.0;   // squared-error decrease of the split
  std::size_t samples = 0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(const FeatureMatrix& x, Eigen::Index row) const;
  int depth() const;
};

using LeafValue = std::function<double(std::span<const std::size_t> rows)>;

/// Least-squares regression tree grown level by level with exact greedy
/// splits. A node splits when the best squared-error decrease is positive;
/// equal gains resolve to the smallest (feature, threshold). `leaf` maps the
/// rows of a leaf to its output (default: mean target).
Tree fit_tree(const FeatureMatrix& x, std::span<const double> target, int max_depth, const LeafValue& leaf = {});

struct GbtSettings {
  int rounds = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  std::uint64_t seed = 0;  // fitting is deterministic; kept for provenance

  void validate() const;
};

struct GbtModel {
  int num_features = 0;
  int num_classes = 0;
  GbtSettings settings;
  std::vector<std::vector<Tree>> rounds;  // rounds[r][class]
  // Set when training labels held a single class; predictions are that class.
  bool constant = false;
  int constant_class = 0;
};

/// Multiclass softmax gradient boosting. Scores start at zero (uniform
/// probabilities); each round fits one tree per class to y_onehot - p and
/// sets leaves by the one-step Newton value (K-1)/K * sum r / sum |r|(1-|r|).
/// `num_classes` 0 means max(y) + 1.
GbtModel fit_gbt(const FeatureMatrix& x, std::span<const int> y, const GbtSettings& settings = {}, int num_classes = 0);

struct Prediction {
  std::vector<int> labels;
  Eigen::MatrixXd probabilities;  // samples x classes
};

Prediction predict(const GbtModel& model, const FeatureMatrix& x);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

/// Mean negative log-likelihood of the true labels.
double log_loss(const Prediction& p, std::span<const int> y);

/// Per-feature sum of split gains over all trees, normalized to sum 1; all
/// zeros when the model has no splits.
std::vector<double> gini_importance(const GbtModel& model);

}  // namespace disentlab::trees
