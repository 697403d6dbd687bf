#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "disentlab/trees/gbt.hpp"

namespace disentlab::metrics {

// Latent codes: samples in rows, dimensions in columns.
using Representation = Eigen::MatrixXd;

/// Integer factor annotations aligned to the rows of a representation.
struct FactorTable {
  std::vector<std::string> names;
  Eigen::MatrixXi values;  // samples x factors

  std::size_t size() const { return names.size(); }
  std::vector<int> column(std::size_t k) const;
  void validate(Eigen::Index rows) const;
};

/// Uniform-width bins between min and max; the maximum falls in the last
/// bin. A constant column maps to code 0.
std::vector<int> discretize(const Eigen::Ref<const Eigen::VectorXd>& column, int bins = 20);

/// Plug-in entropy in nats of nonnegative integer codes.
double entropy(std::span<const int> codes);

/// Plug-in mutual information in nats from the joint histogram.
double mutual_information(std::span<const int> a, std::span<const int> b);

/// A[k][j] = I(v_k; discretize(z_j)) / H(v_k), clipped to [0, 1]. Factors
/// with zero entropy are left out; `factors` lists the kept ones.
struct AssociationMatrix {
  std::vector<std::string> factors;
  std::vector<std::size_t> factor_columns;  // index into the FactorTable
  std::vector<double> factor_entropy;       // nats
  Eigen::MatrixXd values;                   // kept factors x latent dims
};

AssociationMatrix association_matrix(const Representation& z, const FactorTable& factors, int bins = 20);

struct MigResult {
  double score = 0.0;
  std::vector<double> per_factor;  // normalized gap per kept factor
};

/// Mean over factors of the normalized gap between the two most associated dims.
MigResult mig(const AssociationMatrix& a);

struct DciResult {
  double disentanglement = 0.0;
  double completeness = 0.0;
  double informativeness = 0.0;  // mean training accuracy of the per-factor GBTs
  Eigen::MatrixXd importance;     // latent dims x kept factors
  std::vector<double> dim_disentanglement;
  std::vector<double> dim_weight;
  std::vector<std::string> factors;
  bool degenerate = false;  // all-zero importance
};

/// DCI scores from an importance matrix (dims x factors): d_j = 1 - H_K(P_j / sum P_j),
/// weighted by each dim's share of total importance; completeness mirrors
/// this per factor with entropy base L.
DciResult dci_from_importance(const Eigen::MatrixXd& importance);

/// Fits one GBT per non-constant factor predicting it from z and scores the
/// normalized Gini importances.
DciResult dci(const Representation& z, const FactorTable& factors, const trees::GbtSettings& settings = {});

struct OmesResult {
  double score = 0.0;
  double alpha = 0.5;
  std::vector<int> best_dim;  // j* per factor
  std::vector<double> modularity;
  std::vector<double> compactness;
  std::vector<double> strength;  // A[k][j*]
  bool degenerate = false;       // all-zero association
};

/// Per factor k with j* = argmax_j A[k][j]: Compactness = A[k][j*] / sum_j A[k][j],
/// Modularity = A[k][j*] / sum_k' A[k'][j*]. Each factor's term
/// alpha * Modularity + (1 - alpha) * Compactness is weighted by its
/// association strength A[k][j*], so a representation carrying no factor
/// information scores 0 instead of rewarding ratios of estimator noise.
OmesResult omes(const AssociationMatrix& a, double alpha = 0.5);

struct ExplicitnessResult {
  std::vector<std::string> factors;
  std::vector<double> accuracy;  // test accuracy per evaluated factor
  double mean = 0.0;
  std::vector<std::string> skipped;  // constant on the training rows
};

/// GBT per factor trained on `train` rows and scored on `test` rows.
ExplicitnessResult explicitness(const Representation& z, const FactorTable& factors,
                                std::span<const std::size_t> train, std::span<const std::size_t> test,
                                const trees::GbtSettings& settings = {});

inline const std::string kInactive = "inactive";

struct DimensionLabel {
  std::string factor;  // kInactive for an all-zero column
  double confidence = 0.0;
};

/// Dim j takes the factor with the largest A[k][j]; confidence is
/// A[k][j] / sum_k A[k][j].
std::vector<DimensionLabel> label_dimensions(const AssociationMatrix& a);

struct Pruning {
  std::vector<int> kept;  // original column indices, ascending
  std::vector<double> sd;  // population SD of every original column
  double threshold = 0.05;

  Representation apply(const Representation& z) const;
};

/// Keeps columns whose population SD over `train` is at least `threshold`.
Pruning prune_inactive(const Representation& train, double threshold = 0.05);

/// Rows of `z` selected by index.
Representation take_rows(const Representation& z, std::span<const std::size_t> rows);

}  // namespace disentlab::metrics
