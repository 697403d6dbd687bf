#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "disentlab/metrics/metrics.hpp"
#include "disentlab/trees/gbt.hpp"

namespace disentlab::downstream {

// Samples in rows.
struct LabeledSet {
  Eigen::MatrixXd x;
  std::vector<int> y;

  void validate(const std::string& what) const;
};

struct MlpSettings {
  std::vector<int> hidden{256, 256};
  double learning_rate = 1e-3;
  int batch = 64;
  int epochs = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MlpOutcome {
  double accuracy = 0.0;
  bool diverged = false;
};

/// ReLU MLP with softmax cross-entropy trained by Adam on shuffled
/// minibatches (last partial batch included); test accuracy.
MlpOutcome mlp_classify(const LabeledSet& train, const LabeledSet& test, int num_classes, const MlpSettings& settings);

/// Mean and population SD in percentage points.
struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  std::vector<double> values;  // percentage points, in input order
};

Summary summarize(std::span<const double> fractions);

struct ProtocolSettings {
  double prune_threshold = 0.05;
  trees::GbtSettings gbt{};
  MlpSettings mlp{};
  bool run_mlp = true;
};

/// One ensemble member's representation of the target splits.
struct MemberRepresentation {
  std::string name;
  std::uint64_t seed = 0;
  double beta = 0.0;
  metrics::Representation train;
  metrics::Representation test;
  std::vector<std::string> dim_labels;  // per original dim; empty -> "dim_<j>"
};

struct MemberOutcome {
  std::string name;
  std::uint64_t seed = 0;
  double beta = 0.0;
  std::vector<int> kept;  // original dims surviving pruning
  bool excluded = false;  // every dim pruned
  double gbt_accuracy = 0.0;
  double mlp_accuracy = 0.0;
  bool mlp_diverged = false;
  std::vector<double> importance;    // per kept dim, sums to 1 unless no splits
  std::vector<std::string> labels;   // per kept dim
};

struct GroupedImportance {
  std::vector<std::string> labels;
  std::vector<double> mean;
  std::vector<double> sd;                  // population SD over members
  std::vector<std::vector<double>> per_member;  // member x label, rows sum to 1
};

struct EvalReport {
  bool finetuned = false;
  bool no_vae = false;
  Summary gbt;
  Summary mlp;
  std::vector<MemberOutcome> members;
  GroupedImportance importance;
  std::vector<std::string> warnings;
};

/// Per member: prune on train statistics, fit GBT and MLP on train, score on
/// test; aggregate over members that kept at least one dim.
EvalReport evaluate_representations(const std::vector<MemberRepresentation>& members, std::span<const int> train_y,
                                    std::span<const int> test_y, const ProtocolSettings& settings);

/// Same protocol on raw features with no encoding or pruning, repeated
/// `runs` times with MLP seeds settings.mlp.seed + i. GBT fitting is
/// deterministic, so its accuracy is shared across runs.
EvalReport ablate_no_vae(const LabeledSet& train, const LabeledSet& test, const ProtocolSettings& settings, int runs);

/// Per member: normalized importance summed within each dim label; then
/// mean and population SD across members. Labels appear in first-seen order.
GroupedImportance grouped_importance(const std::vector<MemberOutcome>& members);

}  // namespace disentlab::downstream
