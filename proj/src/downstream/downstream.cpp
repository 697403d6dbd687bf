#include "disentlab/downstream/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "disentlab/common/error.hpp"
#include "disentlab/common/random.hpp"
#include "disentlab/vae/mlp.hpp"

namespace disentlab::downstream {

namespace {

using nn::Matrix;

Matrix<float> columns_of(const Eigen::MatrixXd& rows) { return rows.transpose().cast<float>(); }

// Class count over both splits; every class must occur in train.
int class_count(std::span<const int> train_y, std::span<const int> test_y) {
  if (train_y.empty()) throw ValidationError("training split is empty");
  if (test_y.empty()) throw ValidationError("test split is empty");
  int k = 0;
  for (const int v : train_y) {
    if (v < 0) throw ValidationError("class labels must be non-negative");
    k = std::max(k, v + 1);
  }
  for (const int v : test_y) {
    if (v < 0) throw ValidationError("class labels must be non-negative");
    k = std::max(k, v + 1);
  }
  std::vector<bool> present(static_cast<std::size_t>(k), false);
  for (const int v : train_y) present[static_cast<std::size_t>(v)] = true;
  for (int c = 0; c < k; ++c) {
    if (!present[static_cast<std::size_t>(c)]) throw ValidationError("class " + std::to_string(c) + " is absent from the training split");
  }
  return k;
}

std::vector<int> argmax_columns(const Matrix<float>& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.cols()));
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < scores.rows(); ++k) {
      if (scores(k, c) > scores(best, c)) best = k;
    }
    out[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  return out;
}

double population_sd(std::span<const double> v, double mean) {
  double s = 0.0;
  for (const double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

void LabeledSet::validate(const std::string& what) const {
  if (static_cast<std::size_t>(x.rows()) != y.size()) {
    throw ValidationError(what + " has " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) + " labels");
  }
  if (!x.allFinite()) throw ValidationError(what + " contains NaN or Inf");
}

void MlpSettings::validate() const {
  if (hidden.empty()) throw ValidationError("mlp.hidden must list at least one layer");
  for (const int h : hidden) {
    if (h <= 0) throw ValidationError("mlp.hidden sizes must be positive");
  }
  if (!(learning_rate > 0.0)) throw ValidationError("mlp.learning_rate must be positive");
  if (batch <= 0) throw ValidationError("mlp.batch must be positive");
  if (epochs < 0) throw ValidationError("mlp.epochs must be non-negative");
}

MlpOutcome mlp_classify(const LabeledSet& train, const LabeledSet& test, int num_classes, const MlpSettings& settings) {
  settings.validate();
  train.validate("MLP training split");
  test.validate("MLP test split");
  if (train.x.cols() != test.x.cols()) throw ValidationError("MLP train and test feature dims differ");
  if (num_classes < 1) throw ValidationError("MLP needs at least one class");
  Rng rng(settings.seed);
  std::vector<int> sizes{static_cast<int>(train.x.cols())};
  sizes.insert(sizes.end(), settings.hidden.begin(), settings.hidden.end());
  sizes.push_back(num_classes);
  nn::Mlp<float> net(sizes, nn::Activation::relu, rng);
  auto grads = net.zero_gradients();
  nn::Adam<float> adam(nn::AdamConfig{settings.learning_rate, 0.9, 0.999, 1e-8});
  std::vector<std::span<float>> params;
  std::vector<std::span<float>> grad_blocks;
  nn::append_blocks(net.layers(), params);
  nn::append_blocks(grads, grad_blocks);

  const Matrix<float> x = columns_of(train.x);
  const auto n = static_cast<std::size_t>(x.cols());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  MlpOutcome out;
  typename nn::Mlp<float>::Tape tape;
  for (int epoch = 0; epoch < settings.epochs && !out.diverged; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(settings.batch)) {
      const auto end = std::min(n, start + static_cast<std::size_t>(settings.batch));
      const auto b = static_cast<Eigen::Index>(end - start);
      Matrix<float> xb(x.rows(), b);
      for (Eigen::Index i = 0; i < b; ++i) xb.col(i) = x.col(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(i)]));
      const Matrix<float> logits = net.forward(xb, &tape);
      Matrix<float> d = logits;
      for (Eigen::Index i = 0; i < b; ++i) {
        auto col = d.col(i);
        col.array() -= col.maxCoeff();
        col = col.array().exp().matrix();
        col /= col.sum();
        col(train.y[order[start + static_cast<std::size_t>(i)]]) -= 1.0f;
      }
      d /= static_cast<float>(b);
      if (!d.allFinite()) {
        out.diverged = true;
        break;
      }
      net.backward(tape, std::move(d), grads, nullptr);
      adam.step(params, grad_blocks);
    }
  }
  const auto pred = argmax_columns(net.forward(columns_of(test.x), nullptr));
  out.accuracy = trees::accuracy(pred, test.y);
  return out;
}

Summary summarize(std::span<const double> fractions) {
  Summary s;
  if (fractions.empty()) return s;
  for (const double f : fractions) s.values.push_back(100.0 * f);
  s.mean = std::accumulate(s.values.begin(), s.values.end(), 0.0) / static_cast<double>(s.values.size());
  s.sd = population_sd(s.values, s.mean);
  return s;
}

EvalReport evaluate_representations(const std::vector<MemberRepresentation>& members, std::span<const int> train_y,
                                    std::span<const int> test_y, const ProtocolSettings& settings) {
  if (members.empty()) throw ValidationError("no ensemble members to evaluate");
  const int classes = class_count(train_y, test_y);
  EvalReport report;
  std::vector<double> gbt_acc;
  std::vector<double> mlp_acc;
  for (const auto& m : members) {
    if (static_cast<std::size_t>(m.train.rows()) != train_y.size() || static_cast<std::size_t>(m.test.rows()) != test_y.size()) {
      throw ValidationError("member " + m.name + " representation rows do not match the labels");
    }
    if (m.train.cols() != m.test.cols()) throw ValidationError("member " + m.name + " train/test dims differ");
    MemberOutcome o{m.name, m.seed, m.beta, {}, false, 0.0, 0.0, false, {}, {}};
    metrics::Pruning pruning;
    try {
      pruning = metrics::prune_inactive(m.train, settings.prune_threshold);
    } catch (const ValidationError&) {
      o.excluded = true;
      report.warnings.push_back("member " + m.name + ": every dim pruned; excluded from aggregation");
      report.members.push_back(std::move(o));
      continue;
    }
    o.kept = pruning.kept;
    for (const int j : o.kept) {
      o.labels.push_back(static_cast<std::size_t>(j) < m.dim_labels.size() ? m.dim_labels[static_cast<std::size_t>(j)]
                                                                         : "dim_" + std::to_string(j));
    }
    LabeledSet tr{pruning.apply(m.train), {train_y.begin(), train_y.end()}};
    LabeledSet te{pruning.apply(m.test), {test_y.begin(), test_y.end()}};
    const auto gbt = trees::fit_gbt(tr.x, tr.y, settings.gbt, classes);
    o.gbt_accuracy = trees::accuracy(trees::predict(gbt, te.x).labels, te.y);
    o.importance = trees::gini_importance(gbt);
    gbt_acc.push_back(o.gbt_accuracy);
    if (settings.run_mlp) {
      const auto mlp = mlp_classify(tr, te, classes, settings.mlp);
      o.mlp_accuracy = mlp.accuracy;
      o.mlp_diverged = mlp.diverged;
      if (mlp.diverged) report.warnings.push_back("member " + m.name + ": MLP training diverged");
      mlp_acc.push_back(o.mlp_accuracy);
    }
    report.members.push_back(std::move(o));
  }
  report.gbt = summarize(gbt_acc);
  report.mlp = summarize(mlp_acc);
  report.importance = grouped_importance(report.members);
  return report;
}

EvalReport ablate_no_vae(const LabeledSet& train, const LabeledSet& test, const ProtocolSettings& settings, int runs) {
  if (runs < 1) throw ValidationError("ablation needs at least one run");
  train.validate("training split");
  test.validate("test split");
  const int classes = class_count(train.y, test.y);
  EvalReport report;
  report.no_vae = true;
  const auto gbt = trees::fit_gbt(train.x, train.y, settings.gbt, classes);
  const double gbt_accuracy = trees::accuracy(trees::predict(gbt, test.x).labels, test.y);
  const auto importance = trees::gini_importance(gbt);
  std::vector<double> gbt_acc;
  std::vector<double> mlp_acc;
  for (int r = 0; r < runs; ++r) {
    MemberOutcome o;
    o.name = "raw_run" + std::to_string(r);
    o.seed = settings.mlp.seed + static_cast<std::uint64_t>(r);
    o.kept.resize(static_cast<std::size_t>(train.x.cols()));
    std::iota(o.kept.begin(), o.kept.end(), 0);
    for (const int j : o.kept) o.labels.push_back("dim_" + std::to_string(j));
    o.gbt_accuracy = gbt_accuracy;
    o.importance = importance;
    gbt_acc.push_back(gbt_accuracy);
    if (settings.run_mlp) {
      auto mlp_settings = settings.mlp;
      mlp_settings.seed = o.seed;
      const auto mlp = mlp_classify(train, test, classes, mlp_settings);
      o.mlp_accuracy = mlp.accuracy;
      o.mlp_diverged = mlp.diverged;
      if (mlp.diverged) report.warnings.push_back(o.name + ": MLP training diverged");
      mlp_acc.push_back(o.mlp_accuracy);
    }
    report.members.push_back(std::move(o));
  }
  report.gbt = summarize(gbt_acc);
  report.mlp = summarize(mlp_acc);
  report.importance = grouped_importance(report.members);
  return report;
}

GroupedImportance grouped_importance(const std::vector<MemberOutcome>& members) {
  GroupedImportance g;
  for (const auto& m : members) {
    if (m.excluded) continue;
    if (m.labels.size() != m.importance.size()) throw ValidationError("member " + m.name + " importance/label length mismatch");
    for (const auto& l : m.labels) {
      if (std::find(g.labels.begin(), g.labels.end(), l) == g.labels.end()) g.labels.push_back(l);
    }
  }
  for (const auto& m : members) {
    if (m.excluded) continue;
    std::vector<double> row(g.labels.size(), 0.0);
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
      const auto at = std::find(g.labels.begin(), g.labels.end(), m.labels[i]) - g.labels.begin();
      row[static_cast<std::size_t>(at)] += m.importance[i];
    }
    g.per_member.push_back(std::move(row));
  }
  g.mean.assign(g.labels.size(), 0.0);
  g.sd.assign(g.labels.size(), 0.0);
  if (g.per_member.empty()) return g;
  for (std::size_t l = 0; l < g.labels.size(); ++l) {
    std::vector<double> col;
    for (const auto& row : g.per_member) col.push_back(row[l]);
    g.mean[l] = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    g.sd[l] = population_sd(col, g.mean[l]);
  }
  return g;
}

}  // namespace disentlab::downstream
