#include "disentlab/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "disentlab/common/error.hpp"

namespace disentlab::metrics {

namespace {

std::vector<std::size_t> histogram(std::span<const int> codes) {
  std::vector<std::size_t> counts;
  for (const int c : codes) {
    if (c < 0) throw ValidationError("codes must be non-negative");
    if (static_cast<std::size_t>(c) >= counts.size()) counts.resize(static_cast<std::size_t>(c) + 1, 0);
    ++counts[static_cast<std::size_t>(c)];
  }
  return counts;
}

// Entropy with logarithm base `base` of a nonnegative weight vector.
double normalized_entropy(const Eigen::Ref<const Eigen::VectorXd>& w, double base) {
  const double total = w.sum();
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double p = w(i) / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(base);
}

// Labels remapped to 0..C-1 over the sorted distinct values of `fit`;
// values absent from `fit` map to -1.
struct LabelCodec {
  std::map<int, int> index;

  explicit LabelCodec(std::span<const int> fit) {
    std::vector<int> v(fit.begin(), fit.end());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (std::size_t i = 0; i < v.size(); ++i) index[v[i]] = static_cast<int>(i);
  }
  int classes() const { return static_cast<int>(index.size()); }
  std::vector<int> encode(std::span<const int> values) const {
    std::vector<int> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto it = index.find(values[i]);
      out[i] = it == index.end() ? -1 : it->second;
    }
    return out;
  }
};

std::vector<int> take(const std::vector<int>& v, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto r : rows) out.push_back(v[r]);
  return out;
}

}  // namespace

std::vector<int> FactorTable::column(std::size_t k) const {
  const auto col = values.col(static_cast<Eigen::Index>(k));
  return std::vector<int>(col.data(), col.data() + col.size());
}

void FactorTable::validate(Eigen::Index rows) const {
  if (static_cast<Eigen::Index>(names.size()) != values.cols()) throw ValidationError("factor names and columns differ");
  if (values.rows() != rows) {
    throw ValidationError("factor table has " + std::to_string(values.rows()) + " rows, representation has " +
                          std::to_string(rows));
  }
  if (values.size() > 0 && values.minCoeff() < 0) throw ValidationError("factor values must be non-negative");
}

std::vector<int> discretize(const Eigen::Ref<const Eigen::VectorXd>& column, int bins) {
  if (bins < 1) throw ValidationError("discretize needs at least one bin");
  if (column.size() == 0) throw ValidationError("cannot discretize an empty column");
  if (!column.allFinite()) throw ValidationError("cannot discretize a column with NaN or Inf");
  const double lo = column.minCoeff();
  const double hi = column.maxCoeff();
  std::vector<int> codes(static_cast<std::size_t>(column.size()), 0);
  if (!(hi > lo)) return codes;
  const double scale = static_cast<double>(bins) / (hi - lo);
  for (Eigen::Index i = 0; i < column.size(); ++i) {
    const auto c = static_cast<int>(std::floor((column(i) - lo) * scale));
    codes[static_cast<std::size_t>(i)] = std::clamp(c, 0, bins - 1);
  }
  return codes;
}

double entropy(std::span<const int> codes) {
  if (codes.empty()) return 0.0;
  const auto n = static_cast<double>(codes.size());
  double h = 0.0;
  for (const auto c : histogram(codes)) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

double mutual_information(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ValidationError("mutual information needs equal-length code vectors");
  if (a.empty()) return 0.0;
  const auto ca = histogram(a);
  const auto cb = histogram(b);
  const auto nb = cb.size();
  std::vector<std::size_t> joint(ca.size() * nb, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[static_cast<std::size_t>(a[i]) * nb + static_cast<std::size_t>(b[i])];
  }
  const auto n = static_cast<double>(a.size());
  double mi = 0.0;
  for (std::size_t x = 0; x < ca.size(); ++x) {
    for (std::size_t y = 0; y < nb; ++y) {
      const auto c = joint[x * nb + y];
      if (c == 0) continue;
      const double pxy = static_cast<double>(c) / n;
      mi += pxy * std::log(static_cast<double>(c) * n / (static_cast<double>(ca[x]) * static_cast<double>(cb[y])));
    }
  }
  return mi;
}

AssociationMatrix association_matrix(const Representation& z, const FactorTable& factors, int bins) {
  if (z.rows() == 0 || z.cols() == 0) throw ValidationError("representation is empty");
  factors.validate(z.rows());
  std::vector<std::vector<int>> codes;
  for (Eigen::Index j = 0; j < z.cols(); ++j) codes.push_back(discretize(z.col(j), bins));

  AssociationMatrix a;
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const auto v = factors.column(k);
    const double h = entropy(v);
    if (!(h > 0.0)) continue;
    a.factors.push_back(factors.names[k]);
    a.factor_columns.push_back(k);
    a.factor_entropy.push_back(h);
    auto& row = rows.emplace_back();
    for (const auto& c : codes) row.push_back(std::clamp(mutual_information(v, c) / h, 0.0, 1.0));
  }
  a.values.resize(static_cast<Eigen::Index>(rows.size()), z.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) a.values(static_cast<Eigen::Index>(k), j) = rows[k][static_cast<std::size_t>(j)];
  }
  return a;
}

MigResult mig(const AssociationMatrix& a) {
  if (a.values.cols() < 2) throw ValidationError("MIG needs at least 2 latent dims, got " + std::to_string(a.values.cols()));
  if (a.values.rows() == 0) throw ValidationError("MIG needs at least one non-constant factor");
  MigResult r;
  for (Eigen::Index k = 0; k < a.values.rows(); ++k) {
    std::vector<double> row(static_cast<std::size_t>(a.values.cols()));
    for (Eigen::Index j = 0; j < a.values.cols(); ++j) row[static_cast<std::size_t>(j)] = a.values(k, j);
    std::partial_sort(row.begin(), row.begin() + 2, row.end(), std::greater<>());
    r.per_factor.push_back(row[0] - row[1]);
  }
  r.score = std::accumulate(r.per_factor.begin(), r.per_factor.end(), 0.0) / static_cast<double>(r.per_factor.size());
  return r;
}

DciResult dci_from_importance(const Eigen::MatrixXd& importance) {
  if (importance.size() == 0) throw ValidationError("importance matrix is empty");
  if ((importance.array() < 0.0).any() || !importance.allFinite()) {
    throw ValidationError("importance must be finite and non-negative");
  }
  const auto L = importance.rows();
  const auto K = importance.cols();
  DciResult r;
  r.importance = importance;
  const double total = importance.sum();
  r.dim_disentanglement.assign(static_cast<std::size_t>(L), 0.0);
  r.dim_weight.assign(static_cast<std::size_t>(L), 0.0);
  if (!(total > 0.0)) {
    r.degenerate = true;
    return r;
  }
  for (Eigen::Index j = 0; j < L; ++j) {
    const double d = K > 1 ? 1.0 - normalized_entropy(importance.row(j).transpose(), static_cast<double>(K)) : 1.0;
    const double w = importance.row(j).sum() / total;
    r.dim_disentanglement[static_cast<std::size_t>(j)] = d;
    r.dim_weight[static_cast<std::size_t>(j)] = w;
    r.disentanglement += w * d;
  }
  for (Eigen::Index k = 0; k < K; ++k) {
    const double c = L > 1 ? 1.0 - normalized_entropy(importance.col(k), static_cast<double>(L)) : 1.0;
    r.completeness += importance.col(k).sum() / total * c;
  }
  return r;
}

DciResult dci(const Representation& z, const FactorTable& factors, const trees::GbtSettings& settings) {
  if (z.rows() == 0 || z.cols() == 0) throw ValidationError("representation is empty");
  factors.validate(z.rows());
  std::vector<std::size_t> kept;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const auto v = factors.column(k);
    if (std::any_of(v.begin(), v.end(), [&](int x) { return x != v[0]; })) kept.push_back(k);
  }
  if (kept.empty()) throw ValidationError("DCI needs at least one non-constant factor");
  Eigen::MatrixXd p(z.cols(), static_cast<Eigen::Index>(kept.size()));
  double acc = 0.0;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto v = factors.column(kept[i]);
    const LabelCodec codec(v);
    const auto y = codec.encode(v);
    const auto model = trees::fit_gbt(z, y, settings, codec.classes());
    const auto imp = trees::gini_importance(model);
    for (Eigen::Index j = 0; j < z.cols(); ++j) p(j, static_cast<Eigen::Index>(i)) = imp[static_cast<std::size_t>(j)];
    acc += trees::accuracy(trees::predict(model, z).labels, y);
    names.push_back(factors.names[kept[i]]);
  }
  auto r = dci_from_importance(p);
  r.informativeness = acc / static_cast<double>(kept.size());
  r.factors = std::move(names);
  return r;
}

OmesResult omes(const AssociationMatrix& a, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("OMES alpha must lie in [0, 1]");
  const auto& A = a.values;
  if (A.rows() == 0 || A.cols() == 0) throw ValidationError("association matrix is empty");
  OmesResult r;
  r.alpha = alpha;
  if (!(A.maxCoeff() > 0.0)) r.degenerate = true;
  double total = 0.0;
  for (Eigen::Index k = 0; k < A.rows(); ++k) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < A.cols(); ++j) {
      if (A(k, j) > A(k, best)) best = j;
    }
    const double top = A(k, best);
    const double row_sum = A.row(k).sum();
    const double col_sum = A.col(best).sum();
    const double comp = row_sum > 0.0 ? top / row_sum : 0.0;
    const double mod = col_sum > 0.0 ? top / col_sum : 0.0;
    r.best_dim.push_back(static_cast<int>(best));
    r.compactness.push_back(comp);
    r.modularity.push_back(mod);
    r.strength.push_back(top);
    total += top * (alpha * mod + (1.0 - alpha) * comp);
  }
  r.score = total / static_cast<double>(A.rows());
  return r;
}

ExplicitnessResult explicitness(const Representation& z, const FactorTable& factors, std::span<const std::size_t> train,
                                std::span<const std::size_t> test, const trees::GbtSettings& settings) {
  factors.validate(z.rows());
  if (train.empty() || test.empty()) throw ValidationError("explicitness needs nonempty train and test rows");
  for (const auto r : train) {
    if (r >= static_cast<std::size_t>(z.rows())) throw ValidationError("train row out of range");
  }
  for (const auto r : test) {
    if (r >= static_cast<std::size_t>(z.rows())) throw ValidationError("test row out of range");
  }
  const auto z_train = take_rows(z, train);
  const auto z_test = take_rows(z, test);
  ExplicitnessResult out;
  for (std::size_t k = 0; k < factors.size(); ++k) {
    const auto v = factors.column(k);
    const auto v_train = take(v, train);
    const LabelCodec codec(v_train);
    if (codec.classes() < 2) {
      out.skipped.push_back(factors.names[k]);
      continue;
    }
    const auto model = trees::fit_gbt(z_train, codec.encode(v_train), settings, codec.classes());
    const auto pred = trees::predict(model, z_test);
    out.factors.push_back(factors.names[k]);
    out.accuracy.push_back(trees::accuracy(pred.labels, codec.encode(take(v, test))));
  }
  if (!out.accuracy.empty()) {
    out.mean = std::accumulate(out.accuracy.begin(), out.accuracy.end(), 0.0) / static_cast<double>(out.accuracy.size());
  }
  return out;
}

std::vector<DimensionLabel> label_dimensions(const AssociationMatrix& a) {
  std::vector<DimensionLabel> labels;
  for (Eigen::Index j = 0; j < a.values.cols(); ++j) {
    const auto col = a.values.col(j);
    const double sum = col.size() > 0 ? col.sum() : 0.0;
    if (!(sum > 0.0)) {
      labels.push_back({kInactive, 0.0});
      continue;
    }
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < col.size(); ++k) {
      if (col(k) > col(best)) best = k;
    }
    labels.push_back({a.factors[static_cast<std::size_t>(best)], col(best) / sum});
  }
  return labels;
}

Representation Pruning::apply(const Representation& z) const {
  if (z.cols() != static_cast<Eigen::Index>(sd.size())) {
    throw ValidationError("pruning was fit on " + std::to_string(sd.size()) + " dims, got " + std::to_string(z.cols()));
  }
  Representation out(z.rows(), static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = z.col(kept[i]);
  return out;
}

Pruning prune_inactive(const Representation& train, double threshold) {
  if (train.rows() == 0) throw ValidationError("cannot prune on an empty training split");
  Pruning p;
  p.threshold = threshold;
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    const auto col = train.col(j).array();
    const double mean = col.mean();
    const double sd = std::sqrt((col - mean).square().mean());
    p.sd.push_back(sd);
    if (sd >= threshold) p.kept.push_back(static_cast<int>(j));
  }
  if (p.kept.empty()) {
    throw ValidationError("every latent dim has training SD below " + std::to_string(threshold) + "; nothing left");
  }
  return p;
}

Representation take_rows(const Representation& z, std::span<const std::size_t> rows) {
  Representation out(static_cast<Eigen::Index>(rows.size()), z.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = z.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace disentlab::metrics
