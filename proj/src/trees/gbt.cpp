#include "disentlab/trees/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "disentlab/common/error.hpp"

namespace disentlab::trees {

namespace {

struct Candidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

struct NodeStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t count = 0;
};

// Split point strictly between two distinct sorted values, never equal to
// the upper one so that x <= threshold keeps `lo` on the left.
double midpoint(double lo, double hi) {
  const double m = lo + (hi - lo) / 2.0;
  return m < hi ? m : lo;
}

// Reuses one presort of every feature across all trees fitted on `x`.
class TreeBuilder {
 public:
  explicit TreeBuilder(const FeatureMatrix& x) : x_(x), order_(static_cast<std::size_t>(x.cols())) {
    const auto n = static_cast<std::size_t>(x.rows());
    for (Eigen::Index f = 0; f < x.cols(); ++f) {
      auto& o = order_[static_cast<std::size_t>(f)];
      o.resize(n);
      std::iota(o.begin(), o.end(), 0u);
      std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    }
  }

  Tree build(std::span<const double> target, int max_depth, const LeafValue& leaf) const {
    const auto n = static_cast<std::size_t>(x_.rows());
    Tree tree;
    tree.nodes.emplace_back();
    std::vector<int> node_of(n, 0);
    std::vector<NodeStats> stats(1);
    for (std::size_t i = 0; i < n; ++i) {
      stats[0].sum += target[i];
      stats[0].sum_sq += target[i] * target[i];
      ++stats[0].count;
    }
    std::vector<int> frontier{0};

    for (int depth = 0; depth < max_depth && !frontier.empty(); ++depth) {
      std::vector<int> slot_of(tree.nodes.size(), -1);
      std::vector<int> slots;
      for (const int id : frontier) {
        if (stats[static_cast<std::size_t>(id)].count >= 2) {
          slot_of[static_cast<std::size_t>(id)] = static_cast<int>(slots.size());
          slots.push_back(id);
        }
      }
      if (slots.empty()) break;
      const auto m = slots.size();
      std::vector<Candidate> best(m);
      std::vector<double> left_sum(m);
      std::vector<std::size_t> left_count(m);
      std::vector<double> last(m);

      for (Eigen::Index f = 0; f < x_.cols(); ++f) {
        std::fill(left_sum.begin(), left_sum.end(), 0.0);
        std::fill(left_count.begin(), left_count.end(), 0);
        for (const auto i : order_[static_cast<std::size_t>(f)]) {
          const int s = slot_of[static_cast<std::size_t>(node_of[i])];
          if (s < 0) continue;
          const auto su = static_cast<std::size_t>(s);
          const double v = x_(i, f);
          if (left_count[su] > 0 && v > last[su]) {
            const auto& st = stats[static_cast<std::size_t>(slots[su])];
            const double nl = static_cast<double>(left_count[su]);
            const double nr = static_cast<double>(st.count - left_count[su]);
            const double sr = st.sum - left_sum[su];
            const double gain = left_sum[su] * left_sum[su] / nl + sr * sr / nr -
                                st.sum * st.sum / static_cast<double>(st.count);
            auto& b = best[su];
            if (b.feature < 0 || gain > b.gain + 1e-12 * std::abs(b.gain)) {
              b = {static_cast<int>(f), midpoint(last[su], v), gain};
            }
          }
          left_sum[su] += target[i];
          ++left_count[su];
          last[su] = v;
        }
      }

      std::vector<int> next;
      std::vector<int> split_of(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < m; ++s) {
        const int id = slots[s];
        const auto& st = stats[static_cast<std::size_t>(id)];
        const double sse = st.sum_sq - st.sum * st.sum / static_cast<double>(st.count);
        const auto& b = best[s];
        if (b.feature < 0 || !(sse > 0.0) || !(b.gain > 1e-10 * sse)) continue;
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        stats.resize(tree.nodes.size());
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = b.feature;
        node.threshold = b.threshold;
        node.gain = b.gain;
        node.left = left;
        node.right = left + 1;
        split_of[static_cast<std::size_t>(id)] = id;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (std::size_t i = 0; i < n; ++i) {
        const int id = node_of[i];
        if (static_cast<std::size_t>(id) >= split_of.size() || split_of[static_cast<std::size_t>(id)] < 0) continue;
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        const int child = x_(static_cast<Eigen::Index>(i), node.feature) <= node.threshold ? node.left : node.right;
        node_of[i] = child;
        auto& st = stats[static_cast<std::size_t>(child)];
        st.sum += target[i];
        st.sum_sq += target[i] * target[i];
        ++st.count;
      }
      frontier = std::move(next);
    }

    std::vector<std::vector<std::size_t>> rows(tree.nodes.size());
    for (std::size_t i = 0; i < n; ++i) rows[static_cast<std::size_t>(node_of[i])].push_back(i);
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      auto& node = tree.nodes[id];
      node.samples = stats[id].count;
      if (!node.is_leaf()) continue;
      if (leaf) {
        node.value = leaf(rows[id]);
      } else {
        node.value = stats[id].count > 0 ? stats[id].sum / static_cast<double>(stats[id].count) : 0.0;
      }
    }
    // Internal node sample counts are the sum of their children.
    for (std::size_t id = tree.nodes.size(); id-- > 0;) {
      auto& node = tree.nodes[id];
      if (!node.is_leaf()) {
        node.samples = tree.nodes[static_cast<std::size_t>(node.left)].samples +
                       tree.nodes[static_cast<std::size_t>(node.right)].samples;
      }
    }
    return tree;
  }

 private:
  const FeatureMatrix& x_;
  std::vector<std::vector<std::uint32_t>> order_;
};

void check_features(const FeatureMatrix& x) {
  if (!x.allFinite()) throw ValidationError("feature matrix contains NaN or Inf");
}

// Row-wise softmax of scores in place.
void softmax_rows(Eigen::MatrixXd& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
}

}  // namespace

double Tree::predict(const FeatureMatrix& x, Eigen::Index row) const {
  std::size_t id = 0;
  while (!nodes[id].is_leaf()) {
    const auto& n = nodes[id];
    id = static_cast<std::size_t>(x(row, n.feature) <= n.threshold ? n.left : n.right);
  }
  return nodes[id].value;
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    if (nodes[id].is_leaf()) continue;
    for (const int c : {nodes[id].left, nodes[id].right}) {
      d[static_cast<std::size_t>(c)] = d[id] + 1;
      deepest = std::max(deepest, d[static_cast<std::size_t>(c)]);
    }
  }
  return deepest;
}

Tree fit_tree(const FeatureMatrix& x, std::span<const double> target, int max_depth, const LeafValue& leaf) {
  if (x.rows() == 0) throw ValidationError("cannot fit a tree on zero samples");
  if (static_cast<std::size_t>(x.rows()) != target.size()) throw ValidationError("tree target length differs from sample count");
  if (max_depth < 0) throw ValidationError("tree depth must be non-negative");
  check_features(x);
  return TreeBuilder(x).build(target, max_depth, leaf);
}

void GbtSettings::validate() const {
  if (rounds < 0) throw ValidationError("gbt rounds must be non-negative");
  if (!(learning_rate > 0.0)) throw ValidationError("gbt learning_rate must be positive");
  if (max_depth < 1) throw ValidationError("gbt max_depth must be at least 1");
}

GbtModel fit_gbt(const FeatureMatrix& x, std::span<const int> y, const GbtSettings& settings, int num_classes) {
  settings.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0) throw ValidationError("cannot fit a GBT on zero samples");
  if (y.size() != n) throw ValidationError("label count " + std::to_string(y.size()) + " differs from sample count " + std::to_string(n));
  check_features(x);
  const int max_label = *std::max_element(y.begin(), y.end());
  if (*std::min_element(y.begin(), y.end()) < 0) throw ValidationError("class labels must be non-negative");
  if (num_classes == 0) num_classes = max_label + 1;
  if (max_label >= num_classes) throw ValidationError("class label " + std::to_string(max_label) + " exceeds class count");

  GbtModel model;
  model.num_features = static_cast<int>(x.cols());
  model.num_classes = num_classes;
  model.settings = settings;
  if (std::all_of(y.begin(), y.end(), [&](int v) { return v == y[0]; })) {
    model.constant = true;
    model.constant_class = y[0];
    return model;
  }

  const int K = num_classes;
  const double newton_scale = static_cast<double>(K - 1) / static_cast<double>(K);
  TreeBuilder builder(x);
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), K);
  std::vector<double> residual(n);
  const LeafValue newton = [&](std::span<const std::size_t> rows) {
    double num = 0.0;
    double den = 0.0;
    for (const auto i : rows) {
      const double r = residual[i];
      num += r;
      den += std::abs(r) * (1.0 - std::abs(r));
    }
    return den < 1e-150 ? 0.0 : newton_scale * num / den;
  };
  for (int r = 0; r < settings.rounds; ++r) {
    Eigen::MatrixXd p = scores;
    softmax_rows(p);
    auto& trees = model.rounds.emplace_back();
    for (int k = 0; k < K; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        residual[i] = (y[i] == k ? 1.0 : 0.0) - p(static_cast<Eigen::Index>(i), k);
      }
      trees.push_back(builder.build(residual, settings.max_depth, newton));
      const auto& t = trees.back();
      for (std::size_t i = 0; i < n; ++i) {
        scores(static_cast<Eigen::Index>(i), k) += settings.learning_rate * t.predict(x, static_cast<Eigen::Index>(i));
      }
    }
  }
  return model;
}

Prediction predict(const GbtModel& model, const FeatureMatrix& x) {
  if (x.cols() != model.num_features) {
    throw ValidationError("GBT expects " + std::to_string(model.num_features) + " features, got " +
                          std::to_string(x.cols()));
  }
  const auto n = x.rows();
  Prediction out;
  out.labels.assign(static_cast<std::size_t>(n), 0);
  if (model.constant) {
    out.probabilities = Eigen::MatrixXd::Zero(n, model.num_classes);
    out.probabilities.col(model.constant_class).setOnes();
    std::fill(out.labels.begin(), out.labels.end(), model.constant_class);
    return out;
  }
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(n, model.num_classes);
  for (const auto& trees : model.rounds) {
    for (int k = 0; k < model.num_classes; ++k) {
      const auto& t = trees[static_cast<std::size_t>(k)];
      for (Eigen::Index i = 0; i < n; ++i) scores(i, k) += model.settings.learning_rate * t.predict(x, i);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    for (int k = 1; k < model.num_classes; ++k) {
      if (scores(i, k) > scores(i, best)) best = k;
    }
    out.labels[static_cast<std::size_t>(i)] = best;
  }
  softmax_rows(scores);
  out.probabilities = std::move(scores);
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw ValidationError("prediction and label counts differ");
  if (truth.empty()) throw ValidationError("accuracy of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double log_loss(const Prediction& p, std::span<const int> y) {
  if (static_cast<std::size_t>(p.probabilities.rows()) != y.size()) throw ValidationError("log_loss size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double q = p.probabilities(static_cast<Eigen::Index>(i), y[i]);
    total -= std::log(std::max(q, std::numeric_limits<double>::min()));
  }
  return total / static_cast<double>(y.size());
}

std::vector<double> gini_importance(const GbtModel& model) {
  std::vector<double> imp(static_cast<std::size_t>(model.num_features), 0.0);
  for (const auto& trees : model.rounds) {
    for (const auto& t : trees) {
      for (const auto& node : t.nodes) {
        if (!node.is_leaf()) imp[static_cast<std::size_t>(node.feature)] += node.gain;
      }
    }
  }
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0.0) {
    for (auto& v : imp) v /= total;
  }
  return imp;
}

}  // namespace disentlab::trees
