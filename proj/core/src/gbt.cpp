#include "ecmirror/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ecmirror/errors.hpp"

namespace ecmirror {

double RegressionTree::predict(const Features& x) const {
  int idx = 0;
  while (!nodes[idx].is_leaf()) {
    const TreeNode& n = nodes[idx];
    idx = x[n.feature] < n.threshold ? n.left : n.right;
  }
  return nodes[idx].weight;
}

std::size_t RegressionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int RegressionTree::depth() const {
  // Pre-order layout: walk with an explicit stack of (index, depth).
  int best = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [idx, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes[idx].is_leaf()) {
      stack.push_back({nodes[idx].left, d + 1});
      stack.push_back({nodes[idx].right, d + 1});
    }
  }
  return best;
}

namespace {

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(std::span<const TrainingSample> data, std::span<const double> grad,
              const GbtHyperparams& hp)
      : data_(data), grad_(grad), hp_(hp) {}

  RegressionTree build() {
    std::vector<std::size_t> rows(data_.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    RegressionTree tree;
    grow(tree, rows, 0);
    return tree;
  }

 private:
  // Squared error in second-order form: every hessian is 1.
  double score(double g, double h) const { return g * g / (h + hp_.lambda); }

  int grow(RegressionTree& tree, std::vector<std::size_t>& rows, int depth) {
    double g_sum = 0.0;
    for (auto r : rows) g_sum += grad_[r];
    const double h_sum = static_cast<double>(rows.size());

    const int idx = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});

    SplitCandidate best;
    if (depth < hp_.max_depth) best = find_split(rows, g_sum, h_sum);

    if (best.feature < 0) {
      tree.nodes[idx].weight = -g_sum / (h_sum + hp_.lambda);
      return idx;
    }

    std::vector<std::size_t> left, right;
    for (auto r : rows) {
      (data_[r].features[best.feature] < best.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[idx].feature = best.feature;
    tree.nodes[idx].threshold = best.threshold;
    const int l = grow(tree, left, depth + 1);
    const int r = grow(tree, right, depth + 1);
    tree.nodes[idx].left = l;
    tree.nodes[idx].right = r;
    return idx;
  }

  SplitCandidate find_split(const std::vector<std::size_t>& rows, double g_sum, double h_sum) const {
    SplitCandidate best;
    const double parent = score(g_sum, h_sum);
    std::vector<std::size_t> order(rows);
    for (int f = 0; f < static_cast<int>(kFeatureCount); ++f) {
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data_[a].features[f] < data_[b].features[f];
      });
      double g_left = 0.0;
      double h_left = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        g_left += grad_[order[k]];
        h_left += 1.0;
        const double x_here = data_[order[k]].features[f];
        const double x_next = data_[order[k + 1]].features[f];
        if (!(x_here < x_next)) continue;
        const double h_right = h_sum - h_left;
        if (h_left < hp_.min_child_weight || h_right < hp_.min_child_weight) continue;
        const double g_right = g_sum - g_left;
        const double gain =
            0.5 * (score(g_left, h_left) + score(g_right, h_right) - parent) - hp_.gamma;
        if (gain > best.gain) {
          best = {gain, f, 0.5 * (x_here + x_next)};
        }
      }
    }
    return best;
  }

  std::span<const TrainingSample> data_;
  std::span<const double> grad_;
  const GbtHyperparams& hp_;
};

void check(const GbtHyperparams& hp) {
  if (!(hp.learning_rate > 0.0 && hp.learning_rate <= 1.0)) {
    throw DomainError("gbt: learning rate must be in (0, 1]");
  }
  if (hp.n_estimators < 0) throw DomainError("gbt: n_estimators must be >= 0");
  if (hp.max_depth < 0) throw DomainError("gbt: max_depth must be >= 0");
  if (!(hp.lambda >= 0.0) || !(hp.gamma >= 0.0)) {
    throw DomainError("gbt: lambda and gamma must be >= 0");
  }
}

}  // namespace

GbtModel gbt_fit(std::span<const TrainingSample> data, const GbtHyperparams& hp) {
  if (data.empty()) throw DomainError("gbt: empty training data");
  check(hp);

  GbtModel model;
  model.hyperparams = hp;
  if (hp.base_score) {
    model.base_score = *hp.base_score;
  } else {
    double sum = 0.0;
    for (const auto& s : data) sum += s.label;
    model.base_score = sum / static_cast<double>(data.size());
  }

  std::vector<double> pred(data.size(), model.base_score);
  std::vector<double> grad(data.size());
  model.trees.reserve(static_cast<std::size_t>(hp.n_estimators));
  for (int t = 0; t < hp.n_estimators; ++t) {
    for (std::size_t i = 0; i < data.size(); ++i) grad[i] = pred[i] - data[i].label;
    RegressionTree tree = TreeBuilder(data, grad, hp).build();
    for (std::size_t i = 0; i < data.size(); ++i) {
      pred[i] += hp.learning_rate * tree.predict(data[i].features);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

double gbt_predict(const GbtModel& model, const Features& x) {
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += tree.predict(x);
  return model.base_score + model.hyperparams.learning_rate * sum;
}

}  // namespace ecmirror
