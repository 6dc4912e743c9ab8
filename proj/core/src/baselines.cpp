#include "ecmirror/baselines.hpp"

#include <algorithm>

#include "ecmirror/errors.hpp"

namespace ecmirror {

KnnRegressor::KnnRegressor(std::span<const TrainingSample> data, int k)
    : k_(k), scaler_(FeatureScaler::fit(data)), points_(scaler_.transform(data)) {
  if (k <= 0) throw DomainError("knn: k must be positive");
}

double KnnRegressor::predict(const Features& raw) const {
  const Features z = scaler_.transform(raw);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) {
    double d = 0.0;
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      d += (points_[i].features[f] - z[f]) * (points_[i].features[f] - z[f]);
    }
    dist.emplace_back(d, i);
  }
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(k_), dist.size());
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += points_[dist[i].second].label;
  return sum / static_cast<double>(k);
}

DecisionTreeRegressor::DecisionTreeRegressor(std::span<const TrainingSample> data, int max_depth,
                                             double min_samples_leaf)
    : scaler_(FeatureScaler::fit(data)) {
  GbtHyperparams hp;
  hp.learning_rate = 1.0;
  hp.n_estimators = 1;
  hp.max_depth = max_depth;
  hp.lambda = 0.0;
  hp.min_child_weight = min_samples_leaf;
  hp.base_score = 0.0;
  tree_ = gbt_fit(scaler_.transform(data), hp);
}

double DecisionTreeRegressor::predict(const Features& raw) const {
  return gbt_predict(tree_, scaler_.transform(raw));
}

RawRidgeRegressor::RawRidgeRegressor(std::span<const TrainingSample> data, double alpha) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(kFeatureCount));
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)) = data[i].features[f];
    }
    y(static_cast<Eigen::Index>(i)) = data[i].label;
  }
  ridge_ = ridge_fit(x, y, alpha);
}

double RawRidgeRegressor::predict(const Features& raw) const { return ridge_.predict(raw); }

}  // namespace ecmirror
