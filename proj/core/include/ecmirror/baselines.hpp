#pragma once

// Reference regressors used only for model comparison runs.

#include <span>
#include <vector>

#include "ecmirror/ensemble.hpp"

namespace ecmirror {

class KnnRegressor {
 public:
  KnnRegressor(std::span<const TrainingSample> data, int k = 5);
  double predict(const Features& raw) const;

 private:
  int k_;
  FeatureScaler scaler_;
  std::vector<TrainingSample> points_;  // standardized
};

// One depth-limited tree; leaves hold the mean label of their rows.
class DecisionTreeRegressor {
 public:
  DecisionTreeRegressor(std::span<const TrainingSample> data, int max_depth = 5,
                        double min_samples_leaf = 5);
  double predict(const Features& raw) const;

 private:
  FeatureScaler scaler_;
  GbtModel tree_;
};

// Ridge directly on (incident, contrast).
class RawRidgeRegressor {
 public:
  explicit RawRidgeRegressor(std::span<const TrainingSample> data, double alpha = 1.0);
  double predict(const Features& raw) const;

 private:
  RidgeMeta ridge_;
};

}  // namespace ecmirror
