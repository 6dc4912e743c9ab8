#pragma once

// Stacking ensemble: GBT and MLP base learners on standardized features,
// ridge meta-model on their predictions, output clamped to the drive range.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ecmirror/gbt.hpp"
#include "ecmirror/mlp.hpp"
#include "ecmirror/ridge.hpp"
#include "ecmirror/types.hpp"

namespace ecmirror {

// Per-feature z-score parameters. Constant features get scale 1.
struct FeatureScaler {
  Features mean{};
  Features scale{1.0, 1.0};

  static FeatureScaler fit(std::span<const TrainingSample> data);
  Features transform(const Features& raw) const;
  std::vector<TrainingSample> transform(std::span<const TrainingSample> data) const;
};

struct StackOptions {
  GbtHyperparams gbt;
  MlpHyperparams mlp;
  double ridge_alpha = 1.0;
  // 0: base learners' in-sample predictions feed the meta-model.
  // k >= 2: k-fold out-of-fold predictions instead.
  int out_of_fold_folds = 0;
  std::uint64_t fold_seed = 1;
};

struct EnsembleModel {
  FeatureScaler scaler;
  GbtModel gbt;
  MlpModel mlp;
  RidgeMeta meta;

  // Base-learner outputs (gbt, mlp) for already standardized features.
  std::array<double, 2> base_predictions(const Features& standardized) const;
  double predict_standardized(const Features& standardized) const;  // clamped
  double predict(const Features& raw) const;                        // clamped
};

// Needs >= 4 samples. Propagates base learner errors.
EnsembleModel stack_fit(std::span<const TrainingSample> data, const StackOptions& options);

double stack_predict(const EnsembleModel& model, const Features& raw);

// Refit the meta-model on the current base learners' outputs.
void refit_meta(EnsembleModel& model, std::span<const TrainingSample> raw_data, double alpha);

struct RegressionMetrics {
  double rmse = 0.0;
  std::optional<double> r2;  // empty when the labels have zero variance
};

RegressionMetrics evaluate(std::span<const double> truth, std::span<const double> predicted);
RegressionMetrics evaluate(std::span<const TrainingSample> test,
                           const std::function<double(const Features&)>& predict);
RegressionMetrics evaluate(const EnsembleModel& model, std::span<const TrainingSample> test);

double mean_absolute_error(const EnsembleModel& model, std::span<const TrainingSample> data);

}  // namespace ecmirror
