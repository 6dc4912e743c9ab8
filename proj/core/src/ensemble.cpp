#include "ecmirror/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ecmirror/errors.hpp"

namespace ecmirror {

FeatureScaler FeatureScaler::fit(std::span<const TrainingSample> data) {
  if (data.empty()) throw DomainError("scaler: empty data");
  FeatureScaler s;
  const auto n = static_cast<double>(data.size());
  for (std::size_t f = 0; f < kFeatureCount; ++f) {
    double sum = 0.0;
    for (const auto& d : data) sum += d.features[f];
    const double mean = sum / n;
    double sq = 0.0;
    for (const auto& d : data) sq += (d.features[f] - mean) * (d.features[f] - mean);
    const double sd = std::sqrt(sq / n);
    s.mean[f] = mean;
    s.scale[f] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Features FeatureScaler::transform(const Features& raw) const {
  Features z{};
  for (std::size_t f = 0; f < kFeatureCount; ++f) z[f] = (raw[f] - mean[f]) / scale[f];
  return z;
}

std::vector<TrainingSample> FeatureScaler::transform(std::span<const TrainingSample> data) const {
  std::vector<TrainingSample> out;
  out.reserve(data.size());
  for (const auto& d : data) out.push_back({transform(d.features), d.label});
  return out;
}

std::array<double, 2> EnsembleModel::base_predictions(const Features& standardized) const {
  return {gbt_predict(gbt, standardized), mlp_forward(mlp, standardized)};
}

double EnsembleModel::predict_standardized(const Features& standardized) const {
  const auto base = base_predictions(standardized);
  return std::clamp(meta.predict(base), kDriveMinVolts, kDriveMaxVolts);
}

double EnsembleModel::predict(const Features& raw) const {
  return predict_standardized(scaler.transform(raw));
}

namespace {

RidgeMeta fit_meta_on(const std::vector<std::array<double, 2>>& meta_features,
                      std::span<const TrainingSample> data, double alpha) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(data.size()), 2);
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    x(row, 0) = meta_features[i][0];
    x(row, 1) = meta_features[i][1];
    y(row) = data[i].label;
  }
  return ridge_fit(x, y, alpha);
}

}  // namespace

EnsembleModel stack_fit(std::span<const TrainingSample> data, const StackOptions& options) {
  if (data.size() < 4) throw DomainError("stack: need at least 4 samples");

  EnsembleModel model;
  model.scaler = FeatureScaler::fit(data);
  const std::vector<TrainingSample> scaled = model.scaler.transform(data);
  model.gbt = gbt_fit(scaled, options.gbt);
  model.mlp = mlp_fit(scaled, options.mlp);

  std::vector<std::array<double, 2>> meta_features(scaled.size());
  if (options.out_of_fold_folds == 0) {
    for (std::size_t i = 0; i < scaled.size(); ++i) {
      meta_features[i] = model.base_predictions(scaled[i].features);
    }
  } else {
    const auto k = static_cast<std::size_t>(options.out_of_fold_folds);
    if (k < 2 || k > scaled.size()) throw DomainError("stack: invalid out-of-fold count");
    std::vector<std::size_t> order(scaled.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(options.fold_seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t fold = 0; fold < k; ++fold) {
      std::vector<TrainingSample> train;
      std::vector<std::size_t> held;
      for (std::size_t j = 0; j < order.size(); ++j) {
        if (j % k == fold) {
          held.push_back(order[j]);
        } else {
          train.push_back(scaled[order[j]]);
        }
      }
      const GbtModel g = gbt_fit(train, options.gbt);
      const MlpModel m = mlp_fit(train, options.mlp);
      for (auto i : held) {
        meta_features[i] = {gbt_predict(g, scaled[i].features), mlp_forward(m, scaled[i].features)};
      }
    }
  }
  model.meta = fit_meta_on(meta_features, data, options.ridge_alpha);
  return model;
}

double stack_predict(const EnsembleModel& model, const Features& raw) {
  return model.predict(raw);
}

void refit_meta(EnsembleModel& model, std::span<const TrainingSample> raw_data, double alpha) {
  std::vector<std::array<double, 2>> meta_features;
  meta_features.reserve(raw_data.size());
  for (const auto& s : raw_data) {
    meta_features.push_back(model.base_predictions(model.scaler.transform(s.features)));
  }
  model.meta = fit_meta_on(meta_features, raw_data, alpha);
}

RegressionMetrics evaluate(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.empty()) throw DomainError("evaluate: empty test set");
  if (truth.size() != predicted.size()) throw DomainError("evaluate: size mismatch");
  const auto n = static_cast<double>(truth.size());
  const double mean = std::accumulate(truth.begin(), truth.end(), 0.0) / n;
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sse += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
    sst += (truth[i] - mean) * (truth[i] - mean);
  }
  RegressionMetrics m;
  m.rmse = std::sqrt(sse / n);
  if (sst > 0.0) m.r2 = 1.0 - sse / sst;
  return m;
}

RegressionMetrics evaluate(std::span<const TrainingSample> test,
                           const std::function<double(const Features&)>& predict) {
  std::vector<double> truth;
  std::vector<double> predicted;
  truth.reserve(test.size());
  predicted.reserve(test.size());
  for (const auto& s : test) {
    truth.push_back(s.label);
    predicted.push_back(predict(s.features));
  }
  return evaluate(truth, predicted);
}

RegressionMetrics evaluate(const EnsembleModel& model, std::span<const TrainingSample> test) {
  return evaluate(test, [&model](const Features& x) { return model.predict(x); });
}

double mean_absolute_error(const EnsembleModel& model, std::span<const TrainingSample> data) {
  if (data.empty()) throw DomainError("mae: empty data");
  double sum = 0.0;
  for (const auto& s : data) sum += std::abs(model.predict(s.features) - s.label);
  return sum / static_cast<double>(data.size());
}

}  // namespace ecmirror
