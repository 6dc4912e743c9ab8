#include "ecmirror/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ecmirror/errors.hpp"

namespace ecmirror {

std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw DomainError("grid search: need at least 2 folds");
  if (static_cast<std::size_t>(k) > n) {
    throw DomainError("grid search: a fold would hold fewer than 1 sample");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) folds[i % folds.size()].push_back(order[i]);
  return folds;
}

double cross_validated_rmse(
    std::span<const TrainingSample> data, const std::vector<std::vector<std::size_t>>& folds,
    const std::function<std::vector<double>(std::span<const TrainingSample>,
                                            std::span<const TrainingSample>)>& fit_predict) {
  double total = 0.0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<TrainingSample> train;
    std::vector<TrainingSample> test;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      for (auto i : folds[g]) (g == f ? test : train).push_back(data[i]);
    }
    const std::vector<double> predicted = fit_predict(train, test);
    double sse = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      sse += (predicted[i] - test[i].label) * (predicted[i] - test[i].label);
    }
    total += std::sqrt(sse / static_cast<double>(test.size()));
  }
  return total / static_cast<double>(folds.size());
}

std::vector<GbtHyperparams> GbtGrid::expand() const {
  std::vector<GbtHyperparams> out;
  for (double lr : learning_rates) {
    for (int n : n_estimators) {
      for (int d : max_depths) {
        GbtHyperparams hp = base;
        hp.learning_rate = lr;
        hp.n_estimators = n;
        hp.max_depth = d;
        out.push_back(hp);
      }
    }
  }
  return out;
}

std::vector<MlpHyperparams> MlpGrid::expand() const {
  std::vector<MlpHyperparams> out;
  for (Activation a : activations) {
    for (double alpha : alphas) {
      for (int h : hidden_sizes) {
        MlpHyperparams hp = base;
        hp.activation = a;
        hp.alpha = alpha;
        hp.hidden = h;
        out.push_back(hp);
      }
    }
  }
  return out;
}

std::string describe(const GbtHyperparams& hp) {
  std::ostringstream s;
  s << "learning_rate=" << hp.learning_rate << " n_estimators=" << hp.n_estimators
    << " max_depth=" << hp.max_depth;
  return s.str();
}

std::string describe(const MlpHyperparams& hp) {
  std::ostringstream s;
  s << "activation=" << to_string(hp.activation) << " alpha=" << hp.alpha
    << " hidden=(" << hp.hidden << ",)";
  return s.str();
}

namespace {

template <typename Config, typename FitPredict>
GridResult<Config> search(std::span<const TrainingSample> data, std::span<const Config> grid,
                          int folds, std::uint64_t seed, FitPredict fit_predict) {
  if (grid.empty()) throw DomainError("grid search: empty grid");
  const auto fold_sets = make_folds(data.size(), folds, seed);
  GridResult<Config> result;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Config& cfg = grid[i];
    const double rmse = cross_validated_rmse(
        data, fold_sets,
        [&](std::span<const TrainingSample> train, std::span<const TrainingSample> test) {
          return fit_predict(cfg, train, test);
        });
    result.table.push_back({describe(cfg), rmse});
    if (rmse < best) {
      best = rmse;
      result.best_index = i;
    }
  }
  result.best = grid[result.best_index];
  return result;
}

}  // namespace

GridResult<GbtHyperparams> grid_search(std::span<const TrainingSample> data,
                                       std::span<const GbtHyperparams> grid, int folds,
                                       std::uint64_t seed) {
  return search(data, grid, folds, seed,
                [](const GbtHyperparams& hp, std::span<const TrainingSample> train,
                   std::span<const TrainingSample> test) {
                  const auto scaler = FeatureScaler::fit(train);
                  const auto model = gbt_fit(scaler.transform(train), hp);
                  std::vector<double> out;
                  for (const auto& s : test) out.push_back(gbt_predict(model, scaler.transform(s.features)));
                  return out;
                });
}

GridResult<MlpHyperparams> grid_search(std::span<const TrainingSample> data,
                                       std::span<const MlpHyperparams> grid, int folds,
                                       std::uint64_t seed) {
  return search(data, grid, folds, seed,
                [](const MlpHyperparams& hp, std::span<const TrainingSample> train,
                   std::span<const TrainingSample> test) {
                  const auto scaler = FeatureScaler::fit(train);
                  const auto model = mlp_fit(scaler.transform(train), hp);
                  std::vector<double> out;
                  for (const auto& s : test) out.push_back(mlp_forward(model, scaler.transform(s.features)));
                  return out;
                });
}

TunedStack tune_stack(std::span<const TrainingSample> data, const GbtGrid& gbt_grid,
                      const MlpGrid& mlp_grid, int folds, std::uint64_t seed,
                      const StackOptions& base) {
  const auto gbt_points = gbt_grid.expand();
  const auto mlp_points = mlp_grid.expand();
  TunedStack tuned{base, grid_search(data, std::span<const GbtHyperparams>(gbt_points), folds, seed),
                   grid_search(data, std::span<const MlpHyperparams>(mlp_points), folds, seed)};
  tuned.options.gbt = tuned.gbt.best;
  tuned.options.mlp = tuned.mlp.best;
  return tuned;
}

}  // namespace ecmirror
