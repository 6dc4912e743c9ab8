#pragma once

// Exhaustive k-fold grid search over base-learner hyperparameters.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ecmirror/ensemble.hpp"

namespace ecmirror {

struct CvRow {
  std::string label;  // human-readable configuration
  double cv_rmse = 0.0;
};

template <typename Config>
struct GridResult {
  Config best;
  std::size_t best_index = 0;
  std::vector<CvRow> table;  // one row per grid point, grid order
};

// Shuffled assignment of row indices to k folds. Throws DomainError when
// k < 2 or some fold would be empty (k > n).
std::vector<std::vector<std::size_t>> make_folds(std::size_t n, int k, std::uint64_t seed);

// Mean over folds of the held-out RMSE of `fit_predict(train, test)`.
double cross_validated_rmse(
    std::span<const TrainingSample> data, const std::vector<std::vector<std::size_t>>& folds,
    const std::function<std::vector<double>(std::span<const TrainingSample>,
                                            std::span<const TrainingSample>)>& fit_predict);

struct GbtGrid {
  std::vector<double> learning_rates{0.05, 0.1, 0.2};
  std::vector<int> n_estimators{50, 100};
  std::vector<int> max_depths{3};
  GbtHyperparams base;

  std::vector<GbtHyperparams> expand() const;
};

struct MlpGrid {
  std::vector<Activation> activations{Activation::Tanh, Activation::Relu};
  std::vector<double> alphas{1e-4, 1e-3, 1e-2};
  std::vector<int> hidden_sizes{100};
  MlpHyperparams base;

  std::vector<MlpHyperparams> expand() const;
};

std::string describe(const GbtHyperparams& hp);
std::string describe(const MlpHyperparams& hp);

// Ties go to the earliest grid point. Features are standardized per fold on
// the training part only.
GridResult<GbtHyperparams> grid_search(std::span<const TrainingSample> data,
                                       std::span<const GbtHyperparams> grid, int folds,
                                       std::uint64_t seed);
GridResult<MlpHyperparams> grid_search(std::span<const TrainingSample> data,
                                       std::span<const MlpHyperparams> grid, int folds,
                                       std::uint64_t seed);

struct TunedStack {
  StackOptions options;
  GridResult<GbtHyperparams> gbt;
  GridResult<MlpHyperparams> mlp;
};

// Tunes each base learner on its own grid, then returns stacking options
// built from the winners (meta-model settings taken from `base`).
TunedStack tune_stack(std::span<const TrainingSample> data, const GbtGrid& gbt_grid,
                      const MlpGrid& mlp_grid, int folds, std::uint64_t seed,
                      const StackOptions& base = {});

}  // namespace ecmirror
