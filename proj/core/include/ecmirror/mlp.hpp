#pragma once

// Single-hidden-layer perceptron: z = R(W1 x + b1), y = w2 . z + b2.

#include <cstdint>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "ecmirror/types.hpp"

namespace ecmirror {

enum class Activation { Tanh, Relu, Logistic };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

struct MlpHyperparams {
  int hidden = 100;
  Activation activation = Activation::Tanh;
  double alpha = 1e-3;  // L2 penalty on weights (biases unpenalized)
  double learning_rate = 0.02;
  double momentum = 0.9;
  int max_epochs = 2000;
  double tolerance = 1e-6;
  int patience = 10;  // epochs of sub-tolerance improvement before stopping
  std::uint64_t seed = 42;
};

struct MlpModel {
  Activation activation = Activation::Tanh;
  double alpha = 1e-3;
  Eigen::MatrixXd w1;  // hidden x inputs
  Eigen::VectorXd b1;  // hidden
  Eigen::VectorXd w2;  // hidden (single output)
  double b2 = 0.0;

  int inputs() const { return static_cast<int>(w1.cols()); }
  int hidden() const { return static_cast<int>(w1.rows()); }
  bool all_finite() const;
};

// Same shapes as MlpModel; gradient of the training objective.
struct MlpGradient {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2 = 0.0;
};

struct MlpFitReport {
  int epochs = 0;
  double final_objective = 0.0;
};

// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
MlpModel mlp_init(int inputs, int hidden, Activation activation, double alpha,
                  std::uint64_t seed);

double mlp_forward(const MlpModel& model, const Features& x);

// mean((y_hat - y)^2) + alpha/2 * (|W1|^2 + |w2|^2). Fills `grad` when given.
double mlp_objective(const MlpModel& model, std::span<const TrainingSample> data,
                     MlpGradient* grad = nullptr);

// Full-batch gradient descent with momentum starting from `start`.
// Throws TrainingError if the objective becomes non-finite.
MlpFitReport mlp_train(MlpModel& model, std::span<const TrainingSample> data,
                       const MlpHyperparams& hp);

// Fresh seeded initialization followed by mlp_train. Needs >= 2 samples.
MlpModel mlp_fit(std::span<const TrainingSample> data, const MlpHyperparams& hp,
                 MlpFitReport* report = nullptr);

}  // namespace ecmirror
