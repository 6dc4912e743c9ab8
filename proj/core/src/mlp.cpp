#include "ecmirror/mlp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "ecmirror/errors.hpp"

namespace ecmirror {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Logistic: return "logistic";
  }
  return "?";
}

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "logistic") return Activation::Logistic;
  throw DomainError("unknown activation '" + std::string(name) + "'");
}

bool MlpModel::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && std::isfinite(b2);
}

namespace {

void activate(Activation a, Eigen::Ref<Eigen::MatrixXd> z) {
  switch (a) {
    case Activation::Tanh: z = z.array().tanh(); break;
    case Activation::Relu: z = z.array().max(0.0); break;
    case Activation::Logistic: z = (1.0 + (-z.array()).exp()).inverse(); break;
  }
}

// Derivative expressed through the activation output.
Eigen::MatrixXd activation_slope(Activation a, const Eigen::MatrixXd& out) {
  switch (a) {
    case Activation::Tanh: return (1.0 - out.array().square()).matrix();
    case Activation::Relu: return (out.array() > 0.0).cast<double>().matrix();
    case Activation::Logistic: return (out.array() * (1.0 - out.array())).matrix();
  }
  return out;
}

Eigen::MatrixXd design_matrix(std::span<const TrainingSample> data) {
  Eigen::MatrixXd x(kFeatureCount, data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) x(f, i) = data[i].features[f];
  }
  return x;
}

}  // namespace

MlpModel mlp_init(int inputs, int hidden, Activation activation, double alpha,
                  std::uint64_t seed) {
  if (inputs <= 0 || hidden <= 0) throw DomainError("mlp: layer sizes must be positive");
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return std::uniform_real_distribution<double>(-bound, bound)(rng);
  };
  MlpModel m;
  m.activation = activation;
  m.alpha = alpha;
  m.w1.resize(hidden, inputs);
  m.b1.resize(hidden);
  m.w2.resize(hidden);
  for (int r = 0; r < hidden; ++r) {
    for (int c = 0; c < inputs; ++c) m.w1(r, c) = uniform(inputs);
  }
  for (int r = 0; r < hidden; ++r) m.b1(r) = uniform(inputs);
  for (int r = 0; r < hidden; ++r) m.w2(r) = uniform(hidden);
  m.b2 = uniform(hidden);
  return m;
}

double mlp_forward(const MlpModel& model, const Features& x) {
  Eigen::Map<const Eigen::VectorXd> input(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd z = model.w1 * input + model.b1;
  activate(model.activation, z);
  return model.w2.dot(z) + model.b2;
}

double mlp_objective(const MlpModel& model, std::span<const TrainingSample> data,
                     MlpGradient* grad) {
  const auto n = static_cast<double>(data.size());
  const Eigen::MatrixXd x = design_matrix(data);
  Eigen::MatrixXd z = (model.w1 * x).colwise() + model.b1;  // hidden x n
  activate(model.activation, z);
  Eigen::RowVectorXd y_hat = model.w2.transpose() * z;
  y_hat.array() += model.b2;

  Eigen::RowVectorXd residual(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    residual(static_cast<Eigen::Index>(i)) = y_hat(static_cast<Eigen::Index>(i)) - data[i].label;
  }
  const double penalty = 0.5 * model.alpha * (model.w1.squaredNorm() + model.w2.squaredNorm());
  const double objective = residual.squaredNorm() / n + penalty;

  if (grad != nullptr) {
    const Eigen::RowVectorXd d_out = (2.0 / n) * residual;           // dJ/dy_hat
    grad->w2 = z * d_out.transpose() + model.alpha * model.w2;
    grad->b2 = d_out.sum();
    const Eigen::MatrixXd d_hidden =
        (model.w2 * d_out).cwiseProduct(activation_slope(model.activation, z));  // hidden x n
    grad->w1 = d_hidden * x.transpose() + model.alpha * model.w1;
    grad->b1 = d_hidden.rowwise().sum();
  }
  return objective;
}

MlpFitReport mlp_train(MlpModel& model, std::span<const TrainingSample> data,
                       const MlpHyperparams& hp) {
  if (data.size() < 2) throw DomainError("mlp: need at least 2 samples");
  model.alpha = hp.alpha;

  MlpGradient grad;
  MlpGradient velocity{Eigen::MatrixXd::Zero(model.w1.rows(), model.w1.cols()),
                       Eigen::VectorXd::Zero(model.b1.size()),
                       Eigen::VectorXd::Zero(model.w2.size()), 0.0};
  MlpFitReport report;
  double previous = std::numeric_limits<double>::infinity();
  int stalled = 0;
  for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
    const double objective = mlp_objective(model, data, &grad);
    report.epochs = epoch + 1;
    report.final_objective = objective;
    if (!std::isfinite(objective)) throw TrainingError("mlp: non-finite loss", epoch);

    stalled = (previous - objective < hp.tolerance) ? stalled + 1 : 0;
    if (stalled >= hp.patience) break;
    previous = objective;

    velocity.w1 = hp.momentum * velocity.w1 - hp.learning_rate * grad.w1;
    velocity.b1 = hp.momentum * velocity.b1 - hp.learning_rate * grad.b1;
    velocity.w2 = hp.momentum * velocity.w2 - hp.learning_rate * grad.w2;
    velocity.b2 = hp.momentum * velocity.b2 - hp.learning_rate * grad.b2;
    model.w1 += velocity.w1;
    model.b1 += velocity.b1;
    model.w2 += velocity.w2;
    model.b2 += velocity.b2;
  }
  if (!model.all_finite()) throw TrainingError("mlp: non-finite parameters", report.epochs);
  return report;
}

MlpModel mlp_fit(std::span<const TrainingSample> data, const MlpHyperparams& hp,
                 MlpFitReport* report) {
  if (data.size() < 2) throw DomainError("mlp: need at least 2 samples");
  MlpModel model = mlp_init(static_cast<int>(kFeatureCount), hp.hidden, hp.activation,
                            hp.alpha, hp.seed);
  MlpFitReport r = mlp_train(model, data, hp);
  if (report != nullptr) *report = r;
  return model;
}

}  // namespace ecmirror
