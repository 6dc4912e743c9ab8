#include "ecmirror/ridge.hpp"

#include "ecmirror/errors.hpp"

namespace ecmirror {

double RidgeMeta::predict(std::span<const double> x) const {
  double out = intercept;
  for (std::size_t i = 0; i < coef.size(); ++i) out += coef[i] * x[i];
  return out;
}

RidgeMeta ridge_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha) {
  if (x.rows() < 2) throw DomainError("ridge: need at least 2 samples");
  if (x.rows() != y.size()) throw DomainError("ridge: row count mismatch");
  if (!(alpha >= 0.0)) throw DomainError("ridge: alpha must be >= 0");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd xc = x.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;

  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += alpha;
  const Eigen::VectorXd rhs = xc.transpose() * yc;

  Eigen::VectorXd beta;
  if (alpha > 0.0) {
    beta = gram.ldlt().solve(rhs);
  } else {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
    if (lu.rank() < gram.rows()) {
      throw DomainError("ridge: rank-deficient design with alpha = 0");
    }
    beta = lu.solve(rhs);
  }

  RidgeMeta meta;
  meta.alpha = alpha;
  meta.coef.assign(beta.data(), beta.data() + beta.size());
  meta.intercept = y_mean - x_mean.dot(beta);
  return meta;
}

}  // namespace ecmirror
