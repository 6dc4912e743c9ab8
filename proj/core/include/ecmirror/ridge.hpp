#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace ecmirror {

// Linear model with an unpenalized intercept.
struct RidgeMeta {
  std::vector<double> coef;
  double intercept = 0.0;
  double alpha = 1.0;

  double predict(std::span<const double> x) const;
};

// Closed form on mean-centered data: beta = (Xc'Xc + alpha I)^-1 Xc'yc,
// intercept = mean(y) - beta . mean(X). Rows of `x` are samples.
// Throws DomainError for n < 2, mismatched shapes, alpha < 0, or a
// rank-deficient system when alpha == 0.
RidgeMeta ridge_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha);

}  // namespace ecmirror
