#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "koow/error.hpp"

namespace koow {

struct GridSpec {
  double min_a = -3.0;
  double max_a = 3.0;
  int count = 1000;
};

/// Evenly spaced, inclusive of both endpoints; strictly increasing.
Eigen::VectorXd make_grid(const GridSpec& spec);

enum class EstimatorKind { parametric, local_poly };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::local_poly;
  int degree = 2;      // parametric: {1,2,3}; local: {0,1,2}
  double span = 0.75;  // local only, in (0, 1]

  [[nodiscard]] std::string label() const;
};

void validate(const EstimatorSpec& spec);

struct CurveEstimate {
  Eigen::VectorXd grid;
  Eigen::VectorXd theta_hat;
  std::optional<Eigen::VectorXd> lower;
  std::optional<Eigen::VectorXd> upper;
  EstimatorSpec estimator;
};

/// Coefficients (beta_0 ... beta_k) minimizing sum_i w_i (Y_i - sum_j beta_j A_i^j)^2,
/// via column-scaled normal equations with an SVD fallback at relative cutoff 1e-12.
Eigen::VectorXd weighted_polyfit(const Eigen::VectorXd& A, const Eigen::VectorXd& Y,
                                 const Eigen::VectorXd& w, int degree);

/// Local polynomial regression on the grid. At each grid point the bandwidth
/// is the distance to the ceil(span*n)-th nearest A_i, local weights are
/// w_i * tricube((A_i - a0)/h), and theta_hat(a0) is the local intercept.
/// Rank-deficient local designs fall back to degree p-1, recursively down to
/// the local weighted mean.
CurveEstimate weighted_local_poly(const Eigen::VectorXd& A, const Eigen::VectorXd& Y,
                                  const Eigen::VectorXd& w, int degree, double span,
                                  const Eigen::VectorXd& grid);

/// Horner evaluation of a polynomial coefficient vector over the grid.
CurveEstimate evaluate_parametric(const Eigen::VectorXd& coefficients,
                                  const Eigen::VectorXd& grid);

/// Dispatch on the estimator spec.
CurveEstimate estimate_curve(const Eigen::VectorXd& A, const Eigen::VectorXd& Y,
                             const Eigen::VectorXd& w, const EstimatorSpec& spec,
                             const Eigen::VectorXd& grid);

}  // namespace koow
