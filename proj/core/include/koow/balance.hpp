#pragma once

#include <Eigen/Dense>

#include "koow/error.hpp"

namespace koow {

/// Quadratic form of the worst-case penalized functional covariance under the
/// product kernel, expanded over matched and mismatched pairs:
///
///   delta_sq(w) = (1/n^2) w^T M w - (2/n^3) w^T v + (1/n^4) s_x * s_a
///   c(w, lambda) = delta_sq(w) + (lambda/n^2) ||w||^2
///
/// with M = Kx .* Ka, v_i = (Kx 1)_i (Ka 1)_i, s_x = 1^T Kx 1, s_a = 1^T Ka 1.
/// At uniform weights delta_sq reduces to the biased V-statistic HSIC.
struct BalanceObjective {
  Eigen::MatrixXd M;
  Eigen::VectorXd v;
  double s_x = 0.0;
  double s_a = 0.0;
  Eigen::Index n = 0;
  double lambda = 0.0;
};

BalanceObjective build_objective(const Eigen::MatrixXd& Kx, const Eigen::MatrixXd& Ka,
                                 double lambda);

/// Same precomputed terms with a different penalty.
BalanceObjective with_lambda(BalanceObjective obj, double lambda);

double delta_squared(const BalanceObjective& obj, const Eigen::VectorXd& w);
double objective_value(const BalanceObjective& obj, const Eigen::VectorXd& w);
Eigen::VectorXd objective_gradient(const BalanceObjective& obj, const Eigen::VectorXd& w);

/// Euclidean projection onto { w >= 0, sum(w) = total } by sort-and-threshold.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& z, double total);

struct SolverOptions {
  double tol = 1e-7;     // sup-norm of the projected-gradient residual
  int max_iter = 50000;
};

struct WeightSolution {
  Eigen::VectorXd w;      // mean-1 scale: sum(w) = n
  double objective = 0.0; // c(w, lambda)
  double delta_sq = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Minimizes c(w, lambda) over the scaled simplex { w >= 0, sum(w) = n } by
/// accelerated projected gradient (monotone restart variant) from w = 1.
WeightSolution solve(const BalanceObjective& obj, const SolverOptions& options = {});

/// Brute-force reference for n <= 4: barycentric grid at resolution 1/400
/// refined by exact active-set KKT solves over every support set.
Eigen::VectorXd solve_oracle(const BalanceObjective& obj);

}  // namespace koow
