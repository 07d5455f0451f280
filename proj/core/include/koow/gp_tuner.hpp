#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "koow/dataset.hpp"
#include "koow/error.hpp"

namespace koow {

/// Hyperparameters of the product polynomial Mahalanobis kernel plus GP noise.
/// Only the product of the two block scales is identified, so a single gamma
/// is tuned and the treatment block scale is fixed to 1.
struct HyperParams {
  double theta_x = 1.0;
  double theta_a = 1.0;
  double gamma = 1.0;
  double sigma_sq = 1.0;
  int degree_x = 1;
  int degree_a = 1;
};

/// Gaussian-process log marginal likelihood
///   -1/2 y^T (K + sigma^2 I)^{-1} y - 1/2 logdet(K + sigma^2 I) - n/2 log(2 pi)
/// computed via Cholesky, never an explicit inverse. If the factorization
/// fails, jitter escalates by x10 up to 1e-4 * trace/n before
/// FactorizationFailure is thrown.
double log_marginal_likelihood(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                               double sigma_sq);

struct TuneOptions {
  int starts = 8;
  int max_nm_iters = 200;
  double lower_bound = 1e-4;
  double upper_bound = 1e4;
  double ridge_fraction = 1e-6;
};

struct TuneResult {
  HyperParams params;
  double lml = 0.0;
  int starts = 0;
};

/// Maximizes the LML of Y under the joint Gram gamma * (Kx(theta_x) .* Ka(theta_a))
/// conditioned on matched pairs (X_i, A_i). Derivative-free simplex search over
/// (log theta_x, log theta_a, log gamma, log sigma_sq) from a seeded
/// low-discrepancy set of starts; deterministic under seed.
TuneResult tune(const Dataset& ds, int degree_x, int degree_a, const TuneOptions& options,
                std::uint64_t seed);

}  // namespace koow
