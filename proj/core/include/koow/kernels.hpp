#pragma once

#include <Eigen/Dense>
#include <variant>

#include "koow/error.hpp"

namespace koow {

/// Fitted first and second moments of a data block. `precision_factor` is a
/// lower-triangular F with F * F^T = (Sigma + ridge_fraction*diag(Sigma) + delta*I)^{-1},
/// where Sigma is the n-1 denominator sample covariance and delta lifts any
/// zero diagonal entry left by constant columns.
struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd precision_factor;

  [[nodiscard]] Eigen::Index dim() const { return mean.size(); }
};

Moments fit_moments(const Eigen::MatrixXd& Z, double ridge_fraction);

/// Centered rows mapped into whitened coordinates: row i of the result is
/// F^T (z_i - mean), so dot products of rows evaluate the Mahalanobis form.
Eigen::MatrixXd whiten(const Moments& moments, const Eigen::MatrixXd& Z);

/// K(z, z') = gamma * (1 + theta * (z - mu)^T S^{-1} (z' - mu))^degree.
struct PolynomialMahalanobisKernel {
  double gamma = 1.0;
  double theta = 1.0;
  int degree = 1;
  Moments moments;
};

/// Isotropic squared-exponential on Mahalanobis-whitened coordinates, so the
/// lengthscale is unitless. Diagonal entries equal gamma.
struct GaussianKernel {
  double gamma = 1.0;
  double lengthscale = 1.0;
  Moments moments;
};

using Kernel = std::variant<PolynomialMahalanobisKernel, GaussianKernel>;

/// n x n Gram matrix of the kernel over the rows of Z. Exactly symmetric.
Eigen::MatrixXd gram(const Kernel& kernel, const Eigen::MatrixXd& Z);

/// Entrywise product Kx .* Ka: the Gram of the product kernel on matched
/// pairs. PSD by the Schur product theorem.
Eigen::MatrixXd hadamard(const Eigen::MatrixXd& Kx, const Eigen::MatrixXd& Ka);

struct GramPair {
  Eigen::MatrixXd Kx;
  Eigen::MatrixXd Ka;
};

/// Jitter scale used wherever a factorization of a Gram matrix is required:
/// 1e-8 * trace(K)/n. Never added to reported Gram entries.
double psd_jitter(const Eigen::MatrixXd& K);

}  // namespace koow
