#include "koow/kernels.hpp"

#include <cmath>

namespace koow {

namespace {

// Symmetric inner-product matrix G * G^T filled from its lower triangle so the
// result is exactly symmetric entry-for-entry.
Eigen::MatrixXd inner_products(const Eigen::MatrixXd& G) {
  const Eigen::Index n = G.rows();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  B.selfadjointView<Eigen::Lower>().rankUpdate(G);
  B.triangularView<Eigen::StrictlyUpper>() = B.transpose();
  return B;
}

Eigen::MatrixXd cwise_int_pow(Eigen::MatrixXd base, int degree) {
  Eigen::MatrixXd out = base;
  for (int k = 1; k < degree; ++k) out = out.cwiseProduct(base);
  return out;
}

}  // namespace

Moments fit_moments(const Eigen::MatrixXd& Z, double ridge_fraction) {
  const Eigen::Index n = Z.rows();
  const Eigen::Index q = Z.cols();
  if (n < 2) throw Error(ErrorCode::TooFewRows, "fit_moments needs n >= 2");
  if (ridge_fraction < 0.0)
    throw Error(ErrorCode::InvalidArgument, "ridge_fraction must be >= 0");

  Eigen::VectorXd mean = Z.colwise().mean();
  Eigen::MatrixXd centered = Z.rowwise() - mean.transpose();
  Eigen::MatrixXd S = (centered.transpose() * centered) / static_cast<double>(n - 1);
  S = (0.5 * (S + S.transpose())).eval();

  const Eigen::VectorXd diag = S.diagonal();
  S.diagonal() += ridge_fraction * diag;

  // A constant column leaves a zero on the diagonal that the proportional
  // ridge cannot lift; raise it with an absolute delta instead.
  double delta = 0.0;
  if (diag.minCoeff() <= 0.0) {
    if (ridge_fraction == 0.0)
      throw Error(ErrorCode::DegenerateMoments, "constant column with ridge_fraction = 0");
    const double scale = diag.maxCoeff() > 0.0 ? diag.maxCoeff() : 1.0;
    delta = ridge_fraction * scale;
  }

  Eigen::LLT<Eigen::MatrixXd> llt;
  const double trace_scale = S.trace() > 0.0 ? S.trace() / static_cast<double>(q) : 1.0;
  for (int attempt = 0; attempt < 12; ++attempt) {
    llt.compute(S + delta * Eigen::MatrixXd::Identity(q, q));
    if (llt.info() == Eigen::Success) break;
    if (ridge_fraction == 0.0)
      throw Error(ErrorCode::DegenerateMoments, "singular sample covariance with ridge_fraction = 0");
    delta = delta > 0.0 ? delta * 10.0 : 1e-12 * trace_scale;
  }
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::DegenerateMoments, "covariance not factorizable after ridge escalation");

  // Lower-triangular F with F F^T = S^{-1}: Cholesky of the explicit inverse.
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(q, q));
  inv = (0.5 * (inv + inv.transpose())).eval();
  Eigen::LLT<Eigen::MatrixXd> llt_inv(inv);
  if (llt_inv.info() != Eigen::Success)
    throw Error(ErrorCode::DegenerateMoments, "precision matrix not factorizable");

  Moments m;
  m.mean = std::move(mean);
  m.precision_factor = llt_inv.matrixL();
  return m;
}

Eigen::MatrixXd whiten(const Moments& moments, const Eigen::MatrixXd& Z) {
  if (Z.cols() != moments.dim())
    throw Error(ErrorCode::DimensionMismatch,
                "data has " + std::to_string(Z.cols()) + " columns, moments fitted on " +
                    std::to_string(moments.dim()));
  return (Z.rowwise() - moments.mean.transpose()) * moments.precision_factor;
}

Eigen::MatrixXd gram(const Kernel& kernel, const Eigen::MatrixXd& Z) {
  return std::visit(
      [&](const auto& k) -> Eigen::MatrixXd {
        using T = std::decay_t<decltype(k)>;
        const Eigen::MatrixXd G = whiten(k.moments, Z);
        const Eigen::MatrixXd B = inner_products(G);
        if constexpr (std::is_same_v<T, PolynomialMahalanobisKernel>) {
          if (k.gamma <= 0.0 || k.theta < 0.0 || k.degree < 1)
            throw Error(ErrorCode::InvalidArgument, "invalid polynomial kernel parameters");
          Eigen::MatrixXd base =
              (k.theta * B).array() + 1.0;
          return k.gamma * cwise_int_pow(std::move(base), k.degree);
        } else {
          if (k.gamma <= 0.0 || k.lengthscale <= 0.0)
            throw Error(ErrorCode::InvalidArgument, "invalid gaussian kernel parameters");
          const Eigen::Index n = B.rows();
          const Eigen::VectorXd d = B.diagonal();
          Eigen::MatrixXd sq = d.replicate(1, n) + d.transpose().replicate(n, 1) - 2.0 * B;
          sq = sq.cwiseMax(0.0);
          const double inv2l2 = 1.0 / (2.0 * k.lengthscale * k.lengthscale);
          return k.gamma * (-inv2l2 * sq).array().exp();
        }
      },
      kernel);
}

Eigen::MatrixXd hadamard(const Eigen::MatrixXd& Kx, const Eigen::MatrixXd& Ka) {
  if (Kx.rows() != Ka.rows() || Kx.cols() != Ka.cols())
    throw Error(ErrorCode::DimensionMismatch, "Gram matrices differ in size");
  return Kx.cwiseProduct(Ka);
}

double psd_jitter(const Eigen::MatrixXd& K) {
  return 1e-8 * K.trace() / static_cast<double>(K.rows());
}

}  // namespace koow
