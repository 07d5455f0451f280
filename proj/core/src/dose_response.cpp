#include "koow/dose_response.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace koow {

Eigen::VectorXd make_grid(const GridSpec& spec) {
  if (spec.count < 2) throw Error(ErrorCode::InvalidArgument, "grid count must be >= 2");
  if (!(spec.min_a < spec.max_a))
    throw Error(ErrorCode::InvalidArgument, "grid min must be < max");
  Eigen::VectorXd grid(spec.count);
  const double step = (spec.max_a - spec.min_a) / static_cast<double>(spec.count - 1);
  for (int g = 0; g < spec.count; ++g) grid(g) = spec.min_a + step * static_cast<double>(g);
  return grid;
}

std::string EstimatorSpec::label() const {
  if (kind == EstimatorKind::parametric) return "poly:" + std::to_string(degree);
  return "local:" + std::to_string(degree);
}

void validate(const EstimatorSpec& spec) {
  if (spec.kind == EstimatorKind::parametric) {
    if (spec.degree < 1 || spec.degree > 3)
      throw Error(ErrorCode::InvalidArgument, "parametric degree must be in {1,2,3}");
  } else {
    if (spec.degree < 0 || spec.degree > 2)
      throw Error(ErrorCode::InvalidArgument, "local degree must be in {0,1,2}");
    if (!(spec.span > 0.0 && spec.span <= 1.0))
      throw Error(ErrorCode::InvalidSpan, "span must be in (0, 1]");
  }
}

namespace {

long distinct_support_points(const Eigen::VectorXd& A, const Eigen::VectorXd& w) {
  std::set<double> values;
  for (Eigen::Index i = 0; i < A.size(); ++i)
    if (w(i) > 0.0) values.insert(A(i));
  return static_cast<long>(values.size());
}

// Weighted least squares of y on powers of (a - center), solved on column-scaled
// normal equations; falls back to an SVD pseudo-inverse when ill-conditioned.
Eigen::VectorXd weighted_poly_coeffs(const Eigen::VectorXd& a, const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& w, int degree, double center) {
  const Eigen::Index n = a.size();
  const Eigen::Index k = degree + 1;
  Eigen::MatrixXd V(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    double pw = 1.0;
    const double ai = a(i) - center;
    for (Eigen::Index j = 0; j < k; ++j) {
      V(i, j) = pw;
      pw *= ai;
    }
  }
  const Eigen::VectorXd sw = w.cwiseMax(0.0).cwiseSqrt();
  Eigen::MatrixXd B = sw.asDiagonal() * V;
  Eigen::VectorXd z = sw.cwiseProduct(y);

  Eigen::VectorXd scale(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const double norm = B.col(j).norm();
    scale(j) = norm > 0.0 ? norm : 1.0;
    B.col(j) /= scale(j);
  }

  Eigen::MatrixXd G = B.transpose() * B;
  Eigen::VectorXd rhs = B.transpose() * z;
  Eigen::LLT<Eigen::MatrixXd> llt(G);
  Eigen::VectorXd beta;
  if (llt.info() == Eigen::Success) {
    beta = llt.solve(rhs);
    const double residual = (G * beta - rhs).norm();
    if (!(beta.allFinite() && residual <= 1e-8 * (1.0 + rhs.norm()))) beta.resize(0);
  }
  if (beta.size() == 0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1e-12);
    beta = svd.solve(z);
  }
  return beta.cwiseQuotient(scale);
}

double tricube(double u) {
  const double a = std::abs(u);
  if (a >= 1.0) return 0.0;
  const double t = 1.0 - a * a * a;
  return t * t * t;
}

}  // namespace

Eigen::VectorXd weighted_polyfit(const Eigen::VectorXd& A, const Eigen::VectorXd& Y,
                                 const Eigen::VectorXd& w, int degree) {
  const Eigen::Index n = A.size();
  if (Y.size() != n || w.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "A, Y, w must have equal length");
  if (degree < 0) throw Error(ErrorCode::InvalidArgument, "degree must be >= 0");
  if (w.minCoeff() < 0.0) throw Error(ErrorCode::InvalidArgument, "weights must be >= 0");
  if (!(w.sum() > 0.0)) throw Error(ErrorCode::InvalidArgument, "weights must have positive sum");
  if (distinct_support_points(A, w) < degree + 1)
    throw Error(ErrorCode::RankDeficient,
                "need at least " + std::to_string(degree + 1) + " distinct weighted support points");
  return weighted_poly_coeffs(A, Y, w, degree, 0.0);
}

CurveEstimate weighted_local_poly(const Eigen::VectorXd& A, const Eigen::VectorXd& Y,
                                  const Eigen::VectorXd& w, int degree, double span,
                                  const Eigen::VectorXd& grid) {
  const Eigen::Index n = A.size();
  if (Y.size() != n || w.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "A, Y, w must have equal length");
  if (!(span > 0.0 && span <= 1.0)) throw Error(ErrorCode::InvalidSpan, "span must be in (0, 1]");
  if (degree < 0 || degree > 2)
    throw Error(ErrorCode::InvalidArgument, "local degree must be in {0,1,2}");
  if (!(w.sum() > 0.0)) throw Error(ErrorCode::InvalidArgument, "weights must have positive sum");

  const Eigen::Index m = std::min<Eigen::Index>(
      n, static_cast<Eigen::Index>(std::ceil(span * static_cast<double>(n))));

  CurveEstimate curve;
  curve.grid = grid;
  curve.theta_hat.resize(grid.size());
  curve.estimator = EstimatorSpec{EstimatorKind::local_poly, degree, span};

  std::vector<double> dist(static_cast<std::size_t>(n));
  Eigen::VectorXd local(n);
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double a0 = grid(g);
    for (Eigen::Index i = 0; i < n; ++i) dist[static_cast<std::size_t>(i)] = std::abs(A(i) - a0);
    std::vector<double> sorted = dist;
    std::nth_element(sorted.begin(), sorted.begin() + (m - 1), sorted.end());
    const double h = sorted[static_cast<std::size_t>(m - 1)];

    if (h > 0.0) {
      for (Eigen::Index i = 0; i < n; ++i)
        local(i) = w(i) * tricube(dist[static_cast<std::size_t>(i)] / h);
    } else {
      // all of the m nearest points sit exactly at a0
      for (Eigen::Index i = 0; i < n; ++i)
        local(i) = (dist[static_cast<std::size_t>(i)] == 0.0) ? w(i) : 0.0;
    }
    if (!(local.sum() > 0.0)) {
      // strict tricube support excluded every neighbor: fall back to a uniform
      // kernel over the m nearest points
      for (Eigen::Index i = 0; i < n; ++i)
        local(i) = (dist[static_cast<std::size_t>(i)] <= h) ? w(i) : 0.0;
    }
    if (!(local.sum() > 0.0))
      throw Error(ErrorCode::EmptyNeighborhood,
                  "no positively weighted observation near grid point " + std::to_string(a0));

    int p = degree;
    while (p > 0 && distinct_support_points(A, local) < p + 1) --p;
    Eigen::VectorXd beta = weighted_poly_coeffs(A, Y, local, p, a0);
    while (!beta.allFinite() && p > 0) {
      --p;
      beta = weighted_poly_coeffs(A, Y, local, p, a0);
    }
    curve.theta_hat(g) = beta(0);
  }
  return curve;
}

CurveEstimate evaluate_parametric(const Eigen::VectorXd& coefficients,
                                  const Eigen::VectorXd& grid) {
  if (coefficients.size() == 0)
    throw Error(ErrorCode::InvalidArgument, "empty coefficient vector");
  CurveEstimate curve;
  curve.grid = grid;
  curve.theta_hat.resize(grid.size());
  curve.estimator =
      EstimatorSpec{EstimatorKind::parametric, static_cast<int>(coefficients.size()) - 1, 0.0};
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    double acc = 0.0;
    for (Eigen::Index j = coefficients.size() - 1; j >= 0; --j)
      acc = acc * grid(g) + coefficients(j);
    curve.theta_hat(g) = acc;
  }
  return curve;
}

CurveEstimate estimate_curve(const Eigen::VectorXd& A, const Eigen::VectorXd& Y,
                             const Eigen::VectorXd& w, const EstimatorSpec& spec,
                             const Eigen::VectorXd& grid) {
  validate(spec);
  if (spec.kind == EstimatorKind::parametric) {
    CurveEstimate curve = evaluate_parametric(weighted_polyfit(A, Y, w, spec.degree), grid);
    curve.estimator = spec;
    return curve;
  }
  return weighted_local_poly(A, Y, w, spec.degree, spec.span, grid);
}

}  // namespace koow
