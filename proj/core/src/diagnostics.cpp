#include "koow/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace koow {

double weighted_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& w) {
  const Eigen::Index n = a.size();
  if (x.size() != n || w.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "a, x, w must have equal length");
  if (w.minCoeff() < 0.0) throw Error(ErrorCode::InvalidArgument, "weights must be >= 0");
  const double total = w.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "weights must have positive sum");

  // a column that is constant on the weight support has zero variance exactly,
  // even when rounding noise in the weighted moments would hide it
  auto constant_on_support = [&](const Eigen::VectorXd& v) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (w(i) > 0.0) {
        lo = std::min(lo, v(i));
        hi = std::max(hi, v(i));
      }
    }
    return lo == hi;
  };
  if (constant_on_support(a) || constant_on_support(x))
    throw Error(ErrorCode::ZeroVariance, "weighted variance must be positive for correlation");

  const Eigen::VectorXd omega = w / total;
  const double a_mean = omega.dot(a);
  const double x_mean = omega.dot(x);
  double cov = 0.0, var_a = 0.0, var_x = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double da = a(i) - a_mean;
    const double dx = x(i) - x_mean;
    cov += omega(i) * da * dx;
    var_a += omega(i) * da * da;
    var_x += omega(i) * dx * dx;
  }
  if (!(var_a > 0.0) || !(var_x > 0.0))
    throw Error(ErrorCode::ZeroVariance, "weighted variance must be positive for correlation");
  const double rho = cov / std::sqrt(var_a * var_x);
  return std::clamp(rho, -1.0, 1.0);
}

double effective_sample_size(const Eigen::VectorXd& w) {
  const double s = w.sum();
  const double s2 = w.squaredNorm();
  if (!(s2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "weights are all zero");
  return s * s / s2;
}

BalanceReport balance_table(const Dataset& ds, const Eigen::VectorXd& w) {
  if (w.size() != ds.n())
    throw Error(ErrorCode::DimensionMismatch, "weight vector length does not match dataset");

  const Eigen::VectorXd uniform = Eigen::VectorXd::Ones(ds.n());
  BalanceReport report;
  double sum_unw = 0.0, sum_w = 0.0;
  long defined = 0;
  for (Eigen::Index j = 0; j < ds.p(); ++j) {
    BalanceRow row;
    row.name = ds.confounder_names[static_cast<std::size_t>(j)];
    try {
      row.abs_corr_unweighted = std::abs(weighted_correlation(ds.A, ds.X.col(j), uniform));
      row.abs_corr_weighted = std::abs(weighted_correlation(ds.A, ds.X.col(j), w));
      sum_unw += row.abs_corr_unweighted;
      sum_w += row.abs_corr_weighted;
      ++defined;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroVariance) throw;
      row.defined = false;
      row.abs_corr_unweighted = std::numeric_limits<double>::quiet_NaN();
      row.abs_corr_weighted = std::numeric_limits<double>::quiet_NaN();
    }
    report.rows.push_back(std::move(row));
  }
  if (defined > 0) {
    report.mean_abs_corr_unweighted = sum_unw / static_cast<double>(defined);
    report.mean_abs_corr_weighted = sum_w / static_cast<double>(defined);
  } else {
    report.mean_abs_corr_unweighted = std::numeric_limits<double>::quiet_NaN();
    report.mean_abs_corr_weighted = std::numeric_limits<double>::quiet_NaN();
  }

  report.ess = effective_sample_size(w);
  report.weight_min = w.minCoeff();
  report.weight_max = w.maxCoeff();
  const double mean = w.mean();
  const double var = (w.array() - mean).square().mean();
  report.weight_cv = mean != 0.0 ? std::sqrt(var) / mean : std::numeric_limits<double>::quiet_NaN();
  return report;
}

}  // namespace koow
