#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "koow/dataset.hpp"

namespace koow {

/// Pearson correlation under probability weights w/sum(w): covariance and
/// variances taken about the weighted means. No degrees-of-freedom correction.
double weighted_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& w);

/// (sum w)^2 / sum(w^2); in (0, n] for nonnegative, not-all-zero weights.
double effective_sample_size(const Eigen::VectorXd& w);

struct BalanceRow {
  std::string name;
  double abs_corr_unweighted = 0.0;
  double abs_corr_weighted = 0.0;
  bool defined = true;  // false when the confounder has zero weighted variance
};

struct BalanceReport {
  std::vector<BalanceRow> rows;
  double mean_abs_corr_unweighted = 0.0;
  double mean_abs_corr_weighted = 0.0;
  double ess = 0.0;
  double weight_min = 0.0;
  double weight_max = 0.0;
  double weight_cv = 0.0;  // population sd / mean
};

/// One row per confounder: |corr(A, X_j)| with and without the weights, plus
/// ESS and weight-distribution summaries. A zero-variance column marks its row
/// undefined instead of failing the whole table.
BalanceReport balance_table(const Dataset& ds, const Eigen::VectorXd& w);

}  // namespace koow
