#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "koow/error.hpp"

namespace koow {

/// Observational data: confounder matrix X (n x p), continuous treatment A
/// (length n) and an optional outcome Y. Immutable after construction by
/// convention; safe for concurrent reads.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd A;
  std::optional<Eigen::VectorXd> Y;
  std::vector<std::string> confounder_names;
  std::string treatment_name;
  std::string outcome_name;  // empty when Y is absent

  [[nodiscard]] Eigen::Index n() const { return A.size(); }
  [[nodiscard]] Eigen::Index p() const { return X.cols(); }
};

/// Checks the Dataset invariants: n >= 2, p >= 1, all entries finite,
/// A has nonzero sample variance, Y (if present) has length n.
void validate_dataset(const Dataset& ds);

/// Builds and validates a Dataset from in-memory columns.
Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd A, std::optional<Eigen::VectorXd> Y,
                     std::vector<std::string> confounder_names, std::string treatment_name,
                     std::string outcome_name = {});

/// Loads an RFC-4180-style CSV (header row, comma separator, decimal-point
/// numbers) selecting the named columns. Rows keep file order; no implicit
/// standardization is applied.
Dataset load_csv(const std::string& path, const std::string& treatment_col,
                 const std::optional<std::string>& outcome_col,
                 const std::vector<std::string>& confounder_cols);

/// Writes the dataset back to CSV (treatment, confounders, then outcome) with
/// 17 significant digits so a reload reproduces every value bit-exactly.
void write_csv(const Dataset& ds, const std::string& path);

}  // namespace koow
