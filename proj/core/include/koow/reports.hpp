#pragma once

#include <string>
#include <vector>

#include "koow/balance.hpp"
#include "koow/bootstrap.hpp"
#include "koow/diagnostics.hpp"
#include "koow/dose_response.hpp"
#include "koow/gp_tuner.hpp"
#include "koow/simulation.hpp"

namespace koow {

/// 17-significant-digit decimal text; round-trips any double bit-exactly.
std::string format_double(double value);

/// weights CSV: row_index, weight (mean-1 scale), weight_normalized (sum-1 scale)
std::string weights_csv(const Eigen::VectorXd& w);

/// curve CSV: a, theta_hat, lower, upper (lower/upper empty without bands)
std::string curve_csv(const CurveEstimate& curve);

/// study CSV: scenario, method, lambda, estimator, iab, irmse, failures
/// (lambda empty for non-KOOW rows; iab/irmse empty for failed cells)
std::string study_csv(const std::vector<StudyCell>& cells);

/// Gram dump, row-major, no header.
std::string gram_csv(const Eigen::MatrixXd& K);

std::string solver_report_json(const WeightSolution& solution, double lambda);
std::string balance_report_json(const BalanceReport& report);
std::string balance_report_text(const BalanceReport& report);
std::string tune_result_json(const TuneResult& result);
std::string bootstrap_info_json(const BootstrapInfo& info);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace koow
