#include "koow/reports.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace koow {

namespace {

constexpr int kSchemaVersion = 1;

using ordered_json = nlohmann::ordered_json;

// NaN is not representable in JSON; report it as null.
ordered_json json_number(double value) {
  if (std::isnan(value)) return nullptr;
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::string weights_csv(const Eigen::VectorXd& w) {
  std::ostringstream out;
  out << "row_index,weight,weight_normalized\n";
  const double total = w.sum();
  for (Eigen::Index i = 0; i < w.size(); ++i)
    out << i << ',' << format_double(w(i)) << ',' << format_double(w(i) / total) << '\n';
  return out.str();
}

std::string curve_csv(const CurveEstimate& curve) {
  std::ostringstream out;
  out << "a,theta_hat,lower,upper\n";
  for (Eigen::Index g = 0; g < curve.grid.size(); ++g) {
    out << format_double(curve.grid(g)) << ',' << format_double(curve.theta_hat(g)) << ',';
    if (curve.lower) out << format_double((*curve.lower)(g));
    out << ',';
    if (curve.upper) out << format_double((*curve.upper)(g));
    out << '\n';
  }
  return out.str();
}

std::string study_csv(const std::vector<StudyCell>& cells) {
  std::ostringstream out;
  out << "scenario,method,lambda,estimator,iab,irmse,failures\n";
  for (const auto& cell : cells) {
    out << cell.scenario << ',' << cell.method << ',';
    if (cell.method == "koow") out << format_double(cell.lambda);
    out << ',' << cell.estimator << ',';
    if (cell.defined) out << format_double(cell.iab);
    out << ',';
    if (cell.defined) out << format_double(cell.irmse);
    out << ',' << cell.failures << '\n';
  }
  return out.str();
}

std::string gram_csv(const Eigen::MatrixXd& K) {
  std::ostringstream out;
  for (Eigen::Index i = 0; i < K.rows(); ++i) {
    for (Eigen::Index j = 0; j < K.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(K(i, j));
    }
    out << '\n';
  }
  return out.str();
}

std::string solver_report_json(const WeightSolution& solution, double lambda) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["objective"] = json_number(solution.objective);
  j["delta_sq"] = json_number(solution.delta_sq);
  j["kkt_residual"] = json_number(solution.kkt_residual);
  j["iterations"] = solution.iterations;
  j["converged"] = solution.converged;
  j["lambda"] = lambda;
  return j.dump(2) + "\n";
}

std::string balance_report_json(const BalanceReport& report) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["rows"] = ordered_json::array();
  for (const auto& row : report.rows) {
    ordered_json r;
    r["name"] = row.name;
    r["abs_corr_unweighted"] = json_number(row.abs_corr_unweighted);
    r["abs_corr_weighted"] = json_number(row.abs_corr_weighted);
    r["defined"] = row.defined;
    j["rows"].push_back(std::move(r));
  }
  j["mean_abs_corr_unweighted"] = json_number(report.mean_abs_corr_unweighted);
  j["mean_abs_corr_weighted"] = json_number(report.mean_abs_corr_weighted);
  j["ess"] = json_number(report.ess);
  j["weight_summary"] = {{"min", json_number(report.weight_min)},
                         {"max", json_number(report.weight_max)},
                         {"cv", json_number(report.weight_cv)}};
  return j.dump(2) + "\n";
}

std::string balance_report_text(const BalanceReport& report) {
  std::size_t name_width = 10;
  for (const auto& row : report.rows) name_width = std::max(name_width, row.name.size());

  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-*s  %14s  %14s\n", static_cast<int>(name_width),
                "confounder", "|corr| unw", "|corr| wtd");
  out << line;
  for (const auto& row : report.rows) {
    if (row.defined) {
      std::snprintf(line, sizeof(line), "%-*s  %14.6f  %14.6f\n", static_cast<int>(name_width),
                    row.name.c_str(), row.abs_corr_unweighted, row.abs_corr_weighted);
    } else {
      std::snprintf(line, sizeof(line), "%-*s  %14s  %14s\n", static_cast<int>(name_width),
                    row.name.c_str(), "undefined", "undefined");
    }
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-*s  %14.6f  %14.6f\n", static_cast<int>(name_width), "mean",
                report.mean_abs_corr_unweighted, report.mean_abs_corr_weighted);
  out << line;
  std::snprintf(line, sizeof(line),
                "ess %.3f | weight min %.6g max %.6g cv %.6g\n", report.ess, report.weight_min,
                report.weight_max, report.weight_cv);
  out << line;
  return out.str();
}

std::string tune_result_json(const TuneResult& result) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["theta_x"] = result.params.theta_x;
  j["theta_a"] = result.params.theta_a;
  j["gamma"] = result.params.gamma;
  j["sigma_sq"] = result.params.sigma_sq;
  j["lml"] = json_number(result.lml);
  j["starts"] = result.starts;
  return j.dump(2) + "\n";
}

std::string bootstrap_info_json(const BootstrapInfo& info) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["B"] = info.B;
  j["excluded"] = info.excluded;
  j["seed"] = info.seed;
  j["retune"] = info.retune;
  return j.dump(2) + "\n";
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

}  // namespace koow
