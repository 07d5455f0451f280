#include "koow/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace koow {

namespace {

// One line of a CSV file split into fields. Handles quoted fields with
// embedded commas and doubled quotes; embedded newlines are not supported.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_cell(const std::string& cell, std::size_t file_line, const std::string& col) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  // tolerate surrounding spaces
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && *(end - 1) == ' ') --end;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw Error(ErrorCode::NonNumericCell,
                "cell at line " + std::to_string(file_line) + ", column '" + col +
                    "' is not a finite number: '" + cell + "'");
  }
  return value;
}

std::string format17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string quote_if_needed(const std::string& name) {
  if (name.find_first_of(",\"\n") == std::string::npos) return name;
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void validate_dataset(const Dataset& ds) {
  const Eigen::Index n = ds.A.size();
  if (n < 2) throw Error(ErrorCode::TooFewRows, "need at least 2 rows, got " + std::to_string(n));
  if (ds.X.rows() != n)
    throw Error(ErrorCode::DimensionMismatch, "X has " + std::to_string(ds.X.rows()) +
                                                  " rows but A has " + std::to_string(n));
  if (ds.X.cols() < 1) throw Error(ErrorCode::DimensionMismatch, "need at least one confounder");
  if (static_cast<Eigen::Index>(ds.confounder_names.size()) != ds.X.cols())
    throw Error(ErrorCode::DimensionMismatch, "confounder name count does not match X");
  if (!ds.X.allFinite() || !ds.A.allFinite())
    throw Error(ErrorCode::NonNumericCell, "non-finite entry in data");
  if (ds.A.minCoeff() == ds.A.maxCoeff())
    throw Error(ErrorCode::ConstantTreatment, "treatment column has zero sample variance");
  if (ds.Y) {
    if (ds.Y->size() != n)
      throw Error(ErrorCode::DimensionMismatch, "outcome length does not match n");
    if (!ds.Y->allFinite()) throw Error(ErrorCode::NonNumericCell, "non-finite entry in outcome");
  }
}

Dataset make_dataset(Eigen::MatrixXd X, Eigen::VectorXd A, std::optional<Eigen::VectorXd> Y,
                     std::vector<std::string> confounder_names, std::string treatment_name,
                     std::string outcome_name) {
  Dataset ds{std::move(X), std::move(A), std::move(Y), std::move(confounder_names),
             std::move(treatment_name), std::move(outcome_name)};
  validate_dataset(ds);
  return ds;
}

Dataset load_csv(const std::string& path, const std::string& treatment_col,
                 const std::optional<std::string>& outcome_col,
                 const std::vector<std::string>& confounder_cols) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  if (confounder_cols.empty())
    throw Error(ErrorCode::InvalidArgument, "no confounder columns selected");

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "empty file '" + path + "'");
  const std::vector<std::string> header = split_csv_line(strip_cr(line));

  auto column_index = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found in '" + path + "'");
    return static_cast<std::size_t>(it - header.begin());
  };

  const std::size_t a_idx = column_index(treatment_col);
  std::optional<std::size_t> y_idx;
  if (outcome_col) y_idx = column_index(*outcome_col);
  std::vector<std::size_t> x_idx;
  x_idx.reserve(confounder_cols.size());
  for (const auto& name : confounder_cols) x_idx.push_back(column_index(name));

  std::vector<double> a_vals, y_vals;
  std::vector<std::vector<double>> x_rows;
  std::size_t file_line = 1;
  while (std::getline(in, line)) {
    ++file_line;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw Error(ErrorCode::NonNumericCell, "line " + std::to_string(file_line) + " has " +
                                                 std::to_string(fields.size()) +
                                                 " fields, header has " +
                                                 std::to_string(header.size()));
    a_vals.push_back(parse_cell(fields[a_idx], file_line, treatment_col));
    if (y_idx) y_vals.push_back(parse_cell(fields[*y_idx], file_line, *outcome_col));
    std::vector<double> row(x_idx.size());
    for (std::size_t j = 0; j < x_idx.size(); ++j)
      row[j] = parse_cell(fields[x_idx[j]], file_line, confounder_cols[j]);
    x_rows.push_back(std::move(row));
  }

  const Eigen::Index n = static_cast<Eigen::Index>(a_vals.size());
  if (n < 2) throw Error(ErrorCode::TooFewRows, "need at least 2 data rows, got " + std::to_string(n));
  Eigen::MatrixXd X(n, static_cast<Eigen::Index>(x_idx.size()));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = x_rows[i][j];
  Eigen::VectorXd A = Eigen::Map<Eigen::VectorXd>(a_vals.data(), n);
  std::optional<Eigen::VectorXd> Y;
  if (y_idx) Y = Eigen::Map<Eigen::VectorXd>(y_vals.data(), n);

  return make_dataset(std::move(X), std::move(A), std::move(Y), confounder_cols, treatment_col,
                      outcome_col.value_or(""));
}

void write_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out << quote_if_needed(ds.treatment_name);
  for (const auto& name : ds.confounder_names) out << ',' << quote_if_needed(name);
  if (ds.Y) out << ',' << quote_if_needed(ds.outcome_name.empty() ? "y" : ds.outcome_name);
  out << '\n';
  for (Eigen::Index i = 0; i < ds.n(); ++i) {
    out << format17(ds.A(i));
    for (Eigen::Index j = 0; j < ds.p(); ++j) out << ',' << format17(ds.X(i, j));
    if (ds.Y) out << ',' << format17((*ds.Y)(i));
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path + "'");
}

}  // namespace koow
