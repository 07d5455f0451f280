#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace koow {

/// Stable error codes surfaced by the CLI and carried by every koow::Error.
enum class ErrorCode {
  MissingColumn,
  NonNumericCell,
  TooFewRows,
  ConstantTreatment,
  DegenerateMoments,
  DimensionMismatch,
  NegativeLambda,
  NonFiniteObjective,
  TooLarge,
  MissingOutcome,
  AllStartsFailed,
  FactorizationFailure,
  RankDeficient,
  EmptyNeighborhood,
  InvalidSpan,
  ZeroVariance,
  TooManyFailures,
  GridMismatch,
  SingularDesign,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// True for errors that mean "bad input or usage" rather than a numerical failure.
/// The CLI maps the former to exit code 1 and the latter to exit code 2.
bool is_input_error(ErrorCode code) noexcept;

}  // namespace koow
