#include "koow/error.hpp"

namespace koow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::ConstantTreatment: return "ConstantTreatment";
    case ErrorCode::DegenerateMoments: return "DegenerateMoments";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NegativeLambda: return "NegativeLambda";
    case ErrorCode::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::MissingOutcome: return "MissingOutcome";
    case ErrorCode::AllStartsFailed: return "AllStartsFailed";
    case ErrorCode::FactorizationFailure: return "FactorizationFailure";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::EmptyNeighborhood: return "EmptyNeighborhood";
    case ErrorCode::InvalidSpan: return "InvalidSpan";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

bool is_input_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonFiniteObjective:
    case ErrorCode::AllStartsFailed:
    case ErrorCode::FactorizationFailure:
    case ErrorCode::TooManyFailures:
    case ErrorCode::DegenerateMoments:
    case ErrorCode::SingularDesign:
      return false;
    default:
      return true;
  }
}

}  // namespace koow
