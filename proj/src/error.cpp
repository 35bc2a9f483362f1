#include "penlin/error.hpp"

namespace penlin {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPsd: return "NotPsd";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::UnattainedInfimum: return "UnattainedInfimum";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::NonpositiveTau: return "NonpositiveTau";
    case ErrorCode::NoUniqueStationary: return "NoUniqueStationary";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::RankDeficientC: return "RankDeficientC";
    case ErrorCode::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace penlin
