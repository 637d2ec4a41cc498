#include "mflqr/errors.hpp"

namespace mflqr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kIndefiniteWeight: return "IndefiniteWeight";
    case ErrorCode::kNotStabilizing: return "NotStabilizing";
    case ErrorCode::kUnstable: return "Unstable";
    case ErrorCode::kSingularSystem: return "SingularSystem";
    case ErrorCode::kEigenFailure: return "EigenFailure";
    case ErrorCode::kSingularUps: return "SingularUps";
    case ErrorCode::kSingular22Block: return "Singular22Block";
    case ErrorCode::kSingular11Block: return "Singular11Block";
    case ErrorCode::kMaxIterExceeded: return "MaxIterExceeded";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kInvalidHorizon: return "InvalidHorizon";
    case ErrorCode::kInsufficientRollouts: return "InsufficientRollouts";
    case ErrorCode::kNonFiniteState: return "NonFiniteState";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kRankDeficientRegressor: return "RankDeficientRegressor";
    case ErrorCode::kSingularData: return "SingularData";
    case ErrorCode::kIllConditioned: return "IllConditioned";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kInvariantError: return "InvariantError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParseError:
    case ErrorCode::kSchemaError:
    case ErrorCode::kIoError:
      return 1;
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kIndefiniteWeight:
    case ErrorCode::kInvariantError:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidHorizon:
    case ErrorCode::kInsufficientRollouts:
      return 2;
    case ErrorCode::kNotStabilizing:
      return 3;
    case ErrorCode::kUnstable:
    case ErrorCode::kSingularSystem:
    case ErrorCode::kEigenFailure:
    case ErrorCode::kSingularUps:
    case ErrorCode::kSingular22Block:
    case ErrorCode::kSingular11Block:
    case ErrorCode::kRankDeficient:
    case ErrorCode::kRankDeficientRegressor:
    case ErrorCode::kSingularData:
    case ErrorCode::kIllConditioned:
      return 4;
    case ErrorCode::kDivergence:
    case ErrorCode::kNonFiniteState:
      return 5;
    case ErrorCode::kMaxIterExceeded:
      return 6;
  }
  return 4;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace mflqr
