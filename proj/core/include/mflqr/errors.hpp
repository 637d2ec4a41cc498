#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mflqr {

/// Failure classes raised by the library. Each maps onto one process exit
/// code of the command-line tool (see exit_code()).
enum class ErrorCode {
  kDimensionMismatch,
  kIndefiniteWeight,
  kNotStabilizing,
  kUnstable,
  kSingularSystem,
  kEigenFailure,
  kSingularUps,
  kSingular22Block,
  kSingular11Block,
  kMaxIterExceeded,
  kDivergence,
  kInvalidHorizon,
  kInsufficientRollouts,
  kNonFiniteState,
  kRankDeficient,
  kRankDeficientRegressor,
  kSingularData,
  kIllConditioned,
  kInvalidArgument,
  kParseError,
  kSchemaError,
  kInvariantError,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Exit code of the command-line tool for an error class:
/// 1 parse/schema/io, 2 invariant, 3 not stabilizing, 4 solver,
/// 5 divergence, 6 iteration limit.
int exit_code(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace mflqr
