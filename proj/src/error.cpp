#include "liftlab/error.hpp"

namespace liftlab {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kScheduleLengthMismatch: return "SCHEDULE_LENGTH_MISMATCH";
    case ErrorCode::kScheduleBoundary: return "SCHEDULE_BOUNDARY";
    case ErrorCode::kScheduleMonotonicity: return "SCHEDULE_MONOTONICITY";
    case ErrorCode::kLevelOutOfRange: return "LEVEL_OUT_OF_RANGE";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kNonfiniteInput: return "NONFINITE_INPUT";
    case ErrorCode::kInvalidParams: return "INVALID_PARAMS";
    case ErrorCode::kFdStepOutOfRange: return "FD_STEP_OUT_OF_RANGE";
    case ErrorCode::kRankMismatch: return "RANK_MISMATCH";
    case ErrorCode::kSetTooLarge: return "SET_TOO_LARGE";
    case ErrorCode::kConfigError: return "CONFIG_ERROR";
    case ErrorCode::kIoError: return "IO_ERROR";
  }
  return "UNKNOWN_ERROR";
}

}  // namespace liftlab
