#pragma once

#include <stdexcept>
#include <string>

namespace liftlab {

enum class ErrorCode {
  kScheduleLengthMismatch,
  kScheduleBoundary,
  kScheduleMonotonicity,
  kLevelOutOfRange,
  kDimensionMismatch,
  kNonfiniteInput,
  kInvalidParams,
  kFdStepOutOfRange,
  kRankMismatch,
  kSetTooLarge,
  kConfigError,
  kIoError,
};

const char* error_code_name(ErrorCode code);

// All library errors throw this; the CLI maps codes onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace liftlab
