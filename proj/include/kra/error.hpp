#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kra {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionOverflow,
  kColumnMismatch,
  kShapeMismatch,
  kConvergenceFailure,
  kZeroMatrix,
  kInvalidConfig,
  kUnreachable,
  kNonFiniteGradient,
  kDegenerateCovariance,
  kIoError,
  kFormatError,
  kCropOutOfBounds,
  kMissingBaseline,
  kDegenerateBaseline,
  kHypothesisViolation,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (CLI exit codes, tests) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace kra
