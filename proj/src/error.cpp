#include "kra/error.hpp"

namespace kra {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionOverflow: return "DimensionOverflow";
    case ErrorCode::kColumnMismatch: return "ColumnMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::kZeroMatrix: return "ZeroMatrix";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kUnreachable: return "Unreachable";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kDegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kCropOutOfBounds: return "CropOutOfBounds";
    case ErrorCode::kMissingBaseline: return "MissingBaseline";
    case ErrorCode::kDegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::kHypothesisViolation: return "HypothesisViolation";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace kra
