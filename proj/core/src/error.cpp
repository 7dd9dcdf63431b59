#include "beamshift/error.hpp"

namespace beamshift {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kDegeneratePoint: return "DegeneratePoint";
    case ErrorCode::kEmptyCloud: return "EmptyCloud";
    case ErrorCode::kTooFewDistinctZeniths: return "TooFewDistinctZeniths";
    case ErrorCode::kSingleBeam: return "SingleBeam";
    case ErrorCode::kEmptyBeam: return "EmptyBeam";
    case ErrorCode::kZeroNormFeature: return "ZeroNormFeature";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kDegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMalformedFile: return "MalformedFile";
    case ErrorCode::kSchemaViolation: return "SchemaViolation";
    case ErrorCode::kIo: return "IoError";
  }
  return "UnknownError";
}

}  // namespace beamshift
