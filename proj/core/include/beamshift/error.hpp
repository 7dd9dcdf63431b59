#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace beamshift {

enum class ErrorCode {
  kDegeneratePoint,
  kEmptyCloud,
  kTooFewDistinctZeniths,
  kSingleBeam,
  kEmptyBeam,
  kZeroNormFeature,
  kDimensionMismatch,
  kLengthMismatch,
  kDegenerateDenominator,
  kInvalidArgument,
  kMalformedFile,
  kSchemaViolation,
  kIo,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every recoverable failure in the library is reported through this type.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace beamshift
