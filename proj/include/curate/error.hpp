#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace curate {

enum class ErrorCode {
  DimensionMismatch,
  ZeroNormVector,
  NonFiniteValue,
  EmptyBatch,
  NonFiniteLoss,
  EmbedderFailure,
  MalformedTemplate,
  SurrogateUnavailable,
  UnparseableResponse,
  InsufficientSeeds,
  InsufficientData,
  ConvergenceFailure,
  EmptyRefusalSet,
  InvalidArgument,
  LengthMismatch,
  UpstreamTimeout,
  UpstreamFailure,
  StoreFull,
  IoError,
  ChecksumError,
  VersionError,
  ParseError,
  ValidationError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroNormVector: return "ZeroNormVector";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmbedderFailure: return "EmbedderFailure";
    case ErrorCode::MalformedTemplate: return "MalformedTemplate";
    case ErrorCode::SurrogateUnavailable: return "SurrogateUnavailable";
    case ErrorCode::UnparseableResponse: return "UnparseableResponse";
    case ErrorCode::InsufficientSeeds: return "InsufficientSeeds";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::EmptyRefusalSet: return "EmptyRefusalSet";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UpstreamTimeout: return "UpstreamTimeout";
    case ErrorCode::UpstreamFailure: return "UpstreamFailure";
    case ErrorCode::StoreFull: return "StoreFull";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ChecksumError: return "ChecksumError";
    case ErrorCode::VersionError: return "VersionError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
  }
  return "Unknown";
}

// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace curate
