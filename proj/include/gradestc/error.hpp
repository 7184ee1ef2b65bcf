#pragma once

#include <stdexcept>
#include <string>

namespace gradestc {

enum class ErrorCode {
  NonFinite,
  RankRequestTooLarge,
  RankTooLarge,
  ShapeMismatch,
  DimensionMismatch,
  ModeChangeAfterStart,
  IndexOutOfRange,
  UninitializedStream,
  LengthMismatch,
  SequenceMismatch,
  MalformedPayload,
  TooFewSamples,
  DivergenceDetected,
  InvalidArgument,
  BadConfig,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::RankRequestTooLarge: return "RankRequestTooLarge";
    case ErrorCode::RankTooLarge: return "RankTooLarge";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ModeChangeAfterStart: return "ModeChangeAfterStart";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::UninitializedStream: return "UninitializedStream";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::SequenceMismatch: return "SequenceMismatch";
    case ErrorCode::MalformedPayload: return "MalformedPayload";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace gradestc
