#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace feet {

enum class ErrorCode {
  MalformedRecord,
  DimMismatch,
  DuplicateId,
  NonFiniteValue,
  InvalidArgument,
  Io,
  EmptyClass,
  InsufficientExamples,
  SingleClassTrain,
  NonFiniteLoss,
  EmptyPredictions,
  DegenerateLabels,
  NoPositives,
  AllResamplesUndefined,
  MetricMismatch,
  IdMismatch,
  NoFrozenBaseline,
  ValidationFailed,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InsufficientExamples: return "InsufficientExamples";
    case ErrorCode::SingleClassTrain: return "SingleClassTrain";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyPredictions: return "EmptyPredictions";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::AllResamplesUndefined: return "AllResamplesUndefined";
    case ErrorCode::MetricMismatch: return "MetricMismatch";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::NoFrozenBaseline: return "NoFrozenBaseline";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
  }
  return "Unknown";
}

// All harness faults surface as Error; the code is the stable part, the
// message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class Severity { Warning, Error };

// Non-fatal observations (validation results, sampler shortfalls, degenerate
// metric cases). Findings are data; callers decide whether to abort.
struct Finding {
  Severity severity = Severity::Warning;
  std::string message;

  bool operator==(const Finding&) const = default;
};

inline Finding warning(std::string message) { return {Severity::Warning, std::move(message)}; }
inline Finding error_finding(std::string message) { return {Severity::Error, std::move(message)}; }

}  // namespace feet
