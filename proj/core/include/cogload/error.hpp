#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cogload {

enum class ErrorCode {
  // gaze-features
  SeriesTooShort,
  NonMonotonicTimestamps,
  AllSamplesBlinking,
  EmptyWindow,
  // physio-features
  NoBeatsDetected,
  InsufficientBeats,
  AllMissing,
  // feature-windowing
  IncompleteLevel,
  InsufficientCoverage,
  MissingModality,
  EmptyTrainingSet,
  // load-classifier
  ShapeMismatch,
  NonFiniteLoss,
  EmptyClass,
  InsufficientDonors,
  TooFewParticipants,
  // adaptive-controller
  UnknownSpawnReference,
  RaterFailure,
  // stream-hub / replay
  UnknownStream,
  SchemaViolation,
  ModelNotLoaded,
  // evaluation
  LengthMismatch,
  ClassAbsent,
  EmptyCondition,
  IoFailure,
  // cli
  UsageError,
};

std::string_view to_string(ErrorCode code);

/// Domain error carrying a stable code; the message holds module context.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace cogload
