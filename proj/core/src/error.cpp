#include "cogload/error.hpp"

namespace cogload {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::AllSamplesBlinking: return "AllSamplesBlinking";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::NoBeatsDetected: return "NoBeatsDetected";
    case ErrorCode::InsufficientBeats: return "InsufficientBeats";
    case ErrorCode::AllMissing: return "AllMissing";
    case ErrorCode::IncompleteLevel: return "IncompleteLevel";
    case ErrorCode::InsufficientCoverage: return "InsufficientCoverage";
    case ErrorCode::MissingModality: return "MissingModality";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InsufficientDonors: return "InsufficientDonors";
    case ErrorCode::TooFewParticipants: return "TooFewParticipants";
    case ErrorCode::UnknownSpawnReference: return "UnknownSpawnReference";
    case ErrorCode::RaterFailure: return "RaterFailure";
    case ErrorCode::UnknownStream: return "UnknownStream";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::ModelNotLoaded: return "ModelNotLoaded";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ClassAbsent: return "ClassAbsent";
    case ErrorCode::EmptyCondition: return "EmptyCondition";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "Unknown";
}

}  // namespace cogload
