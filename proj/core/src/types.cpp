#include "cogload/types.hpp"

namespace cogload {

std::optional<LoadLabel> label_from_int(int code) {
  if (code < 0 || code >= kNumClasses) {
    return std::nullopt;
  }
  return static_cast<LoadLabel>(code);
}

std::string_view label_name(LoadLabel label) {
  switch (label) {
    case LoadLabel::TooEasy: return "TooEasy";
    case LoadLabel::JustRight: return "JustRight";
    case LoadLabel::TooDifficult: return "TooDifficult";
  }
  return "?";
}

const std::array<std::string_view, kFeatureCount>& feature_manifest() {
  static const std::array<std::string_view, kFeatureCount> names = {
      "blink_count",
      "blink_rate",
      "fixation_count",
      "fixation_duration_mean",
      "fixation_duration_std",
      "saccade_count",
      "saccade_amplitude_mean",
      "saccade_amplitude_std",
      "saccade_fixation_ratio",
      "saccade_peak_velocity",
      "saccade_peak_velocity_normalized",
      "saccade_accel_mean",
      "saccade_decel_mean",
      "saccade_velocity_variability",
      "saccade_accel_decel_ratio",
      "pupil_mean",
      "pupil_std",
      "pupil_range",
      "pupil_slope",
      "pupil_constriction_velocity",
      "pupil_dilation_velocity",
      "gsr_mean",
      "gsr_std",
      "gsr_slope",
      "bpm",
      "sdnn",
      "rmssd",
      "pnn50",
  };
  return names;
}

}  // namespace cogload
