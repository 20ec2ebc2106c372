#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cogload {

/// Perceived-difficulty class. Integer codes are stable in every file format.
enum class LoadLabel : int { TooEasy = 0, JustRight = 1, TooDifficult = 2 };

inline constexpr int kNumClasses = 3;

constexpr int to_int(LoadLabel label) { return static_cast<int>(label); }
std::optional<LoadLabel> label_from_int(int code);
std::string_view label_name(LoadLabel label);

using Vec3 = std::array<double, 3>;

/// One binocular eye-tracker reading (nominally 90 Hz).
struct GazeSample {
  double timestamp = 0.0;  // seconds
  Vec3 dir_left{0.0, 0.0, 1.0};
  Vec3 dir_right{0.0, 0.0, 1.0};
  double pupil_left = 0.0;   // mm
  double pupil_right = 0.0;  // mm
  double openness_left = 1.0;
  double openness_right = 1.0;
  std::optional<double> convergence_distance;  // m
  bool valid_left = true;
  bool valid_right = true;
};

/// One wrist-sensor reading (nominally 51 Hz). Missing GSR is NaN.
struct PhysioSample {
  double timestamp = 0.0;
  double ppg = 0.0;
  double gsr = 0.0;  // microsiemens
};

using GazeSeries = std::vector<GazeSample>;
using PhysioSeries = std::vector<PhysioSample>;

inline constexpr double kGazeRateHz = 90.0;
inline constexpr double kPhysioRateHz = 51.0;

inline constexpr std::size_t kGazeFeatureCount = 21;
inline constexpr std::size_t kPhysioFeatureCount = 7;
inline constexpr std::size_t kFeatureCount = kGazeFeatureCount + kPhysioFeatureCount;
inline constexpr std::size_t kWindowsPerLevel = 4;
inline constexpr double kWindowSeconds = 15.0;
inline constexpr double kLevelSeconds = 60.0;

using FeatureVector = std::array<double, kFeatureCount>;

/// Canonical 28-name manifest; index i always names the same quantity.
const std::array<std::string_view, kFeatureCount>& feature_manifest();

struct FeatureWindow {
  int index = 0;
  double span_start = 0.0;
  double span_end = 0.0;
  FeatureVector features{};
};

struct Condition {
  std::string control;  // "model" | "self"
  std::string task;     // "single" | "dual"
  bool operator==(const Condition&) const = default;
};

/// Four consecutive 15 s windows of one 60 s level.
struct FeatureSequence {
  std::string participant_id;
  int level_id = 0;
  Condition condition;
  std::optional<LoadLabel> label;
  std::array<FeatureWindow, kWindowsPerLevel> windows{};
};

using Dataset = std::vector<FeatureSequence>;

}  // namespace cogload
