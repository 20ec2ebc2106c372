#pragma once

#include "cogload/types.hpp"

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace cogload::windowing {

inline constexpr double kMinCoverage = 0.80;
inline constexpr double kStdGuard = 1e-8;
// Boundary snapping for relative timestamps produced by floating arithmetic.
inline constexpr double kBoundaryEpsilon = 1e-9;

struct LevelSpan {
  double start = 0.0;
  double end = 0.0;
};

struct WindowPair {
  int index = 0;
  double span_start = 0.0;
  double span_end = 0.0;
  GazeSeries gaze;
  PhysioSeries physio;
};

/// Window index of a timestamp relative to the level start, or -1 outside [0, 60).
int window_index(double relative_seconds);

/// Cuts a level into four half-open 15 s windows by timestamp.
std::array<WindowPair, kWindowsPerLevel> slice_level(std::span<const GazeSample> gaze,
                                                     std::span<const PhysioSample> physio, LevelSpan level);

FeatureWindow build_feature_window(const WindowPair& pair);

/// slice_level followed by build_feature_window for each window.
FeatureSequence build_feature_sequence(std::span<const GazeSample> gaze, std::span<const PhysioSample> physio,
                                       LevelSpan level);

enum class NormalizationScope { Global, PerParticipant };

struct NormalizationStats {
  FeatureVector mean{};
  FeatureVector std{};
};

/// z-score normalizer. Per-participant stats take precedence when present.
struct Normalizer {
  NormalizationScope scope = NormalizationScope::Global;
  NormalizationStats global;
  std::map<std::string, NormalizationStats> per_participant;

  FeatureSequence apply(const FeatureSequence& seq) const;
  Dataset apply(const Dataset& data) const;
  const NormalizationStats& stats_for(const std::string& participant_id) const;
};

NormalizationStats fit_stats(std::span<const FeatureSequence> sequences);

/// Fits on training data. Throws if any sequence belongs to a participant in
/// `held_out` (fold-disjointness check).
Normalizer fit_normalizer(std::span<const FeatureSequence> training, NormalizationScope scope,
                          std::span<const std::string> held_out = {});

/// Per-participant recalibration from the first `levels` sequences of a session.
NormalizationStats calibrate_participant(std::span<const FeatureSequence> session, std::size_t levels = 2);

}  // namespace cogload::windowing
