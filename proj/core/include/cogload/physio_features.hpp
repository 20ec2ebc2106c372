#pragma once

#include "cogload/types.hpp"

#include <array>
#include <span>
#include <vector>

namespace cogload::physio {

inline constexpr int kPpgFilterOrder = 2;
inline constexpr double kPpgCutoffHz = 3.0;
inline constexpr int kPeakEnhancePasses = 2;
inline constexpr double kEnhanceScale = 1024.0;
inline constexpr double kBeatWindowSeconds = 0.75;
inline constexpr double kMinRrMs = 250.0;
inline constexpr double kMaxRrMs = 2000.0;
inline constexpr double kRrMedianTolerance = 0.30;

/// Zero-phase 3 Hz low-pass only (the linear stage of filter_ppg).
std::vector<double> lowpass_ppg(std::span<const double> ppg, double sample_rate);

/// Rescale to [0, 1024]; a flat series is returned unchanged.
std::vector<double> scale_to_range(std::span<const double> x);

/// Low-pass followed by two square-and-rescale peak-enhancement passes.
std::vector<double> filter_ppg(std::span<const double> ppg, double sample_rate);

/// Inter-beat intervals in milliseconds.
struct RrIntervals {
  std::vector<double> ms;
  std::vector<double> peak_times;  // seconds relative to the first sample
};

/// Peak detection against a moving-average threshold raised by a swept
/// percentage; the candidate with the most regular RR series wins. Intervals
/// outside [250, 2000] ms or more than 30% from the rolling median are dropped.
RrIntervals detect_beats(std::span<const double> filtered, double sample_rate);

struct HrvMetrics {
  double bpm = 0.0;
  double sdnn = 0.0;
  double rmssd = 0.0;
  double pnn50 = 0.0;
};

HrvMetrics compute_hrv(std::span<const double> rr_ms);

struct GsrMetrics {
  double mean = 0.0;
  double std = 0.0;
  double slope = 0.0;
};

/// Forward-fill then backward-fill of NaN gaps before measuring.
std::vector<double> fill_gaps(std::span<const double> gsr);

GsrMetrics compute_gsr_metrics(std::span<const double> timestamps, std::span<const double> gsr);

struct PhysioFeatureSet {
  double gsr_mean = 0.0;
  double gsr_std = 0.0;
  double gsr_slope = 0.0;
  double bpm = 0.0;
  double sdnn = 0.0;
  double rmssd = 0.0;
  double pnn50 = 0.0;

  std::array<double, kPhysioFeatureCount> to_array() const;
};

/// Full chain over a raw window.
PhysioFeatureSet physio_features_for_window(std::span<const PhysioSample> raw);

}  // namespace cogload::physio
