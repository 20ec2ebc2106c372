#pragma once

#include "cogload/types.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

/// Oculometric feature extraction for one analysis window.
///
/// Pipeline: detect_and_interpolate_blinks -> preprocess_gaze ->
/// compute_kinematics -> segment_movements -> extract_gaze_features.
namespace cogload::gaze {

inline constexpr int kSavgolWindow = 11;
inline constexpr int kSavgolOrder = 2;
inline constexpr double kBlinkOpennessThreshold = 0.70;
inline constexpr double kBlinkRollingSeconds = 0.100;
inline constexpr double kBlinkMarginSeconds = 0.050;
inline constexpr double kBlinkPupilZ = 2.5;
inline constexpr double kPupilCutoffHz = 4.0;
inline constexpr int kPupilFilterOrder = 2;
inline constexpr int kHmmMaxIterations = 30;
inline constexpr double kHmmTolerance = 1e-6;
inline constexpr std::size_t kHmmMinSamples = 20;

struct SmoothedGazeSeries {
  std::vector<double> timestamp;
  std::vector<Vec3> dir;
  std::vector<double> pupil;
  std::size_t size() const { return timestamp.size(); }
};

/// Averages both eyes, renormalizes, and smooths each direction component
/// with an 11-sample quadratic Savitzky-Golay filter (renormalized after).
SmoothedGazeSeries preprocess_gaze(std::span<const GazeSample> raw);

enum class BlinkCause { OpennessThreshold, PupilDropout };

struct BlinkEvent {
  std::size_t start_index = 0;  // inclusive, margins applied
  std::size_t end_index = 0;    // inclusive
  BlinkCause cause = BlinkCause::OpennessThreshold;
  bool operator==(const BlinkEvent&) const = default;
};

struct BlinkResult {
  GazeSeries cleaned;
  std::vector<BlinkEvent> events;
};

/// Samples margin added to each side of a blink at the given rate
/// (fractional samples round outward).
std::size_t blink_margin_samples(double sample_rate);

BlinkResult detect_and_interpolate_blinks(std::span<const GazeSample> raw);

struct KinematicsSeries {
  std::vector<double> dx;
  std::vector<double> dy;
  std::vector<double> velocity;      // n - 1 entries
  std::vector<double> acceleration;  // n - 2 entries
  double sampling_rate = 0.0;
};

KinematicsSeries compute_kinematics(const SmoothedGazeSeries& smoothed);

/// Two-state 1-D Gaussian hidden Markov model.
struct GaussianHmm {
  std::array<double, 2> mean{};
  std::array<double, 2> var{};
  std::array<std::array<double, 2>, 2> transition{};
  std::array<double, 2> initial{};
};

/// Baum-Welch fit, median-split initialization.
GaussianHmm fit_hmm(std::span<const double> obs, int max_iterations = kHmmMaxIterations,
                    double tolerance = kHmmTolerance);

/// Most likely state path (log-space Viterbi).
std::vector<int> viterbi(const GaussianHmm& hmm, std::span<const double> obs);

struct MovementRun {
  int state = 0;  // 0 fixation, 1 saccade
  std::size_t start = 0;  // velocity index, inclusive
  std::size_t end = 0;    // inclusive
};

struct MovementSegmentation {
  std::vector<int> state_per_sample;
  GaussianHmm hmm;
  bool degenerate = false;
  std::vector<MovementRun> runs() const;
};

MovementSegmentation segment_movements(const KinematicsSeries& kin);

struct PupilMetrics {
  double mean = 0.0;
  double std = 0.0;
  double range = 0.0;
  double slope = 0.0;
  double constriction_velocity = 0.0;
  double dilation_velocity = 0.0;
};

/// Applies the order-2 4 Hz zero-phase low-pass before measuring.
PupilMetrics extract_pupil_metrics(std::span<const double> timestamps, std::span<const double> pupil);

/// The low-pass stage of extract_pupil_metrics, exposed for testing.
std::vector<double> filter_pupil(std::span<const double> pupil, double sample_rate);

struct GazeFeatureSet {
  double blink_count = 0.0;
  double blink_rate = 0.0;
  double fixation_count = 0.0;
  double fixation_duration_mean = 0.0;
  double fixation_duration_std = 0.0;
  double saccade_count = 0.0;
  double saccade_amplitude_mean = 0.0;
  double saccade_amplitude_std = 0.0;
  double saccade_fixation_ratio = 0.0;
  double saccade_peak_velocity = 0.0;
  double saccade_peak_velocity_normalized = 0.0;
  double saccade_accel_mean = 0.0;
  double saccade_decel_mean = 0.0;
  double saccade_velocity_variability = 0.0;
  double saccade_accel_decel_ratio = 0.0;
  double pupil_mean = 0.0;
  double pupil_std = 0.0;
  double pupil_range = 0.0;
  double pupil_slope = 0.0;
  double pupil_constriction_velocity = 0.0;
  double pupil_dilation_velocity = 0.0;

  std::array<double, kGazeFeatureCount> to_array() const;
};

GazeFeatureSet extract_gaze_features(const SmoothedGazeSeries& cleaned, std::span<const BlinkEvent> events,
                                     const MovementSegmentation& segmentation, const KinematicsSeries& kin,
                                     double window_seconds);

/// Full chain over a raw window.
GazeFeatureSet gaze_features_for_window(std::span<const GazeSample> raw, double window_seconds);

}  // namespace cogload::gaze
