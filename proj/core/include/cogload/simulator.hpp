#pragma once

#include "cogload/controller.hpp"
#include "cogload/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace cogload::sim {

/// Per unit of load gap. Positive gap means more load than the participant
/// can comfortably handle.
struct SignalGains {
  double pupil_mm = 0.40;            // additive
  double fixation_duration = 0.30;   // log-multiplier, fixations shorten
  double saccade_amplitude = 0.10;   // log-multiplier
  double blink_rate = 0.30;          // log-multiplier, blinks become rarer
  double heart_rate_bpm = 8.0;       // additive
  double gsr_us = 0.80;              // additive
};

struct SimProfile {
  std::string id;
  double skill = 2.0;   // delay (s) at which the expected raw score is 0.5
  double width = 0.35;  // logistic width in seconds
  double performance_noise = 0.03;
  double dual_task_penalty = 0.30;  // dual task shifts skill towards easier delays
  double arithmetic_accuracy = 0.9;
  SignalGains gains;
  double baseline_pupil_mm = 3.5;
  double baseline_fixation_s = 0.30;
  double baseline_saccade_amplitude = 0.12;
  double baseline_blink_per_min = 15.0;
  double baseline_heart_rate = 70.0;
  double baseline_gsr_us = 4.0;
  double rr_jitter_ms = 20.0;
  double noise_scale = 1.0;  // scales every per-level and per-sample noise term
  double gap_spread = 0.20;  // std of the load gap around its band centre
  std::uint64_t seed = 0;
};

struct PopulationConfig {
  double skill_mean = 2.0;
  double skill_sd = 0.25;
  double baseline_spread = 1.0;  // scales between-participant baseline variation
  double noise_scale = 1.0;
  double gap_spread = 0.20;
};

/// Deterministic population member `index` for a run seed.
SimProfile make_profile(int index, std::uint64_t seed, const PopulationConfig& population = {});

/// Load-gap band centres: TooEasy -1.5, JustRight 0, TooDifficult +1.5.
double load_gap_center(LoadLabel label);

/// Generator parameters before any noise; used to check channel directions.
struct SignalParameters {
  double pupil_mean_mm = 0.0;
  double fixation_duration_s = 0.0;
  double saccade_amplitude = 0.0;
  double blink_per_min = 0.0;
  double heart_rate_bpm = 0.0;
  double mean_rr_ms = 0.0;
  double gsr_level_us = 0.0;
};

SignalParameters signal_parameters(const SimProfile& profile, double load_gap);

/// Sensor clocks run ahead of the session clock by these constant offsets.
struct ClockOffsets {
  double gaze = 0.0;
  double physio = 0.0;
};

struct GeneratedSignals {
  GazeSeries gaze;
  PhysioSeries physio;
};

/// Gaze at 90 Hz and physio at 51 Hz covering [start, start + duration) on the
/// session clock; timestamps carry the given offsets.
GeneratedSignals generate_signals(const SimProfile& profile, double load_gap, double duration, std::uint64_t seed,
                                  double start_time = 0.0, ClockOffsets offsets = {});

/// Closed-form expected raw score: logistic((delay - skill) / width).
double expected_performance(double delay, const SimProfile& profile, control::TaskType task);

/// Expected score plus seeded Gaussian noise, clipped to [0, 1].
double simulate_performance(double delay, const SimProfile& profile, control::TaskType task, std::uint64_t seed);

struct RatingPolicy {
  enum class Kind { OracleWeighted, BiasedRaw };
  Kind kind = Kind::OracleWeighted;
  double low = 1.05;   // below: TooDifficult
  double high = 1.75;  // at or above: TooEasy

  static RatingPolicy oracle_weighted() { return {Kind::OracleWeighted, 1.05, 1.75}; }
  static RatingPolicy biased_raw() { return {Kind::BiasedRaw, 0.60, 0.95}; }
};

LoadLabel simulate_rating(const control::LevelResult& result, const RatingPolicy& policy);

/// Mixes seeds into an independent stream seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

/// Plays levels for a simulated participant. The ground-truth label comes
/// from the oracle policy applied to the realized score; when signals are
/// enabled the level's raw 4x28 features are attached to the outcome.
class SimulatedExecutor : public control::LevelExecutor {
public:
  SimulatedExecutor(SimProfile profile, control::TaskType task, std::uint64_t seed, bool with_signals);
  control::LevelOutcome execute(const control::LevelPlan& plan) override;
  const std::vector<LoadLabel>& true_labels() const { return true_labels_; }

private:
  SimProfile profile_;
  control::TaskType task_;
  std::uint64_t seed_;
  bool with_signals_;
  std::vector<LoadLabel> true_labels_;
};

class PolicyRater : public control::Rater {
public:
  PolicyRater(RatingPolicy policy, control::RatingSource source) : policy_(policy), source_(source) {}
  control::Rating rate(const control::RatingContext& context) override;
  control::RatingSource source() const override { return source_; }

private:
  RatingPolicy policy_;
  control::RatingSource source_;
};

/// Labelled raw feature sequences: `levels_per_class` levels of each class per
/// profile, with the load gap drawn around the class band centre.
Dataset generate_dataset(const std::vector<SimProfile>& profiles, int levels_per_class, std::uint64_t seed);

// Recorded sessions in the hub wire format (one JSON message per line).
struct RecordingConfig {
  SimProfile profile;
  control::TaskType task = control::TaskType::Single;
  int levels = 8;
  double break_seconds = 5.0;
  ClockOffsets offsets{0.050, -0.030};
  std::uint64_t seed = 0;
};

/// Writes hello-free message lines ordered by send time. Each sensor stream
/// carries echo markers for level events on its own clock.
void write_recording(std::ostream& out, const RecordingConfig& config);

}  // namespace cogload::sim
