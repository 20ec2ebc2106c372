#pragma once

#include "cogload/model.hpp"
#include "cogload/types.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace cogload::model {

/// Synthetic-sample budget per strategy. Jitter and mixing counts are per
/// class; interpolation and structured synthesis produce JustRight samples.
struct AugmentConfig {
  bool balance = true;
  std::size_t jitter_per_class = 60;
  std::size_t mix_per_class = 60;
  std::size_t interpolation_count = 120;
  std::size_t structured_count = 120;
  std::size_t cap_per_class = 380;
  double jitter_sigma = 0.05;
  double alpha_min = 0.45;
  double alpha_max = 0.55;
};

struct TrainingConfig {
  ModelConfig model;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;  // decoupled
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2 = 0.0;  // optional coupled penalty inside the loss
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 15;
  double validation_fraction = 0.10;
  std::array<double, kNumClasses> class_multipliers{1.5, 1.5, 1.7};
  bool augment = true;
  AugmentConfig augmentation;
  std::uint64_t seed = 42;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainingResult {
  ModelParams params;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  bool stopped_early = false;
  std::array<double, kNumClasses> class_weights{};
  std::vector<std::string> notes;
};

/// w_c = N / (3 N_c) * m_c.
std::array<double, kNumClasses> compute_class_weights(const std::array<std::size_t, kNumClasses>& counts,
                                                      const std::array<double, kNumClasses>& multipliers = {1.5, 1.5,
                                                                                                            1.7});

std::array<std::size_t, kNumClasses> class_counts(std::span<const FeatureSequence> data);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Per class, round(fraction * n_c) shuffled members go to validation.
SplitIndices stratified_split(std::span<const FeatureSequence> data, double fraction, std::uint64_t seed);

// Individual augmentation strategies, exposed for property tests.
FeatureSequence jitter(const FeatureSequence& seq, double sigma, std::mt19937_64& rng);
FeatureSequence mix_windows(const FeatureSequence& first_half, const FeatureSequence& second_half);
FeatureSequence interpolate(const FeatureSequence& too_easy, const FeatureSequence& too_difficult, double alpha);
/// pattern 0: (M w0, L w2, H w1, M w3); pattern 1: (M w3, H w2, L w1, M w0).
FeatureSequence structured_pattern(const FeatureSequence& medium, const FeatureSequence& low,
                                   const FeatureSequence& high, int pattern);

/// Trims each participant's per-class count to the median of that
/// participant's non-zero class counts, subsampling with the seed.
Dataset balance_by_participant(std::span<const FeatureSequence> data, std::mt19937_64& rng);

struct AugmentResult {
  Dataset data;  // balanced originals followed by synthetic samples
  std::array<std::size_t, kNumClasses> synthetic_per_class{};
  std::vector<std::string> log;
};

AugmentResult augment(std::span<const FeatureSequence> data, const AugmentConfig& config, std::uint64_t seed);

/// Optimizes on `train` and early-stops on `validation` (or on the training
/// metrics when validation is empty). Inputs must already be normalized.
TrainingResult fit(std::span<const FeatureSequence> train, std::span<const FeatureSequence> validation,
                   const TrainingConfig& config);

/// Stratified split, augmentation of the training part, then fit().
TrainingResult train(std::span<const FeatureSequence> data, const TrainingConfig& config);

}  // namespace cogload::model
