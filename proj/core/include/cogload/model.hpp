#pragma once

#include "cogload/types.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cogload::model {

struct ModelConfig {
  int input_dim = static_cast<int>(kFeatureCount);
  int seq_len = static_cast<int>(kWindowsPerLevel);
  int hidden = 64;       // per direction
  int head_hidden = 64;  // width of the first dense layer
  double dropout = 0.3;
  int classes = kNumClasses;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Parameter tensors in their declared (serialization) order. LSTM gate rows
// are stacked as input, forget, cell, output.
enum BlockId : int {
  kFwdW,   // 4H x F
  kFwdU,   // 4H x H
  kFwdB,   // 4H x 1
  kBwdW,
  kBwdU,
  kBwdB,
  kAttnW,  // 1 x 2H
  kAttnB,  // 1 x 1
  kHeadW1, // D x 2H
  kHeadB1, // D x 1
  kHeadW2, // C x D
  kHeadB2, // C x 1
  kBlockCount
};

struct ParamBlock {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

std::vector<ParamBlock> param_layout(const ModelConfig& config);

/// All learnable weights stored contiguously; blocks are column-major views.
/// Gradients use the same type so optimizers can work on the flat vector.
class ModelParams {
public:
  ModelParams() = default;
  explicit ModelParams(const ModelConfig& config);  // zero-initialized

  /// Uniform in [-1/sqrt(H), 1/sqrt(H)] for every tensor.
  static ModelParams initialize(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<ParamBlock>& blocks() const { return blocks_; }

  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  Eigen::Map<Eigen::MatrixXd> block(BlockId id);
  Eigen::Map<const Eigen::MatrixXd> block(BlockId id) const;

  bool all_finite() const { return values_.allFinite(); }

private:
  ModelConfig config_;
  std::vector<ParamBlock> blocks_;
  Eigen::VectorXd values_;
};

struct ForwardTrace {
  std::vector<Eigen::VectorXd> hidden;  // T entries of 2H (forward ++ backward)
  std::vector<double> attention;        // T weights on the simplex
  Eigen::VectorXd context;              // 2H
  std::array<double, kNumClasses> logits{};
  std::array<double, kNumClasses> probabilities{};
};

struct Prediction {
  LoadLabel label = LoadLabel::JustRight;
  std::array<double, kNumClasses> probabilities{};
  std::optional<ForwardTrace> trace;
};

/// Time-major batch: x[t] is F x B, one column per sequence.
struct Batch {
  std::vector<Eigen::MatrixXd> x;
  std::vector<int> labels;
  int size() const { return x.empty() ? 0 : static_cast<int>(x.front().cols()); }
};

Batch make_batch(std::span<const FeatureSequence> data);
Batch make_batch(std::span<const FeatureSequence> data, std::span<const std::size_t> indices);

/// Multiplicative masks (entries 0 or 1/(1-p)) applied after the attention
/// context and after the head's rectifier. Empty masks mean no dropout.
struct DropoutMasks {
  Eigen::MatrixXd context;  // 2H x B
  Eigen::MatrixXd hidden;   // D x B
  bool empty() const { return context.size() == 0; }
};

DropoutMasks sample_dropout(const ModelConfig& config, int batch_size, std::mt19937_64& rng);

/// Inference on one normalized sequence; dropout is never applied.
Prediction forward(const ModelParams& params, const FeatureSequence& seq, bool with_trace = true);

/// Batched inference probabilities, one row per sequence.
std::vector<std::array<double, kNumClasses>> predict_proba(const ModelParams& params,
                                                           std::span<const FeatureSequence> data);

LoadLabel argmax_label(const std::array<double, kNumClasses>& probs);

struct LossAndGradients {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // same layout as ModelParams::values()
};

/// Weighted cross-entropy averaged over the batch, plus 0.5 * l2 * |theta|^2.
LossAndGradients loss_and_gradients(const ModelParams& params, const Batch& batch,
                                    const std::array<double, kNumClasses>& class_weights,
                                    const DropoutMasks& masks = {}, double l2 = 0.0);

/// Loss only; same definition as loss_and_gradients.
double batch_loss(const ModelParams& params, const Batch& batch, const std::array<double, kNumClasses>& class_weights,
                  const DropoutMasks& masks = {}, double l2 = 0.0);

}  // namespace cogload::model
