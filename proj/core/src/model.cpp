#include "cogload/model.hpp"

#include "cogload/error.hpp"

#include <algorithm>
#include <cmath>

namespace cogload::model {
namespace {

using Eigen::ArrayXXd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

// Column-wise softmax, shifted by the column max for stability.
MatrixXd softmax_cols(const MatrixXd& z) {
  MatrixXd out(z.rows(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    const double m = z.col(c).maxCoeff();
    out.col(c) = (z.col(c).array() - m).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

struct DirectionCache {
  // Indexed by time step (not processing order).
  std::vector<MatrixXd> i, f, g, o, c, h;
};

struct Cache {
  int batch = 0;
  DirectionCache fwd;
  DirectionCache bwd;
  std::vector<MatrixXd> hcat;  // 2H x B per step
  MatrixXd alpha;              // T x B
  MatrixXd context;            // 2H x B, before dropout
  MatrixXd context_dropped;
  MatrixXd z1;
  MatrixXd hidden_dropped;  // after relu and dropout
  MatrixXd probs;           // C x B
  MatrixXd logits;
};

void run_direction(const ModelParams& p, BlockId w_id, BlockId u_id, BlockId b_id, const Batch& batch, bool reverse,
                   DirectionCache& dc) {
  const int T = static_cast<int>(batch.x.size());
  const int H = p.config().hidden;
  const int B = batch.size();
  const auto W = p.block(w_id);
  const auto U = p.block(u_id);
  const auto b = p.block(b_id);
  dc.i.assign(T, {});
  dc.f.assign(T, {});
  dc.g.assign(T, {});
  dc.o.assign(T, {});
  dc.c.assign(T, {});
  dc.h.assign(T, {});
  MatrixXd h = MatrixXd::Zero(H, B);
  MatrixXd c = MatrixXd::Zero(H, B);
  for (int k = 0; k < T; ++k) {
    const int t = reverse ? T - 1 - k : k;
    MatrixXd z = W * batch.x[t] + U * h;
    z.colwise() += b.col(0);
    dc.i[t] = sigmoid(z.topRows(H));
    dc.f[t] = sigmoid(z.middleRows(H, H));
    dc.g[t] = z.middleRows(2 * H, H).array().tanh().matrix();
    dc.o[t] = sigmoid(z.bottomRows(H));
    c = (dc.f[t].array() * c.array() + dc.i[t].array() * dc.g[t].array()).matrix();
    h = (dc.o[t].array() * c.array().tanh()).matrix();
    dc.c[t] = c;
    dc.h[t] = h;
  }
}

void check_batch(const ModelParams& p, const Batch& batch) {
  const ModelConfig& cfg = p.config();
  if (static_cast<int>(batch.x.size()) != cfg.seq_len) {
    throw Error(ErrorCode::ShapeMismatch, "load-classifier: expected " + std::to_string(cfg.seq_len) + " steps, got " +
                                              std::to_string(batch.x.size()));
  }
  for (const MatrixXd& x : batch.x) {
    if (x.rows() != cfg.input_dim || x.cols() != batch.x.front().cols()) {
      throw Error(ErrorCode::ShapeMismatch, "load-classifier: input step has shape " + std::to_string(x.rows()) + "x" +
                                                std::to_string(x.cols()));
    }
  }
}

Cache forward_batch(const ModelParams& p, const Batch& batch, const DropoutMasks& masks) {
  check_batch(p, batch);
  const ModelConfig& cfg = p.config();
  const int T = cfg.seq_len;
  const int H = cfg.hidden;
  Cache cache;
  cache.batch = batch.size();
  run_direction(p, kFwdW, kFwdU, kFwdB, batch, false, cache.fwd);
  run_direction(p, kBwdW, kBwdU, kBwdB, batch, true, cache.bwd);

  const auto aw = p.block(kAttnW);
  const double ab = p.block(kAttnB)(0, 0);
  cache.hcat.resize(T);
  MatrixXd scores(T, cache.batch);
  for (int t = 0; t < T; ++t) {
    cache.hcat[t].resize(2 * H, cache.batch);
    cache.hcat[t].topRows(H) = cache.fwd.h[t];
    cache.hcat[t].bottomRows(H) = cache.bwd.h[t];
    scores.row(t) = (aw * cache.hcat[t]).array() + ab;
  }
  cache.alpha = softmax_cols(scores);
  cache.context = MatrixXd::Zero(2 * H, cache.batch);
  for (int t = 0; t < T; ++t) {
    cache.context += (cache.hcat[t].array().rowwise() * cache.alpha.row(t).array()).matrix();
  }
  cache.context_dropped = masks.empty() ? cache.context : MatrixXd(cache.context.cwiseProduct(masks.context));
  cache.z1 = p.block(kHeadW1) * cache.context_dropped;
  cache.z1.colwise() += p.block(kHeadB1).col(0);
  MatrixXd r = cache.z1.cwiseMax(0.0);
  cache.hidden_dropped = masks.empty() ? r : MatrixXd(r.cwiseProduct(masks.hidden));
  cache.logits = p.block(kHeadW2) * cache.hidden_dropped;
  cache.logits.colwise() += p.block(kHeadB2).col(0);
  cache.probs = softmax_cols(cache.logits);
  return cache;
}

double loss_from_cache(const ModelParams& p, const Cache& cache, const Batch& batch,
                       const std::array<double, kNumClasses>& w, double l2) {
  if (static_cast<int>(batch.labels.size()) != cache.batch) {
    throw Error(ErrorCode::ShapeMismatch, "load-classifier: label count does not match batch");
  }
  double loss = 0.0;
  for (int b = 0; b < cache.batch; ++b) {
    const int y = batch.labels[b];
    if (y < 0 || y >= kNumClasses) {
      throw Error(ErrorCode::ShapeMismatch, "load-classifier: label out of range");
    }
    loss += w[y] * -std::log(cache.probs(y, b));
  }
  loss /= static_cast<double>(cache.batch);
  if (l2 != 0.0) {
    loss += 0.5 * l2 * p.values().squaredNorm();
  }
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::NonFiniteLoss, "load-classifier: loss is not finite");
  }
  return loss;
}

void backprop_direction(const ModelParams& p, BlockId w_id, BlockId u_id, BlockId b_id, const Batch& batch,
                        bool reverse, const DirectionCache& dc, const std::vector<MatrixXd>& dh_out, int row_offset,
                        ModelParams& grad) {
  const int T = static_cast<int>(batch.x.size());
  const int H = p.config().hidden;
  const int B = batch.size();
  const auto U = p.block(u_id);
  auto dW = grad.block(w_id);
  auto dU = grad.block(u_id);
  auto db = grad.block(b_id);
  MatrixXd dh_next = MatrixXd::Zero(H, B);
  MatrixXd dc_next = MatrixXd::Zero(H, B);
  MatrixXd dz(4 * H, B);
  for (int k = T - 1; k >= 0; --k) {
    const int t = reverse ? T - 1 - k : k;
    const int prev = reverse ? t + 1 : t - 1;
    const bool has_prev = k > 0;
    const ArrayXXd h_prev = has_prev ? ArrayXXd(dc.h[prev].array()) : ArrayXXd::Zero(H, B);
    const ArrayXXd c_prev = has_prev ? ArrayXXd(dc.c[prev].array()) : ArrayXXd::Zero(H, B);
    const ArrayXXd i = dc.i[t].array();
    const ArrayXXd f = dc.f[t].array();
    const ArrayXXd g = dc.g[t].array();
    const ArrayXXd o = dc.o[t].array();
    const ArrayXXd tc = dc.c[t].array().tanh();

    const ArrayXXd dh = dh_out[t].middleRows(row_offset, H).array() + dh_next.array();
    const ArrayXXd dc_total = dc_next.array() + dh * o * (1.0 - tc * tc);
    dz.topRows(H) = (dc_total * g * i * (1.0 - i)).matrix();
    dz.middleRows(H, H) = (dc_total * c_prev * f * (1.0 - f)).matrix();
    dz.middleRows(2 * H, H) = (dc_total * i * (1.0 - g * g)).matrix();
    dz.bottomRows(H) = (dh * tc * o * (1.0 - o)).matrix();

    dW.noalias() += dz * batch.x[t].transpose();
    if (has_prev) {
      dU.noalias() += dz * h_prev.matrix().transpose();
    }
    db.col(0) += dz.rowwise().sum();
    dh_next.noalias() = U.transpose() * dz;
    dc_next = (dc_total * f).matrix();
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (input_dim <= 0 || seq_len <= 0 || hidden <= 0 || head_hidden <= 0 || classes != kNumClasses) {
    throw Error(ErrorCode::ShapeMismatch, "load-classifier: invalid model dimensions");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw Error(ErrorCode::ShapeMismatch, "load-classifier: dropout must lie in [0, 1)");
  }
}

std::vector<ParamBlock> param_layout(const ModelConfig& cfg) {
  cfg.validate();
  const int H = cfg.hidden;
  const int F = cfg.input_dim;
  const int D = cfg.head_hidden;
  const int C = cfg.classes;
  std::vector<ParamBlock> blocks = {
      {"lstm_fwd.W", 4 * H, F}, {"lstm_fwd.U", 4 * H, H}, {"lstm_fwd.b", 4 * H, 1},
      {"lstm_bwd.W", 4 * H, F}, {"lstm_bwd.U", 4 * H, H}, {"lstm_bwd.b", 4 * H, 1},
      {"attn.w", 1, 2 * H},     {"attn.b", 1, 1},         {"head.W1", D, 2 * H},
      {"head.b1", D, 1},        {"head.W2", C, D},        {"head.b2", C, 1},
  };
  std::size_t offset = 0;
  for (ParamBlock& b : blocks) {
    b.offset = offset;
    offset += b.size();
  }
  return blocks;
}

ModelParams::ModelParams(const ModelConfig& config)
    : config_(config), blocks_(param_layout(config)),
      values_(VectorXd::Zero(static_cast<Eigen::Index>(blocks_.back().offset + blocks_.back().size()))) {}

ModelParams ModelParams::initialize(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p(config);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.hidden));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < p.values_.size(); ++i) {
    p.values_[i] = dist(rng);
  }
  return p;
}

Eigen::Map<Eigen::MatrixXd> ModelParams::block(BlockId id) {
  const ParamBlock& b = blocks_[static_cast<std::size_t>(id)];
  return {values_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const Eigen::MatrixXd> ModelParams::block(BlockId id) const {
  const ParamBlock& b = blocks_[static_cast<std::size_t>(id)];
  return {values_.data() + b.offset, b.rows, b.cols};
}

Batch make_batch(std::span<const FeatureSequence> data, std::span<const std::size_t> indices) {
  Batch batch;
  const auto B = static_cast<Eigen::Index>(indices.size());
  batch.x.assign(kWindowsPerLevel, MatrixXd(static_cast<Eigen::Index>(kFeatureCount), B));
  batch.labels.resize(indices.size(), -1);
  for (Eigen::Index col = 0; col < B; ++col) {
    const FeatureSequence& s = data[indices[static_cast<std::size_t>(col)]];
    for (std::size_t t = 0; t < kWindowsPerLevel; ++t) {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        batch.x[t](static_cast<Eigen::Index>(f), col) = s.windows[t].features[f];
      }
    }
    if (s.label) {
      batch.labels[static_cast<std::size_t>(col)] = to_int(*s.label);
    }
  }
  return batch;
}

Batch make_batch(std::span<const FeatureSequence> data) {
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    idx[i] = i;
  }
  return make_batch(data, idx);
}

DropoutMasks sample_dropout(const ModelConfig& cfg, int batch_size, std::mt19937_64& rng) {
  DropoutMasks m;
  if (cfg.dropout <= 0.0) {
    return m;
  }
  const double keep_scale = 1.0 / (1.0 - cfg.dropout);
  std::bernoulli_distribution keep(1.0 - cfg.dropout);
  m.context.resize(2 * cfg.hidden, batch_size);
  m.hidden.resize(cfg.head_hidden, batch_size);
  for (Eigen::Index i = 0; i < m.context.size(); ++i) {
    m.context.data()[i] = keep(rng) ? keep_scale : 0.0;
  }
  for (Eigen::Index i = 0; i < m.hidden.size(); ++i) {
    m.hidden.data()[i] = keep(rng) ? keep_scale : 0.0;
  }
  return m;
}

LoadLabel argmax_label(const std::array<double, kNumClasses>& probs) {
  const auto it = std::max_element(probs.begin(), probs.end());
  return static_cast<LoadLabel>(std::distance(probs.begin(), it));
}

Prediction forward(const ModelParams& params, const FeatureSequence& seq, bool with_trace) {
  const Batch batch = make_batch(std::span<const FeatureSequence>(&seq, 1));
  const Cache cache = forward_batch(params, batch, {});
  Prediction pred;
  for (int c = 0; c < kNumClasses; ++c) {
    pred.probabilities[c] = cache.probs(c, 0);
  }
  pred.label = argmax_label(pred.probabilities);
  if (with_trace) {
    ForwardTrace tr;
    for (int t = 0; t < params.config().seq_len; ++t) {
      tr.hidden.push_back(cache.hcat[t].col(0));
      tr.attention.push_back(cache.alpha(t, 0));
    }
    tr.context = cache.context.col(0);
    for (int c = 0; c < kNumClasses; ++c) {
      tr.logits[c] = cache.logits(c, 0);
      tr.probabilities[c] = cache.probs(c, 0);
    }
    pred.trace = std::move(tr);
  }
  return pred;
}

std::vector<std::array<double, kNumClasses>> predict_proba(const ModelParams& params,
                                                           std::span<const FeatureSequence> data) {
  std::vector<std::array<double, kNumClasses>> out;
  out.reserve(data.size());
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const auto chunk = data.subspan(start, std::min(kChunk, data.size() - start));
    const Cache cache = forward_batch(params, make_batch(chunk), {});
    for (int b = 0; b < cache.batch; ++b) {
      out.push_back({cache.probs(0, b), cache.probs(1, b), cache.probs(2, b)});
    }
  }
  return out;
}

double batch_loss(const ModelParams& params, const Batch& batch, const std::array<double, kNumClasses>& class_weights,
                  const DropoutMasks& masks, double l2) {
  const Cache cache = forward_batch(params, batch, masks);
  return loss_from_cache(params, cache, batch, class_weights, l2);
}

LossAndGradients loss_and_gradients(const ModelParams& params, const Batch& batch,
                                    const std::array<double, kNumClasses>& class_weights, const DropoutMasks& masks,
                                    double l2) {
  const Cache cache = forward_batch(params, batch, masks);
  LossAndGradients out;
  out.loss = loss_from_cache(params, cache, batch, class_weights, l2);

  const ModelConfig& cfg = params.config();
  const int T = cfg.seq_len;
  const int H = cfg.hidden;
  const int B = cache.batch;
  ModelParams grad(cfg);

  // Softmax cross-entropy: d logits = w_y (p - onehot) / B.
  MatrixXd dlogits = cache.probs;
  for (int b = 0; b < B; ++b) {
    const int y = batch.labels[b];
    dlogits(y, b) -= 1.0;
    dlogits.col(b) *= class_weights[y] / static_cast<double>(B);
  }
  grad.block(kHeadW2).noalias() = dlogits * cache.hidden_dropped.transpose();
  grad.block(kHeadB2).col(0) = dlogits.rowwise().sum();
  MatrixXd dr = params.block(kHeadW2).transpose() * dlogits;
  if (!masks.empty()) {
    dr = dr.cwiseProduct(masks.hidden);
  }
  const MatrixXd dz1 = (dr.array() * (cache.z1.array() > 0.0).cast<double>()).matrix();
  grad.block(kHeadW1).noalias() = dz1 * cache.context_dropped.transpose();
  grad.block(kHeadB1).col(0) = dz1.rowwise().sum();
  MatrixXd dctx = params.block(kHeadW1).transpose() * dz1;
  if (!masks.empty()) {
    dctx = dctx.cwiseProduct(masks.context);
  }

  // Attention: context = sum_t alpha_t h_t, alpha = softmax_t(w . h_t + b).
  MatrixXd dalpha(T, B);
  std::vector<MatrixXd> dh(T);
  for (int t = 0; t < T; ++t) {
    dalpha.row(t) = cache.hcat[t].cwiseProduct(dctx).colwise().sum();
    dh[t] = (dctx.array().rowwise() * cache.alpha.row(t).array()).matrix();
  }
  const Eigen::RowVectorXd weighted = cache.alpha.cwiseProduct(dalpha).colwise().sum();
  const MatrixXd dscore = (cache.alpha.array() * (dalpha.rowwise() - weighted).array()).matrix();
  const auto aw = params.block(kAttnW);
  auto daw = grad.block(kAttnW);
  for (int t = 0; t < T; ++t) {
    daw.noalias() += dscore.row(t) * cache.hcat[t].transpose();
    dh[t].noalias() += aw.transpose() * dscore.row(t);
  }
  grad.block(kAttnB)(0, 0) = dscore.sum();

  backprop_direction(params, kFwdW, kFwdU, kFwdB, batch, false, cache.fwd, dh, 0, grad);
  backprop_direction(params, kBwdW, kBwdU, kBwdB, batch, true, cache.bwd, dh, H, grad);

  out.gradient = std::move(grad.values());
  if (l2 != 0.0) {
    out.gradient += l2 * params.values();
  }
  return out;
}

}  // namespace cogload::model
