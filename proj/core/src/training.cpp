#include "cogload/training.hpp"

#include "cogload/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace cogload::model {
namespace {

void require_labels(std::span<const FeatureSequence> data) {
  for (const FeatureSequence& s : data) {
    if (!s.label) {
      throw Error(ErrorCode::ShapeMismatch, "load-classifier: training sequence " + s.participant_id + "/" +
                                                std::to_string(s.level_id) + " has no label");
    }
  }
}

std::vector<std::size_t> indices_of(std::span<const FeatureSequence> data, int label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].label && to_int(*data[i].label) == label) {
      out.push_back(i);
    }
  }
  return out;
}

std::size_t pick(const std::vector<std::size_t>& pool, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, pool.size() - 1);
  return pool[d(rng)];
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalResult evaluate(const ModelParams& params, std::span<const FeatureSequence> data,
                    const std::array<double, kNumClasses>& weights) {
  const auto probs = predict_proba(params, data);
  EvalResult r;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int y = to_int(*data[i].label);
    r.loss += weights[y] * -std::log(std::max(probs[i][y], std::numeric_limits<double>::min()));
    if (to_int(argmax_label(probs[i])) == y) {
      ++correct;
    }
  }
  r.loss /= static_cast<double>(data.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return r;
}

}  // namespace

std::array<double, kNumClasses> compute_class_weights(const std::array<std::size_t, kNumClasses>& counts,
                                                      const std::array<double, kNumClasses>& multipliers) {
  std::size_t total = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 0) {
      throw Error(ErrorCode::EmptyClass,
                  "load-classifier: class " + std::string(label_name(static_cast<LoadLabel>(c))) + " has no samples");
    }
    total += counts[c];
  }
  std::array<double, kNumClasses> w{};
  for (int c = 0; c < kNumClasses; ++c) {
    w[c] = static_cast<double>(total) / (kNumClasses * static_cast<double>(counts[c])) * multipliers[c];
  }
  return w;
}

std::array<std::size_t, kNumClasses> class_counts(std::span<const FeatureSequence> data) {
  std::array<std::size_t, kNumClasses> counts{};
  for (const FeatureSequence& s : data) {
    if (s.label) {
      ++counts[to_int(*s.label)];
    }
  }
  return counts;
}

SplitIndices stratified_split(std::span<const FeatureSequence> data, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SplitIndices out;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> idx = indices_of(data, c);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
    if (!idx.empty()) {
      k = std::min(k, idx.size() - 1);  // keep every present class trainable
    }
    out.validation.insert(out.validation.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.validation.begin(), out.validation.end());
  return out;
}

FeatureSequence jitter(const FeatureSequence& seq, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  FeatureSequence out = seq;
  for (FeatureWindow& w : out.windows) {
    for (double& v : w.features) {
      v += noise(rng);
    }
  }
  return out;
}

FeatureSequence mix_windows(const FeatureSequence& first_half, const FeatureSequence& second_half) {
  FeatureSequence out = first_half;
  out.windows[2].features = second_half.windows[2].features;
  out.windows[3].features = second_half.windows[3].features;
  return out;
}

FeatureSequence interpolate(const FeatureSequence& too_easy, const FeatureSequence& too_difficult, double alpha) {
  FeatureSequence out = too_easy;
  for (std::size_t t = 0; t < kWindowsPerLevel; ++t) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      out.windows[t].features[f] =
          alpha * too_easy.windows[t].features[f] + (1.0 - alpha) * too_difficult.windows[t].features[f];
    }
  }
  out.label = LoadLabel::JustRight;
  return out;
}

FeatureSequence structured_pattern(const FeatureSequence& medium, const FeatureSequence& low,
                                   const FeatureSequence& high, int pattern) {
  FeatureSequence out = medium;
  if (pattern == 0) {
    out.windows[0].features = medium.windows[0].features;
    out.windows[1].features = low.windows[2].features;
    out.windows[2].features = high.windows[1].features;
    out.windows[3].features = medium.windows[3].features;
  } else {
    out.windows[0].features = medium.windows[3].features;
    out.windows[1].features = high.windows[2].features;
    out.windows[2].features = low.windows[1].features;
    out.windows[3].features = medium.windows[0].features;
  }
  out.label = LoadLabel::JustRight;
  return out;
}

Dataset balance_by_participant(std::span<const FeatureSequence> data, std::mt19937_64& rng) {
  std::map<std::string, std::array<std::vector<std::size_t>, kNumClasses>> groups;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].label) {
      groups[data[i].participant_id][to_int(*data[i].label)].push_back(i);
    }
  }
  std::vector<bool> keep(data.size(), true);
  for (auto& [id, per_class] : groups) {
    std::vector<double> counts;
    for (const auto& v : per_class) {
      if (!v.empty()) {
        counts.push_back(static_cast<double>(v.size()));
      }
    }
    std::sort(counts.begin(), counts.end());
    const std::size_t m = counts.size();
    const double med = (m % 2 == 1) ? counts[m / 2] : 0.5 * (counts[m / 2 - 1] + counts[m / 2]);
    const auto target = static_cast<std::size_t>(std::ceil(med));
    for (auto& v : per_class) {
      if (v.size() <= target) {
        continue;
      }
      std::shuffle(v.begin(), v.end(), rng);
      for (std::size_t k = target; k < v.size(); ++k) {
        keep[v[k]] = false;
      }
    }
  }
  Dataset out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (keep[i]) {
      out.push_back(data[i]);
    }
  }
  return out;
}

AugmentResult augment(std::span<const FeatureSequence> data, const AugmentConfig& config, std::uint64_t seed) {
  require_labels(data);
  std::mt19937_64 rng(seed);
  AugmentResult result;
  result.data = config.balance ? balance_by_participant(data, rng) : Dataset(data.begin(), data.end());
  const std::size_t originals = result.data.size();
  std::array<std::vector<std::size_t>, kNumClasses> pool;
  for (int c = 0; c < kNumClasses; ++c) {
    pool[c] = indices_of(std::span<const FeatureSequence>(result.data.data(), originals), c);
  }
  Dataset synthetic;
  auto add = [&](FeatureSequence s) {
    const int c = to_int(*s.label);
    if (result.synthetic_per_class[c] >= config.cap_per_class) {
      return;
    }
    s.level_id = -1;
    ++result.synthetic_per_class[c];
    synthetic.push_back(std::move(s));
  };
  auto skip = [&](const std::string& strategy, const std::string& why) {
    result.log.push_back(std::string(to_string(ErrorCode::InsufficientDonors)) + ": " + strategy + " skipped, " + why);
  };
  const Dataset& base = result.data;

  for (int c = 0; c < kNumClasses; ++c) {
    const std::string cls(label_name(static_cast<LoadLabel>(c)));
    if (config.jitter_per_class > 0 && pool[c].empty()) {
      skip("jitter", "no " + cls + " donors");
    } else {
      for (std::size_t k = 0; k < config.jitter_per_class; ++k) {
        add(jitter(base[pick(pool[c], rng)], config.jitter_sigma, rng));
      }
    }
  }
  for (int c = 0; c < kNumClasses; ++c) {
    const std::string cls(label_name(static_cast<LoadLabel>(c)));
    if (config.mix_per_class > 0 && pool[c].size() < 2) {
      skip("mixing", "fewer than two " + cls + " donors");
      continue;
    }
    for (std::size_t k = 0; k < config.mix_per_class; ++k) {
      const std::size_t a = pick(pool[c], rng);
      std::vector<std::size_t> partners;
      for (std::size_t j : pool[c]) {
        if (base[j].participant_id != base[a].participant_id) {
          partners.push_back(j);
        }
      }
      if (partners.empty()) {
        for (std::size_t j : pool[c]) {
          if (j != a) {
            partners.push_back(j);
          }
        }
      }
      add(mix_windows(base[a], base[pick(partners, rng)]));
    }
  }
  const int easy = to_int(LoadLabel::TooEasy);
  const int right = to_int(LoadLabel::JustRight);
  const int hard = to_int(LoadLabel::TooDifficult);
  if (config.interpolation_count > 0 && (pool[easy].empty() || pool[hard].empty())) {
    skip("interpolation", "needs TooEasy and TooDifficult donors");
  } else {
    std::uniform_real_distribution<double> alpha(config.alpha_min, config.alpha_max);
    for (std::size_t k = 0; k < config.interpolation_count; ++k) {
      const std::size_t a = pick(pool[easy], rng);
      const std::size_t b = pick(pool[hard], rng);
      add(interpolate(base[a], base[b], alpha(rng)));
    }
  }
  if (config.structured_count > 0 && (pool[easy].empty() || pool[right].empty() || pool[hard].empty())) {
    skip("structured synthesis", "needs donors of every class");
  } else {
    for (std::size_t k = 0; k < config.structured_count; ++k) {
      const std::size_t m = pick(pool[right], rng);
      const std::size_t l = pick(pool[easy], rng);
      const std::size_t h = pick(pool[hard], rng);
      add(structured_pattern(base[m], base[l], base[h], static_cast<int>(k % 2)));
    }
  }
  result.data.insert(result.data.end(), std::make_move_iterator(synthetic.begin()),
                     std::make_move_iterator(synthetic.end()));
  return result;
}

TrainingResult fit(std::span<const FeatureSequence> train_set, std::span<const FeatureSequence> validation,
                   const TrainingConfig& config) {
  if (train_set.empty()) {
    throw Error(ErrorCode::EmptyClass, "load-classifier: training split is empty");
  }
  require_labels(train_set);
  require_labels(validation);
  TrainingResult result;
  result.class_weights = compute_class_weights(class_counts(train_set), config.class_multipliers);

  ModelParams params = ModelParams::initialize(config.model, config.seed);
  const Eigen::Index n_params = params.values().size();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(n_params);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n_params);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }

  const bool use_validation = !validation.empty();
  double best_acc = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;
  long step = 0;
  const auto batch_size = static_cast<std::size_t>(std::max(1, config.batch_size));
  result.params = params;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      const Batch batch = make_batch(train_set, std::span<const std::size_t>(order.data() + start, len));
      const DropoutMasks masks = sample_dropout(config.model, batch.size(), rng);
      const LossAndGradients lg = loss_and_gradients(params, batch, result.class_weights, masks, config.l2);
      loss_sum += lg.loss * static_cast<double>(len);

      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      m = config.beta1 * m + (1.0 - config.beta1) * lg.gradient;
      v = config.beta2 * v + (1.0 - config.beta2) * lg.gradient.cwiseProduct(lg.gradient);
      Eigen::VectorXd& theta = params.values();
      theta *= 1.0 - config.learning_rate * config.weight_decay;
      theta.array() -=
          config.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config.epsilon);
      if (!params.all_finite()) {
        throw Error(ErrorCode::NonFiniteLoss, "load-classifier: parameters diverged at epoch " + std::to_string(epoch));
      }
    }
    const EvalResult train_eval = evaluate(params, train_set, result.class_weights);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(train_set.size());
    log.train_accuracy = train_eval.accuracy;
    const EvalResult val = use_validation ? evaluate(params, validation, result.class_weights) : train_eval;
    log.val_loss = val.loss;
    log.val_accuracy = val.accuracy;
    result.log.push_back(log);

    if (val.accuracy > best_acc || (val.accuracy == best_acc && val.loss < best_loss)) {
      best_acc = val.accuracy;
      best_loss = val.loss;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

TrainingResult train(std::span<const FeatureSequence> data, const TrainingConfig& config) {
  require_labels(data);
  const SplitIndices split = stratified_split(data, config.validation_fraction, config.seed);
  Dataset train_part;
  Dataset val_part;
  for (std::size_t i : split.train) {
    train_part.push_back(data[i]);
  }
  for (std::size_t i : split.validation) {
    val_part.push_back(data[i]);
  }
  std::vector<std::string> notes;
  if (config.augment) {
    AugmentResult aug = augment(train_part, config.augmentation, config.seed + 1);
    train_part = std::move(aug.data);
    notes = std::move(aug.log);
  }
  TrainingResult result = fit(train_part, val_part, config);
  result.notes.insert(result.notes.begin(), notes.begin(), notes.end());
  return result;
}

}  // namespace cogload::model
