#include "cogload/windowing.hpp"

#include "cogload/error.hpp"
#include "cogload/gaze_features.hpp"
#include "cogload/physio_features.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace cogload::windowing {

int window_index(double relative_seconds) {
  if (relative_seconds < -kBoundaryEpsilon || relative_seconds >= kLevelSeconds - kBoundaryEpsilon) {
    return -1;
  }
  const auto idx = static_cast<int>(std::floor((relative_seconds + kBoundaryEpsilon) / kWindowSeconds));
  return std::clamp(idx, 0, static_cast<int>(kWindowsPerLevel) - 1);
}

std::array<WindowPair, kWindowsPerLevel> slice_level(std::span<const GazeSample> gaze,
                                                     std::span<const PhysioSample> physio, LevelSpan level) {
  if (level.end - level.start < kLevelSeconds - kBoundaryEpsilon) {
    throw Error(ErrorCode::IncompleteLevel, "feature-windowing: level spans " +
                                                std::to_string(level.end - level.start) + " s, need 60 s");
  }
  std::array<WindowPair, kWindowsPerLevel> windows;
  for (std::size_t w = 0; w < kWindowsPerLevel; ++w) {
    windows[w].index = static_cast<int>(w);
    windows[w].span_start = level.start + kWindowSeconds * static_cast<double>(w);
    windows[w].span_end = windows[w].span_start + kWindowSeconds;
  }
  for (const GazeSample& s : gaze) {
    const int idx = window_index(s.timestamp - level.start);
    if (idx >= 0) {
      windows[static_cast<std::size_t>(idx)].gaze.push_back(s);
    }
  }
  for (const PhysioSample& s : physio) {
    const int idx = window_index(s.timestamp - level.start);
    if (idx >= 0) {
      windows[static_cast<std::size_t>(idx)].physio.push_back(s);
    }
  }
  const double gaze_expected = kWindowSeconds * kGazeRateHz;
  const double physio_expected = kWindowSeconds * kPhysioRateHz;
  for (const WindowPair& w : windows) {
    if (w.gaze.empty() || w.physio.empty()) {
      throw Error(ErrorCode::MissingModality, "feature-windowing: window " + std::to_string(w.index) + " has no " +
                                                  (w.gaze.empty() ? "gaze" : "physio") + " samples");
    }
    const double gaze_cov = static_cast<double>(w.gaze.size()) / gaze_expected;
    const double physio_cov = static_cast<double>(w.physio.size()) / physio_expected;
    if (gaze_cov < kMinCoverage || physio_cov < kMinCoverage) {
      throw Error(ErrorCode::InsufficientCoverage,
                  "feature-windowing: window " + std::to_string(w.index) + " coverage gaze=" +
                      std::to_string(gaze_cov) + " physio=" + std::to_string(physio_cov));
    }
  }
  return windows;
}

FeatureWindow build_feature_window(const WindowPair& pair) {
  if (pair.gaze.empty() || pair.physio.empty()) {
    throw Error(ErrorCode::MissingModality, std::string("feature-windowing: ") +
                                                (pair.gaze.empty() ? "gaze" : "physio") + " window is empty");
  }
  const double duration = pair.span_end - pair.span_start;
  const auto g = gaze::gaze_features_for_window(pair.gaze, duration).to_array();
  const auto p = physio::physio_features_for_window(pair.physio).to_array();
  FeatureWindow w;
  w.index = pair.index;
  w.span_start = pair.span_start;
  w.span_end = pair.span_end;
  std::copy(g.begin(), g.end(), w.features.begin());
  std::copy(p.begin(), p.end(), w.features.begin() + static_cast<std::ptrdiff_t>(kGazeFeatureCount));
  return w;
}

FeatureSequence build_feature_sequence(std::span<const GazeSample> gaze, std::span<const PhysioSample> physio,
                                       LevelSpan level) {
  const auto pairs = slice_level(gaze, physio, level);
  FeatureSequence seq;
  for (std::size_t w = 0; w < kWindowsPerLevel; ++w) {
    seq.windows[w] = build_feature_window(pairs[w]);
  }
  return seq;
}

namespace {

FeatureSequence apply_stats(const FeatureSequence& seq, const NormalizationStats& stats) {
  FeatureSequence out = seq;
  for (FeatureWindow& w : out.windows) {
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
      w.features[f] = (w.features[f] - stats.mean[f]) / std::max(stats.std[f], kStdGuard);
    }
  }
  return out;
}

}  // namespace

const NormalizationStats& Normalizer::stats_for(const std::string& participant_id) const {
  if (scope == NormalizationScope::PerParticipant) {
    const auto it = per_participant.find(participant_id);
    if (it != per_participant.end()) {
      return it->second;
    }
  }
  return global;
}

FeatureSequence Normalizer::apply(const FeatureSequence& seq) const {
  return apply_stats(seq, stats_for(seq.participant_id));
}

Dataset Normalizer::apply(const Dataset& data) const {
  Dataset out;
  out.reserve(data.size());
  for (const FeatureSequence& s : data) {
    out.push_back(apply(s));
  }
  return out;
}

NormalizationStats fit_stats(std::span<const FeatureSequence> sequences) {
  if (sequences.empty()) {
    throw Error(ErrorCode::EmptyTrainingSet, "feature-windowing: cannot fit a normalizer on no data");
  }
  NormalizationStats stats;
  const double rows = static_cast<double>(sequences.size() * kWindowsPerLevel);
  for (const FeatureSequence& s : sequences) {
    for (const FeatureWindow& w : s.windows) {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        stats.mean[f] += w.features[f];
      }
    }
  }
  for (double& m : stats.mean) {
    m /= rows;
  }
  for (const FeatureSequence& s : sequences) {
    for (const FeatureWindow& w : s.windows) {
      for (std::size_t f = 0; f < kFeatureCount; ++f) {
        const double d = w.features[f] - stats.mean[f];
        stats.std[f] += d * d;
      }
    }
  }
  for (double& v : stats.std) {
    v = std::max(std::sqrt(v / rows), kStdGuard);
  }
  return stats;
}

Normalizer fit_normalizer(std::span<const FeatureSequence> training, NormalizationScope scope,
                          std::span<const std::string> held_out) {
  const std::set<std::string> forbidden(held_out.begin(), held_out.end());
  for (const FeatureSequence& s : training) {
    if (forbidden.contains(s.participant_id)) {
      throw std::invalid_argument("feature-windowing: held-out participant " + s.participant_id +
                                  " found in training data");
    }
  }
  Normalizer norm;
  norm.scope = scope;
  norm.global = fit_stats(training);
  if (scope == NormalizationScope::PerParticipant) {
    std::map<std::string, Dataset> groups;
    for (const FeatureSequence& s : training) {
      groups[s.participant_id].push_back(s);
    }
    for (const auto& [id, seqs] : groups) {
      norm.per_participant[id] = fit_stats(seqs);
    }
  }
  return norm;
}

NormalizationStats calibrate_participant(std::span<const FeatureSequence> session, std::size_t levels) {
  return fit_stats(session.first(std::min(levels, session.size())));
}

}  // namespace cogload::windowing
