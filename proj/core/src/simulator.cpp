#include "cogload/simulator.hpp"

#include "cogload/error.hpp"
#include "cogload/protocol.hpp"
#include "cogload/windowing.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace cogload::sim {
namespace {

constexpr int kExtractionAttempts = 5;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <class Payload>
hub::StreamMessage message(hub::StreamId stream, double t, Payload payload) {
  hub::StreamMessage m;
  m.stream = stream;
  m.timestamp = t;
  m.payload = std::move(payload);
  return m;
}

double normal(std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  return d(rng);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(rng);
}

Vec3 unit(double x, double y) {
  const double n = std::sqrt(x * x + y * y + 1.0);
  return {x / n, y / n, 1.0 / n};
}

// Gaze point in tangent-plane units following a fixation/saccade alternation.
std::vector<std::array<double, 2>> gaze_path(const SignalParameters& sp, double ns, std::size_t n,
                                             std::mt19937_64& rng) {
  std::vector<std::array<double, 2>> path(n);
  double fx = uniform(rng, -0.1, 0.1);
  double fy = uniform(rng, -0.1, 0.1);
  double tx = 0.0;
  double ty = 0.0;
  std::gamma_distribution<double> fix_len(4.0, 0.25);
  std::size_t k = 0;
  while (k < n) {
    const auto fix_samples =
        std::max<std::size_t>(6, static_cast<std::size_t>(std::llround(sp.fixation_duration_s * fix_len(rng) * kGazeRateHz)));
    for (std::size_t j = 0; j < fix_samples && k < n; ++j, ++k) {
      tx = 0.85 * tx + normal(rng, 0.0003 * ns);
      ty = 0.85 * ty + normal(rng, 0.0003 * ns);
      path[k] = {fx + tx, fy + ty};
    }
    if (k >= n) {
      break;
    }
    const double amp = sp.saccade_amplitude * std::exp(normal(rng, 0.25));
    double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    double gx = fx + amp * std::cos(angle);
    double gy = fy + amp * std::sin(angle);
    if (std::abs(gx) > 0.35 || std::abs(gy) > 0.35) {
      gx = fx - amp * std::cos(angle);
      gy = fy - amp * std::sin(angle);
    }
    const int steps = std::clamp(3 + static_cast<int>(std::lround(amp / 0.04)), 3, 8);
    for (int j = 1; j <= steps && k < n; ++j, ++k) {
      const double w = 0.5 * (1.0 - std::cos(std::numbers::pi * j / steps));
      path[k] = {fx + (gx - fx) * w + tx, fy + (gy - fy) * w + ty};
    }
    fx = gx;
    fy = gy;
  }
  return path;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(base) ^ a) ^ (b * 0xd6e8feb86659fd93ULL));
}

double load_gap_center(LoadLabel label) {
  switch (label) {
    case LoadLabel::TooEasy: return -1.5;
    case LoadLabel::JustRight: return 0.0;
    case LoadLabel::TooDifficult: return 1.5;
  }
  return 0.0;
}

SimProfile make_profile(int index, std::uint64_t seed, const PopulationConfig& pop) {
  std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(index), 0xA11CE));
  SimProfile p;
  char id[16];
  std::snprintf(id, sizeof id, "P%02d", index + 1);
  p.id = id;
  p.skill = std::clamp(pop.skill_mean + normal(rng, pop.skill_sd), 1.3, 3.3);
  const double bs = pop.baseline_spread;
  p.baseline_pupil_mm += normal(rng, 0.15 * bs);
  p.baseline_heart_rate += normal(rng, 3.0 * bs);
  p.baseline_gsr_us += normal(rng, 0.4 * bs);
  p.baseline_blink_per_min *= std::exp(normal(rng, 0.2 * bs));
  p.baseline_fixation_s *= std::exp(normal(rng, 0.1 * bs));
  p.baseline_saccade_amplitude *= std::exp(normal(rng, 0.1 * bs));
  p.noise_scale = pop.noise_scale;
  p.gap_spread = pop.gap_spread;
  p.seed = derive_seed(seed, static_cast<std::uint64_t>(index), 1);
  return p;
}

SignalParameters signal_parameters(const SimProfile& p, double gap) {
  SignalParameters s;
  s.pupil_mean_mm = p.baseline_pupil_mm + p.gains.pupil_mm * gap;
  s.fixation_duration_s = p.baseline_fixation_s * std::exp(-p.gains.fixation_duration * gap);
  s.saccade_amplitude = p.baseline_saccade_amplitude * std::exp(p.gains.saccade_amplitude * gap);
  s.blink_per_min = p.baseline_blink_per_min * std::exp(-p.gains.blink_rate * gap);
  s.heart_rate_bpm = p.baseline_heart_rate + p.gains.heart_rate_bpm * gap;
  s.mean_rr_ms = 60000.0 / s.heart_rate_bpm;
  s.gsr_level_us = p.baseline_gsr_us + p.gains.gsr_us * gap;
  return s;
}

GeneratedSignals generate_signals(const SimProfile& profile, double load_gap, double duration, std::uint64_t seed,
                                  double start_time, ClockOffsets offsets) {
  std::mt19937_64 rng(seed);
  const double ns = profile.noise_scale;
  SignalParameters sp = signal_parameters(profile, load_gap);
  // Level-to-level variability around the load-driven parameters.
  sp.pupil_mean_mm += normal(rng, 0.05 * ns);
  sp.fixation_duration_s *= std::exp(normal(rng, 0.05 * ns));
  sp.saccade_amplitude *= std::exp(normal(rng, 0.05 * ns));
  sp.blink_per_min *= std::exp(normal(rng, 0.10 * ns));
  sp.heart_rate_bpm = std::clamp(sp.heart_rate_bpm + normal(rng, 1.0 * ns), 45.0, 160.0);
  sp.mean_rr_ms = 60000.0 / sp.heart_rate_bpm;
  sp.gsr_level_us = std::max(0.2, sp.gsr_level_us + normal(rng, 0.1 * ns));

  GeneratedSignals out;
  const auto n_gaze = static_cast<std::size_t>(std::llround(duration * kGazeRateHz));
  const auto path = gaze_path(sp, ns, n_gaze, rng);

  // Blink openness profile per sample.
  std::vector<double> openness(n_gaze, 1.0);
  std::exponential_distribution<double> gap_dist(std::max(sp.blink_per_min, 1e-3) / 60.0);
  double t_blink = gap_dist(rng);
  while (true) {
    const double length = uniform(rng, 0.12, 0.20);
    const auto first = static_cast<std::size_t>(std::llround(t_blink * kGazeRateHz));
    const auto samples = static_cast<std::size_t>(std::llround(length * kGazeRateHz));
    if (first >= n_gaze) {
      break;
    }
    for (std::size_t j = 0; j < samples && first + j < n_gaze; ++j) {
      openness[first + j] = 1.0 - 0.95 * std::sin(std::numbers::pi * (j + 1.0) / (samples + 1.0));
    }
    t_blink += length + 0.3 + gap_dist(rng);
  }

  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  double drift_v = 0.0;
  double drift = 0.0;
  out.gaze.reserve(n_gaze);
  for (std::size_t k = 0; k < n_gaze; ++k) {
    const double t = start_time + static_cast<double>(k) / kGazeRateHz;
    drift_v = 0.97 * drift_v + normal(rng, 0.02 * ns);
    drift = 0.999 * drift + drift_v / kGazeRateHz;
    const double pupil =
        sp.pupil_mean_mm + 0.05 * ns * std::sin(2.0 * std::numbers::pi * 0.1 * (t - start_time) + phase) + drift;
    GazeSample g;
    g.timestamp = t + offsets.gaze;
    g.dir_left = unit(path[k][0] + 0.005, path[k][1]);
    g.dir_right = unit(path[k][0] - 0.005, path[k][1]);
    g.openness_left = openness[k];
    g.openness_right = openness[k];
    const bool lost = openness[k] < 0.3;  // tracker loses the pupil when the lid is mostly closed
    g.pupil_left = lost ? 0.0 : pupil + 0.02;
    g.pupil_right = lost ? 0.0 : pupil - 0.02;
    g.convergence_distance = 0.8;
    out.gaze.push_back(g);
  }

  // Pulse train with jittered beat times and a dicrotic secondary wave.
  const auto n_physio = static_cast<std::size_t>(std::llround(duration * kPhysioRateHz));
  std::vector<double> beats;
  const double rr_s = sp.mean_rr_ms / 1000.0;
  double b = start_time - uniform(rng, 0.0, rr_s);
  while (b < start_time + duration + 1.0) {
    beats.push_back(b);
    const double jitter = normal(rng, profile.rr_jitter_ms * ns) / 1000.0;
    b += std::clamp(rr_s + jitter, 0.5 * rr_s, 1.5 * rr_s);
  }
  const double wander_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double gsr_slope = normal(rng, 0.004 * ns);
  double gsr_noise = 0.0;
  std::bernoulli_distribution missing(0.005);
  std::size_t first_beat = 0;
  out.physio.reserve(n_physio);
  for (std::size_t k = 0; k < n_physio; ++k) {
    const double t = start_time + static_cast<double>(k) / kPhysioRateHz;
    while (first_beat < beats.size() && beats[first_beat] < t - 1.0) {
      ++first_beat;
    }
    double pulse = 0.0;
    for (std::size_t j = first_beat; j < beats.size() && beats[j] < t + 1.0; ++j) {
      const double d1 = (t - beats[j]) / 0.06;
      const double d2 = (t - beats[j] - 0.30) / 0.08;
      pulse += std::exp(-0.5 * d1 * d1) + 0.35 * std::exp(-0.5 * d2 * d2);
    }
    pulse += 0.1 * std::sin(2.0 * std::numbers::pi * 0.25 * (t - start_time) + wander_phase);
    pulse += normal(rng, 0.01 * ns);
    gsr_noise = 0.98 * gsr_noise + normal(rng, 0.005 * ns);
    PhysioSample s;
    s.timestamp = t + offsets.physio;
    s.ppg = 2000.0 + 1000.0 * pulse;
    s.gsr = sp.gsr_level_us + gsr_slope * (t - start_time) + gsr_noise;
    if (missing(rng)) {
      s.gsr = std::numeric_limits<double>::quiet_NaN();
    }
    out.physio.push_back(s);
  }
  return out;
}

double expected_performance(double delay, const SimProfile& p, control::TaskType task) {
  const double skill = p.skill + (task == control::TaskType::Dual ? p.dual_task_penalty : 0.0);
  return 1.0 / (1.0 + std::exp(-(delay - skill) / p.width));
}

double simulate_performance(double delay, const SimProfile& p, control::TaskType task, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double raw = expected_performance(delay, p, task) + normal(rng, p.performance_noise);
  return std::clamp(raw, 0.0, 1.0);
}

LoadLabel simulate_rating(const control::LevelResult& result, const RatingPolicy& policy) {
  const double score = policy.kind == RatingPolicy::Kind::BiasedRaw ? result.raw_score : result.weighted_score;
  if (score >= policy.high) {
    return LoadLabel::TooEasy;
  }
  if (score < policy.low) {
    return LoadLabel::TooDifficult;
  }
  return LoadLabel::JustRight;
}

SimulatedExecutor::SimulatedExecutor(SimProfile profile, control::TaskType task, std::uint64_t seed,
                                     bool with_signals)
    : profile_(std::move(profile)), task_(task), seed_(seed), with_signals_(with_signals) {}

control::LevelOutcome SimulatedExecutor::execute(const control::LevelPlan& plan) {
  const std::uint64_t level_seed = derive_seed(seed_, static_cast<std::uint64_t>(plan.level_index), 17);
  const double raw = simulate_performance(plan.delay_tenths / 10.0, profile_, task_, derive_seed(level_seed, 1));
  std::mt19937_64 rng(derive_seed(level_seed, 2));

  control::LevelOutcome outcome;
  std::vector<int> ids;
  for (const control::Spawn& s : plan.spawns) {
    ids.push_back(s.id);
  }
  std::shuffle(ids.begin(), ids.end(), rng);
  const auto destroyed = static_cast<std::size_t>(std::llround(raw * static_cast<double>(ids.size())));
  outcome.destroyed_ids.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(destroyed));
  std::sort(outcome.destroyed_ids.begin(), outcome.destroyed_ids.end());
  if (!plan.digits.empty()) {
    std::bernoulli_distribution correct(profile_.arithmetic_accuracy);
    std::uniform_int_distribution<int> slip(1, 3);
    outcome.arithmetic_answer = plan.digit_sum() + (correct(rng) ? 0 : slip(rng));
  }

  const control::LevelResult scored = control::score_level(plan, outcome.destroyed_ids, outcome.arithmetic_answer);
  const LoadLabel truth = simulate_rating(scored, RatingPolicy::oracle_weighted());
  true_labels_.push_back(truth);

  if (with_signals_) {
    for (int attempt = 0; attempt < kExtractionAttempts; ++attempt) {
      const double gap = load_gap_center(truth) + normal(rng, profile_.gap_spread);
      const GeneratedSignals sig =
          generate_signals(profile_, gap, kLevelSeconds, derive_seed(level_seed, 3, static_cast<std::uint64_t>(attempt)));
      try {
        FeatureSequence seq = windowing::build_feature_sequence(sig.gaze, sig.physio, {0.0, kLevelSeconds});
        seq.participant_id = profile_.id;
        seq.level_id = plan.level_index;
        seq.label = truth;
        outcome.features = std::move(seq);
        break;
      } catch (const Error&) {
        if (attempt + 1 == kExtractionAttempts) {
          throw;
        }
      }
    }
  }
  return outcome;
}

control::Rating PolicyRater::rate(const control::RatingContext& context) {
  return {simulate_rating(context.result, policy_), std::nullopt};
}

Dataset generate_dataset(const std::vector<SimProfile>& profiles, int levels_per_class, std::uint64_t seed) {
  Dataset data;
  for (const SimProfile& p : profiles) {
    std::mt19937_64 rng(derive_seed(seed, p.seed, 5));
    int level = 0;
    for (int rep = 0; rep < levels_per_class; ++rep) {
      for (int c = 0; c < kNumClasses; ++c, ++level) {
        const auto label = static_cast<LoadLabel>(c);
        for (int attempt = 0;; ++attempt) {
          const double gap = load_gap_center(label) + normal(rng, p.gap_spread);
          const GeneratedSignals sig = generate_signals(p, gap, kLevelSeconds, rng());
          try {
            FeatureSequence seq = windowing::build_feature_sequence(sig.gaze, sig.physio, {0.0, kLevelSeconds});
            seq.participant_id = p.id;
            seq.level_id = level;
            seq.condition = {"self", "single"};
            seq.label = label;
            data.push_back(std::move(seq));
            break;
          } catch (const Error&) {
            if (attempt + 1 >= kExtractionAttempts) {
              throw;
            }
          }
        }
      }
    }
  }
  return data;
}

void write_recording(std::ostream& out, const RecordingConfig& config) {
  // Level labels follow an oracle-guided session so the recording resembles
  // a plausible closed-loop run.
  SimulatedExecutor executor(config.profile, config.task, config.seed, false);
  PolicyRater oracle(RatingPolicy::oracle_weighted(), control::RatingSource::Oracle);
  control::SessionConfig sc;
  sc.participant_id = config.profile.id;
  sc.task = config.task;
  sc.levels = config.levels;
  sc.seed = config.seed;
  const control::SessionLog log = control::run_session(sc, executor, oracle);

  struct Pending {
    double t;
    int priority;  // events, then echoes, then samples at equal times
    hub::StreamMessage msg;
  };
  std::vector<Pending> pending;
  auto event = [&](double t, const std::string& kind, int level) {
    pending.push_back({t, 0, message(hub::StreamId::Event, t, hub::LevelEvent{kind, level})});
    if (kind != "session_end") {
      const double tg = t + config.offsets.gaze;
      const double tp = t + config.offsets.physio;
      pending.push_back({tg, 1, message(hub::StreamId::Gaze, tg, hub::Echo{kind, level})});
      pending.push_back({tp, 1, message(hub::StreamId::Physio, tp, hub::Echo{kind, level})});
    }
  };
  std::mt19937_64 rng(derive_seed(config.seed, 0xEC0));
  double t0 = 0.0;
  for (std::size_t level = 0; level < log.levels.size(); ++level) {
    const LoadLabel truth = executor.true_labels()[level];
    const double gap = load_gap_center(truth) + normal(rng, config.profile.gap_spread);
    const GeneratedSignals sig =
        generate_signals(config.profile, gap, kLevelSeconds, derive_seed(config.seed, level, 0x5E), t0, config.offsets);
    const int id = static_cast<int>(level);
    event(t0, "level_start", id);
    for (const GazeSample& g : sig.gaze) {
      pending.push_back({g.timestamp, 2, message(hub::StreamId::Gaze, g.timestamp, g)});
    }
    for (const PhysioSample& p : sig.physio) {
      pending.push_back({p.timestamp, 2, message(hub::StreamId::Physio, p.timestamp, p)});
    }
    event(t0 + kLevelSeconds, "level_end", id);
    t0 += kLevelSeconds + config.break_seconds;
  }
  event(t0 - config.break_seconds + 1.0, "session_end", -1);
  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    return a.t != b.t ? a.t < b.t : a.priority < b.priority;
  });
  std::array<std::uint64_t, 3> seq{};
  for (Pending& p : pending) {
    p.msg.seq = seq[static_cast<std::size_t>(p.msg.stream)]++;
    out << hub::encode(p.msg) << '\n';
  }
}

}  // namespace cogload::sim
