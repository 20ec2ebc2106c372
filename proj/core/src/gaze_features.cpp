#include "cogload/gaze_features.hpp"

#include "cogload/error.hpp"
#include "cogload/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace cogload::gaze {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_monotonic(std::span<const GazeSample> raw) {
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (!(raw[i].timestamp > raw[i - 1].timestamp)) {
      throw Error(ErrorCode::NonMonotonicTimestamps,
                  "gaze-features: timestamp at index " + std::to_string(i) + " does not increase");
    }
  }
}

std::vector<double> timestamps_of(std::span<const GazeSample> raw) {
  std::vector<double> t(raw.size());
  std::transform(raw.begin(), raw.end(), t.begin(), [](const GazeSample& s) { return s.timestamp; });
  return t;
}

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (n <= 0.0) {
    return {0.0, 0.0, 1.0};
  }
  return {v[0] / n, v[1] / n, v[2] / n};
}

Vec3 binocular_direction(const GazeSample& s) {
  if (s.valid_left && !s.valid_right) {
    return s.dir_left;
  }
  if (s.valid_right && !s.valid_left) {
    return s.dir_right;
  }
  return {0.5 * (s.dir_left[0] + s.dir_right[0]), 0.5 * (s.dir_left[1] + s.dir_right[1]),
          0.5 * (s.dir_left[2] + s.dir_right[2])};
}

// Mean pupil over eyes that are valid and report a positive diameter; NaN when none do.
double binocular_pupil(const GazeSample& s) {
  const bool left = s.valid_left && s.pupil_left > 0.0;
  const bool right = s.valid_right && s.pupil_right > 0.0;
  if (left && right) {
    return 0.5 * (s.pupil_left + s.pupil_right);
  }
  if (left) {
    return s.pupil_left;
  }
  if (right) {
    return s.pupil_right;
  }
  return kNaN;
}

double binocular_openness(const GazeSample& s) {
  if (s.valid_left && s.valid_right) {
    return 0.5 * (s.openness_left + s.openness_right);
  }
  if (s.valid_left) {
    return s.openness_left;
  }
  if (s.valid_right) {
    return s.openness_right;
  }
  return 0.0;
}

double lerp(double a, double b, double w) { return a + (b - a) * w; }

Vec3 lerp(const Vec3& a, const Vec3& b, double w) {
  return {lerp(a[0], b[0], w), lerp(a[1], b[1], w), lerp(a[2], b[2], w)};
}

// Per-eye anchor values, borrowing the other eye when one is invalid.
struct Anchor {
  Vec3 dir_left;
  Vec3 dir_right;
  double pupil_left;
  double pupil_right;
};

Anchor anchor_of(const GazeSample& s) {
  Anchor a{s.dir_left, s.dir_right, s.pupil_left, s.pupil_right};
  if (!s.valid_left && s.valid_right) {
    a.dir_left = s.dir_right;
    a.pupil_left = s.pupil_right;
  }
  if (!s.valid_right && s.valid_left) {
    a.dir_right = s.dir_left;
    a.pupil_right = s.pupil_left;
  }
  return a;
}

double normal_log_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

}  // namespace

SmoothedGazeSeries preprocess_gaze(std::span<const GazeSample> raw) {
  if (raw.size() < static_cast<std::size_t>(kSavgolWindow)) {
    throw Error(ErrorCode::SeriesTooShort, "gaze-features: preprocess needs at least " +
                                               std::to_string(kSavgolWindow) + " samples, got " +
                                               std::to_string(raw.size()));
  }
  require_monotonic(raw);

  const std::size_t n = raw.size();
  SmoothedGazeSeries out;
  out.timestamp = timestamps_of(raw);
  out.pupil.resize(n);
  std::array<std::vector<double>, 3> comp;
  for (auto& c : comp) {
    c.resize(n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = normalized(binocular_direction(raw[i]));
    for (int k = 0; k < 3; ++k) {
      comp[static_cast<std::size_t>(k)][i] = d[static_cast<std::size_t>(k)];
    }
    double p = binocular_pupil(raw[i]);
    if (std::isnan(p)) {
      p = 0.5 * (raw[i].pupil_left + raw[i].pupil_right);
    }
    out.pupil[i] = p;
  }
  for (auto& c : comp) {
    c = signal::savgol_smooth(c, kSavgolWindow, kSavgolOrder);
  }
  out.dir.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.dir[i] = normalized({comp[0][i], comp[1][i], comp[2][i]});
  }
  return out;
}

std::size_t blink_margin_samples(double sample_rate) {
  return static_cast<std::size_t>(std::ceil(kBlinkMarginSeconds * sample_rate - 1e-9));
}

BlinkResult detect_and_interpolate_blinks(std::span<const GazeSample> raw) {
  if (raw.size() < 2) {
    throw Error(ErrorCode::SeriesTooShort, "gaze-features: blink detection needs at least 2 samples");
  }
  require_monotonic(raw);
  const std::size_t n = raw.size();
  const double fs = signal::estimate_rate(timestamps_of(raw));

  std::vector<double> pupil(n);
  std::vector<bool> closed(n);
  for (std::size_t i = 0; i < n; ++i) {
    pupil[i] = binocular_pupil(raw[i]);
    closed[i] = binocular_openness(raw[i]) < kBlinkOpennessThreshold;
  }

  // Rolling pupil statistics over a centered 100 ms window of open-eye samples.
  const auto window = static_cast<std::size_t>(std::max<long long>(3, std::llround(kBlinkRollingSeconds * fs)));
  const std::size_t half = window / 2;
  std::vector<bool> dropout(n, false);
  std::vector<double> local;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(pupil[i])) {
      dropout[i] = true;
      continue;
    }
    if (closed[i]) {
      continue;
    }
    local.clear();
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    for (std::size_t j = lo; j <= hi; ++j) {
      if (!closed[j] && !std::isnan(pupil[j])) {
        local.push_back(pupil[j]);
      }
    }
    if (local.size() < 3) {
      continue;
    }
    const double m = signal::mean(local);
    const double sd = signal::population_std(local);
    if (sd > 0.0 && std::abs(pupil[i] - m) > kBlinkPupilZ * sd) {
      dropout[i] = true;
    }
  }

  // Maximal flagged runs, extended by the margin, then merged.
  const std::size_t margin = blink_margin_samples(fs);
  std::vector<BlinkEvent> events;
  std::size_t i = 0;
  while (i < n) {
    if (!closed[i] && !dropout[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    bool by_openness = false;
    while (j < n && (closed[j] || dropout[j])) {
      by_openness = by_openness || closed[j];
      ++j;
    }
    BlinkEvent ev;
    ev.start_index = i >= margin ? i - margin : 0;
    ev.end_index = std::min(n - 1, j - 1 + margin);
    ev.cause = by_openness ? BlinkCause::OpennessThreshold : BlinkCause::PupilDropout;
    if (!events.empty() && ev.start_index <= events.back().end_index + 1) {
      BlinkEvent& last = events.back();
      last.end_index = std::max(last.end_index, ev.end_index);
      if (ev.cause == BlinkCause::OpennessThreshold) {
        last.cause = BlinkCause::OpennessThreshold;
      }
    } else {
      events.push_back(ev);
    }
    i = j;
  }

  BlinkResult result;
  result.cleaned.assign(raw.begin(), raw.end());
  for (const BlinkEvent& ev : events) {
    const bool has_left = ev.start_index > 0;
    const bool has_right = ev.end_index + 1 < n;
    if (!has_left && !has_right) {
      throw Error(ErrorCode::AllSamplesBlinking, "gaze-features: no valid anchor samples remain");
    }
    const Anchor a = anchor_of(raw[has_left ? ev.start_index - 1 : ev.end_index + 1]);
    const Anchor b = anchor_of(raw[has_right ? ev.end_index + 1 : ev.start_index - 1]);
    const double ta = has_left ? raw[ev.start_index - 1].timestamp : raw[ev.end_index + 1].timestamp;
    const double tb = has_right ? raw[ev.end_index + 1].timestamp : ta;
    for (std::size_t k = ev.start_index; k <= ev.end_index; ++k) {
      GazeSample& s = result.cleaned[k];
      const double w = tb > ta ? (s.timestamp - ta) / (tb - ta) : 0.0;
      s.dir_left = lerp(a.dir_left, b.dir_left, w);
      s.dir_right = lerp(a.dir_right, b.dir_right, w);
      s.pupil_left = lerp(a.pupil_left, b.pupil_left, w);
      s.pupil_right = lerp(a.pupil_right, b.pupil_right, w);
      s.valid_left = true;
      s.valid_right = true;
    }
  }
  result.events = std::move(events);
  return result;
}

KinematicsSeries compute_kinematics(const SmoothedGazeSeries& smoothed) {
  const std::size_t n = smoothed.size();
  if (n < 3) {
    throw Error(ErrorCode::SeriesTooShort, "gaze-features: kinematics needs at least 3 samples");
  }
  KinematicsSeries kin;
  kin.sampling_rate = signal::estimate_rate(smoothed.timestamp);
  kin.dx.resize(n - 1);
  kin.dy.resize(n - 1);
  kin.velocity.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    kin.dx[i] = smoothed.dir[i + 1][0] - smoothed.dir[i][0];
    kin.dy[i] = smoothed.dir[i + 1][1] - smoothed.dir[i][1];
    kin.velocity[i] = std::sqrt(kin.dx[i] * kin.dx[i] + kin.dy[i] * kin.dy[i]) * kin.sampling_rate;
  }
  kin.acceleration.resize(n - 2);
  for (std::size_t i = 0; i + 2 < n; ++i) {
    kin.acceleration[i] = (kin.velocity[i + 1] - kin.velocity[i]) * kin.sampling_rate;
  }
  return kin;
}

GaussianHmm fit_hmm(std::span<const double> obs, int max_iterations, double tolerance) {
  const std::size_t n = obs.size();
  GaussianHmm hmm;
  if (n < 2) {
    throw Error(ErrorCode::SeriesTooShort, "gaze-features: HMM needs at least 2 observations");
  }

  std::vector<int> split(n);
  const double med = signal::median({obs.begin(), obs.end()});
  double threshold = med;
  std::size_t above = static_cast<std::size_t>(std::count_if(obs.begin(), obs.end(), [&](double v) { return v > med; }));
  if (above == 0) {
    threshold = signal::mean(obs);
    above = static_cast<std::size_t>(std::count_if(obs.begin(), obs.end(), [&](double v) { return v > threshold; }));
  }
  if (above == 0 || above == n) {
    throw Error(ErrorCode::SeriesTooShort, "gaze-features: HMM observations have no spread");
  }
  for (std::size_t i = 0; i < n; ++i) {
    split[i] = obs[i] > threshold ? 1 : 0;
  }

  const double var_floor = std::max(1e-12, 1e-6 * signal::population_std(obs) * signal::population_std(obs));
  std::array<double, 2> sum{}, sum2{}, cnt{};
  std::array<std::array<double, 2>, 2> trans_counts{{{1.0, 1.0}, {1.0, 1.0}}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = static_cast<std::size_t>(split[i]);
    sum[s] += obs[i];
    sum2[s] += obs[i] * obs[i];
    cnt[s] += 1.0;
    if (i + 1 < n) {
      trans_counts[s][static_cast<std::size_t>(split[i + 1])] += 1.0;
    }
  }
  for (std::size_t s = 0; s < 2; ++s) {
    hmm.mean[s] = sum[s] / cnt[s];
    hmm.var[s] = std::max(var_floor, sum2[s] / cnt[s] - hmm.mean[s] * hmm.mean[s]);
    const double row = trans_counts[s][0] + trans_counts[s][1];
    hmm.transition[s] = {trans_counts[s][0] / row, trans_counts[s][1] / row};
  }
  hmm.initial = {0.5, 0.5};

  std::vector<std::array<double, 2>> alpha(n), beta(n), emit(n);
  std::vector<double> scale(n);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iterations; ++iter) {
    // Emissions normalized per step; the removed maximum is folded into the likelihood.
    double ll = 0.0;
    std::vector<double> emit_shift(n);
    for (std::size_t t = 0; t < n; ++t) {
      const double l0 = normal_log_pdf(obs[t], hmm.mean[0], hmm.var[0]);
      const double l1 = normal_log_pdf(obs[t], hmm.mean[1], hmm.var[1]);
      const double m = std::max(l0, l1);
      emit[t] = {std::exp(l0 - m), std::exp(l1 - m)};
      emit_shift[t] = m;
    }
    for (std::size_t s = 0; s < 2; ++s) {
      alpha[0][s] = hmm.initial[s] * emit[0][s];
    }
    scale[0] = alpha[0][0] + alpha[0][1];
    alpha[0][0] /= scale[0];
    alpha[0][1] /= scale[0];
    for (std::size_t t = 1; t < n; ++t) {
      for (std::size_t s = 0; s < 2; ++s) {
        alpha[t][s] = (alpha[t - 1][0] * hmm.transition[0][s] + alpha[t - 1][1] * hmm.transition[1][s]) * emit[t][s];
      }
      scale[t] = alpha[t][0] + alpha[t][1];
      alpha[t][0] /= scale[t];
      alpha[t][1] /= scale[t];
    }
    for (std::size_t t = 0; t < n; ++t) {
      ll += std::log(scale[t]) + emit_shift[t];
    }
    beta[n - 1] = {1.0, 1.0};
    for (std::size_t t = n - 1; t-- > 0;) {
      for (std::size_t s = 0; s < 2; ++s) {
        beta[t][s] = (hmm.transition[s][0] * emit[t + 1][0] * beta[t + 1][0] +
                      hmm.transition[s][1] * emit[t + 1][1] * beta[t + 1][1]) /
                     scale[t + 1];
      }
    }

    std::array<double, 2> g_sum{}, g_obs{}, g_obs2{}, g_trans_from{};
    std::array<std::array<double, 2>, 2> xi_sum{};
    for (std::size_t t = 0; t < n; ++t) {
      const double g0 = alpha[t][0] * beta[t][0];
      const double g1 = alpha[t][1] * beta[t][1];
      const double gn = g0 + g1;
      const std::array<double, 2> g{g0 / gn, g1 / gn};
      if (t == 0) {
        hmm.initial = g;
      }
      for (std::size_t s = 0; s < 2; ++s) {
        g_sum[s] += g[s];
        g_obs[s] += g[s] * obs[t];
        if (t + 1 < n) {
          g_trans_from[s] += g[s];
        }
      }
      if (t + 1 < n) {
        for (std::size_t a = 0; a < 2; ++a) {
          for (std::size_t b = 0; b < 2; ++b) {
            xi_sum[a][b] += alpha[t][a] * hmm.transition[a][b] * emit[t + 1][b] * beta[t + 1][b] / scale[t + 1];
          }
        }
      }
    }
    for (std::size_t s = 0; s < 2; ++s) {
      if (g_sum[s] <= 0.0) {
        continue;
      }
      hmm.mean[s] = g_obs[s] / g_sum[s];
    }
    for (std::size_t t = 0; t < n; ++t) {
      const double g0 = alpha[t][0] * beta[t][0];
      const double g1 = alpha[t][1] * beta[t][1];
      const double gn = g0 + g1;
      g_obs2[0] += g0 / gn * (obs[t] - hmm.mean[0]) * (obs[t] - hmm.mean[0]);
      g_obs2[1] += g1 / gn * (obs[t] - hmm.mean[1]) * (obs[t] - hmm.mean[1]);
    }
    for (std::size_t s = 0; s < 2; ++s) {
      if (g_sum[s] > 0.0) {
        hmm.var[s] = std::max(var_floor, g_obs2[s] / g_sum[s]);
      }
      const double row = xi_sum[s][0] + xi_sum[s][1];
      if (row > 0.0) {
        hmm.transition[s] = {xi_sum[s][0] / row, xi_sum[s][1] / row};
      }
    }
    if (std::abs(ll - prev_ll) < tolerance) {
      break;
    }
    prev_ll = ll;
  }

  if (hmm.mean[0] > hmm.mean[1]) {
    std::swap(hmm.mean[0], hmm.mean[1]);
    std::swap(hmm.var[0], hmm.var[1]);
    std::swap(hmm.initial[0], hmm.initial[1]);
    const auto t = hmm.transition;
    hmm.transition = {{{t[1][1], t[1][0]}, {t[0][1], t[0][0]}}};
  }
  return hmm;
}

std::vector<int> viterbi(const GaussianHmm& hmm, std::span<const double> obs) {
  const std::size_t n = obs.size();
  if (n == 0) {
    return {};
  }
  auto safe_log = [](double p) { return p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity(); };
  const std::array<std::array<double, 2>, 2> log_a{{{safe_log(hmm.transition[0][0]), safe_log(hmm.transition[0][1])},
                                                    {safe_log(hmm.transition[1][0]), safe_log(hmm.transition[1][1])}}};
  std::vector<std::array<int, 2>> back(n);
  std::array<double, 2> score{};
  for (std::size_t s = 0; s < 2; ++s) {
    score[s] = safe_log(hmm.initial[s]) + normal_log_pdf(obs[0], hmm.mean[s], hmm.var[s]);
  }
  for (std::size_t t = 1; t < n; ++t) {
    std::array<double, 2> next{};
    for (std::size_t s = 0; s < 2; ++s) {
      const double from0 = score[0] + log_a[0][s];
      const double from1 = score[1] + log_a[1][s];
      const int arg = from1 > from0 ? 1 : 0;
      back[t][s] = arg;
      next[s] = std::max(from0, from1) + normal_log_pdf(obs[t], hmm.mean[s], hmm.var[s]);
    }
    score = next;
  }
  std::vector<int> path(n);
  path[n - 1] = score[1] > score[0] ? 1 : 0;
  for (std::size_t t = n - 1; t > 0; --t) {
    path[t - 1] = back[t][static_cast<std::size_t>(path[t])];
  }
  return path;
}

std::vector<MovementRun> MovementSegmentation::runs() const {
  std::vector<MovementRun> out;
  for (std::size_t i = 0; i < state_per_sample.size(); ++i) {
    if (out.empty() || out.back().state != state_per_sample[i]) {
      out.push_back({state_per_sample[i], i, i});
    } else {
      out.back().end = i;
    }
  }
  return out;
}

MovementSegmentation segment_movements(const KinematicsSeries& kin) {
  MovementSegmentation seg;
  const std::size_t n = kin.velocity.size();
  const double sd = signal::population_std(kin.velocity);
  const double scale = std::max(1.0, std::abs(signal::mean(kin.velocity)));
  if (n < kHmmMinSamples || sd <= 1e-9 * scale) {
    // DegenerateVelocity: everything is fixation.
    seg.degenerate = true;
    seg.state_per_sample.assign(n, 0);
    return seg;
  }
  try {
    seg.hmm = fit_hmm(kin.velocity);
  } catch (const Error&) {
    seg.degenerate = true;
    seg.state_per_sample.assign(n, 0);
    return seg;
  }
  seg.state_per_sample = viterbi(seg.hmm, kin.velocity);
  return seg;
}

std::vector<double> filter_pupil(std::span<const double> pupil, double sample_rate) {
  if (pupil.size() < 12 || sample_rate <= 2.0 * kPupilCutoffHz) {
    return {pupil.begin(), pupil.end()};
  }
  const signal::ButterworthLowpass lp(kPupilFilterOrder, kPupilCutoffHz, sample_rate);
  return lp.filtfilt(pupil);
}

PupilMetrics extract_pupil_metrics(std::span<const double> timestamps, std::span<const double> pupil) {
  if (pupil.empty() || timestamps.size() != pupil.size()) {
    throw Error(ErrorCode::EmptyWindow, "gaze-features: empty or misaligned pupil window");
  }
  const std::vector<double> p = filter_pupil(pupil, signal::estimate_rate(timestamps));
  PupilMetrics m;
  m.mean = signal::mean(p);
  m.std = signal::population_std(p);
  const auto [lo, hi] = std::minmax_element(p.begin(), p.end());
  m.range = *hi - *lo;
  m.slope = signal::linear_slope(timestamps, p);
  double pos = 0.0;
  double neg = 0.0;
  std::size_t npos = 0;
  std::size_t nneg = 0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    const double dt = timestamps[i + 1] - timestamps[i];
    if (dt <= 0.0) {
      continue;
    }
    const double d = (p[i + 1] - p[i]) / dt;
    if (d > 0.0) {
      pos += d;
      ++npos;
    } else if (d < 0.0) {
      neg += -d;
      ++nneg;
    }
  }
  m.dilation_velocity = npos > 0 ? pos / static_cast<double>(npos) : 0.0;
  m.constriction_velocity = nneg > 0 ? neg / static_cast<double>(nneg) : 0.0;
  return m;
}

std::array<double, kGazeFeatureCount> GazeFeatureSet::to_array() const {
  return {blink_count,
          blink_rate,
          fixation_count,
          fixation_duration_mean,
          fixation_duration_std,
          saccade_count,
          saccade_amplitude_mean,
          saccade_amplitude_std,
          saccade_fixation_ratio,
          saccade_peak_velocity,
          saccade_peak_velocity_normalized,
          saccade_accel_mean,
          saccade_decel_mean,
          saccade_velocity_variability,
          saccade_accel_decel_ratio,
          pupil_mean,
          pupil_std,
          pupil_range,
          pupil_slope,
          pupil_constriction_velocity,
          pupil_dilation_velocity};
}

GazeFeatureSet extract_gaze_features(const SmoothedGazeSeries& cleaned, std::span<const BlinkEvent> events,
                                     const MovementSegmentation& segmentation, const KinematicsSeries& kin,
                                     double window_seconds) {
  GazeFeatureSet f;
  f.blink_count = static_cast<double>(events.size());
  f.blink_rate = window_seconds > 0.0 ? f.blink_count * 60.0 / window_seconds : 0.0;

  const double fs = kin.sampling_rate;
  std::vector<double> fix_durations;
  std::vector<double> amplitudes;
  std::vector<double> peaks;
  std::vector<double> saccade_velocities;
  double accel_sum = 0.0;
  double decel_sum = 0.0;
  std::size_t accel_n = 0;
  std::size_t decel_n = 0;
  for (const MovementRun& run : segmentation.runs()) {
    const auto len = static_cast<double>(run.end - run.start + 1);
    if (run.state == 0) {
      fix_durations.push_back(fs > 0.0 ? len / fs : 0.0);
      continue;
    }
    double path = 0.0;
    double peak = 0.0;
    for (std::size_t j = run.start; j <= run.end; ++j) {
      path += fs > 0.0 ? kin.velocity[j] / fs : 0.0;
      peak = std::max(peak, kin.velocity[j]);
      saccade_velocities.push_back(kin.velocity[j]);
    }
    amplitudes.push_back(path);
    peaks.push_back(peak);
    // Acceleration entries spanning onset through offset of the run.
    if (!kin.acceleration.empty()) {
      const std::size_t lo = run.start > 0 ? run.start - 1 : 0;
      const std::size_t hi = std::min(run.end, kin.acceleration.size() - 1);
      for (std::size_t j = lo; j <= hi; ++j) {
        const double a = kin.acceleration[j];
        if (a > 0.0) {
          accel_sum += a;
          ++accel_n;
        } else if (a < 0.0) {
          decel_sum += -a;
          ++decel_n;
        }
      }
    }
  }

  f.fixation_count = static_cast<double>(fix_durations.size());
  f.fixation_duration_mean = signal::mean(fix_durations);
  f.fixation_duration_std = signal::population_std(fix_durations);
  f.saccade_count = static_cast<double>(amplitudes.size());
  f.saccade_amplitude_mean = signal::mean(amplitudes);
  f.saccade_amplitude_std = signal::population_std(amplitudes);
  f.saccade_fixation_ratio = f.fixation_count > 0.0 ? f.saccade_count / f.fixation_count : 0.0;
  f.saccade_peak_velocity = signal::mean(peaks);

  if (peaks.size() == 1) {
    f.saccade_peak_velocity_normalized = 1.0;
  } else if (peaks.size() >= 2) {
    // Main-sequence fit log(peak) = a + b log(amplitude) over this window's saccades.
    std::vector<double> lx;
    std::vector<double> ly;
    for (std::size_t k = 0; k < peaks.size(); ++k) {
      if (amplitudes[k] > 0.0 && peaks[k] > 0.0) {
        lx.push_back(std::log(amplitudes[k]));
        ly.push_back(std::log(peaks[k]));
      }
    }
    if (lx.size() < 2) {
      f.saccade_peak_velocity_normalized = 1.0;
    } else {
      const double b = signal::linear_slope(lx, ly);
      const double a = signal::mean(ly) - b * signal::mean(lx);
      double acc = 0.0;
      for (std::size_t k = 0; k < lx.size(); ++k) {
        acc += std::exp(ly[k] - (a + b * lx[k]));
      }
      f.saccade_peak_velocity_normalized = acc / static_cast<double>(lx.size());
    }
  }

  f.saccade_accel_mean = accel_n > 0 ? accel_sum / static_cast<double>(accel_n) : 0.0;
  f.saccade_decel_mean = decel_n > 0 ? decel_sum / static_cast<double>(decel_n) : 0.0;
  f.saccade_velocity_variability = signal::population_std(saccade_velocities);
  f.saccade_accel_decel_ratio = f.saccade_decel_mean > 0.0 ? f.saccade_accel_mean / f.saccade_decel_mean : 0.0;

  const PupilMetrics pm = extract_pupil_metrics(cleaned.timestamp, cleaned.pupil);
  f.pupil_mean = pm.mean;
  f.pupil_std = pm.std;
  f.pupil_range = pm.range;
  f.pupil_slope = pm.slope;
  f.pupil_constriction_velocity = pm.constriction_velocity;
  f.pupil_dilation_velocity = pm.dilation_velocity;
  return f;
}

GazeFeatureSet gaze_features_for_window(std::span<const GazeSample> raw, double window_seconds) {
  const BlinkResult blinks = detect_and_interpolate_blinks(raw);
  const SmoothedGazeSeries smoothed = preprocess_gaze(blinks.cleaned);
  const KinematicsSeries kin = compute_kinematics(smoothed);
  const MovementSegmentation seg = segment_movements(kin);
  return extract_gaze_features(smoothed, blinks.events, seg, kin, window_seconds);
}

}  // namespace cogload::gaze
