#include "cogload/physio_features.hpp"

#include "cogload/error.hpp"
#include "cogload/signal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cogload::physio {
namespace {

constexpr std::array<double, 18> kThresholdRaisePercent = {5,  10, 15, 20, 25,  30,  40,  50,  60,
                                                           70, 80, 90, 100, 110, 120, 150, 200, 300};
constexpr double kMinPlausibleBpm = 40.0;
constexpr double kMaxPlausibleBpm = 180.0;
constexpr std::size_t kRrMedianWindow = 11;

bool is_flat(std::span<const double> x) {
  if (x.empty()) {
    return true;
  }
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double scale = std::max(1.0, std::max(std::abs(*lo), std::abs(*hi)));
  return (*hi - *lo) <= 1e-9 * scale;
}

std::vector<double> centered_moving_average(std::span<const double> x, std::size_t window) {
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + x[i];
  }
  const std::size_t half = window / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

std::vector<std::size_t> peaks_above(std::span<const double> x, std::span<const double> threshold) {
  std::vector<std::size_t> peaks;
  std::size_t i = 0;
  const std::size_t n = x.size();
  while (i < n) {
    if (x[i] <= threshold[i]) {
      ++i;
      continue;
    }
    std::size_t best = i;
    while (i < n && x[i] > threshold[i]) {
      if (x[i] > x[best]) {
        best = i;
      }
      ++i;
    }
    peaks.push_back(best);
  }
  return peaks;
}

double refined_position(std::span<const double> x, std::size_t i) {
  if (i == 0 || i + 1 >= x.size()) {
    return static_cast<double>(i);
  }
  const double denom = x[i - 1] - 2.0 * x[i] + x[i + 1];
  if (denom >= 0.0) {
    return static_cast<double>(i);
  }
  const double offset = 0.5 * (x[i - 1] - x[i + 1]) / denom;
  return static_cast<double>(i) + std::clamp(offset, -0.5, 0.5);
}

}  // namespace

std::vector<double> lowpass_ppg(std::span<const double> ppg, double sample_rate) {
  if (sample_rate <= 0.0 || static_cast<double>(ppg.size()) < 2.0 * sample_rate) {
    throw Error(ErrorCode::SeriesTooShort, "physio-features: PPG filtering needs at least 2 s of samples");
  }
  const signal::ButterworthLowpass lp(kPpgFilterOrder, kPpgCutoffHz, sample_rate);
  return lp.filtfilt(ppg);
}

std::vector<double> scale_to_range(std::span<const double> x) {
  if (is_flat(x)) {
    return {x.begin(), x.end()};
  }
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const double lo_v = *lo;
  const double span = *hi - *lo;
  std::vector<double> y(x.size());
  std::transform(x.begin(), x.end(), y.begin(), [&](double v) { return (v - lo_v) / span * kEnhanceScale; });
  return y;
}

std::vector<double> filter_ppg(std::span<const double> ppg, double sample_rate) {
  std::vector<double> y = lowpass_ppg(ppg, sample_rate);
  if (is_flat(y)) {
    return y;
  }
  y = scale_to_range(y);
  for (int pass = 0; pass < kPeakEnhancePasses; ++pass) {
    for (double& v : y) {
      v = v * v;
    }
    y = scale_to_range(y);
  }
  return y;
}

RrIntervals detect_beats(std::span<const double> filtered, double sample_rate) {
  if (filtered.size() < 3 || sample_rate <= 0.0 || is_flat(filtered)) {
    throw Error(ErrorCode::NoBeatsDetected, "physio-features: signal is flat");
  }
  const double duration = static_cast<double>(filtered.size()) / sample_rate;
  const auto window = static_cast<std::size_t>(std::max<long long>(1, std::llround(kBeatWindowSeconds * sample_rate)));
  const std::vector<double> rolling = centered_moving_average(filtered, window);
  const double level = signal::mean(rolling);

  std::vector<std::size_t> best_peaks;
  double best_sd = std::numeric_limits<double>::infinity();
  std::vector<double> threshold(filtered.size());
  for (double perc : kThresholdRaisePercent) {
    for (std::size_t i = 0; i < filtered.size(); ++i) {
      threshold[i] = rolling[i] + std::abs(level) / 100.0 * perc;
    }
    std::vector<std::size_t> peaks = peaks_above(filtered, threshold);
    if (peaks.size() < 2) {
      continue;
    }
    const double bpm = static_cast<double>(peaks.size()) / duration * 60.0;
    if (bpm < kMinPlausibleBpm || bpm > kMaxPlausibleBpm) {
      continue;
    }
    std::vector<double> rr(peaks.size() - 1);
    for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
      rr[k] = static_cast<double>(peaks[k + 1] - peaks[k]) / sample_rate * 1000.0;
    }
    const double sd = signal::population_std(rr);
    if (sd < best_sd) {
      best_sd = sd;
      best_peaks = std::move(peaks);
    }
  }
  if (best_peaks.size() < 2) {
    throw Error(ErrorCode::NoBeatsDetected, "physio-features: no plausible pulse train found");
  }

  RrIntervals out;
  out.peak_times.reserve(best_peaks.size());
  for (std::size_t p : best_peaks) {
    out.peak_times.push_back(refined_position(filtered, p) / sample_rate);
  }
  std::vector<double> bounded;
  for (std::size_t k = 0; k + 1 < out.peak_times.size(); ++k) {
    const double rr = (out.peak_times[k + 1] - out.peak_times[k]) * 1000.0;
    if (rr > kMinRrMs && rr < kMaxRrMs) {
      bounded.push_back(rr);
    }
  }
  const std::size_t half = kRrMedianWindow / 2;
  for (std::size_t k = 0; k < bounded.size(); ++k) {
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(bounded.size(), k + half + 1);
    const double med = signal::median({bounded.begin() + static_cast<std::ptrdiff_t>(lo),
                                       bounded.begin() + static_cast<std::ptrdiff_t>(hi)});
    if (std::abs(bounded[k] - med) <= kRrMedianTolerance * med) {
      out.ms.push_back(bounded[k]);
    }
  }
  if (out.ms.empty()) {
    throw Error(ErrorCode::NoBeatsDetected, "physio-features: every RR interval was rejected");
  }
  return out;
}

HrvMetrics compute_hrv(std::span<const double> rr_ms) {
  if (rr_ms.size() < 2) {
    throw Error(ErrorCode::InsufficientBeats,
                "physio-features: HRV needs at least 2 intervals, got " + std::to_string(rr_ms.size()));
  }
  HrvMetrics m;
  const double mean_rr = signal::mean(rr_ms);
  m.bpm = 60000.0 / mean_rr;
  m.sdnn = signal::population_std(rr_ms);
  double sq = 0.0;
  std::size_t over = 0;
  for (std::size_t i = 0; i + 1 < rr_ms.size(); ++i) {
    const double d = rr_ms[i + 1] - rr_ms[i];
    sq += d * d;
    if (std::abs(d) > 50.0) {
      ++over;
    }
  }
  const auto diffs = static_cast<double>(rr_ms.size() - 1);
  m.rmssd = std::sqrt(sq / diffs);
  m.pnn50 = 100.0 * static_cast<double>(over) / diffs;
  return m;
}

std::vector<double> fill_gaps(std::span<const double> gsr) {
  std::vector<double> y(gsr.begin(), gsr.end());
  const auto first = std::find_if(y.begin(), y.end(), [](double v) { return !std::isnan(v); });
  if (first == y.end()) {
    throw Error(ErrorCode::AllMissing, "physio-features: every GSR sample is missing");
  }
  double last = *first;
  for (double& v : y) {
    if (std::isnan(v)) {
      v = last;
    } else {
      last = v;
    }
  }
  return y;
}

GsrMetrics compute_gsr_metrics(std::span<const double> timestamps, std::span<const double> gsr) {
  const std::vector<double> y = fill_gaps(gsr);
  GsrMetrics m;
  m.mean = signal::mean(y);
  m.std = signal::population_std(y);
  m.slope = signal::linear_slope(timestamps, y);
  return m;
}

std::array<double, kPhysioFeatureCount> PhysioFeatureSet::to_array() const {
  return {gsr_mean, gsr_std, gsr_slope, bpm, sdnn, rmssd, pnn50};
}

PhysioFeatureSet physio_features_for_window(std::span<const PhysioSample> raw) {
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (!(raw[i].timestamp > raw[i - 1].timestamp)) {
      throw Error(ErrorCode::NonMonotonicTimestamps,
                  "physio-features: timestamp at index " + std::to_string(i) + " does not increase");
    }
  }
  std::vector<double> t(raw.size());
  std::vector<double> ppg(raw.size());
  std::vector<double> gsr(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    t[i] = raw[i].timestamp;
    ppg[i] = raw[i].ppg;
    gsr[i] = raw[i].gsr;
  }
  const double fs = signal::estimate_rate(t);
  const std::vector<double> filtered = filter_ppg(ppg, fs);
  const RrIntervals rr = detect_beats(filtered, fs);
  const HrvMetrics hrv = compute_hrv(rr.ms);
  const GsrMetrics g = compute_gsr_metrics(t, gsr);
  return {g.mean, g.std, g.slope, hrv.bpm, hrv.sdnn, hrv.rmssd, hrv.pnn50};
}

}  // namespace cogload::physio
