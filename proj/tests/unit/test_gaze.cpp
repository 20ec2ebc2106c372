#include "cogload/error.hpp"
#include "cogload/gaze_features.hpp"
#include "cogload/signal.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>

using namespace cogload;
using testutil::gaze_at;

namespace {

double log_normal_pdf(double x, double m, double v) {
  return -0.5 * std::log(2.0 * std::numbers::pi * v) - 0.5 * (x - m) * (x - m) / v;
}

// Exhaustive search over all 2^n state paths.
std::vector<int> brute_force_path(const gaze::GaussianHmm& h, const std::vector<double>& obs) {
  const std::size_t n = obs.size();
  double best = -std::numeric_limits<double>::infinity();
  std::vector<int> best_path;
  for (std::uint32_t code = 0; code < (1u << n); ++code) {
    std::vector<int> path(n);
    for (std::size_t t = 0; t < n; ++t) path[t] = (code >> t) & 1u;
    double lp = std::log(h.initial[path[0]]) + log_normal_pdf(obs[0], h.mean[path[0]], h.var[path[0]]);
    for (std::size_t t = 1; t < n; ++t) {
      lp += std::log(h.transition[path[t - 1]][path[t]]) + log_normal_pdf(obs[t], h.mean[path[t]], h.var[path[t]]);
    }
    if (lp > best) {
      best = lp;
      best_path = path;
    }
  }
  return best_path;
}

struct Interval {
  std::size_t lo, hi;
};

// Union of closed integer intervals, merging overlapping or adjacent ones.
std::vector<Interval> merge_oracle(std::vector<Interval> in) {
  std::sort(in.begin(), in.end(), [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  std::vector<Interval> out;
  for (const Interval& iv : in) {
    if (!out.empty() && iv.lo <= out.back().hi + 1) {
      out.back().hi = std::max(out.back().hi, iv.hi);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

gaze::KinematicsSeries kinematics_from_velocity(const std::vector<double>& v) {
  gaze::KinematicsSeries k;
  k.velocity = v;
  k.dx.assign(v.size(), 0.0);
  k.dy.assign(v.size(), 0.0);
  k.sampling_rate = 90.0;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) k.acceleration.push_back((v[i + 1] - v[i]) * 90.0);
  return k;
}

}  // namespace

TEST(Preprocess, ConstantDirectionUnchanged) {
  const auto raw = testutil::steady_gaze(100);
  const auto s = gaze::preprocess_gaze(raw);
  ASSERT_EQ(s.size(), 100u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(s.dir[i][0], 0.0, 1e-12);
    EXPECT_NEAR(s.dir[i][1], 0.0, 1e-12);
    EXPECT_NEAR(s.dir[i][2], 1.0, 1e-12);
    EXPECT_NEAR(s.pupil[i], 3.5, 1e-12);
  }
}

TEST(Preprocess, EyesAveragedAndNormalized) {
  GazeSeries raw;
  for (int i = 0; i < 30; ++i) {
    GazeSample g = gaze_at(i / 90.0);
    g.dir_left = {1.0, 0.0, 0.0};
    g.dir_right = {0.0, 1.0, 0.0};
    raw.push_back(g);
  }
  const auto s = gaze::preprocess_gaze(raw);
  for (const Vec3& d : s.dir) {
    EXPECT_NEAR(d[0], std::sqrt(0.5), 1e-4);
    EXPECT_NEAR(d[1], std::sqrt(0.5), 1e-4);
    EXPECT_NEAR(d[2], 0.0, 1e-12);
  }
}

TEST(Preprocess, StepMatchesPolynomialFitOracle) {
  // A small step in x keeps directions near unit length; the oracle averages,
  // normalizes, fits each component, and renormalizes.
  GazeSeries raw;
  std::vector<std::array<double, 3>> avg;
  for (int i = 0; i < 60; ++i) {
    const double x = i < 30 ? 0.0 : 0.05;
    const double norm = std::sqrt(x * x + 1.0);
    raw.push_back(gaze_at(i / 90.0, {x / norm, 0.0, 1.0 / norm}));
    avg.push_back({x / norm, 0.0, 1.0 / norm});
  }
  std::array<std::vector<double>, 3> comp;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> col;
    for (const auto& a : avg) col.push_back(a[c]);
    comp[c] = testutil::savgol_oracle(col, 11, 2);
  }
  const auto s = gaze::preprocess_gaze(raw);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double n = std::sqrt(comp[0][i] * comp[0][i] + comp[1][i] * comp[1][i] + comp[2][i] * comp[2][i]);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(s.dir[i][c], comp[c][i] / n, 1e-9) << i;
    EXPECT_NEAR(std::hypot(s.dir[i][0], s.dir[i][1], s.dir[i][2]), 1.0, 1e-6);
  }
}

TEST(Preprocess, Guards) {
  EXPECT_THROW(
      {
        try {
          gaze::preprocess_gaze(testutil::steady_gaze(10));
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), ErrorCode::SeriesTooShort);
          throw;
        }
      },
      Error);
  auto raw = testutil::steady_gaze(20);
  raw[7].timestamp = raw[6].timestamp;
  try {
    gaze::preprocess_gaze(raw);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonMonotonicTimestamps);
  }
}

TEST(Blinks, NoneWhenOpen) {
  const auto raw = testutil::steady_gaze(200);
  const auto r = gaze::detect_and_interpolate_blinks(raw);
  EXPECT_TRUE(r.events.empty());
  for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_EQ(r.cleaned[i].pupil_left, raw[i].pupil_left);
}

TEST(Blinks, DipGetsMarginsAndLinearPupil) {
  GazeSeries raw;
  for (int i = 0; i < 200; ++i) {
    raw.push_back(gaze_at(i / 90.0, {0.0, 0.0, 1.0}, 3.0 + 0.002 * i, (i >= 100 && i < 105) ? 0.5 : 1.0));
  }
  const auto r = gaze::detect_and_interpolate_blinks(raw);
  ASSERT_EQ(r.events.size(), 1u);
  const std::size_t m = gaze::blink_margin_samples(90.0);
  EXPECT_EQ(m, 5u);  // 4.5 samples rounded outward
  EXPECT_EQ(r.events[0].start_index, 100 - m);
  EXPECT_EQ(r.events[0].end_index, 104 + m);
  EXPECT_EQ(r.events[0].cause, gaze::BlinkCause::OpennessThreshold);
  const auto& a = raw[r.events[0].start_index - 1];
  const auto& b = raw[r.events[0].end_index + 1];
  for (std::size_t k = r.events[0].start_index; k <= r.events[0].end_index; ++k) {
    const double w = (raw[k].timestamp - a.timestamp) / (b.timestamp - a.timestamp);
    EXPECT_NEAR(r.cleaned[k].pupil_left, a.pupil_left + w * (b.pupil_left - a.pupil_left), 1e-12);
    EXPECT_GE(r.cleaned[k].pupil_left, a.pupil_left - 1e-12);
    EXPECT_LE(r.cleaned[k].pupil_left, b.pupil_left + 1e-12);
  }
}

TEST(Blinks, MergeMatchesIntervalUnionOracle) {
  const std::size_t m = gaze::blink_margin_samples(90.0);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 400;
    std::vector<bool> closed(n, false);
    std::uniform_int_distribution<std::size_t> pos(20, n - 30), len(1, 6);
    const int dips = 1 + trial % 5;
    for (int d = 0; d < dips; ++d) {
      const std::size_t p = pos(rng), l = len(rng);
      for (std::size_t k = p; k < p + l; ++k) closed[k] = true;
    }
    // Deterministic case: margins exactly touching.
    if (trial == 0) {
      std::fill(closed.begin(), closed.end(), false);
      for (std::size_t k = 100; k < 103; ++k) closed[k] = true;
      for (std::size_t k = 103 + 2 * m; k < 106 + 2 * m; ++k) closed[k] = true;
    }
    GazeSeries raw;
    std::vector<Interval> runs;
    for (std::size_t i = 0; i < n; ++i) {
      raw.push_back(gaze_at(i / 90.0, {0.0, 0.0, 1.0}, 3.5, closed[i] ? 0.2 : 1.0));
      if (closed[i] && (i == 0 || !closed[i - 1])) runs.push_back({i, i});
      if (closed[i]) runs.back().hi = i;
    }
    for (Interval& iv : runs) {
      iv.lo = iv.lo >= m ? iv.lo - m : 0;
      iv.hi = std::min(n - 1, iv.hi + m);
    }
    const auto want = merge_oracle(runs);
    const auto got = gaze::detect_and_interpolate_blinks(raw).events;
    ASSERT_EQ(got.size(), want.size()) << trial;
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_EQ(got[k].start_index, want[k].lo);
      EXPECT_EQ(got[k].end_index, want[k].hi);
    }
    if (trial == 0) {
      EXPECT_EQ(got.size(), 1u);
    }
    for (std::size_t k = 1; k < got.size(); ++k) EXPECT_GT(got[k].start_index, got[k - 1].end_index + 1);
  }
}

TEST(Blinks, AllBlinkingThrows) {
  GazeSeries raw;
  for (int i = 0; i < 50; ++i) raw.push_back(gaze_at(i / 90.0, {0.0, 0.0, 1.0}, 3.5, 0.1));
  try {
    gaze::detect_and_interpolate_blinks(raw);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllSamplesBlinking);
  }
}

TEST(Kinematics, FormulaCases) {
  auto check = [](double ddx, double ddy, double want) {
    gaze::SmoothedGazeSeries s;
    for (int i = 0; i < 5; ++i) {
      s.timestamp.push_back(i / 90.0);
      s.dir.push_back({ddx * i, ddy * i, 1.0});
      s.pupil.push_back(3.0);
    }
    const auto k = gaze::compute_kinematics(s);
    ASSERT_EQ(k.velocity.size(), 4u);
    ASSERT_EQ(k.acceleration.size(), 3u);
    for (double v : k.velocity) EXPECT_NEAR(v, want, 1e-9);
    for (double a : k.acceleration) EXPECT_NEAR(a, 0.0, 1e-6);
  };
  check(0.001, 0.0, 0.09);
  check(3e-3, 4e-3, 0.45);
  check(0.0, 0.0, 0.0);
}

TEST(Kinematics, TranslationInvariantAndRateLinear) {
  gaze::SmoothedGazeSeries a, b, c;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 0.01);
  for (int i = 0; i < 30; ++i) {
    const Vec3 d{nd(rng), nd(rng), 1.0};
    a.timestamp.push_back(i / 90.0);
    b.timestamp.push_back(100.0 + i / 90.0);
    c.timestamp.push_back(i / 180.0);
    for (auto* s : {&a, &b, &c}) {
      s->dir.push_back(d);
      s->pupil.push_back(3.0);
    }
  }
  const auto ka = gaze::compute_kinematics(a), kb = gaze::compute_kinematics(b), kc = gaze::compute_kinematics(c);
  for (std::size_t i = 0; i < ka.velocity.size(); ++i) {
    EXPECT_NEAR(ka.velocity[i], kb.velocity[i], 1e-6);
    EXPECT_NEAR(kc.velocity[i], 2.0 * ka.velocity[i], 1e-9);
  }
}

TEST(Hmm, DegenerateVelocityFallsBackToFixation) {
  const auto seg = gaze::segment_movements(kinematics_from_velocity(std::vector<double>(50, 0.4)));
  EXPECT_TRUE(seg.degenerate);
  for (int s : seg.state_per_sample) EXPECT_EQ(s, 0);
  const auto runs = seg.runs();
  ASSERT_EQ(runs.size(), 1u);
  EXPECT_EQ(runs[0].state, 0);
}

TEST(Hmm, TwoGaussianBenchmarkAgreement) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> fix(10.0, 5.0), sac(300.0, 5.0);
  std::bernoulli_distribution stay_fix(0.95), stay_sac(0.80);
  std::vector<double> v;
  std::vector<int> truth;
  int state = 0;
  for (int i = 0; i < 3000; ++i) {
    v.push_back(state == 0 ? fix(rng) : sac(rng));
    truth.push_back(state);
    state = state == 0 ? (stay_fix(rng) ? 0 : 1) : (stay_sac(rng) ? 1 : 0);
  }
  const auto seg = gaze::segment_movements(kinematics_from_velocity(v));
  ASSERT_FALSE(seg.degenerate);
  EXPECT_LE(seg.hmm.mean[0], seg.hmm.mean[1]);
  for (const auto& row : seg.hmm.transition) EXPECT_NEAR(row[0] + row[1], 1.0, 1e-9);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < v.size(); ++i) agree += seg.state_per_sample[i] == truth[i];
  EXPECT_GE(static_cast<double>(agree) / v.size(), 0.95);
}

TEST(Hmm, ViterbiMatchesExhaustiveSearch) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::normal_distribution<double> obs(1.0, 1.5);
  for (int trial = 0; trial < 40; ++trial) {
    gaze::GaussianHmm h;
    h.mean = {0.0, 2.0};
    h.var = {0.5 + u(rng), 0.5 + u(rng)};
    const double p = u(rng), q = u(rng), r = u(rng);
    h.transition = {{{p, 1.0 - p}, {q, 1.0 - q}}};
    h.initial = {r, 1.0 - r};
    std::vector<double> o(3 + trial % 10);
    for (double& x : o) x = obs(rng);
    EXPECT_EQ(gaze::viterbi(h, o), brute_force_path(h, o)) << trial;
  }
}

TEST(Pupil, ConstantAndRamp) {
  std::vector<double> t, c, ramp;
  for (int i = 0; i < 1350; ++i) {
    t.push_back(i / 90.0);
    c.push_back(3.0);
    ramp.push_back(3.0 + t.back() / 15.0);
  }
  const auto mc = gaze::extract_pupil_metrics(t, c);
  EXPECT_NEAR(mc.mean, 3.0, 1e-9);
  EXPECT_NEAR(mc.std, 0.0, 1e-9);
  EXPECT_NEAR(mc.range, 0.0, 1e-9);
  EXPECT_NEAR(mc.slope, 0.0, 1e-9);
  EXPECT_NEAR(mc.constriction_velocity, 0.0, 1e-9);
  EXPECT_NEAR(mc.dilation_velocity, 0.0, 1e-9);
  const auto mr = gaze::extract_pupil_metrics(t, ramp);
  EXPECT_NEAR(mr.slope, 1.0 / 15.0, 1e-6);
  EXPECT_NEAR(mr.dilation_velocity, 1.0 / 15.0, 1e-6);
  EXPECT_NEAR(mr.constriction_velocity, 0.0, 1e-9);
}

TEST(Pupil, SignSplitDerivativeOracle) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 0.05);
  std::vector<double> t, p;
  for (int i = 0; i < 1350; ++i) {
    t.push_back(i / 90.0);
    p.push_back(3.5 + 0.3 * std::sin(2.0 * std::numbers::pi * 0.4 * t.back()) + nd(rng));
  }
  const auto filtered = gaze::filter_pupil(p, 90.0);
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i + 1 < filtered.size(); ++i) {
    const double d = (filtered[i + 1] - filtered[i]) / (t[i + 1] - t[i]);
    if (d > 0) pos.push_back(d);
    if (d < 0) neg.push_back(-d);
  }
  const auto m = gaze::extract_pupil_metrics(t, p);
  EXPECT_NEAR(m.dilation_velocity, testutil::mean_of(pos), 1e-6);
  EXPECT_NEAR(m.constriction_velocity, testutil::mean_of(neg), 1e-6);
  EXPECT_NEAR(m.mean, testutil::mean_of(filtered), 1e-9);
  EXPECT_NEAR(m.std, testutil::pop_std_of(filtered), 1e-9);
  EXPECT_NEAR(m.slope, testutil::ols_slope(t, filtered), 1e-9);
  EXPECT_THROW(gaze::extract_pupil_metrics({}, {}), Error);
}

TEST(GazeFeatures, ThreeBlinksInFifteenSeconds) {
  GazeSeries raw;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 0.002);
  for (int i = 0; i < 1350; ++i) {
    const bool dip = (i >= 200 && i < 210) || (i >= 600 && i < 612) || (i >= 1000 && i < 1009);
    raw.push_back(gaze_at(i / 90.0, {nd(rng), nd(rng), 1.0}, 3.5, dip ? 0.1 : 1.0));
  }
  const auto f = gaze::gaze_features_for_window(raw, 15.0);
  EXPECT_EQ(f.blink_count, 3.0);
  EXPECT_DOUBLE_EQ(f.blink_rate, 12.0);
  EXPECT_EQ(f.to_array().size(), 21u);
}

TEST(GazeFeatures, ZeroSaccadeConventionAndRunCount) {
  const auto raw = testutil::steady_gaze(1350);
  const auto smoothed = gaze::preprocess_gaze(raw);
  const auto kin = gaze::compute_kinematics(smoothed);
  const auto seg = gaze::segment_movements(kin);
  const auto f = gaze::extract_gaze_features(smoothed, {}, seg, kin, 15.0);
  EXPECT_EQ(f.saccade_count, 0.0);
  EXPECT_EQ(f.saccade_fixation_ratio, 0.0);
  EXPECT_EQ(f.saccade_amplitude_mean, 0.0);
  EXPECT_EQ(f.saccade_peak_velocity, 0.0);
  EXPECT_EQ(f.saccade_accel_decel_ratio, 0.0);
  EXPECT_EQ(f.fixation_count + f.saccade_count, static_cast<double>(seg.runs().size()));
}

TEST(GazeFeatures, CountsMatchRunsAndAreDeterministic) {
  // Alternating dwell and jump segments.
  GazeSeries raw;
  double x = 0.0;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd(0.0, 0.0003);
  for (int i = 0; i < 1350; ++i) {
    if (i % 30 >= 25) x += 0.02;
    raw.push_back(gaze_at(i / 90.0, {x + nd(rng), nd(rng), 1.0}));
  }
  const auto a = gaze::gaze_features_for_window(raw, 15.0);
  const auto b = gaze::gaze_features_for_window(raw, 15.0);
  EXPECT_EQ(a.to_array(), b.to_array());
  const auto smoothed = gaze::preprocess_gaze(gaze::detect_and_interpolate_blinks(raw).cleaned);
  const auto seg = gaze::segment_movements(gaze::compute_kinematics(smoothed));
  EXPECT_EQ(a.fixation_count + a.saccade_count, static_cast<double>(seg.runs().size()));
  EXPECT_GT(a.saccade_count, 30.0);
  EXPECT_GT(a.saccade_amplitude_mean, 0.0);
}
