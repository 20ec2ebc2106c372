#include "cogload/error.hpp"
#include "cogload/replay.hpp"
#include "cogload/simulator.hpp"
#include "cogload/stream_hub.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <mutex>
#include <sstream>

using namespace cogload;
using namespace cogload::hub;

namespace {

model::ModelBundle tiny_bundle() {
  model::ModelConfig cfg;
  cfg.hidden = 8;
  cfg.head_hidden = 8;
  model::ModelBundle b;
  b.params = model::ModelParams::initialize(cfg, 1);
  b.normalizer.global.std.fill(1.0);
  return b;
}

std::vector<RecordedLine> recording(int levels, std::uint64_t seed = 3) {
  sim::RecordingConfig rc;
  rc.profile = sim::make_profile(0, 1);
  rc.levels = levels;
  rc.seed = seed;
  std::stringstream ss;
  sim::write_recording(ss, rc);
  return load_recording(ss);
}

struct Collector {
  std::mutex m;
  std::vector<Response> responses;
  std::vector<FeatureSequence> features;
  StreamHub::ResponseSink response_sink() {
    return [this](const Response& r) {
      std::lock_guard l(m);
      responses.push_back(r);
    };
  }
  StreamHub::FeatureSink feature_sink() {
    return [this](const FeatureSequence& f) {
      std::lock_guard l(m);
      features.push_back(f);
    };
  }
};

StreamMessage gaze_msg(std::uint64_t n, double t) {
  StreamMessage m;
  m.stream = StreamId::Gaze;
  m.seq = n;
  m.timestamp = t;
  m.payload = testutil::gaze_at(t);
  return m;
}

}  // namespace

TEST(Protocol, ParsesDocumentedLines) {
  const auto hello = parse_line(R"({"hello":{"stream_id":"gaze","schema_version":1}})");
  ASSERT_TRUE(std::holds_alternative<Hello>(hello));
  EXPECT_EQ(std::get<Hello>(hello).stream, StreamId::Gaze);
  const auto ev = parse_message(R"({"s":"event","t":60.0,"p":{"kind":"level_end","level_id":3}})");
  EXPECT_EQ(ev.stream, StreamId::Event);
  EXPECT_FALSE(ev.has_seq);
  EXPECT_EQ(std::get<LevelEvent>(ev.payload), (LevelEvent{"level_end", 3}));
  const auto echo = parse_message(R"({"s":"physio","n":99,"t":60.02,"p":{"echo":{"kind":"level_end","level_id":3}}})");
  EXPECT_EQ(std::get<Echo>(echo.payload), (Echo{"level_end", 3}));
  EXPECT_EQ(echo.seq, 99u);
  EXPECT_EQ(encode_hello(StreamId::Gaze), R"({"hello":{"stream_id":"gaze","schema_version":1}})");
  EXPECT_EQ(encode(RatingMessage{3, LoadLabel::JustRight, {0.2, 0.5, 0.3}, 212}),
            R"({"rating":{"level_id":3,"label":1,"probs":[0.2,0.5,0.3],"latency_ms":212}})");
}

TEST(Protocol, EncodeParseRoundTrip) {
  for (const auto& line : recording(1)) {
    if (line.line_no > 400) break;
    EXPECT_EQ(encode(parse_message(line.text)), line.text);
  }
  const RatingMessage r{7, LoadLabel::TooDifficult, {0.125, 0.25, 0.625}, 42};
  const auto back = std::get<RatingMessage>(parse_response(encode(r)));
  EXPECT_EQ(back.level_id, 7);
  EXPECT_EQ(back.label, LoadLabel::TooDifficult);
  EXPECT_EQ(back.probs, r.probs);
  EXPECT_EQ(back.latency_ms, 42);
  const auto err = std::get<ErrorMessage>(parse_response(encode(ErrorMessage{2, "ModelNotLoaded", "no model"})));
  EXPECT_EQ(err.code, "ModelNotLoaded");
}

TEST(Protocol, Guards) {
  EXPECT_EQ(testutil::code_of([] { parse_message(R"({"s":"emg","n":1,"t":0.0,"p":{}})"); }), ErrorCode::UnknownStream);
  EXPECT_EQ(testutil::code_of([] { stream_from_string("emg"); }), ErrorCode::UnknownStream);
  EXPECT_EQ(testutil::code_of([] { parse_message("{\"s\":\"gaze\""); }), ErrorCode::SchemaViolation);
  EXPECT_EQ(testutil::code_of([] { parse_message(R"({"s":"physio","n":1,"t":0.0,"p":{"ppg":1.0}})"); }),
            ErrorCode::SchemaViolation);
  EXPECT_EQ(testutil::code_of([] { parse_line(R"({"hello":{"stream_id":"gaze","schema_version":2}})"); }),
            ErrorCode::SchemaViolation);
}

TEST(Hub, BufferingCountersAndSequenceGaps) {
  Collector c;
  StreamHub hub(HubConfig{}, std::nullopt, c.response_sink());
  hub.ingest(gaze_msg(0, 1.0));
  EXPECT_EQ(hub.counters(StreamId::Gaze).buffered, 1u);
  hub.ingest(gaze_msg(1, 1.1));
  hub.ingest(gaze_msg(4, 1.2));
  EXPECT_EQ(hub.counters(StreamId::Gaze).buffered, 3u);
  EXPECT_EQ(hub.counters(StreamId::Gaze).seq_gaps, 2u);
  EXPECT_EQ(hub.counters(StreamId::Gaze).received, 3u);
  StreamMessage wrong = gaze_msg(5, 1.3);
  wrong.payload = PhysioSample{1.3, 1.0, 1.0};
  EXPECT_EQ(testutil::code_of([&] { hub.ingest(wrong); }), ErrorCode::SchemaViolation);
}

TEST(Hub, EvictsBeyondHorizon) {
  Collector c;
  HubConfig cfg;
  cfg.horizon_seconds = 10.0;
  StreamHub hub(cfg, std::nullopt, c.response_sink());
  for (std::uint64_t i = 0; i < 90 * 30; ++i) hub.ingest(gaze_msg(i, static_cast<double>(i) / 90.0));
  const auto counters = hub.counters(StreamId::Gaze);
  EXPECT_LE(counters.buffered, 90u * 10u + 1u);
  EXPECT_EQ(counters.buffered + counters.evicted, 90u * 30u);
}

TEST(Hub, RecoversClockOffsetsAndAnswersInOrder) {
  Collector c;
  StreamHub hub(HubConfig{}, tiny_bundle(), c.response_sink(), c.feature_sink());
  for (const auto& line : recording(2)) hub.ingest(line.message);
  ASSERT_TRUE(hub.wait_session_finished(std::chrono::seconds(30)));
  hub.wait_idle();
  const auto off = hub.offsets();
  ASSERT_TRUE(off.gaze && off.physio);
  EXPECT_LT(std::abs(*off.gaze - 0.050), 0.005);
  EXPECT_LT(std::abs(*off.physio + 0.030), 0.005);
  ASSERT_EQ(c.responses.size(), 2u);
  for (int i = 0; i < 2; ++i) {
    const auto& r = std::get<RatingMessage>(c.responses[static_cast<std::size_t>(i)]);
    EXPECT_EQ(r.level_id, i);
    EXPECT_NEAR(r.probs[0] + r.probs[1] + r.probs[2], 1.0, 1e-9);
    EXPECT_LT(r.latency_ms, 500);
  }
  ASSERT_EQ(c.features.size(), 2u);
  EXPECT_NE(c.features[0].windows[0].features, c.features[1].windows[0].features);
  EXPECT_EQ(hub.counters(StreamId::Gaze).dropped_late, 0u);
  // After level 0 was consumed, a sample from inside it is late.
  hub.ingest(gaze_msg(1000000, 10.0));
  EXPECT_EQ(hub.counters(StreamId::Gaze).dropped_late, 1u);
  EXPECT_GE(hub.watermark(StreamId::Gaze), 60.0);
}

TEST(Hub, ReplayingTwiceGivesIdenticalPredictions) {
  std::vector<std::string> runs;
  for (int k = 0; k < 2; ++k) {
    Collector c;
    StreamHub hub(HubConfig{}, tiny_bundle(), c.response_sink());
    for (const auto& line : recording(1, 11)) hub.ingest(line.message);
    ASSERT_TRUE(hub.wait_session_finished(std::chrono::seconds(30)));
    hub.wait_idle();
    ASSERT_EQ(c.responses.size(), 1u);
    auto r = std::get<RatingMessage>(c.responses[0]);
    r.latency_ms = 0;
    runs.push_back(encode(r));
  }
  EXPECT_EQ(runs[0], runs[1]);
}

TEST(Hub, MissingModelIsReported) {
  Collector c;
  StreamHub hub(HubConfig{}, std::nullopt, c.response_sink());
  for (const auto& line : recording(1)) hub.ingest(line.message);
  ASSERT_TRUE(hub.wait_session_finished(std::chrono::seconds(30)));
  hub.wait_idle();
  ASSERT_EQ(c.responses.size(), 1u);
  const auto& err = std::get<ErrorMessage>(c.responses[0]);
  EXPECT_EQ(err.code, "ModelNotLoaded");
  EXPECT_EQ(err.level_id, 0);
}

TEST(Sync, OffsetCorrectionAlignsStreams) {
  const auto profile = sim::make_profile(2, 5);
  const auto truth = sim::generate_signals(profile, 0.0, 60.0, 9);
  const auto shifted = sim::generate_signals(profile, 0.0, 60.0, 9, 0.0, {0.050, 0.050});
  const OffsetEstimate est{0.050, 0.050};
  const windowing::LevelSpan level{0.0, 60.0};
  const auto synced = synchronize(shifted.gaze, shifted.physio, est, level);
  ASSERT_EQ(synced.gaze.size(), truth.gaze.size());
  for (std::size_t i = 0; i < truth.gaze.size(); ++i) EXPECT_NEAR(synced.gaze[i].timestamp, truth.gaze[i].timestamp, 1e-9);
  ASSERT_EQ(synced.physio.size(), truth.physio.size());
  const auto corrected = synchronize_and_window(shifted.gaze, shifted.physio, est, level);
  const auto direct = windowing::build_feature_sequence(truth.gaze, truth.physio, level);
  for (std::size_t w = 0; w < kWindowsPerLevel; ++w)
    for (std::size_t f = 0; f < kFeatureCount; ++f)
      EXPECT_NEAR(corrected.windows[w].features[f], direct.windows[w].features[f], 1e-6) << w << " " << f;
}

TEST(Sync, CoverageThreshold) {
  const auto s = sim::generate_signals(sim::make_profile(1, 5), 0.0, 60.0, 4);
  auto thin = [&](int keep, int of) {
    GazeSeries out;
    int k = 0;
    for (const auto& g : s.gaze)
      if (g.timestamp < 15.0 || g.timestamp >= 30.0 || k++ % of < keep) out.push_back(g);
    return out;
  };
  const windowing::LevelSpan level{0.0, 60.0};
  EXPECT_NO_THROW(synchronize_and_window(thin(17, 20), s.physio, {}, level));
  EXPECT_EQ(testutil::code_of([&] { synchronize_and_window(thin(3, 5), s.physio, {}, level); }),
            ErrorCode::InsufficientCoverage);
  EXPECT_EQ(testutil::code_of([&] { synchronize_and_window(s.gaze, PhysioSeries{}, {}, level); }),
            ErrorCode::MissingModality);
}

TEST(Infer, ProbabilitiesOnSimplex) {
  const auto bundle = tiny_bundle();
  const auto s = sim::generate_signals(sim::make_profile(1, 5), 1.5, 60.0, 4);
  const auto seq = windowing::build_feature_sequence(s.gaze, s.physio, {0.0, 60.0});
  const auto r = infer(bundle, seq, 5);
  EXPECT_EQ(r.level_id, 5);
  EXPECT_NEAR(r.probs[0] + r.probs[1] + r.probs[2], 1.0, 1e-9);
  EXPECT_EQ(r.label, model::argmax_label(r.probs));
}
