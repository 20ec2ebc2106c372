#pragma once

#include "cogload/model_io.hpp"
#include "cogload/protocol.hpp"
#include "cogload/windowing.hpp"

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace cogload::hub {

struct HubConfig {
  double horizon_seconds = 120.0;  // buffered history per stream before oldest-first eviction
  double echo_timeout_seconds = 2.0;
  double level_seconds = 60.0;
};

/// Per-stream constant clock offsets (sensor time minus session time).
struct OffsetEstimate {
  std::optional<double> gaze;
  std::optional<double> physio;
};

struct SyncedLevel {
  GazeSeries gaze;
  PhysioSeries physio;
};

/// Maps sensor timestamps onto the session clock and keeps samples inside
/// [start, end). Missing offsets count as zero.
SyncedLevel synchronize(std::span<const GazeSample> gaze, std::span<const PhysioSample> physio,
                        const OffsetEstimate& offsets, windowing::LevelSpan level);

/// synchronize() followed by feature windowing. Throws MissingModality when a
/// stream has no samples in the level, otherwise windowing errors propagate.
FeatureSequence synchronize_and_window(std::span<const GazeSample> gaze, std::span<const PhysioSample> physio,
                                       const OffsetEstimate& offsets, windowing::LevelSpan level);

/// Normalize, forward, and package the prediction. latency_ms is left at 0.
RatingMessage infer(const model::ModelBundle& bundle, const FeatureSequence& raw, int level_id);

struct StreamCounters {
  std::size_t buffered = 0;
  std::uint64_t received = 0;
  std::uint64_t dropped_late = 0;  // below the watermark
  std::uint64_t evicted = 0;       // beyond the horizon
  std::uint64_t seq_gaps = 0;      // missing sequence numbers
};

/// Multimodal buffering plus a single inference worker. Each stream may have
/// one writer; ingest() never waits on inference.
class StreamHub {
public:
  using ResponseSink = std::function<void(const Response&)>;
  using FeatureSink = std::function<void(const FeatureSequence&)>;

  StreamHub(HubConfig config, std::optional<model::ModelBundle> model, ResponseSink on_response,
            FeatureSink on_features = {});
  ~StreamHub();
  StreamHub(const StreamHub&) = delete;
  StreamHub& operator=(const StreamHub&) = delete;

  /// Throws SchemaViolation for payloads that do not belong to the stream.
  void ingest(const StreamMessage& msg);

  StreamCounters counters(StreamId stream) const;
  OffsetEstimate offsets() const;
  /// Latest consumed sensor-clock timestamp for the stream.
  double watermark(StreamId stream) const;

  /// Blocks until every queued request has been answered.
  void wait_idle();
  /// True once session_end has been processed.
  bool session_finished() const;
  bool wait_session_finished(std::chrono::milliseconds timeout);

private:
  struct Request {
    enum class Kind { Level, SessionEnd } kind = Kind::Level;
    int level_id = -1;
    std::chrono::steady_clock::time_point received;
  };

  template <class Sample>
  struct Buffer {
    mutable std::mutex mutex;
    std::deque<Sample> samples;
    double watermark = -std::numeric_limits<double>::infinity();
    StreamCounters counters;
    std::optional<std::uint64_t> next_seq;
  };

  template <class Sample>
  void push_sample(Buffer<Sample>& buffer, const Sample& sample);
  template <class Sample>
  std::vector<Sample> take(Buffer<Sample>& buffer, double offset, windowing::LevelSpan level);

  void on_event(const StreamMessage& msg, const LevelEvent& ev);
  void on_echo(StreamId stream, const Echo& echo, double t);
  void worker_loop();
  void process_level(const Request& request);
  OffsetEstimate offsets_up_to(int level_id) const;

  HubConfig config_;
  std::optional<model::ModelBundle> model_;
  ResponseSink on_response_;
  FeatureSink on_features_;

  Buffer<GazeSample> gaze_;
  Buffer<PhysioSample> physio_;

  // Level events and per-stream echoes keyed by (kind, level_id).
  mutable std::mutex marker_mutex_;
  std::condition_variable marker_cv_;
  std::map<std::pair<std::string, int>, double> events_;
  std::array<std::map<std::pair<std::string, int>, double>, 2> echoes_;
  std::uint64_t event_received_ = 0;
  std::optional<std::uint64_t> event_next_seq_;
  std::uint64_t event_seq_gaps_ = 0;

  mutable std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<Request> queue_;
  bool busy_ = false;
  std::atomic<bool> stopping_{false};
  bool session_finished_ = false;
  std::thread worker_;
};

}  // namespace cogload::hub
