#include "cogload/stream_hub.hpp"

#include "cogload/error.hpp"
#include "cogload/model.hpp"

#include <algorithm>
#include <cmath>

namespace cogload::hub {
namespace {

// Consumed samples are trimmed slightly below the level end so a sample that
// lands exactly on the boundary stays available to the next level.
constexpr double kTrimSlack = 1e-6;
// Extra sensor time copied past the level end; synchronize() filters exactly.
constexpr double kSnapshotSlack = 0.5;

template <class Sample>
std::vector<Sample> mapped(std::span<const Sample> in, double offset, windowing::LevelSpan level) {
  std::vector<Sample> out;
  for (Sample s : in) {
    s.timestamp -= offset;
    if (windowing::window_index(s.timestamp - level.start) >= 0) {
      out.push_back(s);
    }
  }
  return out;
}

std::size_t stream_slot(StreamId s) { return s == StreamId::Gaze ? 0 : 1; }

}  // namespace

SyncedLevel synchronize(std::span<const GazeSample> gaze, std::span<const PhysioSample> physio,
                        const OffsetEstimate& offsets, windowing::LevelSpan level) {
  return {mapped(gaze, offsets.gaze.value_or(0.0), level), mapped(physio, offsets.physio.value_or(0.0), level)};
}

FeatureSequence synchronize_and_window(std::span<const GazeSample> gaze, std::span<const PhysioSample> physio,
                                       const OffsetEstimate& offsets, windowing::LevelSpan level) {
  const SyncedLevel synced = synchronize(gaze, physio, offsets, level);
  if (synced.gaze.empty()) {
    throw Error(ErrorCode::MissingModality, "stream-hub: no gaze samples in level");
  }
  if (synced.physio.empty()) {
    throw Error(ErrorCode::MissingModality, "stream-hub: no physio samples in level");
  }
  return windowing::build_feature_sequence(synced.gaze, synced.physio, level);
}

RatingMessage infer(const model::ModelBundle& bundle, const FeatureSequence& raw, int level_id) {
  const model::Prediction p = model::forward(bundle.params, bundle.normalizer.apply(raw), false);
  RatingMessage r;
  r.level_id = level_id;
  r.label = p.label;
  r.probs = p.probabilities;
  return r;
}

StreamHub::StreamHub(HubConfig config, std::optional<model::ModelBundle> model, ResponseSink on_response,
                     FeatureSink on_features)
    : config_(config),
      model_(std::move(model)),
      on_response_(std::move(on_response)),
      on_features_(std::move(on_features)),
      worker_([this] { worker_loop(); }) {}

StreamHub::~StreamHub() {
  {
    std::lock_guard lock(queue_mutex_);
    stopping_ = true;
  }
  {
    std::lock_guard lock(marker_mutex_);
  }
  queue_cv_.notify_all();
  marker_cv_.notify_all();
  worker_.join();
}

template <class Sample>
void StreamHub::push_sample(Buffer<Sample>& buffer, const Sample& sample) {
  std::lock_guard lock(buffer.mutex);
  if (sample.timestamp < buffer.watermark) {
    ++buffer.counters.dropped_late;
    return;
  }
  auto& q = buffer.samples;
  if (q.empty() || q.back().timestamp <= sample.timestamp) {
    q.push_back(sample);
  } else {
    const auto at = std::upper_bound(q.begin(), q.end(), sample.timestamp,
                                     [](double t, const Sample& s) { return t < s.timestamp; });
    q.insert(at, sample);
  }
  const double newest = q.back().timestamp;
  while (!q.empty() && q.front().timestamp < newest - config_.horizon_seconds) {
    q.pop_front();
    ++buffer.counters.evicted;
  }
  buffer.counters.buffered = q.size();
}

void StreamHub::ingest(const StreamMessage& msg) {
  auto track = [&](std::optional<std::uint64_t>& next, std::uint64_t& gaps) {
    if (!msg.has_seq) {
      return;
    }
    if (next && msg.seq > *next) {
      gaps += msg.seq - *next;
    }
    if (!next || msg.seq >= *next) {
      next = msg.seq + 1;
    }
  };
  auto sensor = [&](auto& buffer, const auto* sample) {
    {
      std::lock_guard lock(buffer.mutex);
      ++buffer.counters.received;
      track(buffer.next_seq, buffer.counters.seq_gaps);
    }
    if (sample != nullptr) {
      push_sample(buffer, *sample);
    } else if (const auto* echo = std::get_if<Echo>(&msg.payload)) {
      on_echo(msg.stream, *echo, msg.timestamp);
    } else {
      throw Error(ErrorCode::SchemaViolation,
                  "stream-hub: payload does not match stream '" + std::string(to_string(msg.stream)) + "'");
    }
  };
  switch (msg.stream) {
    case StreamId::Gaze:
      sensor(gaze_, std::get_if<GazeSample>(&msg.payload));
      break;
    case StreamId::Physio:
      sensor(physio_, std::get_if<PhysioSample>(&msg.payload));
      break;
    case StreamId::Event: {
      const auto* ev = std::get_if<LevelEvent>(&msg.payload);
      if (ev == nullptr) {
        throw Error(ErrorCode::SchemaViolation, "stream-hub: event stream carries only level events");
      }
      {
        std::lock_guard lock(marker_mutex_);
        ++event_received_;
        track(event_next_seq_, event_seq_gaps_);
      }
      on_event(msg, *ev);
      break;
    }
  }
}

void StreamHub::on_event(const StreamMessage& msg, const LevelEvent& ev) {
  const auto now = std::chrono::steady_clock::now();
  {
    std::lock_guard lock(marker_mutex_);
    events_[{ev.kind, ev.level_id}] = msg.timestamp;
  }
  marker_cv_.notify_all();
  if (ev.kind == "level_start") {
    return;
  }
  {
    std::lock_guard lock(queue_mutex_);
    queue_.push_back({ev.kind == "level_end" ? Request::Kind::Level : Request::Kind::SessionEnd, ev.level_id, now});
  }
  queue_cv_.notify_all();
}

void StreamHub::on_echo(StreamId stream, const Echo& echo, double t) {
  {
    std::lock_guard lock(marker_mutex_);
    echoes_[stream_slot(stream)][{echo.kind, echo.level_id}] = t;
  }
  marker_cv_.notify_all();
}

StreamCounters StreamHub::counters(StreamId stream) const {
  switch (stream) {
    case StreamId::Gaze: {
      std::lock_guard lock(gaze_.mutex);
      return gaze_.counters;
    }
    case StreamId::Physio: {
      std::lock_guard lock(physio_.mutex);
      return physio_.counters;
    }
    case StreamId::Event: break;
  }
  std::lock_guard lock(marker_mutex_);
  StreamCounters c;
  c.received = event_received_;
  c.seq_gaps = event_seq_gaps_;
  return c;
}

double StreamHub::watermark(StreamId stream) const {
  if (stream == StreamId::Gaze) {
    std::lock_guard lock(gaze_.mutex);
    return gaze_.watermark;
  }
  if (stream == StreamId::Physio) {
    std::lock_guard lock(physio_.mutex);
    return physio_.watermark;
  }
  return -std::numeric_limits<double>::infinity();
}

OffsetEstimate StreamHub::offsets_up_to(int level_id) const {
  // Caller holds marker_mutex_. Only markers up to this level take part so
  // the estimate does not depend on how far the producers have run ahead.
  auto estimate = [&](std::size_t slot) -> std::optional<double> {
    double sum = 0.0;
    int n = 0;
    for (const auto& [key, t_echo] : echoes_[slot]) {
      if (key.second > level_id) {
        continue;
      }
      const auto ev = events_.find(key);
      if (ev != events_.end()) {
        sum += t_echo - ev->second;
        ++n;
      }
    }
    return n > 0 ? std::optional<double>(sum / n) : std::nullopt;
  };
  return {estimate(0), estimate(1)};
}

OffsetEstimate StreamHub::offsets() const {
  std::lock_guard lock(marker_mutex_);
  return offsets_up_to(std::numeric_limits<int>::max());
}

template <class Sample>
std::vector<Sample> StreamHub::take(Buffer<Sample>& buffer, double offset, windowing::LevelSpan level) {
  std::lock_guard lock(buffer.mutex);
  const double end_sensor = level.end + offset;
  std::vector<Sample> out;
  for (const Sample& s : buffer.samples) {
    if (s.timestamp >= end_sensor + kSnapshotSlack) {
      break;
    }
    out.push_back(s);
  }
  const double mark = end_sensor - kTrimSlack;
  while (!buffer.samples.empty() && buffer.samples.front().timestamp < mark) {
    buffer.samples.pop_front();
  }
  buffer.watermark = std::max(buffer.watermark, mark);
  buffer.counters.buffered = buffer.samples.size();
  return out;
}

void StreamHub::process_level(const Request& request) {
  const int id = request.level_id;
  windowing::LevelSpan level;
  OffsetEstimate offsets;
  {
    std::unique_lock lock(marker_mutex_);
    const std::pair<std::string, int> end_key{"level_end", id};
    // Each producer echoes level_end after its last sample of the level.
    marker_cv_.wait_for(lock, std::chrono::duration<double>(config_.echo_timeout_seconds), [&] {
      return stopping_ || (echoes_[0].contains(end_key) && echoes_[1].contains(end_key));
    });
    level.end = events_.at(end_key);
    const auto start = events_.find({"level_start", id});
    level.start = start != events_.end() ? start->second : level.end - config_.level_seconds;
    offsets = offsets_up_to(id);
  }
  try {
    const GazeSeries gaze = take(gaze_, offsets.gaze.value_or(0.0), level);
    const PhysioSeries physio = take(physio_, offsets.physio.value_or(0.0), level);
    FeatureSequence seq = synchronize_and_window(gaze, physio, offsets, level);
    seq.level_id = id;
    if (on_features_) {
      on_features_(seq);
    }
    if (!model_) {
      throw Error(ErrorCode::ModelNotLoaded, "stream-hub: no model loaded");
    }
    RatingMessage rating = infer(*model_, seq, id);
    const auto elapsed = std::chrono::steady_clock::now() - request.received;
    rating.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    on_response_(rating);
  } catch (const Error& e) {
    on_response_(ErrorMessage{id, std::string(to_string(e.code())), e.what()});
  }
}

void StreamHub::worker_loop() {
  while (true) {
    Request request;
    {
      std::unique_lock lock(queue_mutex_);
      queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) {
        return;
      }
      request = queue_.front();
      queue_.pop_front();
      busy_ = true;
    }
    if (request.kind == Request::Kind::Level) {
      process_level(request);
    }
    {
      std::lock_guard lock(queue_mutex_);
      busy_ = false;
      if (request.kind == Request::Kind::SessionEnd) {
        session_finished_ = true;
      }
    }
    queue_cv_.notify_all();
  }
}

void StreamHub::wait_idle() {
  std::unique_lock lock(queue_mutex_);
  queue_cv_.wait(lock, [&] { return stopping_ || (queue_.empty() && !busy_); });
}

bool StreamHub::session_finished() const {
  std::lock_guard lock(queue_mutex_);
  return session_finished_;
}

bool StreamHub::wait_session_finished(std::chrono::milliseconds timeout) {
  std::unique_lock lock(queue_mutex_);
  return queue_cv_.wait_for(lock, timeout, [&] { return session_finished_; });
}

}  // namespace cogload::hub
