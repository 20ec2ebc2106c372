#include "cogload/replay.hpp"

#include "cogload/error.hpp"

#include "net.hpp"

#include <array>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <istream>
#include <mutex>
#include <thread>

namespace cogload::hub {
namespace {

using Clock = std::chrono::steady_clock;

std::size_t slot(StreamId s) { return static_cast<std::size_t>(s); }

}  // namespace

std::vector<RecordedLine> load_recording(std::istream& in) {
  std::vector<RecordedLine> out;
  std::array<double, 3> last{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                             -std::numeric_limits<double>::infinity()};
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) {
      continue;
    }
    InboundLine parsed;
    try {
      parsed = parse_line(text);
    } catch (const Error& e) {
      throw Error(e.code(), "replay: line " + std::to_string(line_no) + ": " + e.what());
    }
    auto* msg = std::get_if<StreamMessage>(&parsed);
    if (msg == nullptr) {
      continue;  // producer hellos are regenerated by the client
    }
    double& prev = last[slot(msg->stream)];
    if (msg->timestamp < prev) {
      throw Error(ErrorCode::NonMonotonicTimestamps, "replay: line " + std::to_string(line_no) + ": '" +
                                                         std::string(to_string(msg->stream)) +
                                                         "' timestamp goes backwards");
    }
    prev = msg->timestamp;
    out.push_back({line_no, std::move(text), std::move(*msg)});
  }
  return out;
}

std::vector<RecordedLine> load_recording(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "replay: cannot open '" + path + "'");
  }
  return load_recording(in);
}

std::vector<double> replay_schedule(const std::vector<RecordedLine>& lines, double speed) {
  std::vector<double> out;
  out.reserve(lines.size());
  const double t0 = lines.empty() ? 0.0 : lines.front().message.timestamp;
  for (const RecordedLine& l : lines) {
    out.push_back(speed > 0.0 ? std::max(0.0, (l.message.timestamp - t0) / speed) : 0.0);
  }
  return out;
}

ReplayReport replay(const std::vector<RecordedLine>& lines, const ReplayConfig& config) {
  ReplayReport report;
  std::array<net::Socket, 3> sockets;
  for (StreamId s : {StreamId::Gaze, StreamId::Physio, StreamId::Event}) {
    sockets[slot(s)] = net::connect_tcp(config.host, config.port, config.connect_timeout_ms);
    if (!net::send_all(sockets[slot(s)], encode_hello(s) + "\n")) {
      throw Error(ErrorCode::IoFailure, "replay: hub closed the connection during hello");
    }
  }

  std::mutex mutex;
  std::condition_variable cv;
  std::map<int, Clock::time_point> end_sent;
  std::size_t answered = 0;
  bool closed = false;

  std::thread reader([&] {
    net::LineReader in(sockets[slot(StreamId::Event)]);
    while (auto line = in.next()) {
      if (line->empty()) {
        continue;
      }
      const auto now = Clock::now();
      Response r;
      try {
        r = parse_response(*line);
      } catch (const Error&) {
        continue;
      }
      const int id = std::visit([](const auto& m) { return m.level_id; }, r);
      std::lock_guard lock(mutex);
      report.responses.push_back(r);
      if (const auto it = end_sent.find(id); it != end_sent.end()) {
        report.client_latency_ms[id] = std::chrono::duration<double, std::milli>(now - it->second).count();
        ++answered;
      }
      cv.notify_all();
    }
    std::lock_guard lock(mutex);
    closed = true;
    cv.notify_all();
  });

  std::array<std::string, 3> pending;
  auto flush = [&](std::size_t i) {
    if (!pending[i].empty()) {
      net::send_all(sockets[i], pending[i]);
      pending[i].clear();
    }
  };
  auto flush_all = [&] {
    for (std::size_t i = 0; i < pending.size(); ++i) {
      flush(i);
    }
  };
  auto wait_answers = [&] {
    std::unique_lock lock(mutex);
    cv.wait_for(lock, std::chrono::duration<double>(config.response_timeout_seconds),
                [&] { return closed || answered >= end_sent.size(); });
  };

  const std::vector<double> schedule = replay_schedule(lines, config.speed);
  const auto start = Clock::now();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const StreamMessage& msg = lines[i].message;
    const auto* ev = std::get_if<LevelEvent>(&msg.payload);
    if (config.speed > 0.0) {
      const auto target = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(schedule[i]));
      if (Clock::now() < target) {
        flush_all();
        std::this_thread::sleep_until(target);
      }
      const double lag = std::chrono::duration<double, std::milli>(Clock::now() - target).count();
      report.max_schedule_lag_ms = std::max(report.max_schedule_lag_ms, lag);
    } else if (ev != nullptr && ev->kind == "level_start") {
      flush_all();
      wait_answers();
    }
    const std::size_t s = slot(msg.stream);
    pending[s] += lines[i].text;
    pending[s] += '\n';
    ++report.messages_sent;
    if (ev != nullptr) {
      if (ev->kind == "level_end") {
        std::lock_guard lock(mutex);
        end_sent[ev->level_id] = Clock::now();
      }
      flush_all();
    } else if (pending[s].size() > (1U << 16)) {
      flush(s);
    }
  }
  flush_all();
  wait_answers();
  for (net::Socket& sock : sockets) {
    sock.shutdown_both();
  }
  reader.join();
  report.wall_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

}  // namespace cogload::hub
