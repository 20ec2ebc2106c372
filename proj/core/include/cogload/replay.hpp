#pragma once

#include "cogload/protocol.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace cogload::hub {

struct RecordedLine {
  std::size_t line_no = 0;
  std::string text;
  StreamMessage message;
};

/// Parses a recorded session. Throws SchemaViolation (with the line number)
/// for malformed lines and NonMonotonicTimestamps when a stream goes back in time.
std::vector<RecordedLine> load_recording(std::istream& in);
std::vector<RecordedLine> load_recording(const std::string& path);

/// Send offsets in seconds relative to the first message: (t_i - t_0) / speed.
std::vector<double> replay_schedule(const std::vector<RecordedLine>& lines, double speed);

struct ReplayConfig {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  /// 1.0 is real time. Zero or negative sends as fast as possible, waiting for
  /// each level's rating before starting the next level.
  double speed = 1.0;
  double response_timeout_seconds = 30.0;
  int connect_timeout_ms = 5000;
};

struct ReplayReport {
  std::vector<Response> responses;            // arrival order
  std::map<int, double> client_latency_ms;    // level_end sent -> response received
  std::size_t messages_sent = 0;
  double max_schedule_lag_ms = 0.0;           // worst lateness against the pacing schedule
  double wall_seconds = 0.0;
};

/// Plays the recording over three producer connections (gaze, physio, event).
ReplayReport replay(const std::vector<RecordedLine>& lines, const ReplayConfig& config);

}  // namespace cogload::hub
