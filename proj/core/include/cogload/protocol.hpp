#pragma once

#include "cogload/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

// Newline-delimited JSON wire format shared by the hub, the replay client and
// recorded sessions.
//   hello:  {"hello":{"stream_id":"gaze","schema_version":1}}
//   sample: {"s":"gaze","n":412,"t":12.3456,"p":{...}}
//   event:  {"s":"event","n":7,"t":60.0,"p":{"kind":"level_end","level_id":3}}
//   echo:   {"s":"physio","n":99,"t":60.02,"p":{"echo":{"kind":"level_end","level_id":3}}}
//   rating: {"rating":{"level_id":3,"label":1,"probs":[0.2,0.5,0.3],"latency_ms":212}}
namespace cogload::hub {

inline constexpr int kSchemaVersion = 1;

enum class StreamId { Gaze, Physio, Event };

std::string_view to_string(StreamId id);
/// Throws UnknownStream for anything but gaze, physio and event.
StreamId stream_from_string(std::string_view name);

struct LevelEvent {
  std::string kind;  // level_start | level_end | session_end
  int level_id = -1;
  bool operator==(const LevelEvent&) const = default;
};

/// Marker a sensor producer inserts into its own stream when it observes a
/// level event, timestamped on the sensor clock.
struct Echo {
  std::string kind;
  int level_id = -1;
  bool operator==(const Echo&) const = default;
};

struct StreamMessage {
  StreamId stream = StreamId::Gaze;
  std::uint64_t seq = 0;
  bool has_seq = true;  // event messages may omit "n"
  double timestamp = 0.0;
  std::variant<GazeSample, PhysioSample, LevelEvent, Echo> payload;
};

struct Hello {
  StreamId stream = StreamId::Gaze;
  int schema_version = kSchemaVersion;
};

struct RatingMessage {
  int level_id = 0;
  LoadLabel label = LoadLabel::JustRight;
  std::array<double, kNumClasses> probs{};
  std::int64_t latency_ms = 0;
};

struct ErrorMessage {
  int level_id = -1;
  std::string code;
  std::string message;
};

using InboundLine = std::variant<Hello, StreamMessage>;
using Response = std::variant<RatingMessage, ErrorMessage>;

/// Throws UnknownStream or SchemaViolation.
InboundLine parse_line(std::string_view line);
StreamMessage parse_message(std::string_view line);

std::string encode(const StreamMessage& msg);
std::string encode_hello(StreamId stream);
std::string encode(const RatingMessage& msg);
std::string encode(const ErrorMessage& msg);
Response parse_response(std::string_view line);

}  // namespace cogload::hub
