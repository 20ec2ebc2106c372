#include "cogload/protocol.hpp"

#include "cogload/error.hpp"

#include "json.hpp"

#include <cmath>
#include <limits>

namespace cogload::hub {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void schema(const std::string& what) {
  throw Error(ErrorCode::SchemaViolation, "stream-hub: " + what);
}

double number(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    schema(std::string("missing numeric field '") + key + "'");
  }
  return it->get<double>();
}

GazeSample gaze_from(const json& p, double t) {
  GazeSample s;
  s.timestamp = t;
  s.dir_left = {number(p, "dlx"), number(p, "dly"), number(p, "dlz")};
  s.dir_right = {number(p, "drx"), number(p, "dry"), number(p, "drz")};
  s.pupil_left = number(p, "pl");
  s.pupil_right = number(p, "pr");
  s.openness_left = number(p, "ol");
  s.openness_right = number(p, "or");
  if (const auto it = p.find("conv"); it != p.end() && !it->is_null()) {
    s.convergence_distance = number(p, "conv");
  }
  s.valid_left = number(p, "valid_l") != 0.0;
  s.valid_right = number(p, "valid_r") != 0.0;
  return s;
}

PhysioSample physio_from(const json& p, double t) {
  PhysioSample s;
  s.timestamp = t;
  s.ppg = number(p, "ppg");
  const auto it = p.find("gsr");
  if (it == p.end()) {
    schema("missing field 'gsr'");
  }
  s.gsr = it->is_null() ? std::numeric_limits<double>::quiet_NaN() : number(p, "gsr");
  return s;
}

template <class T>
T marker_from(const json& p) {
  T out;
  const auto kind = p.find("kind");
  if (kind == p.end() || !kind->is_string()) {
    schema("event without 'kind'");
  }
  out.kind = kind->get<std::string>();
  if (out.kind != "level_start" && out.kind != "level_end" && out.kind != "session_end") {
    schema("unknown event kind '" + out.kind + "'");
  }
  if (const auto id = p.find("level_id"); id != p.end() && !id->is_null()) {
    if (!id->is_number_integer()) {
      schema("level_id must be an integer");
    }
    out.level_id = id->get<int>();
  } else if (out.kind != "session_end") {
    schema("level event without level_id");
  }
  return out;
}

ordered_json marker_json(const std::string& kind, int level_id) {
  ordered_json j;
  j["kind"] = kind;
  if (level_id >= 0) {
    j["level_id"] = level_id;
  }
  return j;
}

}  // namespace

std::string_view to_string(StreamId id) {
  switch (id) {
    case StreamId::Gaze: return "gaze";
    case StreamId::Physio: return "physio";
    case StreamId::Event: return "event";
  }
  return "event";
}

StreamId stream_from_string(std::string_view name) {
  if (name == "gaze") return StreamId::Gaze;
  if (name == "physio") return StreamId::Physio;
  if (name == "event") return StreamId::Event;
  throw Error(ErrorCode::UnknownStream, "stream-hub: unknown stream '" + std::string(name) + "'");
}

InboundLine parse_line(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    schema(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) {
    schema("message is not an object");
  }
  if (const auto h = j.find("hello"); h != j.end()) {
    if (!h->is_object() || !h->contains("stream_id") || !(*h)["stream_id"].is_string()) {
      schema("hello without stream_id");
    }
    Hello hello;
    hello.stream = stream_from_string((*h)["stream_id"].get<std::string>());
    hello.schema_version = h->value("schema_version", kSchemaVersion);
    if (hello.schema_version != kSchemaVersion) {
      schema("unsupported schema_version " + std::to_string(hello.schema_version));
    }
    return hello;
  }
  const auto s = j.find("s");
  if (s == j.end() || !s->is_string()) {
    schema("message without stream id 's'");
  }
  StreamMessage msg;
  msg.stream = stream_from_string(s->get<std::string>());
  const auto n = j.find("n");
  if (n == j.end() && msg.stream == StreamId::Event) {
    msg.has_seq = false;
  } else if (n == j.end() || !n->is_number_unsigned()) {
    schema("message without sequence number 'n'");
  } else {
    msg.seq = n->get<std::uint64_t>();
  }
  msg.timestamp = number(j, "t");
  if (!std::isfinite(msg.timestamp)) {
    schema("non-finite timestamp");
  }
  const auto p = j.find("p");
  if (p == j.end() || !p->is_object()) {
    schema("message without payload 'p'");
  }
  try {
    if (const auto echo = p->find("echo"); echo != p->end()) {
      if (msg.stream == StreamId::Event) {
        schema("echo markers belong to sensor streams");
      }
      msg.payload = marker_from<Echo>(*echo);
    } else if (msg.stream == StreamId::Gaze) {
      msg.payload = gaze_from(*p, msg.timestamp);
    } else if (msg.stream == StreamId::Physio) {
      msg.payload = physio_from(*p, msg.timestamp);
    } else {
      msg.payload = marker_from<LevelEvent>(*p);
    }
  } catch (const json::exception& e) {
    schema(std::string("bad payload: ") + e.what());
  }
  return msg;
}

StreamMessage parse_message(std::string_view line) {
  InboundLine in = parse_line(line);
  if (auto* m = std::get_if<StreamMessage>(&in)) {
    return *m;
  }
  schema("expected a stream message, got hello");
}

std::string encode(const StreamMessage& msg) {
  ordered_json j;
  j["s"] = to_string(msg.stream);
  if (msg.has_seq) {
    j["n"] = msg.seq;
  }
  j["t"] = msg.timestamp;
  ordered_json p;
  if (const auto* g = std::get_if<GazeSample>(&msg.payload)) {
    p["dlx"] = g->dir_left[0];
    p["dly"] = g->dir_left[1];
    p["dlz"] = g->dir_left[2];
    p["drx"] = g->dir_right[0];
    p["dry"] = g->dir_right[1];
    p["drz"] = g->dir_right[2];
    p["pl"] = g->pupil_left;
    p["pr"] = g->pupil_right;
    p["ol"] = g->openness_left;
    p["or"] = g->openness_right;
    p["conv"] = g->convergence_distance ? ordered_json(*g->convergence_distance) : ordered_json(nullptr);
    p["valid_l"] = g->valid_left ? 1 : 0;
    p["valid_r"] = g->valid_right ? 1 : 0;
  } else if (const auto* ph = std::get_if<PhysioSample>(&msg.payload)) {
    p["ppg"] = ph->ppg;
    p["gsr"] = std::isnan(ph->gsr) ? ordered_json(nullptr) : ordered_json(ph->gsr);
  } else if (const auto* ev = std::get_if<LevelEvent>(&msg.payload)) {
    p = marker_json(ev->kind, ev->level_id);
  } else {
    const auto& echo = std::get<Echo>(msg.payload);
    p["echo"] = marker_json(echo.kind, echo.level_id);
  }
  j["p"] = p;
  return j.dump();
}

std::string encode_hello(StreamId stream) {
  ordered_json j;
  j["hello"]["stream_id"] = to_string(stream);
  j["hello"]["schema_version"] = kSchemaVersion;
  return j.dump();
}

std::string encode(const RatingMessage& msg) {
  ordered_json j;
  j["rating"]["level_id"] = msg.level_id;
  j["rating"]["label"] = to_int(msg.label);
  j["rating"]["probs"] = msg.probs;
  j["rating"]["latency_ms"] = msg.latency_ms;
  return j.dump();
}

std::string encode(const ErrorMessage& msg) {
  ordered_json j;
  j["error"]["level_id"] = msg.level_id;
  j["error"]["code"] = msg.code;
  j["error"]["message"] = msg.message;
  return j.dump();
}

Response parse_response(std::string_view line) {
  try {
    const json j = json::parse(line);
    if (const auto r = j.find("rating"); r != j.end()) {
      RatingMessage m;
      m.level_id = r->at("level_id").get<int>();
      const auto label = label_from_int(r->at("label").get<int>());
      if (!label) {
        schema("rating label out of range");
      }
      m.label = *label;
      const auto probs = r->at("probs").get<std::vector<double>>();
      if (probs.size() != kNumClasses) {
        schema("rating needs three probabilities");
      }
      std::copy(probs.begin(), probs.end(), m.probs.begin());
      m.latency_ms = r->at("latency_ms").get<std::int64_t>();
      return m;
    }
    if (const auto e = j.find("error"); e != j.end()) {
      ErrorMessage m;
      m.level_id = e->at("level_id").get<int>();
      m.code = e->at("code").get<std::string>();
      m.message = e->at("message").get<std::string>();
      return m;
    }
  } catch (const json::exception& e) {
    schema(std::string("bad response: ") + e.what());
  }
  schema("response is neither a rating nor an error");
}

}  // namespace cogload::hub
