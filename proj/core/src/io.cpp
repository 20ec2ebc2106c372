#include "cogload/io.hpp"

#include "cogload/error.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <vector>

namespace cogload::io {
namespace {

using nlohmann::json;

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end == s.c_str() || *end != '\0') {
    throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": not a number: '" + s + "'");
  }
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open " + path);
  }
  return in;
}

void expect_header(std::istream& in, const std::string& expected) {
  std::string header;
  if (!std::getline(in, header)) {
    throw Error(ErrorCode::SchemaViolation, "line 1: missing header");
  }
  if (!header.empty() && header.back() == '\r') {
    header.pop_back();
  }
  if (header != expected) {
    throw Error(ErrorCode::SchemaViolation, "line 1: expected header '" + expected + "'");
  }
}

constexpr const char* kGazeHeader = "t,dlx,dly,dlz,drx,dry,drz,pl,pr,ol,or,conv,valid_l,valid_r";
constexpr const char* kPhysioHeader = "t,ppg,gsr";

}  // namespace

GazeSeries read_gaze_csv(std::istream& in) {
  expect_header(in, kGazeHeader);
  GazeSeries out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 14) {
      throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": expected 14 fields");
    }
    GazeSample s;
    s.timestamp = parse_double(f[0], line_no);
    s.dir_left = {parse_double(f[1], line_no), parse_double(f[2], line_no), parse_double(f[3], line_no)};
    s.dir_right = {parse_double(f[4], line_no), parse_double(f[5], line_no), parse_double(f[6], line_no)};
    s.pupil_left = parse_double(f[7], line_no);
    s.pupil_right = parse_double(f[8], line_no);
    s.openness_left = parse_double(f[9], line_no);
    s.openness_right = parse_double(f[10], line_no);
    if (!f[11].empty()) {
      s.convergence_distance = parse_double(f[11], line_no);
    }
    s.valid_left = parse_double(f[12], line_no) != 0.0;
    s.valid_right = parse_double(f[13], line_no) != 0.0;
    out.push_back(s);
  }
  return out;
}

GazeSeries read_gaze_csv(const std::string& path) {
  auto in = open_in(path);
  return read_gaze_csv(in);
}

void write_gaze_csv(std::ostream& out, const GazeSeries& series) {
  out << kGazeHeader << '\n';
  for (const GazeSample& s : series) {
    out << fmt(s.timestamp) << ',' << fmt(s.dir_left[0]) << ',' << fmt(s.dir_left[1]) << ',' << fmt(s.dir_left[2])
        << ',' << fmt(s.dir_right[0]) << ',' << fmt(s.dir_right[1]) << ',' << fmt(s.dir_right[2]) << ','
        << fmt(s.pupil_left) << ',' << fmt(s.pupil_right) << ',' << fmt(s.openness_left) << ','
        << fmt(s.openness_right) << ',' << (s.convergence_distance ? fmt(*s.convergence_distance) : std::string())
        << ',' << (s.valid_left ? 1 : 0) << ',' << (s.valid_right ? 1 : 0) << '\n';
  }
}

PhysioSeries read_physio_csv(std::istream& in) {
  expect_header(in, kPhysioHeader);
  PhysioSeries out;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") {
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 3) {
      throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": expected 3 fields");
    }
    PhysioSample s;
    s.timestamp = parse_double(f[0], line_no);
    s.ppg = parse_double(f[1], line_no);
    s.gsr = f[2].empty() ? std::numeric_limits<double>::quiet_NaN() : parse_double(f[2], line_no);
    out.push_back(s);
  }
  return out;
}

PhysioSeries read_physio_csv(const std::string& path) {
  auto in = open_in(path);
  return read_physio_csv(in);
}

void write_physio_csv(std::ostream& out, const PhysioSeries& series) {
  out << kPhysioHeader << '\n';
  for (const PhysioSample& s : series) {
    out << fmt(s.timestamp) << ',' << fmt(s.ppg) << ',' << (std::isnan(s.gsr) ? std::string() : fmt(s.gsr)) << '\n';
  }
}

std::string sequence_to_json_line(const FeatureSequence& seq) {
  json windows = json::array();
  for (const FeatureWindow& w : seq.windows) {
    windows.push_back(std::vector<double>(w.features.begin(), w.features.end()));
  }
  json j = {{"participant_id", seq.participant_id},
            {"level_id", seq.level_id},
            {"condition", {{"control", seq.condition.control}, {"task", seq.condition.task}}},
            {"label", seq.label ? json(to_int(*seq.label)) : json(nullptr)},
            {"windows", windows}};
  return j.dump();
}

FeatureSequence sequence_from_json_line(const std::string& line) {
  FeatureSequence seq;
  try {
    const json j = json::parse(line);
    seq.participant_id = j.at("participant_id").get<std::string>();
    seq.level_id = j.at("level_id").get<int>();
    if (j.contains("condition")) {
      seq.condition.control = j["condition"].value("control", "");
      seq.condition.task = j["condition"].value("task", "");
    }
    if (j.contains("label") && !j["label"].is_null()) {
      const auto label = label_from_int(j["label"].get<int>());
      if (!label) {
        throw Error(ErrorCode::SchemaViolation, "label out of range");
      }
      seq.label = *label;
    }
    const json& windows = j.at("windows");
    if (!windows.is_array() || windows.size() != kWindowsPerLevel) {
      throw Error(ErrorCode::SchemaViolation, "expected 4 windows");
    }
    for (std::size_t w = 0; w < kWindowsPerLevel; ++w) {
      const auto values = windows[w].get<std::vector<double>>();
      if (values.size() != kFeatureCount) {
        throw Error(ErrorCode::SchemaViolation, "expected 28 features per window");
      }
      seq.windows[w].index = static_cast<int>(w);
      seq.windows[w].span_start = kWindowSeconds * static_cast<double>(w);
      seq.windows[w].span_end = seq.windows[w].span_start + kWindowSeconds;
      std::copy(values.begin(), values.end(), seq.windows[w].features.begin());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, e.what());
  }
  return seq;
}

Dataset read_features_jsonl(std::istream& in) {
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    try {
      out.push_back(sequence_from_json_line(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaViolation, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Dataset read_features_jsonl(const std::string& path) {
  auto in = open_in(path);
  return read_features_jsonl(in);
}

void write_features_jsonl(std::ostream& out, const Dataset& data) {
  for (const FeatureSequence& s : data) {
    out << sequence_to_json_line(s) << '\n';
  }
}

void write_features_jsonl(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot write " + path);
  }
  write_features_jsonl(out, data);
}

}  // namespace cogload::io
