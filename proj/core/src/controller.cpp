#include "cogload/controller.hpp"

#include "cogload/error.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <set>

namespace cogload::control {
namespace {

using nlohmann::json;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

RatingSource source_from_string(std::string_view s) {
  if (s == "model") return RatingSource::Model;
  if (s == "self") return RatingSource::Self;
  if (s == "oracle") return RatingSource::Oracle;
  throw Error(ErrorCode::SchemaViolation, "session log: unknown rating source '" + std::string(s) + "'");
}

}  // namespace

DifficultyState update_difficulty(DifficultyState state, LoadLabel rating) {
  int step = 0;
  switch (rating) {
    case LoadLabel::TooEasy: step = -3; break;
    case LoadLabel::JustRight: step = -1; break;
    case LoadLabel::TooDifficult: step = 3; break;
  }
  state.delay_tenths = std::clamp(state.delay_tenths + step, kDelayMinTenths, kDelayMaxTenths);
  return state;
}

std::string_view to_string(TaskType t) { return t == TaskType::Single ? "single" : "dual"; }
std::string_view to_string(ControlType c) { return c == ControlType::Model ? "model" : "self"; }

std::string_view to_string(RatingSource s) {
  switch (s) {
    case RatingSource::Model: return "model";
    case RatingSource::Self: return "self";
    case RatingSource::Oracle: return "oracle";
  }
  return "self";
}

TaskType task_from_string(std::string_view s) {
  if (s == "single") return TaskType::Single;
  if (s == "dual") return TaskType::Dual;
  throw std::invalid_argument("unknown task type '" + std::string(s) + "'");
}

ControlType control_from_string(std::string_view s) {
  if (s == "model") return ControlType::Model;
  if (s == "self" || s == "oracle") return ControlType::Self;
  throw std::invalid_argument("unknown control type '" + std::string(s) + "'");
}

int LevelPlan::digit_sum() const {
  int sum = 0;
  for (const DigitEvent& d : digits) {
    sum += d.digit;
  }
  return sum;
}

LevelPlan plan_level(DifficultyState state, TaskType task, std::uint64_t seed, int level_index) {
  LevelPlan plan;
  plan.level_index = level_index;
  plan.delay_tenths = state.delay_tenths;
  const int per_colour = kLevelTenths / state.delay_tenths;
  int id = 0;
  for (int k = 1; k <= per_colour; ++k) {
    const double t = (k * state.delay_tenths) / 10.0;
    plan.spawns.push_back({id++, CubeColor::Blue, t});
    plan.spawns.push_back({id++, CubeColor::Yellow, t});
  }
  if (task == TaskType::Dual) {
    std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(level_index) + 1);
    std::uniform_int_distribution<int> digit(1, 9);
    for (int k = 1; k <= kDigitCount; ++k) {
      plan.digits.push_back({10.0 * k, digit(rng)});
    }
  }
  return plan;
}

double difficulty_modifier(int delay_tenths) { return kMaxModifier * (10.0 / delay_tenths); }

LevelResult score_level(const LevelPlan& plan, std::span<const int> destroyed_ids, std::optional<int> answer) {
  std::set<int> known;
  for (const Spawn& s : plan.spawns) {
    known.insert(s.id);
  }
  std::set<int> destroyed;
  for (int id : destroyed_ids) {
    if (!known.contains(id)) {
      throw Error(ErrorCode::UnknownSpawnReference,
                  "adaptive-controller: destruction references unknown spawn " + std::to_string(id));
    }
    destroyed.insert(id);
  }
  LevelResult r;
  r.level_index = plan.level_index;
  r.delay_tenths = plan.delay_tenths;
  r.spawned = static_cast<int>(plan.spawns.size());
  r.destroyed = static_cast<int>(destroyed.size());
  r.raw_score = r.spawned > 0 ? static_cast<double>(r.destroyed) / r.spawned : 0.0;
  r.weighted_score = r.raw_score * difficulty_modifier(plan.delay_tenths);
  if (!plan.digits.empty()) {
    r.arithmetic_answer = answer;
    r.arithmetic_correct = answer.has_value() && *answer == plan.digit_sum();
  }
  return r;
}

Rating TerminalRater::rate(const RatingContext& context) {
  out_ << "Level " << context.plan.level_index + 1 << " finished (delay " << fixed(context.plan.delay_tenths / 10.0, 1)
       << " s, score " << fixed(context.result.raw_score, 2) << "). Rate it [e]asy / [j]ust right / [d]ifficult: "
       << std::flush;
  std::string line;
  while (std::getline(in_, line)) {
    if (line == "e" || line == "E") return {LoadLabel::TooEasy, std::nullopt};
    if (line == "j" || line == "J") return {LoadLabel::JustRight, std::nullopt};
    if (line == "d" || line == "D") return {LoadLabel::TooDifficult, std::nullopt};
    out_ << "Please answer e, j or d: " << std::flush;
  }
  throw Error(ErrorCode::RaterFailure, "adaptive-controller: terminal input closed");
}

SessionLog run_session(const SessionConfig& config, LevelExecutor& executor, Rater& rater) {
  if (config.levels < 1) {
    throw std::invalid_argument("session needs at least one level");
  }
  SessionLog log;
  log.config = config;
  DifficultyState state{std::clamp(config.start_delay_tenths, kDelayMinTenths, kDelayMaxTenths)};
  for (int level = 0; level < config.levels; ++level) {
    const LevelPlan plan = plan_level(state, config.task, config.seed, level);
    const LevelOutcome outcome = executor.execute(plan);
    LevelResult result = score_level(plan, outcome.destroyed_ids, outcome.arithmetic_answer);
    Rating rating;
    try {
      rating = rater.rate({plan, result, outcome.features ? &*outcome.features : nullptr});
    } catch (const std::exception& e) {
      throw Error(ErrorCode::RaterFailure, "adaptive-controller: level " + std::to_string(level) + ": " + e.what());
    }
    result.rating = rating.label;
    result.rating_source = rater.source();
    result.probabilities = rating.probabilities;
    log.levels.push_back(result);
    state = update_difficulty(state, rating.label);
  }
  return log;
}

void write_session_jsonl(std::ostream& out, const SessionLog& log) {
  const SessionConfig& c = log.config;
  for (const LevelResult& r : log.levels) {
    json j;
    j["participant_id"] = c.participant_id;
    j["control"] = to_string(c.control);
    j["task"] = to_string(c.task);
    j["seed"] = c.seed;
    j["level"] = r.level_index;
    j["delay"] = fixed(r.delay_played(), 1);
    j["spawned"] = r.spawned;
    j["destroyed"] = r.destroyed;
    j["raw_score"] = r.raw_score;
    j["weighted_score"] = r.weighted_score;
    j["arithmetic_answer"] = r.arithmetic_answer ? json(*r.arithmetic_answer) : json(nullptr);
    j["arithmetic_correct"] = r.arithmetic_correct ? json(*r.arithmetic_correct) : json(nullptr);
    j["rating"] = to_int(r.rating);
    j["rating_source"] = to_string(r.rating_source);
    j["probs"] = r.probabilities ? json(std::vector<double>(r.probabilities->begin(), r.probabilities->end()))
                                 : json(nullptr);
    out << j.dump() << '\n';
  }
}

std::vector<SessionLog> read_session_jsonl(std::istream& in) {
  std::vector<SessionLog> logs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    try {
      const json j = json::parse(line);
      SessionConfig c;
      c.participant_id = j.at("participant_id").get<std::string>();
      c.control = control_from_string(j.at("control").get<std::string>());
      c.task = task_from_string(j.at("task").get<std::string>());
      c.seed = j.at("seed").get<std::uint64_t>();
      LevelResult r;
      r.level_index = j.at("level").get<int>();
      r.delay_tenths = static_cast<int>(std::lround(std::stod(j.at("delay").get<std::string>()) * 10.0));
      r.spawned = j.at("spawned").get<int>();
      r.destroyed = j.at("destroyed").get<int>();
      r.raw_score = j.at("raw_score").get<double>();
      r.weighted_score = j.at("weighted_score").get<double>();
      if (!j.at("arithmetic_answer").is_null()) r.arithmetic_answer = j["arithmetic_answer"].get<int>();
      if (!j.at("arithmetic_correct").is_null()) r.arithmetic_correct = j["arithmetic_correct"].get<bool>();
      const auto label = label_from_int(j.at("rating").get<int>());
      if (!label) {
        throw Error(ErrorCode::SchemaViolation, "rating out of range");
      }
      r.rating = *label;
      r.rating_source = source_from_string(j.at("rating_source").get<std::string>());
      if (!j.at("probs").is_null()) {
        const auto p = j["probs"].get<std::vector<double>>();
        if (p.size() != kNumClasses) {
          throw Error(ErrorCode::SchemaViolation, "probs must have 3 entries");
        }
        r.probabilities = std::array<double, kNumClasses>{p[0], p[1], p[2]};
      }
      const bool same = !logs.empty() && logs.back().config.participant_id == c.participant_id &&
                        logs.back().config.control == c.control && logs.back().config.task == c.task &&
                        logs.back().config.seed == c.seed && r.level_index > logs.back().levels.back().level_index;
      if (!same) {
        logs.push_back({});
        logs.back().config = c;
        logs.back().config.start_delay_tenths = r.delay_tenths;
      }
      logs.back().levels.push_back(r);
      logs.back().config.levels = static_cast<int>(logs.back().levels.size());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::SchemaViolation, "session log line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::SchemaViolation, "session log line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw Error(ErrorCode::SchemaViolation, "session log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return logs;
}

void write_session_summary_header(std::ostream& out) {
  out << "participant_id,control,task,seed,levels,final_difficulty,mean_raw_score,mean_weighted_score\n";
}

void write_session_summary_row(std::ostream& out, const SessionLog& log) {
  double raw = 0.0;
  double weighted = 0.0;
  for (const LevelResult& r : log.levels) {
    raw += r.raw_score;
    weighted += r.weighted_score;
  }
  const double n = log.levels.empty() ? 1.0 : static_cast<double>(log.levels.size());
  out << log.config.participant_id << ',' << to_string(log.config.control) << ',' << to_string(log.config.task) << ','
      << log.config.seed << ',' << log.levels.size() << ',' << fixed(log.final_difficulty(), 1) << ','
      << fixed(raw / n, 6) << ',' << fixed(weighted / n, 6) << '\n';
}

}  // namespace cogload::control
