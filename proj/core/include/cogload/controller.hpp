#pragma once

#include "cogload/types.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cogload::control {

// Delay is kept in integer tenths of a second so +/-0.3 and -0.1 steps are exact.
inline constexpr int kDelayMinTenths = 10;
inline constexpr int kDelayMaxTenths = 40;
inline constexpr int kStartDelayTenths = 26;
inline constexpr int kLevelTenths = 600;
inline constexpr double kMaxModifier = 4.3;
inline constexpr int kDigitCount = 5;

struct DifficultyState {
  int delay_tenths = kStartDelayTenths;
  double delay() const { return delay_tenths / 10.0; }
  bool operator==(const DifficultyState&) const = default;
};

/// TooEasy -0.3 s, TooDifficult +0.3 s, JustRight -0.1 s, clamped to [1.0, 4.0].
DifficultyState update_difficulty(DifficultyState state, LoadLabel rating);

enum class TaskType { Single, Dual };
enum class ControlType { Model, Self };
enum class CubeColor { Blue, Yellow };
enum class RatingSource { Model, Self, Oracle };

std::string_view to_string(TaskType t);
std::string_view to_string(ControlType c);
std::string_view to_string(RatingSource s);
TaskType task_from_string(std::string_view s);
ControlType control_from_string(std::string_view s);

struct Spawn {
  int id = 0;
  CubeColor color = CubeColor::Blue;
  double time = 0.0;
};

struct DigitEvent {
  double time = 0.0;
  int digit = 0;
};

struct LevelPlan {
  int level_index = 0;
  int delay_tenths = kStartDelayTenths;
  double duration = 60.0;
  std::vector<Spawn> spawns;
  std::vector<DigitEvent> digits;  // empty for the single task
  int digit_sum() const;
};

/// floor(60/d) spawns per colour at d, 2d, ...; dual task adds five seeded
/// digits in [1, 9] at 10, 20, 30, 40 and 50 s.
LevelPlan plan_level(DifficultyState state, TaskType task, std::uint64_t seed, int level_index = 0);

/// 4.3 * (1.0 / d).
double difficulty_modifier(int delay_tenths);

struct LevelResult {
  int level_index = 0;
  int delay_tenths = kStartDelayTenths;
  int spawned = 0;
  int destroyed = 0;
  double raw_score = 0.0;
  double weighted_score = 0.0;
  std::optional<int> arithmetic_answer;
  std::optional<bool> arithmetic_correct;
  LoadLabel rating = LoadLabel::JustRight;
  RatingSource rating_source = RatingSource::Self;
  std::optional<std::array<double, kNumClasses>> probabilities;
  double delay_played() const { return delay_tenths / 10.0; }
};

/// Throws UnknownSpawnReference when an id is not in the plan. Repeated ids
/// count once.
LevelResult score_level(const LevelPlan& plan, std::span<const int> destroyed_ids, std::optional<int> answer);

struct LevelOutcome {
  std::vector<int> destroyed_ids;
  std::optional<int> arithmetic_answer;
  std::optional<FeatureSequence> features;  // raw 4x28, when sensors are attached
};

/// Plays (or simulates) one planned level.
class LevelExecutor {
public:
  virtual ~LevelExecutor() = default;
  virtual LevelOutcome execute(const LevelPlan& plan) = 0;
};

struct RatingContext {
  const LevelPlan& plan;
  const LevelResult& result;
  const FeatureSequence* features = nullptr;
};

struct Rating {
  LoadLabel label = LoadLabel::JustRight;
  std::optional<std::array<double, kNumClasses>> probabilities;
};

class Rater {
public:
  virtual ~Rater() = default;
  virtual Rating rate(const RatingContext& context) = 0;
  virtual RatingSource source() const = 0;
};

/// Interactive prompt accepting e / j / d (easy, just right, difficult).
class TerminalRater : public Rater {
public:
  TerminalRater(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  Rating rate(const RatingContext& context) override;
  RatingSource source() const override { return RatingSource::Self; }

private:
  std::istream& in_;
  std::ostream& out_;
};

struct SessionConfig {
  std::string participant_id;
  ControlType control = ControlType::Self;
  TaskType task = TaskType::Single;
  int levels = 8;
  int start_delay_tenths = kStartDelayTenths;
  double break_seconds = 5.0;
  std::uint64_t seed = 0;
};

struct SessionLog {
  SessionConfig config;
  std::vector<LevelResult> levels;
  int final_delay_tenths() const { return levels.empty() ? config.start_delay_tenths : levels.back().delay_tenths; }
  double final_difficulty() const { return final_delay_tenths() / 10.0; }
};

/// plan, execute, score, rate, update; the rater is called exactly once per level.
SessionLog run_session(const SessionConfig& config, LevelExecutor& executor, Rater& rater);

// One JSON object per level line, and a one-row-per-session CSV summary.
void write_session_jsonl(std::ostream& out, const SessionLog& log);
std::vector<SessionLog> read_session_jsonl(std::istream& in);
void write_session_summary_header(std::ostream& out);
void write_session_summary_row(std::ostream& out, const SessionLog& log);

}  // namespace cogload::control
