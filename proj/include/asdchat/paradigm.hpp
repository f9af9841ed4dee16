#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace asdchat {

// Conversation topics, declared in canonical order of increasing
// cognitive difficulty.
enum class Topic { food, animal, toy, family, color };

inline constexpr std::array<Topic, 5> kAllTopics = {
    Topic::food, Topic::animal, Topic::toy, Topic::family, Topic::color};

std::string_view topic_name(Topic topic) noexcept;
std::optional<Topic> parse_topic(std::string_view name) noexcept;

struct TopicSpec {
  Topic name = Topic::food;
  int difficulty_rank = 1;  // ordinal only
  std::vector<std::string> entry_points;
  double budget_seconds = 180.0;

  bool operator==(const TopicSpec&) const = default;
};

enum class QuestionForm { what, who, where, why, how_to, when };

std::string_view question_form_name(QuestionForm form) noexcept;
std::optional<QuestionForm> parse_question_form(std::string_view name) noexcept;

struct QuestionFormPolicy {
  std::set<QuestionForm> allowed;
  std::set<QuestionForm> forbidden;

  bool operator==(const QuestionFormPolicy&) const = default;
};

struct Paradigm {
  std::vector<TopicSpec> topics;
  QuestionFormPolicy policy;

  const TopicSpec* find(Topic topic) const noexcept;
  bool operator==(const Paradigm&) const = default;
};

/// The five built-in topics in difficulty order plus the what/who/where
/// question policy. Pure; every call returns an equal value.
Paradigm builtin_paradigm();

/// Loads a paradigm from its JSON text form (see resources/paradigm.json).
/// Throws Error(parse_error) on malformed input or broken invariants.
Paradigm parse_paradigm(std::string_view text);
Paradigm load_paradigm(const std::filesystem::path& path);
std::string dump_paradigm(const Paradigm& paradigm);

struct SessionConfig {
  // Absent means the configuration never named its topics, which is
  // distinct from an explicitly empty schedule.
  std::optional<std::vector<std::string>> topic_order =
      std::vector<std::string>{"food", "animal", "toy", "family", "color"};
  double per_topic_budget_seconds = 180.0;
  double total_budget_seconds = 900.0;
  double response_window_seconds = 10.0;
  // Allowance for one provider round trip plus farewell playback when
  // checking how far a topic may overrun its budget.
  double budget_slack_seconds = 15.0;
  std::string avatar_id = "lion";
  std::string locale = "en";

  bool operator==(const SessionConfig&) const = default;
};

enum class Sex { male, female };

std::string_view sex_name(Sex sex) noexcept;
std::optional<Sex> parse_sex(std::string_view name) noexcept;

struct ChildProfile {
  std::string child_id;
  double age_years = 0.0;
  Sex sex = Sex::male;
  std::map<std::string, std::vector<std::string>> preferences;
  std::vector<std::string> recent_experiences;

  bool operator==(const ChildProfile&) const = default;
};

enum class Severity { error, warning };

struct Violation {
  std::string code;  // e.g. "DUPLICATE_TOPIC"
  std::string detail;
  // Warnings (BUDGET_EXCEEDED) still let a session start; the engine then
  // schedules only the topics that fit the total budget.
  Severity severity = Severity::error;

  bool operator==(const Violation&) const = default;
};

/// Every broken invariant of `config`; empty means valid.
std::vector<Violation> validate_config(const SessionConfig& config);
bool has_errors(const std::vector<Violation>& violations);
std::vector<Violation> validate_profile(const ChildProfile& profile);

/// Resolves config.topic_order against `paradigm`, applying the configured
/// per-topic budget. Requires a valid config.
std::vector<TopicSpec> scheduled_topics(const SessionConfig& config,
                                        const Paradigm& paradigm);

}  // namespace asdchat
