#include "asdchat/paradigm.hpp"

#include <fmt/format.h>

#include <algorithm>

#include "asdchat/codec.hpp"
#include "asdchat/error.hpp"

namespace asdchat {

std::string_view topic_name(Topic topic) noexcept {
  switch (topic) {
    case Topic::food: return "food";
    case Topic::animal: return "animal";
    case Topic::toy: return "toy";
    case Topic::family: return "family";
    case Topic::color: return "color";
  }
  return "";
}

std::optional<Topic> parse_topic(std::string_view name) noexcept {
  for (Topic t : kAllTopics) {
    if (topic_name(t) == name) return t;
  }
  return std::nullopt;
}

std::string_view question_form_name(QuestionForm form) noexcept {
  switch (form) {
    case QuestionForm::what: return "what";
    case QuestionForm::who: return "who";
    case QuestionForm::where: return "where";
    case QuestionForm::why: return "why";
    case QuestionForm::how_to: return "how-to";
    case QuestionForm::when: return "when";
  }
  return "";
}

std::optional<QuestionForm> parse_question_form(std::string_view name) noexcept {
  for (auto f : {QuestionForm::what, QuestionForm::who, QuestionForm::where,
                 QuestionForm::why, QuestionForm::how_to, QuestionForm::when}) {
    if (question_form_name(f) == name) return f;
  }
  return std::nullopt;
}

std::string_view sex_name(Sex sex) noexcept {
  return sex == Sex::male ? "male" : "female";
}

std::optional<Sex> parse_sex(std::string_view name) noexcept {
  if (name == "male") return Sex::male;
  if (name == "female") return Sex::female;
  return std::nullopt;
}

const TopicSpec* Paradigm::find(Topic topic) const noexcept {
  auto it = std::find_if(topics.begin(), topics.end(),
                         [topic](const TopicSpec& t) { return t.name == topic; });
  return it == topics.end() ? nullptr : &*it;
}

Paradigm builtin_paradigm() {
  // Only the animal entry points come from the published paradigm; the
  // others are editable, non-normative defaults.
  Paradigm p;
  p.topics = {
      {Topic::food, 1, {"favorite foods", "fruits and vegetables", "what we eat at mealtimes"}, 180.0},
      {Topic::animal, 2, {"pets", "knowledge about animals", "what if you become an animal"}, 180.0},
      {Topic::toy, 3, {"favorite toys", "who you play with", "where toys are kept"}, 180.0},
      {Topic::family, 4, {"family members", "who lives at home", "places the family goes together"}, 180.0},
      {Topic::color, 5, {"favorite colors", "colors of things around you", "what color things are"}, 180.0},
  };
  p.policy.allowed = {QuestionForm::what, QuestionForm::who, QuestionForm::where};
  p.policy.forbidden = {QuestionForm::why, QuestionForm::how_to, QuestionForm::when};
  return p;
}

namespace {

std::set<QuestionForm> parse_forms(const nlohmann::json& j) {
  std::set<QuestionForm> out;
  for (const auto& item : j) {
    auto name = item.get<std::string>();
    auto form = parse_question_form(name);
    if (!form) throw Error(Errc::parse_error, "unknown question form '" + name + "'");
    out.insert(*form);
  }
  return out;
}

}  // namespace

Paradigm parse_paradigm(std::string_view text) {
  auto j = parse_json(text, "paradigm");
  Paradigm p;
  try {
    for (const auto& jt : j.at("topics")) p.topics.push_back(jt.get<TopicSpec>());
    const auto& jp = j.at("policy");
    p.policy.allowed = parse_forms(jp.at("allowed"));
    p.policy.forbidden = parse_forms(jp.at("forbidden"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, fmt::format("paradigm: {}", e.what()));
  }

  if (p.topics.empty()) throw Error(Errc::parse_error, "paradigm: no topics");
  std::set<Topic> seen;
  for (const auto& t : p.topics) {
    if (!seen.insert(t.name).second) {
      throw Error(Errc::parse_error, fmt::format("paradigm: duplicate topic '{}'", topic_name(t.name)));
    }
    if (t.entry_points.empty()) {
      throw Error(Errc::parse_error, fmt::format("paradigm: topic '{}' has no entry points", topic_name(t.name)));
    }
    if (!(t.budget_seconds > 0.0)) {
      throw Error(Errc::parse_error, fmt::format("paradigm: topic '{}' budget must be positive", topic_name(t.name)));
    }
  }
  for (QuestionForm f : p.policy.allowed) {
    if (p.policy.forbidden.count(f)) {
      throw Error(Errc::parse_error,
                  fmt::format("paradigm: question form '{}' both allowed and forbidden", question_form_name(f)));
    }
  }
  return p;
}

Paradigm load_paradigm(const std::filesystem::path& path) {
  return parse_paradigm(read_text_file(path));
}

std::string dump_paradigm(const Paradigm& paradigm) {
  nlohmann::json j;
  j["topics"] = paradigm.topics;
  auto forms = [](const std::set<QuestionForm>& s) {
    nlohmann::json a = nlohmann::json::array();
    for (auto f : s) a.push_back(std::string(question_form_name(f)));
    return a;
  };
  j["policy"] = {{"allowed", forms(paradigm.policy.allowed)},
                 {"forbidden", forms(paradigm.policy.forbidden)}};
  return j.dump(2) + "\n";
}

std::vector<Violation> validate_config(const SessionConfig& config) {
  std::vector<Violation> out;
  if (!config.topic_order) {
    out.push_back({"MISSING_TOPIC_ORDER", "topic_order is absent"});
  } else {
    std::set<std::string> seen;
    for (const auto& name : *config.topic_order) {
      if (!parse_topic(name)) out.push_back({"UNKNOWN_TOPIC", name});
      if (!seen.insert(name).second) out.push_back({"DUPLICATE_TOPIC", name});
    }
  }
  if (!(config.per_topic_budget_seconds > 0.0)) {
    out.push_back({"NONPOSITIVE_BUDGET", "per_topic_budget_seconds"});
  }
  if (!(config.total_budget_seconds > 0.0)) {
    out.push_back({"NONPOSITIVE_BUDGET", "total_budget_seconds"});
  }
  if (!(config.response_window_seconds > 0.0)) {
    out.push_back({"NONPOSITIVE_WINDOW", "response_window_seconds"});
  }
  if (config.budget_slack_seconds < 0.0) {
    out.push_back({"NEGATIVE_SLACK", "budget_slack_seconds"});
  }
  if (config.topic_order) {
    double scheduled = static_cast<double>(config.topic_order->size()) * config.per_topic_budget_seconds;
    if (scheduled > config.total_budget_seconds) {
      out.push_back({"BUDGET_EXCEEDED",
                     fmt::format("{} topics x {} s = {} s > {} s", config.topic_order->size(),
                                 config.per_topic_budget_seconds, scheduled, config.total_budget_seconds),
                     Severity::warning});
    }
  }
  if (config.locale != "en" && config.locale != "zh") {
    out.push_back({"UNKNOWN_LOCALE", config.locale});
  }
  return out;
}

bool has_errors(const std::vector<Violation>& violations) {
  return std::any_of(violations.begin(), violations.end(),
                     [](const Violation& v) { return v.severity == Severity::error; });
}

std::vector<Violation> validate_profile(const ChildProfile& profile) {
  std::vector<Violation> out;
  if (profile.child_id.empty()) out.push_back({"EMPTY_CHILD_ID", "child_id"});
  if (!(profile.age_years > 0.0)) out.push_back({"NONPOSITIVE_AGE", "age_years"});
  for (const auto& [key, _] : profile.preferences) {
    if (!parse_topic(key)) out.push_back({"UNKNOWN_PREFERENCE_TOPIC", key});
  }
  return out;
}

std::vector<TopicSpec> scheduled_topics(const SessionConfig& config, const Paradigm& paradigm) {
  std::vector<TopicSpec> out;
  if (!config.topic_order) return out;
  for (const auto& name : *config.topic_order) {
    auto topic = parse_topic(name);
    const TopicSpec* spec = topic ? paradigm.find(*topic) : nullptr;
    if (!spec) throw Error(Errc::unknown_topic, name);
    TopicSpec scheduled = *spec;
    scheduled.budget_seconds = config.per_topic_budget_seconds;
    out.push_back(std::move(scheduled));
  }
  return out;
}

}  // namespace asdchat
