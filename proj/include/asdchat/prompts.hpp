#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "asdchat/paradigm.hpp"

namespace asdchat {

enum class Role { system, agent, child };

std::string_view role_name(Role role) noexcept;
std::optional<Role> parse_role(std::string_view name) noexcept;

struct PromptMessage {
  Role role = Role::system;
  std::string text;
  double timestamp = 0.0;  // seconds from session start

  bool operator==(const PromptMessage&) const = default;
};

enum class ControlBranch { continue_topic, silence, unrecognized_speech, timeout };

inline constexpr std::array<ControlBranch, 4> kAllControlBranches = {
    ControlBranch::continue_topic, ControlBranch::silence,
    ControlBranch::unrecognized_speech, ControlBranch::timeout};

std::string_view branch_name(ControlBranch branch) noexcept;
std::optional<ControlBranch> parse_branch(std::string_view name) noexcept;

struct ControlContext {
  std::optional<double> speech_seconds;  // required for unrecognized_speech
  double window_seconds = 10.0;          // rendered by the silence branch
};

/// One locale's prompt texts. Templates use `{name}` placeholders.
struct PromptPack {
  std::string locale;
  std::string personal_template;  // {age} {sex} {topic} {preferences} {experiences}
  std::string role_text;
  std::string topic_template;     // {topic} {entry_points}
  std::string section_separator = "\n\n";
  std::string list_separator = ", ";
  std::string empty_list_text;
  std::map<std::string, std::string> sex_names;
  std::map<std::string, std::string> topic_names;
  // Localized rendering of paradigm entry points; unmapped ones pass through.
  std::map<std::string, std::string> entry_point_names;
  std::map<std::string, std::string> control;  // keyed by branch_name

  bool operator==(const PromptPack&) const = default;
};

/// Embedded packs for "en" and "zh"; throws Error(invalid_config) otherwise.
const PromptPack& builtin_prompt_pack(std::string_view locale);

PromptPack parse_prompt_pack(std::string_view text);
PromptPack load_prompt_pack(const std::filesystem::path& path);
std::string dump_prompt_pack(const PromptPack& pack);

/// Substitutes `{name}` tokens in one pass; substituted values are never
/// re-scanned. Throws Error(unsubstituted_placeholder) for a token with no
/// binding.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

/// Initial system prompt: personal information, then role, then topic.
std::string build_system_prompt(const ChildProfile& profile, const TopicSpec& topic,
                                const Paradigm& paradigm, const PromptPack& pack);

std::string control_prompt(ControlBranch branch, const ControlContext& context,
                           const PromptPack& pack);

}  // namespace asdchat
