#include "asdchat/prompts.hpp"

#include <fmt/format.h>

#include "asdchat/codec.hpp"
#include "asdchat/error.hpp"

namespace asdchat {

std::string_view role_name(Role role) noexcept {
  switch (role) {
    case Role::system: return "system";
    case Role::agent: return "agent";
    case Role::child: return "child";
  }
  return "";
}

std::optional<Role> parse_role(std::string_view name) noexcept {
  for (auto r : {Role::system, Role::agent, Role::child}) {
    if (role_name(r) == name) return r;
  }
  return std::nullopt;
}

std::string_view branch_name(ControlBranch branch) noexcept {
  switch (branch) {
    case ControlBranch::continue_topic: return "continue";
    case ControlBranch::silence: return "silence";
    case ControlBranch::unrecognized_speech: return "unrecognized_speech";
    case ControlBranch::timeout: return "timeout";
  }
  return "";
}

std::optional<ControlBranch> parse_branch(std::string_view name) noexcept {
  for (auto b : kAllControlBranches) {
    if (branch_name(b) == name) return b;
  }
  return std::nullopt;
}

namespace {

PromptPack make_english_pack() {
  PromptPack p;
  p.locale = "en";
  p.personal_template =
      "## Personal Information\n"
      "The child is a {age}-year-old {sex}. On the topic of {topic}, the child likes: {preferences}. "
      "Recent experiences of the child: {experiences}.";
  p.role_text =
      "## Role\n"
      "You are a friendly cartoon character chatting with a young child who has autism. "
      "Speak in a friendly and patient tone, using short and simple sentences. "
      "Ask only one question at a time, and only ask about what, who, and where. "
      "Never ask why, how-to, or when questions. "
      "Do not explain things at length. Praise the child's answers warmly. "
      "If the child's speech is unclear, you can ask for a repeat. "
      "Stay on the current topic and keep each reply under 30 words.";
  p.topic_template =
      "## Topic\n"
      "The topic of this conversation is {topic}. Entry points: {entry_points}. "
      "Start by greeting the child and introducing the topic.";
  p.list_separator = ", ";
  p.empty_list_text = "not recorded yet";
  p.sex_names = {{"male", "boy"}, {"female", "girl"}};
  p.topic_names = {{"food", "food"}, {"animal", "animal"}, {"toy", "toy"},
                   {"family", "family"}, {"color", "color"}};
  p.control = {
      {"continue",
       "Continue communicating around the topic and the content mentioned before. Ask only one question at a "
       "time, such as what, who, and where, without involving why, how-to, or when. Don't explain. If the speech "
       "is unclear, you can ask for a repeat."},
      {"silence", "The child remained silent for {window} seconds."},
      {"unrecognized_speech", "Unrecognized speech, duration approximately {speech_seconds} second(s)."},
      {"timeout",
       "The communication time has ended, respond to my words, summarize our communication, and say goodbye to "
       "me."},
  };
  return p;
}

PromptPack make_chinese_pack() {
  PromptPack p;
  p.locale = "zh";
  p.personal_template =
      "## 个人信息\n"
      "孩子是一名{age}岁的{sex}。关于{topic}，孩子喜欢：{preferences}。孩子最近的经历：{experiences}。";
  p.role_text =
      "## 角色\n"
      "你是一个友好的卡通角色，正在和一个患有自闭症的小朋友聊天。"
      "请用友好、耐心的语气，使用简短、简单的句子。"
      "每次只问一个问题，只问关于什么、谁和哪里的问题。"
      "不要问为什么、怎么做或什么时候的问题。"
      "不要长篇解释。热情地表扬孩子的回答。"
      "如果孩子说得不清楚，可以请孩子再说一遍。"
      "始终围绕当前话题，每次回复不超过30个字。";
  p.topic_template =
      "## 话题\n"
      "这次对话的话题是{topic}。切入点：{entry_points}。先和孩子打招呼并介绍话题。";
  p.list_separator = "、";
  p.empty_list_text = "暂无记录";
  p.sex_names = {{"male", "男孩"}, {"female", "女孩"}};
  p.topic_names = {{"food", "食物"}, {"animal", "动物"}, {"toy", "玩具"},
                   {"family", "家庭"}, {"color", "颜色"}};
  p.entry_point_names = {
      {"favorite foods", "喜欢的食物"},
      {"fruits and vegetables", "水果和蔬菜"},
      {"what we eat at mealtimes", "吃饭时吃什么"},
      {"pets", "宠物"},
      {"knowledge about animals", "动物知识"},
      {"what if you become an animal", "如果你变成一只动物"},
      {"favorite toys", "喜欢的玩具"},
      {"who you play with", "和谁一起玩"},
      {"where toys are kept", "玩具放在哪里"},
      {"family members", "家庭成员"},
      {"who lives at home", "家里住着谁"},
      {"places the family goes together", "全家一起去的地方"},
      {"favorite colors", "喜欢的颜色"},
      {"colors of things around you", "身边东西的颜色"},
      {"what color things are", "东西是什么颜色"},
  };
  p.control = {
      {"continue",
       "继续围绕话题和之前提到的内容进行交流。每次只问一个问题，比如什么、谁和哪里，不要涉及为什么、怎么做或什么时候。"
       "不要解释。如果话语不清楚，可以请我重复。"},
      {"silence", "孩子沉默了{window}秒。"},
      {"unrecognized_speech", "无法识别的语音，时长约{speech_seconds}秒。"},
      {"timeout", "交流时间已结束，请回应我的话，总结我们的交流，并和我说再见。"},
  };
  return p;
}

std::string lookup_or(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  return it == m.end() ? key : it->second;
}

std::string join(const std::vector<std::string>& items, const PromptPack& pack,
                 const std::map<std::string, std::string>* names = nullptr) {
  if (items.empty()) return pack.empty_list_text;
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += pack.list_separator;
    out += names ? lookup_or(*names, items[i]) : items[i];
  }
  return out;
}

bool is_identifier_char(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

}  // namespace

const PromptPack& builtin_prompt_pack(std::string_view locale) {
  static const PromptPack en = make_english_pack();
  static const PromptPack zh = make_chinese_pack();
  if (locale == "en") return en;
  if (locale == "zh") return zh;
  throw Error(Errc::invalid_config, fmt::format("no prompt pack for locale '{}'", locale));
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  out.reserve(tmpl.size());
  size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      size_t j = i + 1;
      while (j < tmpl.size() && is_identifier_char(tmpl[j])) ++j;
      if (j < tmpl.size() && tmpl[j] == '}' && j > i + 1) {
        std::string name(tmpl.substr(i + 1, j - i - 1));
        auto it = vars.find(name);
        if (it == vars.end()) throw Error(Errc::unsubstituted_placeholder, "{" + name + "}");
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string build_system_prompt(const ChildProfile& profile, const TopicSpec& topic,
                                const Paradigm& paradigm, const PromptPack& pack) {
  if (!paradigm.find(topic.name)) {
    throw Error(Errc::unknown_topic, std::string(topic_name(topic.name)));
  }
  const std::string key(topic_name(topic.name));
  const std::string display_topic = lookup_or(pack.topic_names, key);

  std::vector<std::string> prefs;
  if (auto it = profile.preferences.find(key); it != profile.preferences.end()) prefs = it->second;

  std::map<std::string, std::string> vars{
      {"age", fmt::format("{:g}", profile.age_years)},
      {"sex", lookup_or(pack.sex_names, std::string(sex_name(profile.sex)))},
      {"topic", display_topic},
      {"preferences", join(prefs, pack)},
      {"experiences", join(profile.recent_experiences, pack)},
      {"entry_points", join(topic.entry_points, pack, &pack.entry_point_names)},
  };

  std::string out = render_template(pack.personal_template, vars);
  out += pack.section_separator;
  out += render_template(pack.role_text, vars);
  out += pack.section_separator;
  out += render_template(pack.topic_template, vars);
  return out;
}

std::string control_prompt(ControlBranch branch, const ControlContext& context, const PromptPack& pack) {
  auto it = pack.control.find(std::string(branch_name(branch)));
  if (it == pack.control.end()) {
    throw Error(Errc::invalid_config,
                fmt::format("prompt pack '{}' lacks the '{}' control text", pack.locale, branch_name(branch)));
  }
  std::map<std::string, std::string> vars;
  if (branch == ControlBranch::unrecognized_speech) {
    if (!context.speech_seconds || !(*context.speech_seconds > 0.0)) {
      throw Error(Errc::missing_duration, "unrecognized_speech requires speech_seconds > 0");
    }
    vars["speech_seconds"] = fmt::format("{:.1f}", *context.speech_seconds);
  }
  if (branch == ControlBranch::silence) vars["window"] = fmt::format("{:g}", context.window_seconds);
  return render_template(it->second, vars);
}

PromptPack parse_prompt_pack(std::string_view text) {
  auto j = parse_json(text, "prompt pack");
  PromptPack p;
  try {
    p.locale = j.at("locale").get<std::string>();
    p.personal_template = j.at("personal_template").get<std::string>();
    p.role_text = j.at("role_text").get<std::string>();
    p.topic_template = j.at("topic_template").get<std::string>();
    p.section_separator = j.value("section_separator", p.section_separator);
    p.list_separator = j.value("list_separator", p.list_separator);
    p.empty_list_text = j.at("empty_list_text").get<std::string>();
    p.sex_names = j.at("sex_names").get<std::map<std::string, std::string>>();
    p.topic_names = j.at("topic_names").get<std::map<std::string, std::string>>();
    p.entry_point_names = j.value("entry_point_names", std::map<std::string, std::string>{});
    p.control = j.at("control").get<std::map<std::string, std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, fmt::format("prompt pack: {}", e.what()));
  }
  for (auto b : kAllControlBranches) {
    if (!p.control.count(std::string(branch_name(b)))) {
      throw Error(Errc::parse_error, fmt::format("prompt pack: missing control text '{}'", branch_name(b)));
    }
  }
  return p;
}

PromptPack load_prompt_pack(const std::filesystem::path& path) {
  return parse_prompt_pack(read_text_file(path));
}

std::string dump_prompt_pack(const PromptPack& pack) {
  nlohmann::ordered_json j;
  j["locale"] = pack.locale;
  j["personal_template"] = pack.personal_template;
  j["role_text"] = pack.role_text;
  j["topic_template"] = pack.topic_template;
  j["section_separator"] = pack.section_separator;
  j["list_separator"] = pack.list_separator;
  j["empty_list_text"] = pack.empty_list_text;
  j["sex_names"] = pack.sex_names;
  j["topic_names"] = pack.topic_names;
  j["entry_point_names"] = pack.entry_point_names;
  j["control"] = pack.control;
  return j.dump(2) + "\n";
}

}  // namespace asdchat
