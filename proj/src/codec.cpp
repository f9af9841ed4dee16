#include "asdchat/codec.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "asdchat/error.hpp"

namespace asdchat {

using nlohmann::json;

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

template <typename T>
void read_opt(const json& j, const char* key, std::optional<T>& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->get<T>();
}

}  // namespace

void to_json(json& j, const TopicSpec& topic) {
  j = {{"name", topic_name(topic.name)},
       {"difficulty_rank", topic.difficulty_rank},
       {"entry_points", topic.entry_points},
       {"budget_seconds", topic.budget_seconds}};
}

void from_json(const json& j, TopicSpec& topic) {
  auto name = j.at("name").get<std::string>();
  auto t = parse_topic(name);
  if (!t) throw Error(Errc::unknown_topic, name);
  topic.name = *t;
  read_opt(j, "difficulty_rank", topic.difficulty_rank);
  topic.entry_points = j.at("entry_points").get<std::vector<std::string>>();
  read_opt(j, "budget_seconds", topic.budget_seconds);
}

void to_json(json& j, const SessionConfig& c) {
  j = json::object();
  if (c.topic_order) j["topic_order"] = *c.topic_order;
  j["per_topic_budget_seconds"] = c.per_topic_budget_seconds;
  j["total_budget_seconds"] = c.total_budget_seconds;
  j["response_window_seconds"] = c.response_window_seconds;
  j["budget_slack_seconds"] = c.budget_slack_seconds;
  j["avatar_id"] = c.avatar_id;
  j["locale"] = c.locale;
}

void from_json(const json& j, SessionConfig& c) {
  if (!j.is_object()) throw Error(Errc::parse_error, "session config must be an object");
  c = SessionConfig{};
  c.topic_order.reset();
  read_opt(j, "topic_order", c.topic_order);
  read_opt(j, "per_topic_budget_seconds", c.per_topic_budget_seconds);
  read_opt(j, "total_budget_seconds", c.total_budget_seconds);
  read_opt(j, "response_window_seconds", c.response_window_seconds);
  read_opt(j, "budget_slack_seconds", c.budget_slack_seconds);
  read_opt(j, "avatar_id", c.avatar_id);
  read_opt(j, "locale", c.locale);
}

void to_json(json& j, const ChildProfile& p) {
  j = {{"child_id", p.child_id},
       {"age_years", p.age_years},
       {"sex", sex_name(p.sex)},
       {"preferences", p.preferences},
       {"recent_experiences", p.recent_experiences}};
}

void from_json(const json& j, ChildProfile& p) {
  if (!j.is_object()) throw Error(Errc::parse_error, "child profile must be an object");
  p = ChildProfile{};
  read_opt(j, "child_id", p.child_id);
  read_opt(j, "age_years", p.age_years);
  if (auto it = j.find("sex"); it != j.end()) {
    auto name = it->get<std::string>();
    auto sex = parse_sex(name);
    if (!sex) throw Error(Errc::parse_error, "unknown sex '" + name + "'");
    p.sex = *sex;
  }
  read_opt(j, "preferences", p.preferences);
  read_opt(j, "recent_experiences", p.recent_experiences);
}

void to_json(json& j, const SessionEvent& e) {
  json p = json::object();
  const auto& pl = e.payload;
  if (pl.topic) p["topic"] = *pl.topic;
  if (pl.text) p["text"] = *pl.text;
  if (pl.audio_ref) p["audio_ref"] = *pl.audio_ref;
  if (pl.branch) p["branch"] = branch_name(*pl.branch);
  if (pl.speech_seconds) p["speech_seconds"] = *pl.speech_seconds;
  if (pl.final_window) p["final_window"] = true;
  if (pl.aborted) p["aborted"] = true;
  if (pl.error) p["error"] = *pl.error;
  j = {{"seq", e.seq},
       {"kind", event_kind_name(e.kind)},
       {"t_start", e.t_start},
       {"t_end", e.t_end},
       {"payload", std::move(p)}};
}

void from_json(const json& j, SessionEvent& e) {
  e = SessionEvent{};
  e.seq = j.at("seq").get<std::int64_t>();
  auto kind_name = j.at("kind").get<std::string>();
  auto kind = parse_event_kind(kind_name);
  if (!kind) throw Error(Errc::parse_error, "unknown event kind '" + kind_name + "'");
  e.kind = *kind;
  e.t_start = j.at("t_start").get<double>();
  e.t_end = j.at("t_end").get<double>();
  if (auto it = j.find("payload"); it != j.end()) {
    const json& p = *it;
    auto& pl = e.payload;
    read_opt(p, "topic", pl.topic);
    read_opt(p, "text", pl.text);
    read_opt(p, "audio_ref", pl.audio_ref);
    if (auto b = p.find("branch"); b != p.end()) {
      auto name = b->get<std::string>();
      auto branch = parse_branch(name);
      if (!branch) throw Error(Errc::parse_error, "unknown control branch '" + name + "'");
      pl.branch = *branch;
    }
    read_opt(p, "speech_seconds", pl.speech_seconds);
    read_opt(p, "final_window", pl.final_window);
    read_opt(p, "aborted", pl.aborted);
    read_opt(p, "error", pl.error);
  }
}

std::string event_to_line(const SessionEvent& event) {
  return json(event).dump();
}

SessionEvent event_from_line(std::string_view line) {
  auto j = parse_json(line, "event");
  try {
    return j.get<SessionEvent>();
  } catch (const json::exception& ex) {
    throw Error(Errc::parse_error, fmt::format("event: {}", ex.what()));
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::io_error, "read failed: " + path.string());
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw Error(Errc::io_error, fmt::format("cannot create {}: {}", path.parent_path().string(), ec.message()));
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(Errc::io_error, "write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(Errc::io_error, fmt::format("cannot rename onto {}: {}", path.string(), ec.message()));
  }
}

std::string format_double(double value) {
  return fmt::format("{}", value);
}

std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\r')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  if (text.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  size_t pos = 0;
  for (;;) {
    size_t next = text.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(text.substr(pos));
      return out;
    }
    out.push_back(text.substr(pos, next - pos));
    pos = next + 1;
  }
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, fmt::format("{}: {}", what, e.what()));
  }
}

}  // namespace asdchat
