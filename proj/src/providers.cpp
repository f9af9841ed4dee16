#include "asdchat/providers.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <thread>

#include "asdchat/utf8.hpp"

namespace asdchat {

std::string_view provider_role_name(ProviderRole role) noexcept {
  switch (role) {
    case ProviderRole::chat: return "chat";
    case ProviderRole::transcribe: return "transcribe";
    case ProviderRole::synthesize: return "synthesize";
    case ProviderRole::embed: return "embed";
  }
  return "";
}

std::string_view provider_fault_name(ProviderFault fault) noexcept {
  switch (fault) {
    case ProviderFault::timeout: return "TIMEOUT";
    case ProviderFault::http_error: return "HTTP_ERROR";
    case ProviderFault::empty_reply: return "EMPTY_REPLY";
    case ProviderFault::bad_response: return "BAD_RESPONSE";
    case ProviderFault::precondition: return "PRECONDITION";
  }
  return "";
}

namespace {

std::string describe(ProviderRole role, ProviderFault fault, const std::string& cause, int status) {
  std::string s = fmt::format("{} {}", provider_role_name(role), provider_fault_name(fault));
  if (fault == ProviderFault::http_error && status != 0) s += fmt::format("({})", status);
  if (!cause.empty()) s += ": " + cause;
  return s;
}

}  // namespace

ProviderError::ProviderError(ProviderRole role, ProviderFault fault, const std::string& cause, int http_status)
    : Error(Errc::provider_failure, describe(role, fault, cause, http_status)),
      role_(role),
      fault_(fault),
      http_status_(http_status),
      cause_(cause) {}

std::vector<std::string> ProviderSet::missing_session_roles() const {
  std::vector<std::string> out;
  if (!chat) out.emplace_back("chat");
  if (!transcriber) out.emplace_back("transcribe");
  if (!synthesizer) out.emplace_back("synthesize");
  return out;
}

std::map<std::string, std::string> ProviderSet::ids() const {
  std::map<std::string, std::string> out;
  if (chat) out["chat"] = chat->id();
  if (transcriber) out["transcribe"] = transcriber->id();
  if (synthesizer) out["synthesize"] = synthesizer->id();
  if (embedder) out["embed"] = embedder->id();
  return out;
}

void check_chat_request(const ChatRequest& request) {
  if (request.messages.empty()) {
    throw ProviderError(ProviderRole::chat, ProviderFault::precondition, "empty message list");
  }
  if (request.messages.front().role != Role::system) {
    throw ProviderError(ProviderRole::chat, ProviderFault::precondition, "first message must be a system message");
  }
}

void sleep_seconds(double seconds) {
  if (seconds > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

// ---------------------------------------------------------------------------

namespace {

struct DetectedTopic {
  std::string key;
  std::string display;
  bool chinese = false;
};

DetectedTopic detect_topic(const std::string& system_prompt) {
  DetectedTopic best{"food", "food", false};
  size_t best_pos = 0;
  bool found = false;
  for (const char* locale : {"en", "zh"}) {
    const auto& pack = builtin_prompt_pack(locale);
    for (const auto& [key, display] : pack.topic_names) {
      auto pos = system_prompt.rfind(display);
      if (pos != std::string::npos && (!found || pos > best_pos)) {
        best = {key, display, std::string_view(locale) == "zh"};
        best_pos = pos;
        found = true;
      }
    }
  }
  return best;
}

bool is_timeout_instruction(const ChatMessage& m) {
  if (m.role != Role::system) return false;
  for (const char* locale : {"en", "zh"}) {
    if (m.text == control_prompt(ControlBranch::timeout, {}, builtin_prompt_pack(locale))) return true;
  }
  return false;
}

}  // namespace

std::string EchoTopicChat::chat(const ChatRequest& request) {
  check_chat_request(request);
  auto topic = detect_topic(request.messages.front().text);
  size_t agent_turns = 0;
  for (const auto& m : request.messages) agent_turns += m.role == Role::agent;

  const auto& t = topic.display;
  if (is_timeout_instruction(request.messages.back())) {
    return topic.chinese ? fmt::format("今天我们聊了{}，你说得真棒！再见！", t)
                         : fmt::format("We talked about {} today and you did great. Goodbye!", t);
  }
  if (agent_turns == 0) {
    return topic.chinese ? fmt::format("你好！今天我们来聊聊{}吧。你喜欢什么{}？", t, t)
                         : fmt::format("Hello! Let's talk about {} today. What {} do you like?", t, t);
  }
  static constexpr std::array<const char*, 3> en = {
      "Great! What {} did you see today?", "Nice! Who likes {} with you?", "Cool! Where do you find {}?"};
  static constexpr std::array<const char*, 3> zh = {
      "真棒！你今天看到了什么{}？", "好的！谁和你一起喜欢{}？", "太好了！你在哪里能找到{}？"};
  const char* pattern = topic.chinese ? zh[(agent_turns - 1) % 3] : en[(agent_turns - 1) % 3];
  return fmt::format(fmt::runtime(pattern), t);
}

ScriptedChat::ScriptedChat(std::vector<std::string> replies) : replies_(std::move(replies)) {}

std::string ScriptedChat::chat(const ChatRequest& request) {
  check_chat_request(request);
  std::lock_guard lock(mu_);
  log_.push_back(request);
  auto& cursor = cursor_[request.session_id];
  if (cursor >= replies_.size() || replies_[cursor].empty()) {
    throw ProviderError(ProviderRole::chat, ProviderFault::empty_reply,
                        fmt::format("script exhausted after {} replies", replies_.size()));
  }
  return replies_[cursor++];
}

std::vector<ChatRequest> ScriptedChat::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

TranscriptionResult MockTranscriber::transcribe(const AudioBuffer& audio) {
  if (audio.empty() || audio.sample_rate_hz <= 0) {
    throw ProviderError(ProviderRole::transcribe, ProviderFault::precondition, "empty audio segment");
  }
  std::lock_guard lock(mu_);
  ++calls_;
  TranscriptionResult out;
  out.speech_seconds = audio.duration_seconds();
  if (fail_after_ && calls_ > *fail_after_) return out;
  if (auto it = table_.find(audio_fingerprint(audio)); it != table_.end()) out.text = it->second;
  return out;
}

void MockTranscriber::add(std::uint64_t fingerprint, std::string text) {
  std::lock_guard lock(mu_);
  table_[fingerprint] = std::move(text);
}

void MockTranscriber::fail_after(std::size_t calls) {
  std::lock_guard lock(mu_);
  fail_after_ = calls;
}

std::size_t MockTranscriber::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

AudioBuffer ToneSynthesizer::synthesize(std::string_view text) {
  if (text.empty()) {
    throw ProviderError(ProviderRole::synthesize, ProviderFault::precondition, "empty text");
  }
  const size_t chars = utf8::length(text);
  AudioBuffer out;
  out.sample_rate_hz = rate_;
  const auto n = static_cast<size_t>(std::llround(0.1 * static_cast<double>(chars) * rate_));
  out.samples.resize(n);
  const double w = 2.0 * std::numbers::pi * 220.0 / rate_;
  for (size_t i = 0; i < n; ++i) out.samples[i] = static_cast<float>(0.25 * std::sin(w * static_cast<double>(i)));
  return out;
}

std::vector<std::string> embedding_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string run;
  auto flush = [&] {
    if (!run.empty()) tokens.push_back(std::move(run));
    run.clear();
  };
  for (char32_t cp : utf8::decode(text)) {
    if (utf8::is_latin_alnum(cp)) {
      if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
      utf8::append(run, cp);
    } else {
      flush();
      if (utf8::is_cjk(cp)) {
        std::string one;
        utf8::append(one, cp);
        tokens.push_back(std::move(one));
      }
    }
  }
  flush();
  return tokens;
}

namespace {

std::uint64_t fnv1a(std::uint64_t seed, std::string_view tag, std::string_view body) {
  std::uint64_t h = 1469598103934665603ULL ^ (seed * 0x9E3779B97F4A7C15ULL);
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  mix(tag);
  mix(body);
  // final avalanche so nearby inputs land in unrelated buckets
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

}  // namespace

EmbeddingVector HashingEmbedder::embed(std::string_view text) {
  if (text.empty()) throw ProviderError(ProviderRole::embed, ProviderFault::precondition, "empty text");
  EmbeddingVector out;
  out.values.assign(dim_, 0.0);
  auto add = [&](std::string_view tag, const std::string& feature) {
    auto h = fnv1a(seed_, tag, feature);
    out.values[h % dim_] += (h >> 63) ? -1.0 : 1.0;
  };
  auto tokens = embedding_tokens(text);
  for (size_t i = 0; i < tokens.size(); ++i) {
    add("u:", tokens[i]);
    if (i + 1 < tokens.size()) add("b:", tokens[i] + " " + tokens[i + 1]);
  }
  double norm = 0.0;
  for (double v : out.values) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : out.values) v /= norm;
  }
  return out;
}

}  // namespace asdchat
