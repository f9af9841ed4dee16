#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asdchat/audio_io.hpp"
#include "asdchat/error.hpp"
#include "asdchat/prompts.hpp"

namespace asdchat {

struct ChatMessage {
  Role role = Role::system;
  std::string text;

  bool operator==(const ChatMessage&) const = default;
};

/// The caller supplies the whole context every call; providers keep no
/// conversation state of their own.
struct ChatRequest {
  std::string session_id;
  std::vector<ChatMessage> messages;
};

struct TranscriptionResult {
  std::optional<std::string> text;  // absent with speech_seconds > 0: unrecognized speech
  double speech_seconds = 0.0;
};

struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
};

enum class ProviderRole { chat, transcribe, synthesize, embed };
enum class ProviderFault { timeout, http_error, empty_reply, bad_response, precondition };

std::string_view provider_role_name(ProviderRole role) noexcept;
std::string_view provider_fault_name(ProviderFault fault) noexcept;

/// Every provider failure, carrying the role that failed and why.
class ProviderError : public Error {
 public:
  ProviderError(ProviderRole role, ProviderFault fault, const std::string& cause, int http_status = 0);

  ProviderRole role() const noexcept { return role_; }
  ProviderFault fault() const noexcept { return fault_; }
  int http_status() const noexcept { return http_status_; }
  const std::string& cause() const noexcept { return cause_; }

 private:
  ProviderRole role_;
  ProviderFault fault_;
  int http_status_;
  std::string cause_;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual std::string id() const = 0;
  virtual std::string chat(const ChatRequest& request) = 0;
};

class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::string id() const = 0;
  virtual TranscriptionResult transcribe(const AudioBuffer& audio) = 0;
};

class Synthesizer {
 public:
  virtual ~Synthesizer() = default;
  virtual std::string id() const = 0;
  virtual AudioBuffer synthesize(std::string_view text) = 0;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  virtual EmbeddingVector embed(std::string_view text) = 0;
};

struct ProviderSet {
  std::shared_ptr<ChatProvider> chat;
  std::shared_ptr<Transcriber> transcriber;
  std::shared_ptr<Synthesizer> synthesizer;
  std::shared_ptr<Embedder> embedder;  // analysis only; optional for sessions

  /// Roles a session needs but this set lacks.
  std::vector<std::string> missing_session_roles() const;
  std::map<std::string, std::string> ids() const;
};

/// Throws ProviderError(precondition) unless the message list is non-empty
/// and opens with a system message.
void check_chat_request(const ChatRequest& request);

void sleep_seconds(double seconds);

struct RetryPolicy {
  int max_retries = 1;
  double base_backoff_seconds = 1.0;
  std::function<void(double)> sleep;  // defaults to a real sleep
};

/// Runs `call`, retrying only on ProviderFault::timeout with exponential
/// backoff (base, 2*base, ...).
template <typename F>
auto with_retry(const RetryPolicy& policy, F&& call) -> decltype(call()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return call();
    } catch (const ProviderError& e) {
      if (e.fault() != ProviderFault::timeout || attempt >= policy.max_retries) throw;
      double wait = policy.base_backoff_seconds * static_cast<double>(1 << attempt);
      if (policy.sleep) {
        policy.sleep(wait);
      } else {
        sleep_seconds(wait);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Deterministic mocks

/// Replies with a topic-anchored question; after the timeout instruction it
/// says goodbye. The topic is read from the system prompt's topic section.
class EchoTopicChat : public ChatProvider {
 public:
  std::string id() const override { return "mock:echo-topic"; }
  std::string chat(const ChatRequest& request) override;
};

/// Returns a fixed sequence of replies, tracked per session id. The call
/// after the script runs out fails with ProviderFault::empty_reply.
class ScriptedChat : public ChatProvider {
 public:
  explicit ScriptedChat(std::vector<std::string> replies);

  std::string id() const override { return "mock:scripted"; }
  std::string chat(const ChatRequest& request) override;
  std::vector<ChatRequest> requests() const;

 private:
  std::vector<std::string> replies_;
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> cursor_;
  std::vector<ChatRequest> log_;
};

/// Maps audio fingerprints to scripted text. Unknown clips come back as
/// unrecognized speech. With fail_after(n), every call after the n-th is
/// unrecognized.
class MockTranscriber : public Transcriber {
 public:
  std::string id() const override { return "mock:fingerprint"; }
  TranscriptionResult transcribe(const AudioBuffer& audio) override;

  void add(std::uint64_t fingerprint, std::string text);
  void add(const AudioBuffer& audio, std::string text) { add(audio_fingerprint(audio), std::move(text)); }
  void fail_after(std::size_t calls);
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::map<std::uint64_t, std::string> table_;
  std::optional<std::size_t> fail_after_;
  std::size_t calls_ = 0;
};

/// A 220 Hz tone lasting 0.1 s per code point of the input text.
class ToneSynthesizer : public Synthesizer {
 public:
  explicit ToneSynthesizer(int sample_rate_hz = 16000) : rate_(sample_rate_hz) {}

  std::string id() const override { return "mock:tone"; }
  AudioBuffer synthesize(std::string_view text) override;

 private:
  int rate_;
};

/// Seeded feature hashing of token unigrams and bigrams into a fixed-size,
/// L2-normalized vector. Tokens are runs of Latin letters/digits
/// (lower-cased) and single CJK characters. Text with no tokens embeds to
/// the zero vector.
class HashingEmbedder : public Embedder {
 public:
  explicit HashingEmbedder(std::uint64_t seed = 0, std::size_t dim = 64) : seed_(seed), dim_(dim) {}

  std::string id() const override { return "mock:hashing-" + std::to_string(dim_); }
  EmbeddingVector embed(std::string_view text) override;

 private:
  std::uint64_t seed_;
  std::size_t dim_;
};

/// Tokenization shared by the hashing embedder.
std::vector<std::string> embedding_tokens(std::string_view text);

}  // namespace asdchat
