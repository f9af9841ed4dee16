#pragma once
// Live backends over HTTP. Request bodies are built from a JSON template
// whose string values may hold {{placeholders}}; a string that is exactly
// "{{messages}}" becomes the message array itself. Replies are read from a
// JSON pointer into the response.

#include <json.hpp>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "asdchat/providers.hpp"

namespace asdchat {

struct HttpEndpoint {
  std::string kind = "http";  // "http" or "mock"
  std::string base_url;       // scheme://host[:port]
  std::string path;
  std::string api_key_env;    // variable holding the key; empty for none
  std::string api_key_header = "Authorization";
  std::string api_key_prefix = "Bearer ";
  std::string model;
  std::string voice;
  double timeout_seconds = 30.0;
  nlohmann::json request_template;
  std::string response_pointer;  // JSON pointer to the reply / text / audio / vector
  // chat: role names on the wire
  std::map<std::string, std::string> role_names = {{"system", "system"}, {"agent", "assistant"}, {"child", "user"}};
  // synthesize: "wav_base64" (pointer into JSON) or "wav" (raw body)
  std::string audio_format = "wav_base64";
  // transcribe: pointer to a duration field, when the backend reports one
  std::string duration_pointer;
};

void to_json(nlohmann::json& j, const HttpEndpoint& e);
void from_json(const nlohmann::json& j, HttpEndpoint& e);

/// Value of the endpoint's key variable; nullopt when unset or empty.
std::optional<std::string> resolve_api_key(const HttpEndpoint& endpoint);

/// Replaces {{name}} tokens in every string of `tmpl`. A string equal to a
/// single token whose binding is JSON (not a string) is replaced by that
/// JSON value. UNSUBSTITUTED_PLACEHOLDER for an unbound token.
nlohmann::json render_json_template(const nlohmann::json& tmpl, const std::map<std::string, nlohmann::json>& vars);

/// POSTs a JSON body; returns the response body. Maps transport timeouts to
/// ProviderFault::timeout and non-2xx statuses to http_error.
std::string http_post_json(const HttpEndpoint& endpoint, ProviderRole role, const nlohmann::json& body);

class HttpChat : public ChatProvider {
 public:
  explicit HttpChat(HttpEndpoint endpoint, RetryPolicy retry = {});
  std::string id() const override;
  std::string chat(const ChatRequest& request) override;

 private:
  HttpEndpoint ep_;
  RetryPolicy retry_;
};

class HttpTranscriber : public Transcriber {
 public:
  explicit HttpTranscriber(HttpEndpoint endpoint, RetryPolicy retry = {});
  std::string id() const override;
  TranscriptionResult transcribe(const AudioBuffer& audio) override;

 private:
  HttpEndpoint ep_;
  RetryPolicy retry_;
};

class HttpSynthesizer : public Synthesizer {
 public:
  explicit HttpSynthesizer(HttpEndpoint endpoint, RetryPolicy retry = {});
  std::string id() const override;
  AudioBuffer synthesize(std::string_view text) override;

 private:
  HttpEndpoint ep_;
  RetryPolicy retry_;
};

class HttpEmbedder : public Embedder {
 public:
  explicit HttpEmbedder(HttpEndpoint endpoint, RetryPolicy retry = {});
  std::string id() const override;
  EmbeddingVector embed(std::string_view text) override;

 private:
  HttpEndpoint ep_;
  RetryPolicy retry_;
};

}  // namespace asdchat
