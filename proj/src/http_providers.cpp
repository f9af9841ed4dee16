#include "asdchat/http_providers.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <regex>

#include "asdchat/codec.hpp"

namespace asdchat {

void to_json(nlohmann::json& j, const HttpEndpoint& e) {
  j = nlohmann::json{{"kind", e.kind},
                     {"base_url", e.base_url},
                     {"path", e.path},
                     {"api_key_env", e.api_key_env},
                     {"api_key_header", e.api_key_header},
                     {"api_key_prefix", e.api_key_prefix},
                     {"model", e.model},
                     {"voice", e.voice},
                     {"timeout_seconds", e.timeout_seconds},
                     {"request_template", e.request_template},
                     {"response_pointer", e.response_pointer},
                     {"role_names", e.role_names},
                     {"audio_format", e.audio_format},
                     {"duration_pointer", e.duration_pointer}};
}

void from_json(const nlohmann::json& j, HttpEndpoint& e) {
  HttpEndpoint d;
  e.kind = j.value("kind", d.kind);
  e.base_url = j.value("base_url", d.base_url);
  e.path = j.value("path", d.path);
  e.api_key_env = j.value("api_key_env", d.api_key_env);
  e.api_key_header = j.value("api_key_header", d.api_key_header);
  e.api_key_prefix = j.value("api_key_prefix", d.api_key_prefix);
  e.model = j.value("model", d.model);
  e.voice = j.value("voice", d.voice);
  e.timeout_seconds = j.value("timeout_seconds", d.timeout_seconds);
  e.request_template = j.value("request_template", nlohmann::json::object());
  e.response_pointer = j.value("response_pointer", d.response_pointer);
  e.role_names = j.value("role_names", d.role_names);
  e.audio_format = j.value("audio_format", d.audio_format);
  e.duration_pointer = j.value("duration_pointer", d.duration_pointer);
}

std::optional<std::string> resolve_api_key(const HttpEndpoint& endpoint) {
  if (endpoint.api_key_env.empty()) return std::nullopt;
  const char* v = std::getenv(endpoint.api_key_env.c_str());
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

nlohmann::json render_json_template(const nlohmann::json& tmpl, const std::map<std::string, nlohmann::json>& vars) {
  static const std::regex token(R"(\{\{([A-Za-z0-9_]+)\}\})");
  if (tmpl.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : tmpl.items()) out[k] = render_json_template(v, vars);
    return out;
  }
  if (tmpl.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& v : tmpl) out.push_back(render_json_template(v, vars));
    return out;
  }
  if (!tmpl.is_string()) return tmpl;

  const auto s = tmpl.get<std::string>();
  auto lookup = [&](const std::string& name) -> const nlohmann::json& {
    auto it = vars.find(name);
    if (it == vars.end()) throw Error(Errc::unsubstituted_placeholder, fmt::format("{{{{{}}}}}", name));
    return it->second;
  };
  std::smatch m;
  if (std::regex_match(s, m, token)) {
    return lookup(m[1].str());
  }
  std::string out;
  auto begin = s.cbegin();
  while (std::regex_search(begin, s.cend(), m, token)) {
    out.append(begin, m[0].first);
    const auto& v = lookup(m[1].str());
    out += v.is_string() ? v.get<std::string>() : v.dump();
    begin = m[0].second;
  }
  out.append(begin, s.cend());
  return out;
}

namespace {

httplib::Client make_client(const HttpEndpoint& ep) {
  httplib::Client cli(ep.base_url);
  const auto secs = static_cast<time_t>(ep.timeout_seconds);
  const auto usecs = static_cast<time_t>((ep.timeout_seconds - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  return cli;
}

std::string post(const HttpEndpoint& ep, ProviderRole role, const std::string& body) {
  if (ep.base_url.empty()) throw ProviderError(role, ProviderFault::precondition, "no base_url configured");
  auto cli = make_client(ep);
  httplib::Headers headers;
  if (auto key = resolve_api_key(ep)) headers.emplace(ep.api_key_header, ep.api_key_prefix + *key);
  auto res = cli.Post(ep.path.empty() ? "/" : ep.path, headers, body, "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::Write || err == httplib::Error::ConnectionTimeout) {
      throw ProviderError(role, ProviderFault::timeout, httplib::to_string(err));
    }
    throw ProviderError(role, ProviderFault::http_error, httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw ProviderError(role, ProviderFault::http_error,
                        fmt::format("status {}: {}", res->status, res->body.substr(0, 200)), res->status);
  }
  return res->body;
}

const nlohmann::json& at_pointer(const nlohmann::json& doc, const std::string& pointer, ProviderRole role) {
  try {
    return doc.at(nlohmann::json::json_pointer(pointer));
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(role, ProviderFault::bad_response, fmt::format("{}: {}", pointer, e.what()));
  }
}

nlohmann::json parse_response(const std::string& body, ProviderRole role) {
  try {
    return nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(role, ProviderFault::bad_response, e.what());
  }
}

std::string endpoint_id(const HttpEndpoint& ep) {
  return fmt::format("http:{}{}#{}", ep.base_url, ep.path, ep.model.empty() ? ep.voice : ep.model);
}

std::map<std::string, nlohmann::json> base_vars(const HttpEndpoint& ep) {
  return {{"model", ep.model}, {"voice", ep.voice}};
}

}  // namespace

std::string http_post_json(const HttpEndpoint& endpoint, ProviderRole role, const nlohmann::json& body) {
  return post(endpoint, role, body.dump());
}

HttpChat::HttpChat(HttpEndpoint endpoint, RetryPolicy retry) : ep_(std::move(endpoint)), retry_(std::move(retry)) {}

std::string HttpChat::id() const { return endpoint_id(ep_); }

std::string HttpChat::chat(const ChatRequest& request) {
  check_chat_request(request);
  auto messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    auto role = std::string(role_name(m.role));
    auto it = ep_.role_names.find(role);
    messages.push_back({{"role", it == ep_.role_names.end() ? role : it->second}, {"content", m.text}});
  }
  auto vars = base_vars(ep_);
  vars["messages"] = messages;
  const auto body = render_json_template(ep_.request_template, vars);
  return with_retry(retry_, [&] {
    auto doc = parse_response(http_post_json(ep_, ProviderRole::chat, body), ProviderRole::chat);
    const auto& reply = at_pointer(doc, ep_.response_pointer, ProviderRole::chat);
    if (!reply.is_string() || reply.get<std::string>().empty()) {
      throw ProviderError(ProviderRole::chat, ProviderFault::empty_reply, "reply is empty or not text");
    }
    return reply.get<std::string>();
  });
}

HttpTranscriber::HttpTranscriber(HttpEndpoint endpoint, RetryPolicy retry)
    : ep_(std::move(endpoint)), retry_(std::move(retry)) {}

std::string HttpTranscriber::id() const { return endpoint_id(ep_); }

TranscriptionResult HttpTranscriber::transcribe(const AudioBuffer& audio) {
  if (audio.empty() || audio.sample_rate_hz <= 0) {
    throw ProviderError(ProviderRole::transcribe, ProviderFault::precondition, "empty audio");
  }
  auto vars = base_vars(ep_);
  vars["audio_base64"] = base64_encode(encode_wav(audio));
  vars["sample_rate"] = audio.sample_rate_hz;
  const auto body = render_json_template(ep_.request_template, vars);
  return with_retry(retry_, [&] {
    auto doc = parse_response(http_post_json(ep_, ProviderRole::transcribe, body), ProviderRole::transcribe);
    TranscriptionResult r;
    r.speech_seconds = audio.duration_seconds();
    if (!ep_.duration_pointer.empty()) {
      const auto& d = at_pointer(doc, ep_.duration_pointer, ProviderRole::transcribe);
      if (d.is_number()) r.speech_seconds = d.get<double>();
    }
    auto ptr = nlohmann::json::json_pointer(ep_.response_pointer);
    if (doc.contains(ptr) && doc.at(ptr).is_string()) {
      auto text = doc.at(ptr).get<std::string>();
      if (text.find_first_not_of(" \t\r\n") != std::string::npos) r.text = std::move(text);
    }
    return r;
  });
}

HttpSynthesizer::HttpSynthesizer(HttpEndpoint endpoint, RetryPolicy retry)
    : ep_(std::move(endpoint)), retry_(std::move(retry)) {}

std::string HttpSynthesizer::id() const { return endpoint_id(ep_); }

AudioBuffer HttpSynthesizer::synthesize(std::string_view text) {
  if (text.empty()) throw ProviderError(ProviderRole::synthesize, ProviderFault::precondition, "empty text");
  auto vars = base_vars(ep_);
  vars["text"] = std::string(text);
  const auto body = render_json_template(ep_.request_template, vars);
  return with_retry(retry_, [&] {
    const auto raw = http_post_json(ep_, ProviderRole::synthesize, body);
    try {
      if (ep_.audio_format == "wav") return decode_wav(raw);
      auto doc = parse_response(raw, ProviderRole::synthesize);
      const auto& b64 = at_pointer(doc, ep_.response_pointer, ProviderRole::synthesize);
      if (!b64.is_string()) throw ProviderError(ProviderRole::synthesize, ProviderFault::bad_response, "audio is not text");
      return decode_wav(base64_decode(b64.get<std::string>()));
    } catch (const ProviderError&) {
      throw;
    } catch (const Error& e) {
      throw ProviderError(ProviderRole::synthesize, ProviderFault::bad_response, e.what());
    }
  });
}

HttpEmbedder::HttpEmbedder(HttpEndpoint endpoint, RetryPolicy retry)
    : ep_(std::move(endpoint)), retry_(std::move(retry)) {}

std::string HttpEmbedder::id() const { return endpoint_id(ep_); }

EmbeddingVector HttpEmbedder::embed(std::string_view text) {
  if (text.empty()) throw ProviderError(ProviderRole::embed, ProviderFault::precondition, "empty text");
  auto vars = base_vars(ep_);
  vars["text"] = std::string(text);
  const auto body = render_json_template(ep_.request_template, vars);
  return with_retry(retry_, [&] {
    auto doc = parse_response(http_post_json(ep_, ProviderRole::embed, body), ProviderRole::embed);
    const auto& arr = at_pointer(doc, ep_.response_pointer, ProviderRole::embed);
    EmbeddingVector v;
    if (!arr.is_array() || arr.empty()) {
      throw ProviderError(ProviderRole::embed, ProviderFault::bad_response, "embedding is not a non-empty array");
    }
    for (const auto& x : arr) {
      if (!x.is_number() || !std::isfinite(x.get<double>())) {
        throw ProviderError(ProviderRole::embed, ProviderFault::bad_response, "non-finite embedding component");
      }
      v.values.push_back(x.get<double>());
    }
    return v;
  });
}

}  // namespace asdchat
