#include "asdchat/config.hpp"

#include <fmt/format.h>

#include "asdchat/codec.hpp"
#include "asdchat/error.hpp"

#ifndef ASDCHAT_RESOURCE_DIR
#define ASDCHAT_RESOURCE_DIR "resources"
#endif

namespace asdchat {

namespace {

using nlohmann::json;

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

AnalysisConfig parse_analysis(const json& j) {
  AnalysisConfig a;
  if (j.contains("vad")) {
    const auto& v = j["vad"];
    take(v, "frame_seconds", a.vad.frame_seconds);
    take(v, "hop_seconds", a.vad.hop_seconds);
    take(v, "rms_threshold", a.vad.rms_threshold);
    take(v, "merge_gap_seconds", a.vad.merge_gap_seconds);
  }
  if (j.contains("outliers")) {
    const auto& v = j["outliers"];
    take(v, "min_seconds", a.outliers.min_seconds);
    take(v, "max_seconds", a.outliers.max_seconds);
    take(v, "mad_factor", a.outliers.mad_factor);
  }
  if (j.contains("f0")) {
    const auto& v = j["f0"];
    take(v, "min_hz", a.features.f0.min_hz);
    take(v, "max_hz", a.features.f0.max_hz);
    take(v, "periodicity_threshold", a.features.f0.periodicity_threshold);
  }
  if (j.contains("voicing")) {
    const auto& v = j["voicing"];
    take(v, "max_zcr", a.features.voicing.max_zcr);
    take(v, "resonance_ceiling_hz", a.features.voicing.resonance_ceiling_hz);
    take(v, "resonance_max_bandwidth_hz", a.features.voicing.resonance_max_bandwidth_hz);
    take(v, "min_resonances", a.features.voicing.min_resonances);
  }
  if (j.contains("formants")) {
    const auto& v = j["formants"];
    take(v, "max_bandwidth_hz", a.features.formants.max_bandwidth_hz);
    take(v, "min_frequency_hz", a.features.formants.min_frequency_hz);
    take(v, "lpc_order", a.features.lpc.order);
    take(v, "pre_emphasis", a.features.lpc.pre_emphasis);
  }
  if (j.contains("fnirs")) {
    const auto& v = j["fnirs"];
    take(v, "low_hz", a.fnirs.low_hz);
    take(v, "high_hz", a.fnirs.high_hz);
    take(v, "anchor_seconds", a.fnirs.anchor_seconds);
    if (v.contains("motion")) {
      const auto& m = v["motion"];
      take(m, "window_seconds", a.fnirs.motion.window_seconds);
      take(m, "mask_pad_seconds", a.fnirs.motion.mask_pad_seconds);
      take(m, "std_threshold", a.fnirs.motion.std_threshold);
      take(m, "amp_threshold", a.fnirs.motion.amp_threshold);
    }
    if (v.contains("beer_lambert")) {
      const auto& b = v["beer_lambert"];
      fnirs::BeerLambertParams p;
      take(b, "eps_hbo", p.eps_hbo);
      take(b, "eps_hbr", p.eps_hbr);
      take(b, "dpf", p.dpf);
      take(b, "distance_cm", p.distance_cm);
      a.fnirs.beer_lambert = p;
    }
    if (v.contains("statistic")) {
      auto name = v["statistic"].get<std::string>();
      auto s = fnirs::parse_statistic(name);
      if (!s) throw Error(Errc::invalid_config, fmt::format("unknown statistic '{}'", name));
      a.statistic = *s;
    }
  }
  take(j, "embed_seed", a.embed_seed);
  return a;
}

}  // namespace

AppConfig parse_app_config(std::string_view text, const std::filesystem::path& base_dir) {
  const auto j = parse_json(text, "config");
  if (!j.is_object()) throw Error(Errc::invalid_config, "config must be a JSON object");
  AppConfig c;
  try {
    if (j.contains("session")) c.session = j["session"].get<SessionConfig>();
    if (j.contains("profile")) c.profile = j["profile"].get<ChildProfile>();
    if (j.contains("profile_path")) {
      c.profile = parse_json(read_text_file(resolve(base_dir, j["profile_path"].get<std::string>())), "profile")
                      .get<ChildProfile>();
    }
    take(j, "seed", c.seed);
    if (j.contains("providers")) {
      const auto& p = j["providers"];
      if (p.contains("chat")) c.providers.chat = p["chat"].get<HttpEndpoint>();
      if (p.contains("transcribe")) c.providers.transcribe = p["transcribe"].get<HttpEndpoint>();
      if (p.contains("synthesize")) c.providers.synthesize = p["synthesize"].get<HttpEndpoint>();
      if (p.contains("embed")) c.providers.embed = p["embed"].get<HttpEndpoint>();
    }
    if (j.contains("analysis")) c.analysis = parse_analysis(j["analysis"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_config, e.what());
  }
  if (j.contains("paradigm_path")) c.paradigm = load_paradigm(resolve(base_dir, j["paradigm_path"].get<std::string>()));
  if (j.contains("prompts_path")) c.prompts = load_prompt_pack(resolve(base_dir, j["prompts_path"].get<std::string>()));
  return c;
}

AppConfig load_app_config(const std::filesystem::path& path) {
  return parse_app_config(read_text_file(path), path.parent_path());
}

std::filesystem::path resource_dir() {
  if (const char* env = std::getenv("ASDCHAT_RESOURCES"); env != nullptr && *env != '\0') return env;
  return ASDCHAT_RESOURCE_DIR;
}

ChildProfile demo_profile() {
  ChildProfile p;
  p.child_id = "demo-child";
  p.age_years = 5;
  p.sex = Sex::male;
  p.preferences = {{"food", {"apples", "noodles"}},
                   {"animal", {"dogs"}},
                   {"toy", {"building blocks"}},
                   {"family", {"grandma"}},
                   {"color", {"blue"}}};
  p.recent_experiences = {"went to the zoo last weekend"};
  return p;
}

ProviderSet live_providers(const ProviderConfig& config) {
  std::vector<std::string> missing;
  auto check = [&](const std::optional<HttpEndpoint>& ep, const char* role) {
    if (!ep || ep->kind != "http" || ep->base_url.empty()) {
      missing.push_back(fmt::format("{}: no http endpoint", role));
    } else if (!ep->api_key_env.empty() && !resolve_api_key(*ep)) {
      missing.push_back(fmt::format("{}: ${} is not set", role, ep->api_key_env));
    }
  };
  check(config.chat, "chat");
  check(config.transcribe, "transcribe");
  check(config.synthesize, "synthesize");
  if (!missing.empty()) {
    std::string detail;
    for (const auto& m : missing) detail += (detail.empty() ? "" : "; ") + m;
    throw Error(Errc::provider_missing, detail);
  }
  ProviderSet set;
  set.chat = std::make_shared<HttpChat>(*config.chat);
  set.transcriber = std::make_shared<HttpTranscriber>(*config.transcribe);
  set.synthesizer = std::make_shared<HttpSynthesizer>(*config.synthesize);
  if (config.embed && config.embed->kind == "http") set.embedder = std::make_shared<HttpEmbedder>(*config.embed);
  return set;
}

MockProviders mock_providers(std::uint64_t embed_seed) {
  MockProviders m;
  m.transcriber = std::make_shared<MockTranscriber>();
  m.set.chat = std::make_shared<EchoTopicChat>();
  m.set.transcriber = m.transcriber;
  m.set.synthesizer = std::make_shared<ToneSynthesizer>();
  m.set.embedder = std::make_shared<HashingEmbedder>(embed_seed);
  return m;
}

}  // namespace asdchat
