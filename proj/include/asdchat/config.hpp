#pragma once
// The single configuration file: session parameters, the child profile,
// provider endpoints, and analysis parameters. Secrets come only from the
// environment variables the endpoints name.

#include <filesystem>
#include <optional>
#include <string>

#include "asdchat/audio_features.hpp"
#include "asdchat/fnirs.hpp"
#include "asdchat/http_providers.hpp"
#include "asdchat/paradigm.hpp"
#include "asdchat/prompts.hpp"
#include "asdchat/session.hpp"

namespace asdchat {

struct ProviderConfig {
  std::optional<HttpEndpoint> chat, transcribe, synthesize, embed;
};

struct AnalysisConfig {
  audio::VadParams vad;
  audio::OutlierParams outliers;
  audio::FeatureParams features;
  fnirs::PipelineParams fnirs;
  fnirs::Statistic statistic = fnirs::Statistic::mean_abs;
  std::uint64_t embed_seed = 0;  // hashing embedder when no live endpoint is used
};

struct AppConfig {
  SessionConfig session;
  std::optional<ChildProfile> profile;
  std::optional<Paradigm> paradigm;
  std::optional<PromptPack> prompts;
  ProviderConfig providers;
  AnalysisConfig analysis;
  std::uint64_t seed = 1;
};

/// Relative paths inside the file ("paradigm_path", "prompts_path",
/// "profile_path") resolve against `base_dir`.
AppConfig parse_app_config(std::string_view text, const std::filesystem::path& base_dir = {});
AppConfig load_app_config(const std::filesystem::path& path);

/// Bundled resources, installed next to the sources.
std::filesystem::path resource_dir();
ChildProfile demo_profile();

/// Live provider set from the configured endpoints. PROVIDER_MISSING names
/// every role without an endpoint or whose key variable is unset.
ProviderSet live_providers(const ProviderConfig& config);

/// Deterministic offline set. The transcriber is returned separately so
/// simulated children can register their clips with it.
struct MockProviders {
  ProviderSet set;
  std::shared_ptr<MockTranscriber> transcriber;
};
MockProviders mock_providers(std::uint64_t embed_seed = 0);

}  // namespace asdchat
