#pragma once
// Synthetic recordings for demos and end-to-end runs: an fNIRS device
// trace and a complete interventionist-session ingest bundle.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "asdchat/store.hpp"

namespace asdchat::fixtures {

struct FnirsSimSpec {
  std::size_t channels = 8;
  double sample_rate_hz = 30.0;
  double seconds = 60.0;
  double conversation_start_s = 10.0;  // recording time; also written as a marker
  double hemo_amplitude = 0.02;        // OD units of the slow oscillation
  double noise = 0.002;
  std::uint64_t seed = 1;
};

/// Positive intensities with slow hemodynamic oscillation, a cardiac
/// component, and seeded noise. Markers: "conversation_start".
FnirsRecording simulate_fnirs(const FnirsSimSpec& spec);

struct BundleSpec {
  std::string subject = "S1";
  std::uint64_t seed = 1;
  double topic_seconds = 24.0;
  double lead_in_seconds = 2.0;       // session time of the first topic
  double fnirs_lead_seconds = 10.0;   // fNIRS starts this long before session t = 0
  int sample_rate_hz = 16000;
};

struct BundlePaths {
  std::filesystem::path transcript, speaker_map, recording, topics, profile, fnirs;
  double fnirs_start_session_s = 0.0;
};

/// Writes transcript.tsv (labels T/C), speaker_map.json, recording.wav,
/// topics.tsv, profile.json, and fnirs.matrix into `dir`.
BundlePaths write_interventionist_bundle(const std::filesystem::path& dir, const BundleSpec& spec);

}  // namespace asdchat::fixtures
