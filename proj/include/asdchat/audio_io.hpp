#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace asdchat {

/// Mono audio, samples nominally in [-1, 1].
struct AudioBuffer {
  std::vector<float> samples;
  int sample_rate_hz = 16000;

  double duration_seconds() const {
    return sample_rate_hz > 0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
  }
  bool empty() const { return samples.empty(); }
  bool operator==(const AudioBuffer&) const = default;
};

/// 64-bit FNV-1a over the 16-bit quantized samples and the rate, so a clip
/// keeps its fingerprint across a WAV round trip.
std::uint64_t audio_fingerprint(const AudioBuffer& audio);

/// Rounds every sample to the nearest 16-bit PCM level.
AudioBuffer quantize_pcm16(const AudioBuffer& audio);

/// RIFF/WAVE, mono, 16-bit linear PCM.
std::string encode_wav(const AudioBuffer& audio);
/// Accepts 16-bit PCM or 32-bit float WAVE; multi-channel input is averaged
/// to mono. Throws Error(parse_error).
AudioBuffer decode_wav(std::string_view bytes);

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);
AudioBuffer read_wav(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
/// Throws Error(parse_error) on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace asdchat
