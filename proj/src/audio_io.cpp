#include "asdchat/audio_io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "asdchat/codec.hpp"
#include "asdchat/error.hpp"

namespace asdchat {

namespace {

int16_t to_pcm16(float x) {
  double v = std::clamp(static_cast<double>(x), -1.0, 1.0) * 32767.0;
  return static_cast<int16_t>(std::lround(v));
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

void put_u16(std::string& out, uint16_t v) {
  out += static_cast<char>(v & 0xFF);
  out += static_cast<char>((v >> 8) & 0xFF);
}

uint32_t get_u32(std::string_view b, size_t at) {
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[at + i]);
  return v;
}

uint16_t get_u16(std::string_view b, size_t at) {
  return static_cast<uint16_t>(static_cast<unsigned char>(b[at]) | (static_cast<unsigned char>(b[at + 1]) << 8));
}

}  // namespace

std::uint64_t audio_fingerprint(const AudioBuffer& audio) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](unsigned char byte) {
    h ^= byte;
    h *= 1099511628211ULL;
  };
  auto rate = static_cast<uint32_t>(audio.sample_rate_hz);
  for (int i = 0; i < 4; ++i) mix(static_cast<unsigned char>((rate >> (8 * i)) & 0xFF));
  for (float s : audio.samples) {
    auto q = static_cast<uint16_t>(to_pcm16(s));
    mix(static_cast<unsigned char>(q & 0xFF));
    mix(static_cast<unsigned char>(q >> 8));
  }
  return h;
}

AudioBuffer quantize_pcm16(const AudioBuffer& audio) {
  AudioBuffer out;
  out.sample_rate_hz = audio.sample_rate_hz;
  out.samples.reserve(audio.samples.size());
  for (float s : audio.samples) out.samples.push_back(static_cast<float>(to_pcm16(s) / 32767.0));
  return out;
}

std::string encode_wav(const AudioBuffer& audio) {
  const auto data_bytes = static_cast<uint32_t>(audio.samples.size() * 2);
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(audio.sample_rate_hz));
  put_u32(out, static_cast<uint32_t>(audio.sample_rate_hz) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (float s : audio.samples) put_u16(out, static_cast<uint16_t>(to_pcm16(s)));
  return out;
}

AudioBuffer decode_wav(std::string_view b) {
  if (b.size() < 12 || b.substr(0, 4) != "RIFF" || b.substr(8, 4) != "WAVE") {
    throw Error(Errc::parse_error, "not a RIFF/WAVE stream");
  }
  uint16_t format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  bool have_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= b.size()) {
    auto id = b.substr(pos, 4);
    uint32_t size = get_u32(b, pos + 4);
    size_t body = pos + 8;
    if (body + size > b.size()) throw Error(Errc::parse_error, "truncated WAVE chunk");
    if (id == "fmt ") {
      if (size < 16) throw Error(Errc::parse_error, "short fmt chunk");
      format = get_u16(b, body);
      channels = get_u16(b, body + 2);
      rate = get_u32(b, body + 4);
      bits = get_u16(b, body + 14);
      if (format == 0xFFFE && size >= 26) format = get_u16(b, body + 24);  // extensible
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(Errc::parse_error, "data chunk before fmt chunk");
      if (channels == 0 || rate == 0) throw Error(Errc::parse_error, "invalid WAVE format fields");
      AudioBuffer out;
      out.sample_rate_hz = static_cast<int>(rate);
      if (format == 1 && bits == 16) {
        size_t frames = size / (2u * channels);
        out.samples.resize(frames);
        for (size_t f = 0; f < frames; ++f) {
          double acc = 0.0;
          for (size_t c = 0; c < channels; ++c) {
            acc += static_cast<int16_t>(get_u16(b, body + 2 * (f * channels + c))) / 32767.0;
          }
          out.samples[f] = static_cast<float>(acc / channels);
        }
      } else if (format == 3 && bits == 32) {
        size_t frames = size / (4u * channels);
        out.samples.resize(frames);
        for (size_t f = 0; f < frames; ++f) {
          double acc = 0.0;
          for (size_t c = 0; c < channels; ++c) {
            uint32_t raw = get_u32(b, body + 4 * (f * channels + c));
            float v;
            std::memcpy(&v, &raw, sizeof v);
            acc += v;
          }
          out.samples[f] = static_cast<float>(acc / channels);
        }
      } else {
        throw Error(Errc::parse_error, "unsupported WAVE sample format");
      }
      return out;
    }
    pos = body + size + (size & 1);
  }
  throw Error(Errc::parse_error, "WAVE stream has no data chunk");
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  write_file_atomic(path, encode_wav(audio));
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  return decode_wav(read_text_file(path));
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text) {
    if (c != '\n' && c != '\r' && c != ' ') clean += c;
  }
  if (clean.size() % 4 != 0) throw Error(Errc::parse_error, "base64 length is not a multiple of 4");
  std::string out(3 * clean.size() / 4, '\0');
  int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(clean.data()), static_cast<int>(clean.size()));
  if (n < 0) throw Error(Errc::parse_error, "malformed base64");
  // EVP_DecodeBlock keeps the bytes produced by '=' padding.
  size_t pad = 0;
  if (!clean.empty() && clean.back() == '=') ++pad;
  if (clean.size() > 1 && clean[clean.size() - 2] == '=') ++pad;
  out.resize(static_cast<size_t>(n) - pad);
  return out;
}

}  // namespace asdchat
