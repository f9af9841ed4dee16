#pragma once

// Constructed test and demo signals with known ground truth.

#include <array>
#include <cstdint>

#include "asdchat/audio_io.hpp"

namespace asdchat::synth {

struct VowelSpec {
  double f0_hz = 300.0;
  std::array<double, 3> formants_hz = {500.0, 1200.0, 2100.0};
  std::array<double, 3> bandwidths_hz = {80.0, 100.0, 120.0};
  double seconds = 1.0;
  int sample_rate_hz = 16000;
  double peak = 0.5;
  double fade_seconds = 0.01;
};

/// Impulse train at f0 through a cascade of two-pole resonators, one per
/// formant, peak-normalized.
AudioBuffer vowel(const VowelSpec& spec);

AudioBuffer sine(double freq_hz, double seconds, int sample_rate_hz, double amplitude = 1.0, double phase = 0.0);
AudioBuffer sawtooth(double freq_hz, double seconds, int sample_rate_hz, double amplitude = 0.5);
AudioBuffer white_noise(double seconds, int sample_rate_hz, double amplitude, std::uint64_t seed);
AudioBuffer silence(double seconds, int sample_rate_hz);

/// Concatenation; all parts must share a rate.
AudioBuffer concat(std::initializer_list<AudioBuffer> parts);

}  // namespace asdchat::synth
