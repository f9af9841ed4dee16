#include "asdchat/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace asdchat::synth {

namespace {

size_t sample_count(double seconds, int rate) {
  return static_cast<size_t>(std::llround(seconds * rate));
}

}  // namespace

AudioBuffer vowel(const VowelSpec& spec) {
  const int rate = spec.sample_rate_hz;
  const size_t n = sample_count(spec.seconds, rate);
  std::vector<double> x(n, 0.0);

  // Impulses where the running phase wraps; mean period is exact.
  double phase = 0.0;
  const double step = spec.f0_hz / rate;
  for (size_t i = 0; i < n; ++i) {
    if (i == 0 || phase >= 1.0) {
      phase -= std::floor(phase);
      x[i] = 1.0;
    }
    phase += step;
  }

  for (size_t k = 0; k < spec.formants_hz.size(); ++k) {
    const double r = std::exp(-std::numbers::pi * spec.bandwidths_hz[k] / rate);
    const double theta = 2.0 * std::numbers::pi * spec.formants_hz[k] / rate;
    const double a1 = 2.0 * r * std::cos(theta);
    const double a2 = -r * r;
    double y1 = 0.0, y2 = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double y = x[i] + a1 * y1 + a2 * y2;
      y2 = y1;
      y1 = y;
      x[i] = y;
    }
  }

  const size_t fade = std::min(n / 2, sample_count(spec.fade_seconds, rate));
  for (size_t i = 0; i < fade; ++i) {
    double g = static_cast<double>(i) / static_cast<double>(fade);
    x[i] *= g;
    x[n - 1 - i] *= g;
  }

  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  AudioBuffer out;
  out.sample_rate_hz = rate;
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i) out.samples[i] = static_cast<float>(peak > 0 ? spec.peak * x[i] / peak : 0.0);
  return out;
}

AudioBuffer sine(double freq_hz, double seconds, int sample_rate_hz, double amplitude, double phase) {
  AudioBuffer out;
  out.sample_rate_hz = sample_rate_hz;
  const size_t n = sample_count(seconds, sample_rate_hz);
  out.samples.resize(n);
  const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
  for (size_t i = 0; i < n; ++i) {
    out.samples[i] = static_cast<float>(amplitude * std::sin(w * static_cast<double>(i) + phase));
  }
  return out;
}

AudioBuffer sawtooth(double freq_hz, double seconds, int sample_rate_hz, double amplitude) {
  AudioBuffer out;
  out.sample_rate_hz = sample_rate_hz;
  const size_t n = sample_count(seconds, sample_rate_hz);
  out.samples.resize(n);
  for (size_t i = 0; i < n; ++i) {
    double p = freq_hz * static_cast<double>(i) / sample_rate_hz;
    p -= std::floor(p);
    out.samples[i] = static_cast<float>(amplitude * (2.0 * p - 1.0));
  }
  return out;
}

AudioBuffer white_noise(double seconds, int sample_rate_hz, double amplitude, std::uint64_t seed) {
  AudioBuffer out;
  out.sample_rate_hz = sample_rate_hz;
  const size_t n = sample_count(seconds, sample_rate_hz);
  out.samples.resize(n);
  std::mt19937_64 rng(seed);
  for (size_t i = 0; i < n; ++i) {
    // uniform in [-1, 1) from the raw 53 high bits
    double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    out.samples[i] = static_cast<float>(amplitude * (2.0 * u - 1.0));
  }
  return out;
}

AudioBuffer silence(double seconds, int sample_rate_hz) {
  AudioBuffer out;
  out.sample_rate_hz = sample_rate_hz;
  out.samples.assign(sample_count(seconds, sample_rate_hz), 0.0f);
  return out;
}

AudioBuffer concat(std::initializer_list<AudioBuffer> parts) {
  AudioBuffer out;
  bool first = true;
  for (const auto& p : parts) {
    if (first) {
      out.sample_rate_hz = p.sample_rate_hz;
      first = false;
    } else if (p.sample_rate_hz != out.sample_rate_hz) {
      throw std::invalid_argument("concat: sample rates differ");
    }
    out.samples.insert(out.samples.end(), p.samples.begin(), p.samples.end());
  }
  return out;
}

}  // namespace asdchat::synth
