#include "asdchat/fixtures.hpp"

#include <fmt/format.h>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "asdchat/codec.hpp"
#include "asdchat/config.hpp"
#include "asdchat/synth.hpp"

namespace asdchat::fixtures {

FnirsRecording simulate_fnirs(const FnirsSimSpec& spec) {
  FnirsRecording rec;
  rec.sample_rate_hz = spec.sample_rate_hz;
  const auto n = static_cast<size_t>(std::llround(spec.seconds * spec.sample_rate_hz));
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.noise);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  constexpr double two_pi = 2.0 * std::numbers::pi;

  for (size_t c = 0; c < spec.channels; ++c) {
    const double f_slow = 0.03 + 0.05 * uni(rng);
    const double phase = two_pi * uni(rng);
    const double base = 800.0 + 400.0 * uni(rng);
    std::vector<std::vector<double>> wl(2, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / spec.sample_rate_hz;
      // task-evoked rise after the conversation starts
      const double evoked = t > spec.conversation_start_s
                                ? 0.5 * spec.hemo_amplitude * (1.0 - std::exp(-(t - spec.conversation_start_s) / 8.0))
                                : 0.0;
      const double hemo = spec.hemo_amplitude * std::sin(two_pi * f_slow * t + phase) + evoked;
      const double cardiac = 0.2 * spec.hemo_amplitude * std::sin(two_pi * 1.1 * t);
      // oxygenation dominates at 850 nm, deoxygenation at 760 nm
      const double od760 = 0.6 * hemo + cardiac + noise(rng);
      const double od850 = 1.0 * hemo + cardiac + noise(rng);
      wl[0][i] = base * std::pow(10.0, -od760);
      wl[1][i] = base * 1.1 * std::pow(10.0, -od850);
    }
    rec.intensity.push_back(std::move(wl));
  }
  rec.markers.push_back({"conversation_start", spec.conversation_start_s});
  return rec;
}

namespace {

struct TopicLines {
  const char* topic;
  std::array<const char*, 3> questions;
  std::array<const char*, 4> answers;
};

constexpr std::array<TopicLines, 5> kLines = {{
    {"food",
     {"What did you eat for breakfast today?", "What fruit do you like best?", "Who cooks dinner at home?"},
     {"I ate noodles", "apples are my favorite", "mom cooks rice and eggs", "bread"}},
    {"animal",
     {"What animal do you like?", "Where did you see a tiger?", "What does a dog say?"},
     {"I like dogs", "at the zoo with dad", "woof woof", "a big elephant"}},
    {"toy",
     {"What toy do you play with most?", "Who plays with you?", "Where do you keep your toys?"},
     {"my blocks", "my sister plays cars with me", "in a red box", "a robot toy"}},
    {"family",
     {"Who lives with you at home?", "What does grandma like to do?", "Where did your family go last weekend?"},
     {"mom dad and me", "she likes to sing", "we went to the park", "grandpa"}},
    {"color",
     {"What color is the sky?", "What color do you like?", "What color is a banana?"},
     {"blue", "I like red and green", "yellow", "the sky is blue today"}},
}};

void mix(AudioBuffer& into, const AudioBuffer& clip, double at_seconds) {
  const auto offset = static_cast<size_t>(std::llround(at_seconds * into.sample_rate_hz));
  for (size_t i = 0; i < clip.samples.size() && offset + i < into.samples.size(); ++i) {
    into.samples[offset + i] += clip.samples[i];
  }
}

}  // namespace

BundlePaths write_interventionist_bundle(const std::filesystem::path& dir, const BundleSpec& spec) {
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  constexpr std::array<std::array<double, 3>, 5> child_vowels = {{
      {850, 1500, 3000}, {400, 2800, 3600}, {450, 1100, 2700}, {550, 2300, 3200}, {600, 1000, 2800}}};

  std::string transcript = "# start\tend\tspeaker\ttext\n";
  std::string topics;
  std::vector<std::pair<double, AudioBuffer>> clips;
  double t = spec.lead_in_seconds;
  for (const auto& lines : kLines) {
    const double start = t, end = t + spec.topic_seconds;
    size_t turn = 0;
    while (true) {
      const double q_len = 2.5;
      const double a_len = 1.2 + 1.6 * uni(rng);
      if (t + q_len + 0.4 + a_len > end) break;
      const auto* q = lines.questions[turn % lines.questions.size()];
      const auto* a = lines.answers[static_cast<size_t>(uni(rng) * lines.answers.size()) % lines.answers.size()];
      transcript += fmt::format("{:.3f}\t{:.3f}\tT\t{}\n", t, t + q_len, q);
      synth::VowelSpec adult;
      adult.f0_hz = 210.0;
      adult.formants_hz = {750.0, 1300.0, 2600.0};
      adult.seconds = q_len;
      adult.sample_rate_hz = spec.sample_rate_hz;
      adult.peak = 0.35;
      clips.emplace_back(t, synth::vowel(adult));
      t += q_len + 0.4;

      transcript += fmt::format("{:.3f}\t{:.3f}\tC\t{}\n", t, t + a_len, a);
      synth::VowelSpec child;
      child.f0_hz = 300.0 + 120.0 * uni(rng);
      child.formants_hz = child_vowels[static_cast<size_t>(uni(rng) * 5) % 5];
      child.bandwidths_hz = {90.0, 110.0, 150.0};
      child.seconds = a_len;
      child.sample_rate_hz = spec.sample_rate_hz;
      child.peak = 0.3 + 0.2 * uni(rng);
      clips.emplace_back(t, synth::vowel(child));
      t += a_len + 0.6;
      ++turn;
    }
    topics += fmt::format("{}\t{:.3f}\t{:.3f}\n", lines.topic, start, end);
    t = end;
  }

  const double total = t + 2.0;
  AudioBuffer recording = synth::white_noise(total, spec.sample_rate_hz, 1e-3, spec.seed ^ 0x5eedULL);
  for (const auto& [at, clip] : clips) mix(recording, clip, at);
  recording = quantize_pcm16(recording);

  BundlePaths paths;
  paths.transcript = dir / "transcript.tsv";
  paths.speaker_map = dir / "speaker_map.json";
  paths.recording = dir / "recording.wav";
  paths.topics = dir / "topics.tsv";
  paths.profile = dir / "profile.json";
  paths.fnirs = dir / "fnirs.matrix";
  paths.fnirs_start_session_s = -spec.fnirs_lead_seconds;

  write_file_atomic(paths.transcript, transcript);
  write_file_atomic(paths.speaker_map, R"({"T": "interventionist", "C": "child"})"
                                       "\n");
  write_wav(paths.recording, recording);
  write_file_atomic(paths.topics, topics);

  auto profile = demo_profile();
  profile.child_id = spec.subject;
  write_file_atomic(paths.profile, nlohmann::json(profile).dump(2) + "\n");

  FnirsSimSpec sim;
  sim.seconds = spec.fnirs_lead_seconds + total;
  sim.conversation_start_s = spec.fnirs_lead_seconds + spec.lead_in_seconds;
  sim.seed = spec.seed;
  write_file_atomic(paths.fnirs, dump_fnirs(simulate_fnirs(sim)));
  return paths;
}

}  // namespace asdchat::fixtures
