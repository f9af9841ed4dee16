#include <doctest.h>

#include <cmath>

#include "asdchat/audio_features.hpp"
#include "asdchat/synth.hpp"
#include "asdchat/report.hpp"
#include "asdchat/text_metrics.hpp"
#include "test_support.hpp"

using namespace asdchat;
using namespace asdchat::audio;

namespace {

AudioSegment vowel_segment(double f0, std::array<double, 3> formants, double seconds = 1.0) {
  synth::VowelSpec v;
  v.f0_hz = f0;
  v.formants_hz = formants;
  v.seconds = seconds;
  return whole(synth::vowel(v));
}

AudioBuffer scaled(AudioBuffer a, float k) {
  for (auto& s : a.samples) s *= k;
  return a;
}

}  // namespace

TEST_SUITE("audio") {

TEST_CASE("zero-crossing rate analytic cases") {
  std::vector<float> constant(100, 0.3f);
  CHECK(zero_cross_rate(constant) == 0.0);
  std::vector<float> alternating(101);
  for (size_t i = 0; i < alternating.size(); ++i) alternating[i] = i % 2 ? -1.0f : 1.0f;
  CHECK(zero_cross_rate(alternating) == 1.0);

  const auto tone = synth::sine(100.0, 1.0, 30000);
  CHECK(zero_cross_rate(tone.samples) == 199.0 / 29999.0);

  const auto louder = scaled(tone, 0.1f);
  CHECK(zero_cross_rate(louder.samples) == zero_cross_rate(tone.samples));

  std::vector<float> one = {1.0f};
  try {
    zero_cross_rate(one);
    FAIL("expected TOO_SHORT");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::too_short);
  }
}

TEST_CASE("F0 of constructed periodic signals") {
  const auto saw = synth::sawtooth(300.0, 1.0, 16000);
  const auto f0 = estimate_f0(saw.samples, 16000);
  REQUIRE(f0);
  CHECK(std::abs(*f0 - 300.0) <= 9.0);

  const auto sine = synth::sine(300.0, 1.0, 16000, 0.5);
  const auto fs = estimate_f0(sine.samples, 16000);
  REQUIRE(fs);
  CHECK(std::abs(*fs - 300.0) <= 3.0);

  // amplitude scaling and polarity inversion
  CHECK(*estimate_f0(scaled(saw, 0.2f).samples, 16000) == doctest::Approx(*f0).epsilon(1e-9));
  CHECK(*estimate_f0(scaled(saw, -1.0f).samples, 16000) == doctest::Approx(*f0).epsilon(1e-9));

  const auto noise = synth::white_noise(1.0, 16000, 0.3, 42);
  CHECK_FALSE(estimate_f0(noise.samples, 16000));

  std::vector<float> tiny(100, 0.1f);
  CHECK_THROWS_AS(estimate_f0(tiny, 16000), Error);
}

TEST_CASE("formants of a synthetic vowel") {
  const auto seg = vowel_segment(150.0, {500.0, 1200.0, 2100.0});
  const auto f = estimate_formants(seg);
  CHECK(std::abs(f[0] - 500.0) <= 50.0);
  CHECK(std::abs(f[1] - 1200.0) <= 120.0);
  CHECK(std::abs(f[2] - 2100.0) <= 210.0);
  CHECK(f[0] < f[1]);
  CHECK(f[1] < f[2]);

  const auto table = estimate_formants(vowel_segment(150.0, {485.0, 1251.0, 2141.0}));
  CHECK(std::abs(table[0] - 485.0) <= 48.5);
  CHECK(std::abs(table[1] - 1251.0) <= 125.1);
  CHECK(std::abs(table[2] - 2141.0) <= 214.1);

  try {
    estimate_formants(whole(synth::white_noise(0.5, 16000, 0.3, 9)));
    FAIL("expected NOT_VOICED");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::not_voiced);
  }
}

TEST_CASE("LPC recovers a known resonance") {
  // a single two-pole resonator at 1000 Hz driven by an impulse train
  const double rate = 16000, fc = 1000, bw = 100;
  const double r = std::exp(-std::numbers::pi * bw / rate);
  const double a1 = -2 * r * std::cos(2 * std::numbers::pi * fc / rate), a2 = r * r;
  std::vector<float> x(4800);
  double y1 = 0, y2 = 0;
  for (size_t n = 0; n < x.size(); ++n) {
    const double in = n % 100 == 0 ? 1.0 : 0.0;
    const double y = in - a1 * y1 - a2 * y2;
    y2 = y1;
    y1 = y;
    x[n] = static_cast<float>(y);
  }
  const auto pred = lpc(std::span<const float>(x).subspan(1000, 480), 4, 0.0);
  REQUIRE(pred.size() == 5);
  CHECK(pred[0] == 1.0);
  const auto res = lpc_resonances(pred, 16000);
  REQUIRE_FALSE(res.empty());
  bool near = false;
  for (const auto& z : res) near = near || std::abs(z.frequency_hz - fc) < 30.0;
  CHECK(near);
}

TEST_CASE("voiced classification") {
  CHECK(classify_voiced(vowel_segment(300.0, {500.0, 1200.0, 2100.0})));
  CHECK_FALSE(classify_voiced(whole(synth::white_noise(1.0, 16000, 0.3, 77))));
  CHECK_FALSE(classify_voiced(whole(synth::silence(1.0, 16000))));

  const auto v = analyze_segment(vowel_segment(300.0, {500.0, 1200.0, 2100.0}));
  CHECK(v.voiced);
  CHECK(v.f1_hz);
  CHECK(v.f3_hz);
  const auto n = analyze_segment(whole(synth::white_noise(1.0, 16000, 0.3, 78)));
  CHECK_FALSE(n.voiced);
  CHECK_FALSE(n.f1_hz);
  CHECK(n.zcr > 0.3);
}

TEST_CASE("segmentation and outlier discarding") {
  CHECK(detect_segments(synth::silence(2.0, 16000)).empty());
  CHECK_THROWS_AS(detect_segments(AudioBuffer{}), Error);

  const auto tone = synth::sine(200, 1.0, 16000, 0.5);
  const auto gap = synth::silence(1.0, 16000);
  const auto segs = detect_segments(synth::concat({tone, gap, tone}), {}, 10.0);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0].t_end - segs[0].t_start == doctest::Approx(1.0).epsilon(0.05));
  CHECK(segs[1].t_start == doctest::Approx(12.0).epsilon(0.005));

  const auto blip = synth::sine(200, 0.05, 16000, 0.5);
  const auto with_blip = segment_speech(synth::concat({tone, gap, blip, gap, tone}));
  CHECK(with_blip.size() == 2);

  // RMS outliers: one far louder than the rest
  std::vector<AudioSegment> many;
  for (int i = 0; i < 6; ++i) many.push_back(whole(synth::sine(200, 0.5, 16000, 0.30f + 0.01f * i), i));
  many.push_back(whole(synth::sine(200, 0.5, 16000, 0.99), 9));
  CHECK(discard_outliers(many).size() == 6);
}

TEST_CASE("table aggregation follows the voiced rules") {
  std::vector<SegmentRow> rows;
  auto add = [&](std::string subject, std::string cond, double f0, double zcr, bool voiced, double f1) {
    SegmentRow r;
    r.subject = subject;
    r.condition = cond;
    r.features.f0_hz = f0;
    r.features.zcr = zcr;
    r.features.voiced = voiced;
    if (voiced) {
      r.features.f1_hz = f1;
      r.features.f2_hz = f1 * 2;
      r.features.f3_hz = f1 * 4;
    }
    rows.push_back(r);
  };
  add("S1", "asdchat", 300, 0.02, true, 500);
  add("S1", "asdchat", 400, 0.10, false, 0);
  add("S1", "interventionist", 200, 0.03, true, 600);
  add("S2", "asdchat", 500, 0.04, true, 700);
  const auto table = aggregate_speech_table(rows);
  CHECK(table.subjects == std::vector<std::string>{"S1", "S2"});
  auto find = [&](TableMetric m, const std::string& c) -> const TableRow& {
    for (const auto& r : table.rows) {
      if (r.metric == m && r.condition == c) return r;
    }
    FAIL("row missing");
    return table.rows.front();
  };
  CHECK(*find(TableMetric::speech_f0, "asdchat").cells[0] == 350.0);
  CHECK(*find(TableMetric::voiced_f0, "asdchat").cells[0] == 300.0);
  CHECK(*find(TableMetric::speech_zcr, "asdchat").cells[0] == doctest::Approx(0.06));
  CHECK(*find(TableMetric::f1, "asdchat").avg == 600.0);
  CHECK_FALSE(find(TableMetric::f1, "interventionist").cells[1]);
  CHECK(*find(TableMetric::f1, "interventionist").avg == 600.0);

  const auto text = format_speech_table(table);
  CHECK(text.rfind("field\tmetrics\ttype\tS1\tS2\tavg\n", 0) == 0);

  SegmentRow single;
  single.subject = "S1";
  single.condition = "asdchat";
  single.features.f0_hz = 612.25;
  single.features.zcr = 0.031;
  const auto t1 = aggregate_speech_table({single});
  CHECK(*t1.rows.front().avg == 612.25);
}

TEST_CASE("reference rows aggregate to their avg column") {
  const auto rows = report::parse_metric_rows(testing::read_data("fixtures/speech_table_subjects.tsv"));
  auto avg_of = [&](const std::string& metric, const std::string& cond) {
    std::vector<std::optional<double>> cells;
    for (const auto& r : rows) {
      if (r.metric == metric && r.condition == cond) cells.push_back(r.value);
    }
    REQUIRE(cells.size() == 12);
    return round_avg(*parse_table_metric(metric), *mean_of_present(cells));
  };
  CHECK(avg_of("speech_f0", "asdchat") == 655.0);
  CHECK(avg_of("speech_zcr", "interventionist") == 0.026);
}

}  // TEST_SUITE
