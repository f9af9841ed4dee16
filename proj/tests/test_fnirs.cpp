#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "asdchat/fixtures.hpp"
#include "asdchat/fnirs.hpp"
#include "asdchat/store.hpp"
#include "test_support.hpp"

using namespace asdchat;
using namespace asdchat::fnirs;

namespace {

std::vector<double> sinusoid(double freq, double rate, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * std::numbers::pi * freq * static_cast<double>(i) / rate);
  return x;
}

double peak_in(const std::vector<double>& x, std::size_t from, std::size_t to) {
  double m = 0;
  for (std::size_t i = from; i < to; ++i) m = std::max(m, std::abs(x[i]));
  return m;
}

OpticalDensity one_channel(std::vector<double> a, std::vector<double> b, double rate = 30.0) {
  OpticalDensity od;
  od.sample_rate_hz = rate;
  od.data = {{std::move(a), std::move(b)}};
  return od;
}

HbSeries noisy_series(std::size_t channels, std::size_t n, std::uint64_t seed) {
  HbSeries hb;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(2e-6, 3e-7);
  hb.hbo.assign(channels, std::vector<double>(n));
  hb.hbr.assign(channels, std::vector<double>(n));
  for (auto& ch : hb.hbo) {
    for (auto& v : ch) v = g(rng);
  }
  return hb;
}

}  // namespace

TEST_SUITE("fnirs") {

TEST_CASE("optical density of a constant trace is zero") {
  FnirsRecording r;
  r.intensity = {{std::vector<double>(90, 2.5), {1.0, 10.0, 100.0}}};
  r.intensity[0][1].resize(90, 10.0);
  r.intensity[0][1][0] = 1.0;
  const auto od = intensity_to_od(r);
  for (double v : od.data[0][0]) CHECK(v == doctest::Approx(0.0));
  double mean = 0;
  for (double v : r.intensity[0][1]) mean += v;
  mean /= 90;
  CHECK(od.data[0][1][0] == doctest::Approx(-std::log10(1.0 / mean)));
  r.intensity[0][0][5] = -1;
  CHECK_THROWS_AS(intensity_to_od(r), Error);
}

TEST_CASE("Beer-Lambert inversion round-trips the forward model") {
  const auto p = default_beer_lambert({760, 850});
  CHECK(extinction_condition(p) < 10.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-5e-6, 5e-6);
  std::vector<double> hbo(200), hbr(200), od0(200), od1(200);
  for (std::size_t i = 0; i < 200; ++i) {
    hbo[i] = u(rng);
    hbr[i] = u(rng);
    const auto od = forward_od(hbo[i], hbr[i], p);
    od0[i] = od[0];
    od1[i] = od[1];
  }
  const auto hb = od_to_concentration(one_channel(od0, od1), p);
  double worst = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    worst = std::max(worst, std::abs(hb.hbo[0][i] - hbo[i]) / std::abs(hbo[i]));
    worst = std::max(worst, std::abs(hb.hbr[0][i] - hbr[i]) / std::abs(hbr[i]));
  }
  CHECK(worst <= 1e-12);

  // swapped wavelength order swaps the coefficients
  const auto q = default_beer_lambert({850, 760});
  CHECK(q.eps_hbo[0] == p.eps_hbo[1]);
  CHECK_THROWS_AS(default_beer_lambert({700, 900}), Error);

  BeerLambertParams singular = p;
  singular.eps_hbr = {singular.eps_hbo[0] * 2, singular.eps_hbo[1] * 2};
  try {
    od_to_concentration(one_channel(od0, od1), singular);
    FAIL("expected SINGULAR_EXTINCTION");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::singular_extinction);
  }
}

TEST_CASE("baseline z-scoring") {
  auto hb = noisy_series(3, 900, 17);
  const auto z = zscore_baseline(hb, 10.0);
  CHECK(z.zscored);
  REQUIRE(z.baseline_window);
  CHECK(z.baseline_window->first == doctest::Approx(9.0));
  for (const auto& ch : z.hbo) {
    double mean = 0, var = 0;
    for (std::size_t i = 270; i < 300; ++i) mean += ch[i];
    mean /= 30;
    for (std::size_t i = 270; i < 300; ++i) var += (ch[i] - mean) * (ch[i] - mean);
    CHECK(std::abs(mean) <= 1e-9);
    CHECK(std::abs(std::sqrt(var / 30) - 1.0) <= 1e-9);
  }

  try {
    zscore_baseline(hb, 0.5);
    FAIL("expected INSUFFICIENT_BASELINE");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::insufficient_baseline);
  }
  auto flat = hb;
  std::fill(flat.hbo[1].begin(), flat.hbo[1].end(), 1e-6);
  try {
    zscore_baseline(flat, 10.0);
    FAIL("expected ZERO_VARIANCE_BASELINE");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::zero_variance_baseline);
  }
}

TEST_CASE("band-pass FIR passes 0.05 Hz and stops 1 Hz") {
  const double rate = 30.0;
  const auto taps = design_bandpass(rate, 0.01, 0.2);
  CHECK(taps.size() == kMaxFirTaps);
  CHECK(taps.size() % 2 == 1);
  CHECK(fir_gain(taps, 0.105, rate) == doctest::Approx(1.0).epsilon(1e-9));

  const std::size_t n = 18000;  // 10 minutes
  const auto edge = taps.size();
  const auto pass = filtfilt(taps, sinusoid(0.05, rate, n));
  const double pass_amp = peak_in(pass, edge, n - edge);
  CHECK(std::abs(pass_amp - 1.0) <= 0.05);

  const auto stop = filtfilt(taps, sinusoid(1.0, rate, n));
  const double stop_amp = peak_in(stop, edge, n - edge);
  CHECK(20 * std::log10(stop_amp) < -20.0);

  const auto f = bandpass_fir(one_channel(sinusoid(0.05, rate, n), sinusoid(1.0, rate, n)));
  CHECK(f.info.taps == taps.size());
  CHECK(f.info.edge_samples == taps.size());

  try {
    design_bandpass(0.3, 0.01, 0.2);
    FAIL("expected RATE_TOO_LOW");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::rate_too_low);
  }
  // short kernels at high cut-offs keep their natural order
  CHECK(design_bandpass(100.0, 1.0, 10.0).size() == 301);
}

TEST_CASE("spline correction reproduces a ramp under a masked gap") {
  const std::size_t n = 300;
  std::vector<double> ramp(n), ramp2(n);
  for (std::size_t i = 0; i < n; ++i) {
    ramp[i] = 0.25 + 0.003 * static_cast<double>(i);
    ramp2[i] = -0.1 - 0.001 * static_cast<double>(i);
  }
  auto od = one_channel(ramp, ramp2);
  auto corrupted = od;
  for (std::size_t i = 120; i < 170; ++i) {
    corrupted.data[0][0][i] += 3.0;
    corrupted.data[0][1][i] -= 1.0;
  }
  Mask mask(1, std::vector<bool>(n, false));
  for (std::size_t i = 120; i < 170; ++i) mask[0][i] = true;
  const auto fixed = spline_correct(corrupted, mask);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(std::abs(fixed.data[0][0][i] - ramp[i]) <= 1e-12);
    CHECK(std::abs(fixed.data[0][1][i] - ramp2[i]) <= 1e-12);
  }

  Mask all(1, std::vector<bool>(n, true));
  try {
    spline_correct(od, all);
    FAIL("expected ALL_FLAGGED");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::all_flagged);
  }

  // a run at the start takes the nearest clean value
  Mask head(1, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < 10; ++i) head[0][i] = true;
  const auto held = spline_correct(od, head);
  CHECK(held.data[0][0][0] == ramp[10]);

  const auto cubic = natural_cubic_spline({0, 1, 2, 3}, {0, 1, 0, 1}, {0, 1.5, 3});
  CHECK(cubic[0] == doctest::Approx(0.0));
  CHECK(cubic[1] == doctest::Approx(0.5));
  CHECK(cubic[2] == doctest::Approx(1.0));
}

TEST_CASE("motion artifacts are flagged around a jump and padded") {
  const std::size_t n = 600;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.001);
  std::vector<double> a(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = g(rng);
    b[i] = g(rng);
  }
  for (std::size_t i = 300; i < n; ++i) a[i] += 6.0;  // step beyond the amplitude threshold
  const auto mask = detect_motion_artifacts(one_channel(a, b));
  REQUIRE(mask.size() == 1);
  CHECK(mask[0][299]);
  CHECK(mask[0][300]);
  CHECK(mask[0][300 - 15 - 30]);  // window then padding
  CHECK_FALSE(mask[0][100]);
  CHECK_FALSE(mask[0][500]);
}

TEST_CASE("topic amplitude statistics") {
  HbSeries hb;
  hb.sample_rate_hz = 10;
  hb.hbo = {{-1, 2, -3, 4, -5, 6, -7, 8, -9, 10}, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1}};
  hb.hbr = hb.hbo;
  const auto a = topic_amplitude(hb, 0.0, 0.4);
  CHECK(a.per_channel[0] == doctest::Approx(2.5));
  CHECK(a.channel_mean == doctest::Approx(1.75));
  CHECK(topic_amplitude(hb, 0.0, 0.4, Statistic::mean).per_channel[0] == doctest::Approx(0.5));
  CHECK(topic_amplitude(hb, 0.0, 1.0, Statistic::peak_to_peak).per_channel[0] == doctest::Approx(19));
  CHECK_THROWS_AS(topic_amplitude(hb, 0.0, 5.0), Error);
  try {
    topic_amplitude(hb, 0.41, 0.42);
    FAIL("expected EMPTY_INTERVAL");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_interval);
  }
  CHECK(parse_statistic("peak_to_peak") == Statistic::peak_to_peak);
  CHECK(statistic_name(Statistic::mean_abs) == "mean_abs");
}

TEST_CASE("speaker durations of the color-topic fixture") {
  const auto map = parse_speaker_map(R"({"T": "interventionist", "C": "child"})");
  const auto transcript = import_external_transcript(testing::read_data("fixtures/subject9_color.tsv"), map).entries;
  const auto window = parse_topic_intervals(testing::read_data("fixtures/subject9_topics.tsv")).at(0);
  const auto d = speaker_durations(transcript, window);
  CHECK(std::abs(d.total_seconds - 166.67) <= 0.01);
  CHECK(std::abs(d.child_seconds - 69.20) <= 0.01);
  CHECK(std::abs(d.agent_seconds - 52.63) <= 0.01);

  const auto whole = speaker_durations(transcript);
  CHECK(whole.total_seconds == doctest::Approx(471.40 - 297.50));
  CHECK(whole.agent_seconds > d.agent_seconds);
}

TEST_CASE("waveform export aligns session time to the recording") {
  HbSeries hb;
  hb.sample_rate_hz = 10;
  hb.hbo = {std::vector<double>(100, 0.5)};
  hb.hbr = hb.hbo;
  std::vector<TranscriptEntry> t = {{Speaker::agent, "hi", 1.0, 2.0, 0}, {Speaker::child, "yo", 2.5, 4.0, 1}};
  ClockEpoch epoch;
  epoch.fnirs_start_session_s = -3.0;
  TopicInterval window{"food", 0.0, 3.0};
  const auto w = align_and_export_waveform(hb, t, 0, epoch, window);
  REQUIRE_FALSE(w.points.empty());
  CHECK(w.points.front().first == doctest::Approx(3.0));
  CHECK(w.points.back().first == doctest::Approx(6.0));
  REQUIRE(w.annotations.size() == 2);
  CHECK(w.annotations[0].t_start == doctest::Approx(4.0));
  CHECK(w.annotations[1].t_end == doctest::Approx(6.0));
  CHECK(w.durations.child_seconds == doctest::Approx(0.5));
  const auto text = dump_waveform(w);
  CHECK(text.rfind("# channel 1\n", 0) == 0);
  CHECK(text.find("interval\tchild\t5.5\t6\n") != std::string::npos);

  try {
    align_and_export_waveform(hb, t, 0, ClockEpoch{});
    FAIL("expected NO_ALIGNMENT");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::no_alignment);
  }
  CHECK_THROWS_AS(align_and_export_waveform(hb, t, 4, epoch), Error);
}

TEST_CASE("the whole pipeline on a simulated recording") {
  fixtures::FnirsSimSpec spec;
  spec.channels = 2;
  spec.seconds = 90;
  spec.conversation_start_s = 20;
  const auto rec = fixtures::simulate_fnirs(spec);
  validate_fnirs(rec);
  const auto r = run_pipeline(rec, 20.0);
  CHECK(r.hb.zscored);
  CHECK(r.hb.samples() == rec.samples());
  CHECK(r.hb.hbo.size() == 2);
  for (const auto& ch : r.hb.hbo) {
    for (double v : ch) REQUIRE(std::isfinite(v));
  }
  const auto amp = topic_amplitude(r.hb, 25.0, 60.0);
  CHECK(amp.per_channel.size() == 2);
  CHECK(amp.channel_mean > 0.0);
}

}  // TEST_SUITE
