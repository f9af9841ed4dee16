// One line per acceptance criterion: PASS/FAIL, name, elapsed time, detail.
#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include "asdchat/audio_features.hpp"
#include "asdchat/codec.hpp"
#include "asdchat/commands.hpp"
#include "asdchat/fnirs.hpp"
#include "asdchat/report.hpp"
#include "asdchat/store.hpp"
#include "asdchat/synth.hpp"
#include "test_support.hpp"

using namespace asdchat;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back(what);
    }
  }
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<void(Outcome&)> check;
};

const report::ComparisonRow* find_row(const report::ComparisonReport& r, const std::string& subject,
                                      const std::string& metric) {
  for (const auto& row : r.rows) {
    if (row.subject == subject && row.metric == metric) return &row;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------

void condition_percentages(Outcome& o) {
  testing::TempDir tmp;
  cli::ReportArgs args;
  args.inputs = {testing::data_path("fixtures/condition_means.tsv")};
  args.out = tmp / "means.tsv";
  std::ostringstream out, err;
  o.require(cli::cmd_report(args, out, err) == cli::kExitOk, "cmd_report failed: " + err.str());
  if (!o.pass) return;

  // read back what the command wrote
  const auto text = read_text_file(args.out);
  const std::vector<std::pair<std::string, double>> expected = {
      {"words_per_turn", 13.11}, {"speech_seconds_per_turn", 43.03}, {"qa_score", -11.31}};
  for (const auto& [metric, pct] : expected) {
    bool found = false;
    for (auto line : split(text, '\n')) {
      const auto f = split(line, '\t');
      if (f.size() == 7 && f[0] == "avg" && f[1] == metric) {
        found = true;
        const auto v = parse_number(f[5]);
        o.require(v && std::abs(*v - pct) <= 0.01, fmt::format("{}: got {} want {:+.2f}", metric, f[5], pct));
      }
    }
    o.require(found, metric + ": no aggregate row");
  }
  o.require(out.str().find("+13.11%") != std::string::npos, "summary lacks +13.11%");
}

void speech_table_avg(Outcome& o) {
  const auto rows = report::parse_metric_rows(testing::read_data("fixtures/speech_table_subjects.tsv"));
  std::map<std::pair<std::string, std::string>, double> reference;
  for (auto line : split(testing::read_data("fixtures/speech_table_avg.tsv"), '\n')) {
    const auto f = split(line, '\t');
    if (f.size() == 3 && f[0] != "metric" && !f[0].starts_with("#")) {
      reference[{std::string(f[0]), std::string(f[1])}] = *parse_number(f[2]);
    }
  }
  o.require(reference.size() == 14, fmt::format("{} reference rows, expected 14", reference.size()));
  for (const auto& [key, want] : reference) {
    std::vector<std::optional<double>> cells;
    for (const auto& r : rows) {
      if (r.metric == key.first && r.condition == key.second) cells.push_back(r.value);
    }
    const auto metric = audio::parse_table_metric(key.first);
    if (!metric || cells.size() != 12) {
      o.require(false, key.first + "/" + key.second + ": bad fixture");
      continue;
    }
    const double got = audio::round_avg(*metric, *audio::mean_of_present(cells));
    o.require(got == want, fmt::format("{}/{}: computed {} reference {}", key.first, key.second, got, want));
  }
}

void session_contract(Outcome& o) {
  auto log_bytes = [](const std::vector<SessionEvent>& events) {
    std::string s;
    for (const auto& e : events) s += event_to_line(e) + "\n";
    return s;
  };
  auto run = [&](std::vector<ChatRequest>* chat_log) {
    testing::ScriptedRig rig(testing::mixed_script());
    auto s = rig.start(testing::short_config(), "contract");
    s.run_session();
    if (chat_log) *chat_log = s.chat_log();
    return log_bytes(s.events());
  };
  std::vector<ChatRequest> log;
  const auto first = run(&log);
  const auto second = run(nullptr);

  std::vector<SessionEvent> events;
  for (auto line : split(first, '\n')) {
    if (!line.empty()) events.push_back(event_from_line(line));
  }
  std::vector<std::string> order;
  for (const auto& e : events) {
    if (e.kind == EventKind::topic_start) order.push_back(*e.payload.topic);
  }
  o.require(order == std::vector<std::string>{"food", "animal", "toy", "family", "color"},
            "topic blocks out of canonical order");
  const auto problems = check_event_log(events);
  o.require(problems.empty(), problems.empty() ? "" : "malformed log: " + problems.front());

  bool timeout = false, unrecognized = false;
  for (const auto& r : log) {
    for (const auto& m : r.messages) {
      if (m.role != Role::system) continue;
      timeout = timeout || m.text.find("The communication time has ended") != std::string::npos;
      unrecognized = unrecognized || m.text == "Unrecognized speech, duration approximately 2.0 second(s).";
    }
  }
  o.require(timeout, "no timeout instruction reached the model");
  o.require(unrecognized, "no exact unrecognized-speech instruction");
  o.require(first == second, "two runs differ");
}

void prompt_golden(Outcome& o) {
  ChildProfile p;
  p.child_id = "demo-child";
  p.age_years = 5;
  p.sex = Sex::male;
  p.preferences = {{"food", {"apples", "noodles"}}, {"animal", {"dogs"}}};
  p.recent_experiences = {"went to the zoo last weekend"};
  const auto paradigm = builtin_paradigm();
  for (const std::string locale : {"en", "zh"}) {
    const auto& pack = builtin_prompt_pack(locale);
    o.require(build_system_prompt(p, *paradigm.find(Topic::animal), paradigm, pack) ==
                  testing::read_data("golden/" + locale + "/system_prompt_animal.txt"),
              locale + ": system prompt differs");
    ControlContext ctx;
    ctx.speech_seconds = 2.0;
    for (auto b : kAllControlBranches) {
      const std::string name(branch_name(b));
      o.require(control_prompt(b, ctx, pack) == testing::read_data("golden/" + locale + "/control_" + name + ".txt"),
                locale + ": " + name + " differs");
    }
  }
}

void fnirs_properties(Outcome& o) {
  using namespace asdchat::fnirs;
  const auto params = default_beer_lambert({760, 850});
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-5e-6, 5e-6);
  OpticalDensity od;
  od.data = {{std::vector<double>(100), std::vector<double>(100)}};
  std::vector<double> hbo(100), hbr(100);
  for (std::size_t i = 0; i < 100; ++i) {
    hbo[i] = u(rng);
    hbr[i] = u(rng);
    const auto pair = forward_od(hbo[i], hbr[i], params);
    od.data[0][0][i] = pair[0];
    od.data[0][1][i] = pair[1];
  }
  const auto hb = od_to_concentration(od, params);
  double worst = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    worst = std::max({worst, std::abs(hb.hbo[0][i] - hbo[i]) / std::abs(hbo[i]),
                      std::abs(hb.hbr[0][i] - hbr[i]) / std::abs(hbr[i])});
  }
  o.require(worst <= 1e-12, fmt::format("Beer-Lambert round trip error {:.3g}", worst));

  HbSeries series;
  std::normal_distribution<double> g(1e-6, 2e-7);
  series.hbo.assign(2, std::vector<double>(600));
  series.hbr = series.hbo;
  for (auto& ch : series.hbo) {
    for (auto& v : ch) v = g(rng);
  }
  const auto z = zscore_baseline(series, 5.0);
  for (const auto& ch : z.hbo) {
    double mean = 0, var = 0;
    for (std::size_t i = 120; i < 150; ++i) mean += ch[i];
    mean /= 30;
    for (std::size_t i = 120; i < 150; ++i) var += (ch[i] - mean) * (ch[i] - mean);
    const double sd = std::sqrt(var / 30);
    o.require(std::abs(mean) <= 1e-9 && std::abs(sd - 1) <= 1e-9,
              fmt::format("baseline mean {:.3g} sd {:.12f}", mean, sd));
  }

  const double rate = 30;
  const std::size_t n = 18000;
  auto tone = [&](double f) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2 * std::numbers::pi * f * static_cast<double>(i) / rate);
    return x;
  };
  const auto taps = design_bandpass(rate, 0.01, 0.2);
  auto peak = [&](const std::vector<double>& y) {
    double m = 0;
    for (std::size_t i = taps.size(); i < n - taps.size(); ++i) m = std::max(m, std::abs(y[i]));
    return m;
  };
  const double pass = peak(filtfilt(taps, tone(0.05)));
  const double stop_db = 20 * std::log10(peak(filtfilt(taps, tone(1.0))));
  o.require(std::abs(pass - 1) <= 0.05, fmt::format("0.05 Hz amplitude {:.4f}", pass));
  o.require(stop_db < -20, fmt::format("1 Hz attenuation {:.1f} dB", stop_db));

  OpticalDensity ramp;
  ramp.data = {{std::vector<double>(240), std::vector<double>(240)}};
  for (std::size_t i = 0; i < 240; ++i) {
    ramp.data[0][0][i] = 0.1 + 0.002 * static_cast<double>(i);
    ramp.data[0][1][i] = -0.004 * static_cast<double>(i);
  }
  auto hit = ramp;
  Mask mask(1, std::vector<bool>(240, false));
  for (std::size_t i = 100; i < 140; ++i) {
    mask[0][i] = true;
    hit.data[0][0][i] = 9.0;
    hit.data[0][1][i] = -9.0;
  }
  const auto fixed = spline_correct(hit, mask);
  double err = 0;
  for (std::size_t w = 0; w < 2; ++w) {
    for (std::size_t i = 0; i < 240; ++i) err = std::max(err, std::abs(fixed.data[0][w][i] - ramp.data[0][w][i]));
  }
  o.require(err <= 1e-12, fmt::format("spline ramp error {:.3g}", err));
}

void audio_dsp(Outcome& o) {
  const auto saw = synth::sawtooth(300, 1.0, 16000);
  const auto f0 = audio::estimate_f0(saw.samples, 16000);
  o.require(f0 && std::abs(*f0 - 300) <= 9, fmt::format("sawtooth F0 {}", f0 ? *f0 : 0.0));

  synth::VowelSpec v;
  v.f0_hz = 150;
  v.formants_hz = {500, 1200, 2100};
  const auto formants = audio::estimate_formants(audio::whole(synth::vowel(v)));
  for (int k = 0; k < 3; ++k) {
    const double want = v.formants_hz[k];
    o.require(std::abs(formants[k] - want) <= 0.1 * want, fmt::format("F{} {} vs {}", k + 1, formants[k], want));
  }

  std::vector<float> constant(64, 0.5f), alternating(64);
  for (std::size_t i = 0; i < 64; ++i) alternating[i] = i % 2 ? -1.0f : 1.0f;
  o.require(audio::zero_cross_rate(constant) == 0.0, "constant ZCR");
  o.require(audio::zero_cross_rate(alternating) == 1.0, "alternating ZCR");
  const auto tone = synth::sine(100, 1.0, 30000);
  const double zcr = audio::zero_cross_rate(tone.samples);
  o.require(zcr == 199.0 / 29999.0, fmt::format("100 Hz ZCR {} vs {}", zcr, 199.0 / 29999.0));

  synth::VowelSpec voiced;
  o.require(audio::classify_voiced(audio::whole(synth::vowel(voiced))), "vowel not voiced");
  o.require(!audio::classify_voiced(audio::whole(synth::white_noise(1.0, 16000, 0.3, 1234))), "noise voiced");
}

void case_study(Outcome& o) {
  const auto map = parse_speaker_map(R"({"T": "interventionist", "C": "child"})");
  const auto transcript = import_external_transcript(testing::read_data("fixtures/subject9_color.tsv"), map).entries;
  const auto window = parse_topic_intervals(testing::read_data("fixtures/subject9_topics.tsv")).at(0);
  const auto d = fnirs::speaker_durations(transcript, window);
  o.require(std::abs(d.total_seconds - 166.67) <= 0.01, fmt::format("total {}", d.total_seconds));
  o.require(std::abs(d.child_seconds - 69.20) <= 0.01, fmt::format("child {}", d.child_seconds));
  o.require(std::abs(d.agent_seconds - 52.63) <= 0.01, fmt::format("interventionist {}", d.agent_seconds));

  const auto rep = report::build_report(report::parse_metric_rows(testing::read_data("fixtures/subject9_topic_amplitudes.tsv")));
  const auto* toy = find_row(rep, "S9", "hbo_mean_abs.toy");
  o.require(toy && std::abs(std::abs(toy->difference) - 0.31) <= 0.01,
            toy ? fmt::format("toy difference {}", toy->difference) : "no toy row");
}

void e2e_mock_pipeline(Outcome& o) {
  testing::TempDir tmp;
  std::ostringstream out, err;
  write_file_atomic(tmp / "config.json", R"({"seed": 5, "profile_path": ")" +
                                             (std::filesystem::path(ASDCHAT_RESOURCE_DIR) / "demo_profile.json").string() +
                                             R"("})");
  cli::RunArgs run;
  run.config = tmp / "config.json";
  run.out = tmp.path();
  o.require(cli::cmd_run(run, out, err) == 0, "run: " + err.str());

  cli::FixtureArgs fx;
  fx.out = tmp / "bundle";
  fx.subject = "demo-child";
  o.require(cli::cmd_make_fixture(fx, out, err) == 0, "make-fixture: " + err.str());
  cli::IngestArgs in;
  in.transcript = tmp / "bundle/transcript.tsv";
  in.speaker_map = tmp / "bundle/speaker_map.json";
  in.profile = tmp / "bundle/profile.json";
  in.recording = tmp / "bundle/recording.wav";
  in.topics = tmp / "bundle/topics.tsv";
  in.session_id = "interventionist-1";
  in.out = tmp.path();
  o.require(cli::cmd_ingest(in, out, err) == 0, "ingest: " + err.str());

  cli::AnalyzeArgs text;
  text.kind = cli::AnalysisKind::text;
  text.sessions = {tmp.path()};
  text.out = tmp / "text.tsv";
  o.require(cli::cmd_analyze(text, out, err) == 0, "analyze text: " + err.str());
  cli::AnalyzeArgs audio = text;
  audio.kind = cli::AnalysisKind::audio;
  audio.out = tmp / "audio.tsv";
  o.require(cli::cmd_analyze(audio, out, err) == 0, "analyze audio: " + err.str());

  cli::ReportArgs rep;
  rep.inputs = {text.out, audio.out};
  rep.out = tmp / "report.tsv";
  o.require(cli::cmd_report(rep, out, err) == 0, "report: " + err.str());

  const auto sdir = session_dir(tmp.path(), "mock-5");
  for (const auto& f : {sdir / "manifest", sdir / "events.ndtext", sdir / "transcript.tsv", sdir / "audio",
                        session_dir(tmp.path(), "interventionist-1") / "manifest", tmp / "text.tsv", tmp / "audio.tsv",
                        tmp / "audio.tsv.segments.tsv", tmp / "audio.tsv.table.txt", tmp / "report.tsv",
                        tmp / "report.tsv.txt"}) {
    o.require(std::filesystem::exists(f), "missing " + f.filename().string());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::string only;
  app.add_option("--only", only, "run a single criterion by name");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria = {
      {"condition_percentages", 1.0, condition_percentages}, {"speech_table_avg", 1.0, speech_table_avg},
      {"session_contract", 5.0, session_contract}, {"prompt_golden", 5.0, prompt_golden},
      {"fnirs_properties", 30.0, fnirs_properties}, {"audio_dsp", 30.0, audio_dsp},
      {"case_study", 1.0, case_study},             {"e2e_mock_pipeline", 60.0, e2e_mock_pipeline},
  };

  int failed = 0, ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.name != only) continue;
    ++ran;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.check(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < c.budget_seconds, fmt::format("took {:.2f} s, budget {} s", secs, c.budget_seconds));
    std::string detail;
    for (const auto& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    std::cout << fmt::format("{} {} ({:.2f} s){}{}\n", o.pass ? "PASS" : "FAIL", c.name, secs,
                             detail.empty() ? "" : ": ", detail);
    failed += o.pass ? 0 : 1;
  }
  if (ran == 0) {
    std::cerr << "no criterion named '" << only << "'\n";
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
