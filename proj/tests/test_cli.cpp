#include <doctest.h>

#include <cstdlib>
#include <sstream>
#include <sys/wait.h>

#include "asdchat/codec.hpp"
#include "asdchat/commands.hpp"
#include "asdchat/report.hpp"
#include "asdchat/store.hpp"
#include "test_support.hpp"

using namespace asdchat;
using namespace asdchat::cli;

namespace {

std::filesystem::path write_config(const testing::TempDir& dir, const nlohmann::json& session,
                                   const std::string& name = "config.json") {
  nlohmann::json cfg = {{"seed", 3}, {"session", session}};
  const auto path = dir / name;
  write_file_atomic(path, cfg.dump(2));
  return path;
}

nlohmann::json short_session() {
  return {{"topic_order", {"food", "animal", "toy", "family", "color"}},
          {"per_topic_budget_seconds", 30},
          {"total_budget_seconds", 150},
          {"response_window_seconds", 8}};
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(ASDCHAT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit codes by error class") {
  CHECK(exit_code_for(Errc::invalid_config) == 2);
  CHECK(exit_code_for(Errc::parse_error) == 2);
  CHECK(exit_code_for(Errc::provider_missing) == 3);
  CHECK(exit_code_for(Errc::provider_failure) == 3);
  CHECK(exit_code_for(Errc::io_error) == 4);
}

TEST_CASE("an invalid configuration lists its violations and exits 2") {
  testing::TempDir tmp;
  RunArgs args;
  args.config = write_config(tmp, {{"topic_order", {"food", "food", "weather"}}});
  args.out = tmp.path();
  std::ostringstream out, err;
  CHECK(cmd_run(args, out, err) == kExitValidation);
  CHECK(err.str().find("violation: DUPLICATE_TOPIC") != std::string::npos);
  CHECK(err.str().find("violation: UNKNOWN_TOPIC") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(tmp / "sessions"));

  write_file_atomic(tmp / "broken.json", "{\"session\": ");
  args.config = tmp / "broken.json";
  CHECK(cmd_run(args, out, err) == kExitValidation);
}

TEST_CASE("live mode without credentials exits 3") {
  testing::TempDir tmp;
  for (const char* v : {"ASDCHAT_CHAT_KEY", "ASDCHAT_ASR_KEY", "ASDCHAT_TTS_KEY"}) ::unsetenv(v);
  RunArgs args;
  args.config = std::filesystem::path(ASDCHAT_RESOURCE_DIR) / "demo_config.json";
  args.live = true;
  args.out = tmp.path();
  std::ostringstream out, err;
  CHECK(cmd_run(args, out, err) == kExitProvider);
  CHECK(err.str().find("PROVIDER_MISSING") != std::string::npos);
  CHECK(err.str().find("ASDCHAT_CHAT_KEY") != std::string::npos);
}

TEST_CASE("missing inputs are I/O errors") {
  testing::TempDir tmp;
  ReportArgs report;
  report.inputs = {tmp / "absent.tsv"};
  report.out = tmp / "r.tsv";
  std::ostringstream out, err;
  CHECK(cmd_report(report, out, err) == kExitIo);

  AnalyzeArgs analyze;
  analyze.sessions = {tmp / "nothing-here"};
  analyze.out = tmp / "x.tsv";
  CHECK(cmd_analyze(analyze, out, err) == kExitIo);
}

TEST_CASE("mock run, ingest, analyses, and report") {
  testing::TempDir tmp;
  std::ostringstream out, err;

  RunArgs run;
  run.config = write_config(tmp, short_session());
  run.out = tmp.path();
  run.simulate_fnirs = true;
  REQUIRE(cmd_run(run, out, err) == kExitOk);
  const auto dir = session_dir(tmp.path(), "mock-3");
  CHECK(out.str().find("mock-3") != std::string::npos);
  for (const char* f : {"manifest", "events.ndtext", "transcript.tsv", "fnirs.matrix"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const auto loaded = load_session(dir);
  CHECK(check_event_log(loaded.record.events).empty());
  CHECK(loaded.manifest.created_at == "1970-01-01T00:00:00Z");

  // a second run with the same seed is identical on disk
  testing::TempDir again;
  run.out = again.path();
  REQUIRE(cmd_run(run, out, err) == kExitOk);
  CHECK(read_text_file(session_dir(again.path(), "mock-3") / "events.ndtext") ==
        read_text_file(dir / "events.ndtext"));

  FixtureArgs fixture;
  fixture.out = tmp / "bundle";
  fixture.subject = "c-01";
  fixture.topic_seconds = 16;
  REQUIRE(cmd_make_fixture(fixture, out, err) == kExitOk);

  IngestArgs ingest;
  ingest.transcript = tmp / "bundle/transcript.tsv";
  ingest.speaker_map = tmp / "bundle/speaker_map.json";
  ingest.profile = tmp / "bundle/profile.json";
  ingest.recording = tmp / "bundle/recording.wav";
  ingest.topics = tmp / "bundle/topics.tsv";
  ingest.fnirs = tmp / "bundle/fnirs.matrix";
  ingest.fnirs_start = -10.0;
  ingest.session_id = "ingested-1";
  ingest.out = tmp.path();
  REQUIRE(cmd_ingest(ingest, out, err) == kExitOk);
  const auto ingested = load_session(session_dir(tmp.path(), "ingested-1"));
  CHECK(ingested.manifest.condition == "interventionist");
  CHECK(ingested.record.events.empty());
  CHECK_FALSE(ingested.record.transcript.empty());

  AnalyzeArgs text;
  text.kind = AnalysisKind::text;
  text.sessions = {tmp.path()};
  text.out = tmp / "text.tsv";
  REQUIRE(cmd_analyze(text, out, err) == kExitOk);
  const auto text_rows = report::parse_metric_rows(read_text_file(tmp / "text.tsv"));
  std::set<std::string> metrics, conditions;
  for (const auto& r : text_rows) {
    metrics.insert(r.metric);
    conditions.insert(r.condition);
  }
  CHECK(metrics == std::set<std::string>{"words_per_turn", "speech_seconds_per_turn", "qa_cosine"});
  CHECK(conditions == std::set<std::string>{"asdchat", "interventionist"});

  AnalyzeArgs audio = text;
  audio.kind = AnalysisKind::audio;
  audio.out = tmp / "audio.tsv";
  REQUIRE(cmd_analyze(audio, out, err) == kExitOk);
  CHECK(std::filesystem::exists(tmp / "audio.tsv.segments.tsv"));
  CHECK(std::filesystem::exists(tmp / "audio.tsv.table.txt"));
  CHECK(read_text_file(tmp / "audio.tsv.table.txt").rfind("field\tmetrics\ttype", 0) == 0);

  AnalyzeArgs fnirs = text;
  fnirs.kind = AnalysisKind::fnirs;
  fnirs.out = tmp / "fnirs.tsv";
  fnirs.waveform_channel = 1;
  fnirs.waveform_topic = "toy";
  REQUIRE(cmd_analyze(fnirs, out, err) == kExitOk);
  CHECK(std::filesystem::exists(tmp / "fnirs.tsv.waveform.mock-3.tsv"));
  CHECK(std::filesystem::exists(tmp / "fnirs.tsv.waveform.ingested-1.tsv"));
  bool toy = false;
  for (const auto& r : report::parse_metric_rows(read_text_file(tmp / "fnirs.tsv"))) {
    toy = toy || r.metric == "hbo_mean_abs.toy";
  }
  CHECK(toy);

  ReportArgs rep;
  rep.inputs = {tmp / "text.tsv", tmp / "audio.tsv", tmp / "fnirs.tsv"};
  rep.out = tmp / "report.tsv";
  std::ostringstream summary;
  REQUIRE(cmd_report(rep, summary, err) == kExitOk);
  CHECK(std::filesystem::exists(tmp / "report.tsv"));
  CHECK(std::filesystem::exists(tmp / "report.tsv.txt"));
  CHECK(summary.str().find("words_per_turn") != std::string::npos);
}

TEST_CASE("ingest rejects fNIRS without an alignment") {
  testing::TempDir tmp;
  std::ostringstream out, err;
  FixtureArgs fixture;
  fixture.out = tmp / "bundle";
  fixture.topic_seconds = 8;
  REQUIRE(cmd_make_fixture(fixture, out, err) == kExitOk);
  IngestArgs ingest;
  ingest.transcript = tmp / "bundle/transcript.tsv";
  ingest.speaker_map = tmp / "bundle/speaker_map.json";
  ingest.profile = tmp / "bundle/profile.json";
  ingest.fnirs = tmp / "bundle/fnirs.matrix";
  ingest.session_id = "x";
  ingest.out = tmp.path();
  CHECK(cmd_ingest(ingest, out, err) == kExitValidation);
}

TEST_CASE("the executable maps failures to exit codes") {
  testing::TempDir tmp;
  CHECK(run_binary("--help") == 0);
  CHECK(run_binary("") == 2);
  CHECK(run_binary("frobnicate") == 2);
  CHECK(run_binary("report " + (tmp / "absent.tsv").string() + " --out " + (tmp / "r").string()) == 2);
  const auto bad = write_config(tmp, {{"topic_order", nlohmann::json::array()}, {"locale", "xx"}});
  CHECK(run_binary("run " + bad.string() + " --mock --out " + tmp.path().string()) == 2);
  const auto good = write_config(tmp, short_session(), "good.json");
  CHECK(run_binary("run " + good.string() + " --mock --out " + tmp.path().string()) == 0);
  CHECK(std::filesystem::exists(session_dir(tmp.path(), "mock-3") / "manifest"));
}

}  // TEST_SUITE
