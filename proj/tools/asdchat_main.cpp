#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include "asdchat/codec.hpp"
#include "asdchat/commands.hpp"
#include "asdchat/config.hpp"
#include "asdchat/server.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

int serve(const std::string& addr, const std::filesystem::path& root, const std::optional<std::filesystem::path>& config,
          bool live) {
  using namespace asdchat;
  try {
    ServeOptions opts;
    std::tie(opts.host, opts.port) = parse_listen_address(addr);
    opts.root = root;
    opts.live = live;
    if (config) opts.config = load_app_config(*config);
    if (live) live_providers(opts.config.providers);  // fail fast on missing credentials
    ApiServer server(opts);
    server.start();
    std::cout << "listening on " << opts.host << ":" << server.port() << std::endl;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(200));
    server.stop();
    return cli::kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::bind_failure ? cli::kExitIo : cli::exit_code_for(e.code());
  }
}

int dump_builtins(const std::filesystem::path& out) {
  using namespace asdchat;
  try {
    write_file_atomic(out / "paradigm.json", dump_paradigm(builtin_paradigm()));
    for (const auto* locale : {"en", "zh"}) {
      write_file_atomic(out / "prompts" / (std::string(locale) + ".json"), dump_prompt_pack(builtin_prompt_pack(locale)));
    }
    return cli::kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e.code());
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace asdchat::cli;
  CLI::App app{"asdchat: conversational intervention sessions and their analysis"};
  app.require_subcommand(1);

  RunArgs run;
  bool mock = false;
  auto* run_cmd = app.add_subcommand("run", "run one session and save it");
  run_cmd->add_option("config", run.config, "configuration file")->required()->check(CLI::ExistingFile);
  auto* mock_flag = run_cmd->add_flag("--mock", mock, "offline mock providers and a simulated child");
  run_cmd->add_flag("--live", run.live, "configured HTTP providers; child turns typed on stdin")->excludes(mock_flag);
  run_cmd->add_option("--out", run.out, "root directory; the session goes to <out>/sessions/<id>");
  run_cmd->add_option("--seed", run.seed, "seed for the simulated child");
  run_cmd->add_option("--session-id", run.session_id);
  run_cmd->add_option("--profile", run.profile, "child profile JSON")->check(CLI::ExistingFile);
  run_cmd->add_flag("--simulate-fnirs", run.simulate_fnirs, "attach a synthetic fNIRS trace (mock only)");

  IngestArgs ingest;
  auto* ingest_cmd = app.add_subcommand("ingest", "store an externally recorded session");
  ingest_cmd->add_option("--transcript", ingest.transcript, "start, end, speaker, text (tab-separated)")
      ->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--speaker-map", ingest.speaker_map, "JSON label -> role")->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--profile", ingest.profile)->required()->check(CLI::ExistingFile);
  ingest_cmd->add_option("--session-id", ingest.session_id)->required();
  ingest_cmd->add_option("--recording", ingest.recording, "whole-session WAV")->check(CLI::ExistingFile);
  ingest_cmd->add_option("--topics", ingest.topics, "topic, start, end (tab-separated)")->check(CLI::ExistingFile);
  ingest_cmd->add_option("--fnirs", ingest.fnirs, "fNIRS matrix file")->check(CLI::ExistingFile);
  ingest_cmd->add_option("--fnirs-start", ingest.fnirs_start, "session time of the first fNIRS sample");
  ingest_cmd->add_option("--config", ingest.config)->check(CLI::ExistingFile);
  ingest_cmd->add_option("--condition", ingest.condition)->check(CLI::IsMember({"asdchat", "interventionist"}));
  ingest_cmd->add_option("--out", ingest.out);

  AnalyzeArgs analyze;
  std::string kind;
  std::vector<std::string> session_paths;
  auto* analyze_cmd = app.add_subcommand("analyze", "compute metrics over saved sessions");
  analyze_cmd->add_option("kind", kind)->required()->check(CLI::IsMember({"text", "audio", "fnirs"}));
  analyze_cmd->add_option("sessions", session_paths, "session directories or roots")->required();
  analyze_cmd->add_option("--out", analyze.out)->required();
  analyze_cmd->add_option("--config", analyze.config)->check(CLI::ExistingFile);
  analyze_cmd->add_flag("--live-embedder", analyze.live_embedder, "use the configured embedding endpoint");
  analyze_cmd->add_option("--waveform-channel", analyze.waveform_channel, "export this channel (1-based)");
  analyze_cmd->add_option("--waveform-topic", analyze.waveform_topic, "limit the export to one topic");

  ReportArgs report;
  std::vector<std::string> report_inputs;
  auto* report_cmd = app.add_subcommand("report", "compare conditions across metric files");
  report_cmd->add_option("inputs", report_inputs)->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--out", report.out)->required();
  report_cmd->add_option("--decimals", report.decimals)->check(CLI::Range(0, 9));

  std::string addr = "127.0.0.1:8080";
  std::filesystem::path serve_root = ".";
  std::optional<std::filesystem::path> serve_config;
  bool serve_live = false;
  auto* serve_cmd = app.add_subcommand("serve", "session HTTP API");
  serve_cmd->add_option("--addr", addr, "host:port");
  serve_cmd->add_option("--root", serve_root, "sessions/ and reports/ live here");
  serve_cmd->add_option("--config", serve_config)->check(CLI::ExistingFile);
  serve_cmd->add_flag("--live", serve_live);

  FixtureArgs fixture;
  auto* fixture_cmd = app.add_subcommand("make-fixture", "write a synthetic interventionist recording bundle");
  fixture_cmd->add_option("--out", fixture.out)->required();
  fixture_cmd->add_option("--subject", fixture.subject);
  fixture_cmd->add_option("--seed", fixture.seed);
  fixture_cmd->add_option("--topic-seconds", fixture.topic_seconds)->check(CLI::PositiveNumber);

  std::filesystem::path builtins_out;
  auto* builtins_cmd = app.add_subcommand("builtins", "write the built-in paradigm and prompt packs as JSON");
  builtins_cmd->add_option("--out", builtins_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  if (*run_cmd) return cmd_run(run, std::cout, std::cerr);
  if (*ingest_cmd) return cmd_ingest(ingest, std::cout, std::cerr);
  if (*analyze_cmd) {
    analyze.kind = kind == "text" ? AnalysisKind::text : kind == "audio" ? AnalysisKind::audio : AnalysisKind::fnirs;
    analyze.sessions.assign(session_paths.begin(), session_paths.end());
    return cmd_analyze(analyze, std::cout, std::cerr);
  }
  if (*report_cmd) {
    report.inputs.assign(report_inputs.begin(), report_inputs.end());
    return cmd_report(report, std::cout, std::cerr);
  }
  if (*serve_cmd) return serve(addr, serve_root, serve_config, serve_live);
  if (*fixture_cmd) return cmd_make_fixture(fixture, std::cout, std::cerr);
  if (*builtins_cmd) return dump_builtins(builtins_out);
  return kExitValidation;
}
