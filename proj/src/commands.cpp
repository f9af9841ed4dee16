#include "asdchat/commands.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <future>
#include <iostream>
#include <map>

#include "asdchat/audio_features.hpp"
#include "asdchat/codec.hpp"
#include "asdchat/config.hpp"
#include "asdchat/fixtures.hpp"
#include "asdchat/fnirs.hpp"
#include "asdchat/report.hpp"
#include "asdchat/store.hpp"
#include "asdchat/text_metrics.hpp"

namespace asdchat::cli {

namespace fs = std::filesystem;

int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::provider_missing:
    case Errc::provider_failure:
      return kExitProvider;
    case Errc::io_error:
      return kExitIo;
    default:
      return kExitValidation;
  }
}

namespace {

int report_error(const Error& e, std::ostream& err) {
  err << "error: " << e.what() << "\n";
  return exit_code_for(e.code());
}

/// Typed child turns for live runs from a terminal. An empty line is
/// silence; end of input ends the session.
class StdinChild : public ChildInput {
 public:
  StdinChild(std::shared_ptr<Clock> clock, std::ostream& out) : clock_(std::move(clock)), out_(out) {}

  ChildTurn await_turn(const TurnContext& context) override {
    out_ << fmt::format("[{}{}] child> ", topic_name(context.topic), context.final_window ? ", goodbye" : "")
         << std::flush;
    ChildTurn turn;
    std::string line;
    if (!std::getline(std::cin, line) || line.empty()) {
      turn.speech_start = turn.speech_end = clock_->now();
      return turn;
    }
    turn.text = line;
    turn.speech_start = turn.speech_end = clock_->now();
    return turn;
  }

 private:
  std::shared_ptr<Clock> clock_;
  std::ostream& out_;
};

}  // namespace

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  try {
    auto config = load_app_config(args.config);
    ChildProfile profile = config.profile.value_or(demo_profile());
    if (args.profile) profile = parse_json(read_text_file(*args.profile), "profile").get<ChildProfile>();

    auto violations = validate_config(config.session);
    auto pv = validate_profile(profile);
    violations.insert(violations.end(), pv.begin(), pv.end());
    for (const auto& v : violations) {
      err << (v.severity == Severity::error ? "violation: " : "warning: ") << v.code << ": " << v.detail << "\n";
    }
    if (has_errors(violations)) return kExitValidation;

    const std::uint64_t seed = args.seed.value_or(config.seed);
    ProviderSet providers;
    SessionRuntime runtime;
    if (args.live) {
      providers = live_providers(config.providers);
      runtime.clock = std::make_shared<SteadyClock>();
      runtime.child = std::make_shared<StdinChild>(runtime.clock, out);
    } else {
      auto mocks = mock_providers(config.analysis.embed_seed);
      providers = mocks.set;
      runtime.clock = std::make_shared<SimulatedClock>();
      runtime.child = std::make_shared<SeededChild>(runtime.clock, mocks.transcriber, seed, config.session.locale);
    }

    EngineOptions options;
    options.session_id = args.session_id.value_or(
        args.live ? fmt::format("live-{}", std::chrono::duration_cast<std::chrono::seconds>(
                                               std::chrono::system_clock::now().time_since_epoch())
                                               .count())
                  : fmt::format("mock-{}", seed));
    options.paradigm = config.paradigm;
    options.prompts = config.prompts;
    if (args.live) {
      options.on_event = [&out](const SessionEvent& e) {
        if (e.payload.text && (e.kind == EventKind::agent_utterance || e.kind == EventKind::agent_farewell)) {
          out << "agent: " << *e.payload.text << "\n" << std::flush;
        }
      };
    }
    const double wall_epoch = args.live ? std::chrono::duration<double>(
                                              std::chrono::system_clock::now().time_since_epoch())
                                              .count()
                                        : 0.0;

    auto handle = start_session(profile, config.session, providers, runtime, options);
    auto record = handle.run_session();

    SaveOptions save;
    save.created_at = args.live ? std::string() : "1970-01-01T00:00:00Z";
    save.clock_epoch.wall_epoch_unix = wall_epoch;
    std::optional<FnirsRecording> fnirs;
    if (args.simulate_fnirs && !args.live) {
      const double lead = 10.0;
      const double end = record.events.empty() ? 0.0 : record.events.back().t_end;
      double first_topic = 0.0;
      for (const auto& e : record.events) {
        if (e.kind == EventKind::topic_start) {
          first_topic = e.t_start;
          break;
        }
      }
      fixtures::FnirsSimSpec sim;
      sim.seconds = lead + end + 5.0;
      sim.conversation_start_s = lead + first_topic;
      sim.seed = seed;
      fnirs = fixtures::simulate_fnirs(sim);
      save.clock_epoch.fnirs_start_session_s = -lead;
    }
    save_session(args.out, record, handle.audio(), fnirs, save);

    int code = kExitOk;
    for (const auto& e : record.events) {
      if (e.kind == EventKind::topic_end && e.payload.aborted) {
        err << "error: topic " << e.payload.topic.value_or("?") << " aborted: " << e.payload.error.value_or("") << "\n";
        code = kExitProvider;
      }
    }
    out << record.session_id << "\n";
    out << session_dir(args.out, record.session_id).string() << "\n";
    return code;
  } catch (const Error& e) {
    return report_error(e, err);
  } catch (const nlohmann::json::exception& e) {
    err << "error: PARSE_ERROR: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

int cmd_ingest(const IngestArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.condition != report::kAsdChat && args.condition != report::kInterventionist) {
      throw Error(Errc::invalid_config, fmt::format("unknown condition '{}'", args.condition));
    }
    if (args.fnirs && !args.fnirs_start) {
      throw Error(Errc::invalid_config, "--fnirs needs --fnirs-start (session time of the first fNIRS sample)");
    }
    const auto speakers = parse_speaker_map(read_text_file(args.speaker_map));
    auto imported = import_external_transcript(read_text_file(args.transcript), speakers);
    for (auto i : imported.overlap_flagged) {
      const auto& e = imported.entries[i];
      err << fmt::format("warning: line {} overlaps an earlier {} utterance\n", e.seq, speaker_name(e.speaker));
    }

    SessionRecord record;
    record.session_id = args.session_id;
    record.condition = args.condition;
    record.profile = parse_json(read_text_file(args.profile), "profile").get<ChildProfile>();
    if (args.config) record.config = load_app_config(*args.config).session;
    record.transcript = std::move(imported.entries);

    SaveOptions save;
    if (args.recording) save.recording = read_wav(*args.recording);
    if (args.topics) save.topics = parse_topic_intervals(read_text_file(*args.topics));
    std::optional<FnirsRecording> fnirs;
    if (args.fnirs) {
      fnirs = load_fnirs(*args.fnirs);
      save.clock_epoch.fnirs_start_session_s = args.fnirs_start;
    }
    save.device = {{"source", "ingested"}};
    auto manifest = save_session(args.out, record, {}, fnirs, save);
    out << manifest.session_id << "\n";
    out << session_dir(args.out, manifest.session_id).string() << "\n";
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err);
  } catch (const nlohmann::json::exception& e) {
    err << "error: PARSE_ERROR: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

std::vector<fs::path> expand_session_dirs(const std::vector<fs::path>& paths) {
  std::vector<fs::path> out;
  for (const auto& p : paths) {
    if (fs::exists(p / "manifest")) {
      out.push_back(p);
      continue;
    }
    // a root holding sessions/, or the sessions/ directory itself
    const auto dir = fs::is_directory(p / "sessions") ? p / "sessions" : p;
    std::vector<fs::path> found;
    if (fs::is_directory(dir)) {
      for (const auto& d : fs::directory_iterator(dir)) {
        if (fs::exists(d.path() / "manifest")) found.push_back(d.path());
      }
    }
    if (found.empty() && dir == p) {
      throw Error(Errc::io_error, fmt::format("{}: neither a session directory nor a root with sessions/", p.string()));
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

namespace {

struct SessionOutcome {
  fs::path dir;
  std::optional<Error> error;
  // text
  std::string subject, condition, session_id;
  text::EngagementMetrics engagement;
  std::vector<double> pair_scores;
  // audio
  std::vector<audio::SegmentRow> segments;
  // fnirs
  std::vector<report::MetricRow> rows;
  std::optional<std::string> waveform;
  std::vector<std::string> warnings;
};

void analyze_text(SessionOutcome& o, const LoadedSession& s, Embedder& embedder) {
  std::map<std::int64_t, double> durations;
  if (!s.record.events.empty()) {
    for (const auto& [seq, clip] : load_session_audio(s)) durations[seq] = clip.duration_seconds();
  } else {
    for (const auto& e : s.record.transcript) durations[e.seq] = e.t_end - e.t_start;
  }
  o.engagement = text::engagement(s.record.transcript, durations);
  o.pair_scores = text::quality(s.record.transcript, embedder).pair_scores;
}

void analyze_audio(SessionOutcome& o, const LoadedSession& s, const AnalysisConfig& cfg) {
  std::vector<audio::AudioSegment> segments;
  if (!s.record.events.empty()) {
    const auto clips = load_session_audio(s);
    for (const auto& e : s.record.events) {
      const bool child = e.kind == EventKind::child_utterance || e.kind == EventKind::child_unrecognized ||
                         e.kind == EventKind::child_final_goodbye;
      auto it = clips.find(e.seq);
      if (!child || it == clips.end() || it->second.empty()) continue;
      auto found = audio::detect_segments(it->second, cfg.vad, e.t_start, Speaker::child);
      segments.insert(segments.end(), found.begin(), found.end());
    }
  } else {
    auto recording = load_session_recording(s);
    if (!recording) throw Error(Errc::io_error, "ingested session has no recording");
    const double rate = recording->sample_rate_hz;
    for (const auto& e : s.record.transcript) {
      if (e.speaker != Speaker::child) continue;
      const auto i0 = static_cast<size_t>(std::clamp(std::llround(e.t_start * rate), 0LL,
                                                     static_cast<long long>(recording->samples.size())));
      const auto i1 = static_cast<size_t>(std::clamp(std::llround(e.t_end * rate), static_cast<long long>(i0),
                                                     static_cast<long long>(recording->samples.size())));
      if (i1 <= i0) continue;
      AudioBuffer slice;
      slice.sample_rate_hz = recording->sample_rate_hz;
      slice.samples.assign(recording->samples.begin() + static_cast<std::ptrdiff_t>(i0),
                           recording->samples.begin() + static_cast<std::ptrdiff_t>(i1));
      auto found = audio::detect_segments(slice, cfg.vad, static_cast<double>(i0) / rate, Speaker::child);
      segments.insert(segments.end(), found.begin(), found.end());
    }
  }
  for (const auto& seg : audio::discard_outliers(std::move(segments), cfg.outliers)) {
    o.segments.push_back({o.subject, o.condition, o.session_id, seg.t_start, seg.t_end,
                          audio::analyze_segment(seg, cfg.features)});
  }
}

void analyze_fnirs(SessionOutcome& o, const LoadedSession& s, const AnalysisConfig& cfg, const AnalyzeArgs& args) {
  auto rec = load_session_fnirs(s);
  if (!rec) throw Error(Errc::io_error, "session has no fNIRS recording");
  const auto& epoch = s.manifest.clock_epoch;
  const auto topics = session_topics(s);

  std::optional<double> start;
  for (const auto& m : rec->markers) {
    if (m.label == "conversation_start") start = m.t_seconds;
  }
  if (!start) {
    if (!epoch.fnirs_start_session_s || topics.empty()) {
      throw Error(Errc::no_alignment, "no conversation_start marker and no epoch to place the first topic");
    }
    start = topics.front().t_start - *epoch.fnirs_start_session_s;
  }
  const auto result = fnirs::run_pipeline(*rec, *start, cfg.fnirs);
  if (!epoch.fnirs_start_session_s) throw Error(Errc::no_alignment, "manifest has no fNIRS epoch");
  const double offset = *epoch.fnirs_start_session_s;
  const auto stat = std::string(fnirs::statistic_name(cfg.statistic));

  for (const auto& t : topics) {
    fnirs::TopicAmplitude amp;
    try {
      amp = fnirs::topic_amplitude(result.hb, t.t_start - offset, t.t_end - offset, cfg.statistic);
    } catch (const Error& e) {
      // one unusable topic should not hide the others
      o.warnings.push_back(fmt::format("topic {}: {}", t.topic, e.what()));
      continue;
    }
    o.rows.push_back({o.subject, o.condition, fmt::format("hbo_{}.{}", stat, t.topic), amp.channel_mean, "computed"});
    for (size_t c = 0; c < amp.per_channel.size(); ++c) {
      o.rows.push_back(
          {o.subject, o.condition, fmt::format("hbo_{}.{}.ch{}", stat, t.topic, c + 1), amp.per_channel[c], "computed"});
    }
  }

  if (args.waveform_channel) {
    std::optional<TopicInterval> window;
    if (args.waveform_topic) {
      for (const auto& t : topics) {
        if (t.topic == *args.waveform_topic) window = t;
      }
      if (!window) throw Error(Errc::unknown_topic, fmt::format("no '{}' topic in session", *args.waveform_topic));
    }
    if (*args.waveform_channel == 0) throw Error(Errc::out_of_range, "channels are numbered from 1");
    o.waveform = fnirs::dump_waveform(fnirs::align_and_export_waveform(result.hb, s.record.transcript,
                                                                       *args.waveform_channel - 1, epoch, window));
  }
}

std::string kind_name(AnalysisKind k) {
  switch (k) {
    case AnalysisKind::text: return "text";
    case AnalysisKind::audio: return "audio";
    case AnalysisKind::fnirs: return "fnirs";
  }
  return "";
}

}  // namespace

int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err) {
  std::vector<fs::path> dirs;
  AppConfig config;
  std::shared_ptr<Embedder> embedder;
  try {
    dirs = expand_session_dirs(args.sessions);
    if (dirs.empty()) throw Error(Errc::io_error, "no sessions found");
    if (args.config) config = load_app_config(*args.config);
    if (args.live_embedder) {
      if (!config.providers.embed || config.providers.embed->kind != "http") {
        throw Error(Errc::provider_missing, "embed: no http endpoint");
      }
      if (!config.providers.embed->api_key_env.empty() && !resolve_api_key(*config.providers.embed)) {
        throw Error(Errc::provider_missing, fmt::format("embed: ${} is not set", config.providers.embed->api_key_env));
      }
      embedder = std::make_shared<HttpEmbedder>(*config.providers.embed);
    } else {
      embedder = std::make_shared<HashingEmbedder>(config.analysis.embed_seed);
    }
  } catch (const Error& e) {
    return report_error(e, err);
  }

  auto work = [&](const fs::path& dir) {
    SessionOutcome o;
    o.dir = dir;
    try {
      const auto s = load_session(dir);
      o.subject = s.record.profile.child_id;
      o.condition = s.record.condition;
      o.session_id = s.record.session_id;
      switch (args.kind) {
        case AnalysisKind::text: analyze_text(o, s, *embedder); break;
        case AnalysisKind::audio: analyze_audio(o, s, config.analysis); break;
        case AnalysisKind::fnirs: analyze_fnirs(o, s, config.analysis, args); break;
      }
    } catch (const Error& e) {
      o.error = e;
    } catch (const std::exception& e) {
      o.error = Error(Errc::io_error, e.what());
    }
    return o;
  };

  std::vector<std::future<SessionOutcome>> jobs;
  for (const auto& d : dirs) jobs.push_back(std::async(std::launch::async, work, d));
  std::vector<SessionOutcome> outcomes;
  for (auto& j : jobs) outcomes.push_back(j.get());

  std::optional<Errc> first_error;
  size_t ok = 0;
  for (const auto& o : outcomes) {
    for (const auto& w : o.warnings) err << "warning: session " << o.dir.string() << ": " << w << "\n";
    if (o.error) {
      err << "session " << o.dir.string() << ": " << o.error->what() << "\n";
      if (!first_error) first_error = o.error->code();
    } else {
      ++ok;
    }
  }
  if (ok == 0) return exit_code_for(*first_error);

  try {
    std::string tsv;
    switch (args.kind) {
      case AnalysisKind::text: {
        // pool per subject and condition, in first-seen order
        std::vector<std::pair<std::string, std::string>> keys;
        std::map<std::pair<std::string, std::string>, std::vector<const SessionOutcome*>> groups;
        for (const auto& o : outcomes) {
          if (o.error) continue;
          auto key = std::pair{o.subject, o.condition};
          if (!groups.contains(key)) keys.push_back(key);
          groups[key].push_back(&o);
        }
        std::vector<report::MetricRow> rows;
        for (const auto& key : keys) {
          std::vector<text::EngagementMetrics> parts;
          std::vector<double> scores;
          for (const auto* o : groups[key]) {
            parts.push_back(o->engagement);
            scores.insert(scores.end(), o->pair_scores.begin(), o->pair_scores.end());
          }
          const auto m = text::pool(parts);
          rows.push_back({key.first, key.second, "words_per_turn", m.mean_words_per_child_turn, "computed"});
          rows.push_back({key.first, key.second, "speech_seconds_per_turn", m.mean_child_speech_seconds_per_turn,
                          "computed"});
          if (!scores.empty()) rows.push_back({key.first, key.second, "qa_cosine", text::mean(scores), "computed"});
        }
        tsv = report::dump_metric_rows(rows);
        break;
      }
      case AnalysisKind::audio: {
        std::vector<audio::SegmentRow> all;
        for (const auto& o : outcomes) all.insert(all.end(), o.segments.begin(), o.segments.end());
        const auto table = audio::aggregate_speech_table(all);
        tsv = "subject\tcondition\tmetric\tvalue\n" + audio::dump_speech_table_tsv(table);
        write_file_atomic(args.out.string() + ".segments.tsv", audio::dump_feature_rows(all));
        write_file_atomic(args.out.string() + ".table.txt", audio::format_speech_table(table));
        break;
      }
      case AnalysisKind::fnirs: {
        std::vector<report::MetricRow> rows;
        for (const auto& o : outcomes) {
          rows.insert(rows.end(), o.rows.begin(), o.rows.end());
          if (o.waveform) write_file_atomic(args.out.string() + ".waveform." + o.session_id + ".tsv", *o.waveform);
        }
        tsv = report::dump_metric_rows(rows);
        break;
      }
    }
    write_file_atomic(args.out, tsv);
  } catch (const Error& e) {
    return report_error(e, err);
  }
  out << fmt::format("{} analysis: {} of {} sessions -> {}\n", kind_name(args.kind), ok, outcomes.size(),
                     args.out.string());
  return kExitOk;
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  try {
    std::vector<report::MetricRow> rows;
    for (const auto& p : args.inputs) {
      auto part = report::parse_metric_rows(read_text_file(p));
      rows.insert(rows.end(), part.begin(), part.end());
    }
    const auto rep = report::build_report(rows, args.decimals);
    const auto summary = report::format_report_text(rep, args.decimals);
    write_file_atomic(args.out, report::dump_report_tsv(rep, args.decimals));
    write_file_atomic(args.out.string() + ".txt", summary);
    out << summary;
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err);
  }
}

int cmd_make_fixture(const FixtureArgs& args, std::ostream& out, std::ostream& err) {
  try {
    fixtures::BundleSpec spec;
    spec.subject = args.subject;
    spec.seed = args.seed;
    spec.topic_seconds = args.topic_seconds;
    const auto paths = fixtures::write_interventionist_bundle(args.out, spec);
    out << fmt::format("transcript\t{}\nspeaker_map\t{}\nrecording\t{}\ntopics\t{}\nprofile\t{}\nfnirs\t{}\n"
                       "fnirs_start\t{}\n",
                       paths.transcript.string(), paths.speaker_map.string(), paths.recording.string(),
                       paths.topics.string(), paths.profile.string(), paths.fnirs.string(),
                       format_double(paths.fnirs_start_session_s));
    return kExitOk;
  } catch (const Error& e) {
    return report_error(e, err);
  } catch (const nlohmann::json::exception& e) {
    err << "error: PARSE_ERROR: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace asdchat::cli
