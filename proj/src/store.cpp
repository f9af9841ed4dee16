#include "asdchat/store.hpp"

#include <fmt/chrono.h>
#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "asdchat/codec.hpp"
#include "asdchat/error.hpp"

namespace asdchat {

using nlohmann::json;

namespace {

constexpr double kFirHighCutoffHz = 0.2;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> words(std::string_view line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

double number_at(std::string_view token, size_t line_no, std::string_view what) {
  auto v = parse_number(token);
  if (!v) throw Error(Errc::parse_error, fmt::format("line {}: bad {} '{}'", line_no, what, token));
  return *v;
}

}  // namespace

void validate_fnirs(const FnirsRecording& rec) {
  if (!(rec.sample_rate_hz > 2.0 * kFirHighCutoffHz)) {
    throw Error(Errc::rate_too_low, fmt::format("sample rate {} Hz must exceed {} Hz", rec.sample_rate_hz,
                                                2.0 * kFirHighCutoffHz));
  }
  if (rec.wavelengths_nm.size() != 2 || rec.wavelengths_nm[0] <= 0.0 || rec.wavelengths_nm[1] <= 0.0) {
    throw Error(Errc::shape_mismatch, "exactly two positive wavelengths are required");
  }
  const size_t n = rec.samples();
  for (size_t c = 0; c < rec.intensity.size(); ++c) {
    if (rec.intensity[c].size() != rec.wavelengths_nm.size()) {
      throw Error(Errc::shape_mismatch, fmt::format("channel {} wavelength count", c + 1));
    }
    for (size_t w = 0; w < rec.intensity[c].size(); ++w) {
      const auto& series = rec.intensity[c][w];
      if (series.size() != n) throw Error(Errc::shape_mismatch, fmt::format("channel {} sample count", c + 1));
      for (size_t i = 0; i < series.size(); ++i) {
        if (!(series[i] > 0.0) || !std::isfinite(series[i])) {
          throw Error(Errc::nonpositive_intensity,
                      fmt::format("channel {} wavelength {} sample {}: {}", c + 1, rec.wavelengths_nm[w], i, series[i]));
        }
      }
    }
  }
  for (size_t i = 0; i < rec.markers.size(); ++i) {
    const auto& m = rec.markers[i];
    if (i > 0 && m.t_seconds < rec.markers[i - 1].t_seconds) {
      throw Error(Errc::parse_error, fmt::format("marker '{}' out of time order", m.label));
    }
    if (m.t_seconds < 0.0 || m.t_seconds > rec.duration_seconds()) {
      throw Error(Errc::parse_error, fmt::format("marker '{}' at {} s lies outside the {} s recording", m.label,
                                                 m.t_seconds, rec.duration_seconds()));
    }
  }
}

FnirsRecording parse_fnirs(std::string_view text) {
  FnirsRecording rec;
  rec.wavelengths_nm.clear();
  std::optional<size_t> channels, samples;
  auto lines = split(text, '\n');
  size_t i = 0;
  bool saw_data = false;
  for (; i < lines.size(); ++i) {
    auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    auto w = words(line);
    const size_t no = i + 1;
    if (w[0] == "data") {
      saw_data = true;
      ++i;
      break;
    }
    if (w[0] == "channels" && w.size() == 2) {
      channels = static_cast<size_t>(number_at(w[1], no, "channel count"));
    } else if (w[0] == "wavelengths" && w.size() >= 2) {
      for (size_t k = 1; k < w.size(); ++k) rec.wavelengths_nm.push_back(number_at(w[k], no, "wavelength"));
    } else if (w[0] == "sample_rate_hz" && w.size() == 2) {
      rec.sample_rate_hz = number_at(w[1], no, "sample rate");
    } else if (w[0] == "samples" && w.size() == 2) {
      samples = static_cast<size_t>(number_at(w[1], no, "sample count"));
    } else if (w[0] == "marker" && w.size() == 3) {
      rec.markers.push_back({std::string(w[1]), number_at(w[2], no, "marker time")});
    } else {
      throw Error(Errc::parse_error, fmt::format("line {}: unrecognized header '{}'", no, line));
    }
  }
  if (!saw_data) throw Error(Errc::parse_error, "missing 'data' line");
  if (!channels || *channels == 0) throw Error(Errc::parse_error, "missing channel count");
  if (rec.wavelengths_nm.empty()) throw Error(Errc::parse_error, "missing wavelengths");

  const size_t nw = rec.wavelengths_nm.size();
  rec.intensity.assign(*channels, std::vector<std::vector<double>>(nw));
  size_t rows = 0;
  for (; i < lines.size(); ++i) {
    auto line = trim(lines[i]);
    if (line.empty()) continue;
    auto w = words(line);
    if (w.size() != *channels * nw) {
      throw Error(Errc::parse_error, fmt::format("line {}: expected {} values, got {}", i + 1, *channels * nw, w.size()));
    }
    for (size_t c = 0; c < *channels; ++c) {
      for (size_t k = 0; k < nw; ++k) rec.intensity[c][k].push_back(number_at(w[c * nw + k], i + 1, "intensity"));
    }
    ++rows;
  }
  if (samples && *samples != rows) {
    throw Error(Errc::parse_error, fmt::format("header declares {} samples, data has {}", *samples, rows));
  }
  if (rec.wavelengths_nm.size() != 2) throw Error(Errc::parse_error, "exactly two wavelengths are required");
  validate_fnirs(rec);
  return rec;
}

std::string dump_fnirs(const FnirsRecording& rec) {
  std::string out;
  out += fmt::format("channels {}\n", rec.channels());
  out += "wavelengths";
  for (double w : rec.wavelengths_nm) out += " " + format_double(w);
  out += "\n";
  out += fmt::format("sample_rate_hz {}\n", format_double(rec.sample_rate_hz));
  out += fmt::format("samples {}\n", rec.samples());
  for (const auto& m : rec.markers) out += fmt::format("marker {} {}\n", m.label, format_double(m.t_seconds));
  out += "data\n";
  for (size_t i = 0; i < rec.samples(); ++i) {
    bool first = true;
    for (const auto& channel : rec.intensity) {
      for (const auto& series : channel) {
        if (!first) out += ' ';
        out += format_double(series[i]);
        first = false;
      }
    }
    out += '\n';
  }
  return out;
}

FnirsRecording load_fnirs(const std::filesystem::path& path) {
  return parse_fnirs(read_text_file(path));
}

std::optional<std::int64_t> fnirs_sample_index(double t_session, const ClockEpoch& epoch, double rate_hz) {
  if (!epoch.fnirs_start_session_s) return std::nullopt;
  return static_cast<std::int64_t>(std::llround((t_session - *epoch.fnirs_start_session_s) * rate_hz));
}

std::vector<TopicInterval> topic_intervals_from_events(const std::vector<SessionEvent>& events) {
  std::vector<TopicInterval> out;
  std::optional<TopicInterval> open;
  for (const auto& e : events) {
    if (e.kind == EventKind::topic_start) {
      open = TopicInterval{e.payload.topic.value_or(""), e.t_start, e.t_start};
    } else if (e.kind == EventKind::topic_end && open) {
      open->t_end = e.t_end;
      out.push_back(*open);
      open.reset();
    }
  }
  return out;
}

std::vector<TopicInterval> parse_topic_intervals(std::string_view text) {
  std::vector<TopicInterval> out;
  size_t no = 0;
  for (auto line : split(text, '\n')) {
    ++no;
    if (trim(line).empty() || line.front() == '#') continue;
    auto f = split(trim(line), '\t');
    if (f.size() != 3) throw Error(Errc::parse_error, fmt::format("line {}: expected topic, start, end", no));
    TopicInterval t{std::string(trim(f[0])), number_at(f[1], no, "start"), number_at(f[2], no, "end")};
    if (!parse_topic(t.topic)) throw Error(Errc::unknown_topic, fmt::format("line {}: '{}'", no, t.topic));
    if (t.t_end <= t.t_start) throw Error(Errc::parse_error, fmt::format("line {}: empty interval", no));
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string dump_manifest(const SessionManifest& m) {
  json paths = {{"events", m.paths.events}, {"transcript", m.paths.transcript}, {"audio_dir", m.paths.audio_dir}};
  paths["fnirs"] = m.paths.fnirs ? json(*m.paths.fnirs) : json(nullptr);
  paths["recording"] = m.paths.recording ? json(*m.paths.recording) : json(nullptr);
  json epoch = {{"wall_epoch_unix", m.clock_epoch.wall_epoch_unix}};
  epoch["fnirs_start_session_s"] =
      m.clock_epoch.fnirs_start_session_s ? json(*m.clock_epoch.fnirs_start_session_s) : json(nullptr);
  json j = {{"session_id", m.session_id},
            {"created_at", m.created_at},
            {"condition", m.condition},
            {"profile", m.profile},
            {"config", m.config},
            {"provider_ids", m.provider_ids},
            {"paths", paths},
            {"clock_epoch", epoch},
            {"out_of_range_events", m.out_of_range_events},
            {"device", m.device}};
  json topics = json::array();
  for (const auto& t : m.topics) topics.push_back({{"topic", t.topic}, {"t_start", t.t_start}, {"t_end", t.t_end}});
  j["topics"] = topics;
  return j.dump(2) + "\n";
}

SessionManifest parse_manifest(std::string_view text) {
  auto j = parse_json(text, "manifest");
  SessionManifest m;
  try {
    m.session_id = j.at("session_id").get<std::string>();
    m.created_at = j.value("created_at", "");
    m.condition = j.value("condition", "asdchat");
    m.profile = j.at("profile").get<ChildProfile>();
    m.config = j.at("config").get<SessionConfig>();
    m.provider_ids = j.value("provider_ids", std::map<std::string, std::string>{});
    const auto& p = j.at("paths");
    m.paths.events = p.at("events").get<std::string>();
    m.paths.transcript = p.at("transcript").get<std::string>();
    m.paths.audio_dir = p.at("audio_dir").get<std::string>();
    if (p.contains("fnirs") && !p["fnirs"].is_null()) m.paths.fnirs = p["fnirs"].get<std::string>();
    if (p.contains("recording") && !p["recording"].is_null()) m.paths.recording = p["recording"].get<std::string>();
    const auto& e = j.at("clock_epoch");
    m.clock_epoch.wall_epoch_unix = e.value("wall_epoch_unix", 0.0);
    if (e.contains("fnirs_start_session_s") && !e["fnirs_start_session_s"].is_null()) {
      m.clock_epoch.fnirs_start_session_s = e["fnirs_start_session_s"].get<double>();
    }
    m.out_of_range_events = j.value("out_of_range_events", std::vector<std::int64_t>{});
    m.device = j.value("device", std::map<std::string, std::string>{});
    if (j.contains("topics")) {
      for (const auto& t : j["topics"]) {
        m.topics.push_back({t.at("topic").get<std::string>(), t.at("t_start").get<double>(), t.at("t_end").get<double>()});
      }
    }
  } catch (const json::exception& ex) {
    throw Error(Errc::parse_error, fmt::format("manifest: {}", ex.what()));
  }
  return m;
}

std::filesystem::path session_dir(const std::filesystem::path& root, const std::string& session_id) {
  return root / "sessions" / session_id;
}

SessionManifest save_session(const std::filesystem::path& root, const SessionRecord& record,
                             const std::map<std::int64_t, AudioBuffer>& audio,
                             const std::optional<FnirsRecording>& fnirs, const SaveOptions& options) {
  if (record.session_id.empty() || record.session_id.find('/') != std::string::npos || record.session_id == "." ||
      record.session_id == "..") {
    throw Error(Errc::invalid_config, fmt::format("unusable session id '{}'", record.session_id));
  }
  if (!record.events.empty()) {
    if (project_transcript(record.events) != record.transcript) {
      throw Error(Errc::integrity_error, "transcript is not the projection of the event log");
    }
    for (const auto& e : record.events) {
      if (e.payload.audio_ref && !audio.count(e.seq)) {
        throw Error(Errc::integrity_error, fmt::format("event {} references missing audio", e.seq));
      }
    }
  }
  if (fnirs) validate_fnirs(*fnirs);

  SessionManifest m;
  m.session_id = record.session_id;
  m.created_at = options.created_at;
  if (m.created_at.empty()) {
    m.created_at = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                             std::chrono::system_clock::now())));
  }
  m.condition = record.condition;
  m.profile = record.profile;
  m.config = record.config;
  m.provider_ids = record.provider_ids;
  m.clock_epoch = options.clock_epoch;
  m.device = options.device;
  m.topics = options.topics;
  if (fnirs) m.paths.fnirs = "fnirs.matrix";
  if (options.recording) m.paths.recording = "recording.wav";

  if (fnirs) {
    const auto n = static_cast<std::int64_t>(fnirs->samples());
    for (const auto& e : record.events) {
      auto a = fnirs_sample_index(e.t_start, m.clock_epoch, fnirs->sample_rate_hz);
      auto b = fnirs_sample_index(e.t_end, m.clock_epoch, fnirs->sample_rate_hz);
      if (!a || !b || *a < 0 || *a >= n || *b < 0 || *b >= n) m.out_of_range_events.push_back(e.seq);
    }
  }

  const auto dir = session_dir(root, record.session_id);
  std::error_code ec;
  std::filesystem::create_directories(dir / m.paths.audio_dir, ec);
  if (ec) throw Error(Errc::io_error, fmt::format("cannot create {}: {}", dir.string(), ec.message()));

  std::string lines;
  for (const auto& e : record.events) lines += event_to_line(e) + "\n";
  write_file_atomic(dir / m.paths.events, lines);
  write_file_atomic(dir / m.paths.transcript, dump_transcript(record.transcript));
  for (const auto& [seq, clip] : audio) write_wav(dir / m.paths.audio_dir / fmt::format("{}.wav", seq), clip);
  if (fnirs) write_file_atomic(dir / *m.paths.fnirs, dump_fnirs(*fnirs));
  if (options.recording) write_wav(dir / *m.paths.recording, *options.recording);
  // manifest last: its presence marks the directory complete
  write_file_atomic(dir / "manifest", dump_manifest(m));
  return m;
}

LoadedSession load_session(const std::filesystem::path& dir) {
  LoadedSession s;
  s.dir = dir;
  s.manifest = parse_manifest(read_text_file(dir / "manifest"));
  auto& r = s.record;
  r.session_id = s.manifest.session_id;
  r.condition = s.manifest.condition;
  r.profile = s.manifest.profile;
  r.config = s.manifest.config;
  r.provider_ids = s.manifest.provider_ids;
  const std::string events = read_text_file(dir / s.manifest.paths.events);
  size_t no = 0;
  for (auto line : split(events, '\n')) {
    ++no;
    if (trim(line).empty()) continue;
    try {
      r.events.push_back(event_from_line(line));
    } catch (const Error& e) {
      throw Error(Errc::parse_error, fmt::format("{} line {}: {}", s.manifest.paths.events, no, e.detail()));
    }
  }
  r.transcript = parse_transcript(read_text_file(dir / s.manifest.paths.transcript));
  if (!r.events.empty() && project_transcript(r.events) != r.transcript) {
    throw Error(Errc::integrity_error, fmt::format("{}: transcript differs from the event log", dir.string()));
  }
  return s;
}

std::map<std::int64_t, AudioBuffer> load_session_audio(const LoadedSession& s) {
  std::map<std::int64_t, AudioBuffer> out;
  const auto audio_dir = s.dir / s.manifest.paths.audio_dir;
  std::error_code ec;
  if (!std::filesystem::is_directory(audio_dir, ec)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(audio_dir)) {
    if (entry.path().extension() != ".wav") continue;
    auto seq = parse_number(entry.path().stem().string());
    if (!seq) continue;
    out.emplace(static_cast<std::int64_t>(*seq), read_wav(entry.path()));
  }
  return out;
}

std::optional<AudioBuffer> load_session_recording(const LoadedSession& s) {
  if (!s.manifest.paths.recording) return std::nullopt;
  return read_wav(s.dir / *s.manifest.paths.recording);
}

std::optional<FnirsRecording> load_session_fnirs(const LoadedSession& s) {
  if (!s.manifest.paths.fnirs) return std::nullopt;
  return load_fnirs(s.dir / *s.manifest.paths.fnirs);
}

std::vector<TopicInterval> session_topics(const LoadedSession& s) {
  if (!s.record.events.empty()) return topic_intervals_from_events(s.record.events);
  return s.manifest.topics;
}

// ---------------------------------------------------------------------------

namespace {

std::string escape_field(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_field(std::string_view text) {
  std::string out;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\' || i + 1 == text.size()) {
      out += text[i];
      continue;
    }
    char n = text[++i];
    switch (n) {
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case '\\': out += '\\'; break;
      default:
        out += '\\';
        out += n;
    }
  }
  return out;
}

struct RawLine {
  size_t line_no;
  double start, end;
  std::string speaker;
  std::string text;
  std::optional<std::int64_t> seq;
};

std::vector<RawLine> parse_tsv_lines(std::string_view text) {
  std::vector<RawLine> out;
  size_t no = 0;
  for (auto line : split(text, '\n')) {
    ++no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') continue;
    auto f = split(line, '\t');
    if (f.size() != 4 && f.size() != 5) {
      throw Error(Errc::parse_error, fmt::format("line {}: expected 4 or 5 tab-separated fields, got {}", no, f.size()));
    }
    RawLine r{no, number_at(f[0], no, "start"), number_at(f[1], no, "end"), std::string(trim(f[2])),
              unescape_field(f[3]), std::nullopt};
    if (r.end < r.start) throw Error(Errc::parse_error, fmt::format("line {}: end before start", no));
    if (f.size() == 5) r.seq = static_cast<std::int64_t>(number_at(f[4], no, "seq"));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::string dump_transcript(const std::vector<TranscriptEntry>& transcript) {
  std::string out;
  for (const auto& t : transcript) {
    out += fmt::format("{}\t{}\t{}\t{}\t{}\n", format_double(t.t_start), format_double(t.t_end),
                       speaker_name(t.speaker), escape_field(t.text), t.seq);
  }
  return out;
}

std::vector<TranscriptEntry> parse_transcript(std::string_view text) {
  std::vector<TranscriptEntry> out;
  for (auto& r : parse_tsv_lines(text)) {
    Speaker speaker;
    if (r.speaker == "agent") {
      speaker = Speaker::agent;
    } else if (r.speaker == "child") {
      speaker = Speaker::child;
    } else {
      throw Error(Errc::unknown_speaker, fmt::format("line {}: '{}'", r.line_no, r.speaker));
    }
    out.push_back({speaker, std::move(r.text), r.start, r.end, r.seq.value_or(static_cast<std::int64_t>(r.line_no))});
  }
  return out;
}

ImportedTranscript import_external_transcript(std::string_view text,
                                              const std::map<std::string, Speaker>& speaker_map) {
  ImportedTranscript out;
  std::map<Speaker, double> latest_end;
  for (auto& r : parse_tsv_lines(text)) {
    auto it = speaker_map.find(r.speaker);
    if (it == speaker_map.end()) {
      throw Error(Errc::unknown_speaker, fmt::format("line {}: '{}'", r.line_no, r.speaker));
    }
    const Speaker speaker = it->second;
    if (auto prev = latest_end.find(speaker); prev != latest_end.end() && r.start < prev->second) {
      out.overlap_flagged.push_back(out.entries.size());
    }
    latest_end[speaker] = std::max(latest_end[speaker], r.end);
    out.entries.push_back({speaker, std::move(r.text), r.start, r.end, static_cast<std::int64_t>(r.line_no)});
  }
  return out;
}

std::map<std::string, Speaker> parse_speaker_map(std::string_view text) {
  auto j = parse_json(text, "speaker map");
  if (!j.is_object()) throw Error(Errc::parse_error, "speaker map must be a JSON object");
  std::map<std::string, Speaker> out;
  for (const auto& [label, value] : j.items()) {
    if (!value.is_string()) throw Error(Errc::parse_error, fmt::format("speaker map '{}': expected a string", label));
    auto v = value.get<std::string>();
    if (v == "agent" || v == "interventionist" || v == "agent_or_interventionist") {
      out[label] = Speaker::agent;
    } else if (v == "child") {
      out[label] = Speaker::child;
    } else {
      throw Error(Errc::unknown_speaker, fmt::format("speaker map '{}': '{}'", label, v));
    }
  }
  return out;
}

}  // namespace asdchat
