#pragma once

// On-disk layout of one session:
//
//   <root>/sessions/<id>/manifest        JSON
//   <root>/sessions/<id>/events.ndtext   one event per line
//   <root>/sessions/<id>/transcript.tsv  start, end, speaker, text, seq
//   <root>/sessions/<id>/audio/<seq>.wav 16-bit PCM
//   <root>/sessions/<id>/fnirs.matrix    optional
//
// Every file is written to a temporary name and renamed into place.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asdchat/audio_io.hpp"
#include "asdchat/session.hpp"

namespace asdchat {

struct Marker {
  std::string label;
  double t_seconds = 0.0;

  bool operator==(const Marker&) const = default;
};

struct FnirsRecording {
  double sample_rate_hz = 30.0;
  std::vector<double> wavelengths_nm = {760.0, 850.0};
  // intensity[channel][wavelength][sample]
  std::vector<std::vector<std::vector<double>>> intensity;
  std::vector<Marker> markers;

  std::size_t channels() const { return intensity.size(); }
  std::size_t samples() const { return intensity.empty() || intensity[0].empty() ? 0 : intensity[0][0].size(); }
  double duration_seconds() const { return static_cast<double>(samples()) / sample_rate_hz; }

  bool operator==(const FnirsRecording&) const = default;
};

/// Throws SHAPE_MISMATCH, NONPOSITIVE_INTENSITY, RATE_TOO_LOW, or
/// PARSE_ERROR (unsorted or out-of-range markers).
void validate_fnirs(const FnirsRecording& recording);

FnirsRecording parse_fnirs(std::string_view text);
std::string dump_fnirs(const FnirsRecording& recording);
FnirsRecording load_fnirs(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct ClockEpoch {
  double wall_epoch_unix = 0.0;                // wall time of session t = 0
  std::optional<double> fnirs_start_session_s; // session time of fNIRS sample 0

  bool operator==(const ClockEpoch&) const = default;
};

/// round((t - fnirs_start) * rate), or nullopt without an fNIRS epoch.
std::optional<std::int64_t> fnirs_sample_index(double t_session, const ClockEpoch& epoch, double rate_hz = 30.0);

struct SessionPaths {
  std::string events = "events.ndtext";
  std::string transcript = "transcript.tsv";
  std::string audio_dir = "audio";
  std::optional<std::string> fnirs;      // "fnirs.matrix" when present
  std::optional<std::string> recording;  // whole-session audio for ingested sessions

  bool operator==(const SessionPaths&) const = default;
};

struct TopicInterval {
  std::string topic;
  double t_start = 0.0;
  double t_end = 0.0;

  bool operator==(const TopicInterval&) const = default;
};

/// [topic_start.t, topic_end.t] per topic block; aborted topics included.
std::vector<TopicInterval> topic_intervals_from_events(const std::vector<SessionEvent>& events);

/// Tab-separated topic, start, end.
std::vector<TopicInterval> parse_topic_intervals(std::string_view text);

struct SessionManifest {
  std::string session_id;
  std::string created_at;
  std::string condition = "asdchat";
  ChildProfile profile;
  SessionConfig config;
  std::map<std::string, std::string> provider_ids;
  SessionPaths paths;
  ClockEpoch clock_epoch;
  std::vector<std::int64_t> out_of_range_events;
  std::map<std::string, std::string> device;  // free-form acquisition metadata
  std::vector<TopicInterval> topics;          // ingested sessions; engine sessions derive them from events

  bool operator==(const SessionManifest&) const = default;
};

std::string dump_manifest(const SessionManifest& manifest);
SessionManifest parse_manifest(std::string_view text);

struct SaveOptions {
  std::string created_at;  // empty: current UTC time
  ClockEpoch clock_epoch;
  std::optional<AudioBuffer> recording;
  std::map<std::string, std::string> device;
  std::vector<TopicInterval> topics;
};

std::filesystem::path session_dir(const std::filesystem::path& root, const std::string& session_id);

/// Writes the session directory under `root`. Engine records (non-empty
/// event log) must carry exactly the transcript projected from their events,
/// else INTEGRITY_ERROR; ingested records carry a transcript only.
SessionManifest save_session(const std::filesystem::path& root, const SessionRecord& record,
                             const std::map<std::int64_t, AudioBuffer>& audio,
                             const std::optional<FnirsRecording>& fnirs = std::nullopt,
                             const SaveOptions& options = {});

struct LoadedSession {
  std::filesystem::path dir;
  SessionManifest manifest;
  SessionRecord record;
};

/// `dir` is the session directory itself (the one holding the manifest).
LoadedSession load_session(const std::filesystem::path& dir);
std::map<std::int64_t, AudioBuffer> load_session_audio(const LoadedSession& session);
std::optional<AudioBuffer> load_session_recording(const LoadedSession& session);
std::optional<FnirsRecording> load_session_fnirs(const LoadedSession& session);
std::vector<TopicInterval> session_topics(const LoadedSession& session);

// ---------------------------------------------------------------------------
// Transcript interchange: tab-separated start, end, speaker, text[, seq].
// Tabs, newlines, and backslashes inside text are backslash-escaped.

std::string dump_transcript(const std::vector<TranscriptEntry>& transcript);
std::vector<TranscriptEntry> parse_transcript(std::string_view text);

struct ImportedTranscript {
  std::vector<TranscriptEntry> entries;       // seq = 1-based source line
  std::vector<std::size_t> overlap_flagged;   // entry indices overlapping an earlier same-speaker entry
};

/// Labels are mapped through `speaker_map`; blank lines and lines starting
/// with '#' are skipped. Throws PARSE_ERROR (with line number) or
/// UNKNOWN_SPEAKER.
ImportedTranscript import_external_transcript(std::string_view text,
                                              const std::map<std::string, Speaker>& speaker_map);

/// JSON object label -> "agent" | "interventionist" | "child".
std::map<std::string, Speaker> parse_speaker_map(std::string_view text);

}  // namespace asdchat
