#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "asdchat/audio_io.hpp"
#include "asdchat/paradigm.hpp"
#include "asdchat/prompts.hpp"
#include "asdchat/providers.hpp"

namespace asdchat {

enum class EventKind {
  session_start,
  topic_start,
  agent_utterance,
  child_utterance,
  child_silence,
  child_unrecognized,
  topic_timeout,
  agent_farewell,
  child_final_goodbye,
  topic_end,
  session_end,
};

std::string_view event_kind_name(EventKind kind) noexcept;
std::optional<EventKind> parse_event_kind(std::string_view name) noexcept;

struct EventPayload {
  std::optional<std::string> topic;
  std::optional<std::string> text;
  std::optional<std::string> audio_ref;      // relative path, "audio/<seq>.wav"
  std::optional<ControlBranch> branch;       // control prompt appended after this event
  std::optional<double> speech_seconds;
  bool final_window = false;                 // child event in the post-farewell window
  bool aborted = false;                      // topic_end only
  std::optional<std::string> error;

  bool operator==(const EventPayload&) const = default;
};

struct SessionEvent {
  std::int64_t seq = 0;
  EventKind kind = EventKind::session_start;
  double t_start = 0.0;
  double t_end = 0.0;
  EventPayload payload;

  bool operator==(const SessionEvent&) const = default;
};

enum class Speaker { agent, child };

std::string_view speaker_name(Speaker speaker) noexcept;

struct TranscriptEntry {
  Speaker speaker = Speaker::agent;
  std::string text;
  double t_start = 0.0;
  double t_end = 0.0;
  std::int64_t seq = -1;  // source event, or line number for imported files

  bool operator==(const TranscriptEntry&) const = default;
};

/// Utterance events with text, in log order.
std::vector<TranscriptEntry> project_transcript(const std::vector<SessionEvent>& events);

struct SessionRecord {
  std::string session_id;
  std::string condition = "asdchat";  // or "interventionist" for ingested recordings
  ChildProfile profile;
  SessionConfig config;
  std::vector<SessionEvent> events;
  std::vector<TranscriptEntry> transcript;
  std::map<std::string, std::string> provider_ids;

  bool operator==(const SessionRecord&) const = default;
};

/// Checks the per-topic block structure of an engine-produced log. Returns
/// human-readable problems; empty means well formed.
std::vector<std::string> check_event_log(const std::vector<SessionEvent>& events);

// ---------------------------------------------------------------------------
// Time

class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
  virtual void sleep_for(double seconds) = 0;
};

/// Starts at zero; sleep_for advances time instantly.
class SimulatedClock : public Clock {
 public:
  explicit SimulatedClock(double start = 0.0) : t_(start) {}

  double now() const override;
  void sleep_for(double seconds) override;
  void advance(double seconds) { sleep_for(seconds); }

 private:
  mutable std::mutex mu_;
  double t_;
};

/// Monotonic wall clock; zero at construction.
class SteadyClock : public Clock {
 public:
  SteadyClock();

  double now() const override;
  void sleep_for(double seconds) override;

 private:
  std::chrono::steady_clock::time_point origin_;
};

// ---------------------------------------------------------------------------
// Child side of the turn

struct TurnContext {
  std::string session_id;
  Topic topic = Topic::food;
  double window_seconds = 10.0;
  bool final_window = false;
  std::string last_agent_text;
};

/// What the child did in one response window. A turn with neither audio
/// nor text is silence. Times are clock readings.
struct ChildTurn {
  std::optional<AudioBuffer> audio;
  std::optional<std::string> text;  // already-transcribed turn; skips the transcriber
  double speech_start = 0.0;
  double speech_end = 0.0;

  bool is_silence() const { return !audio && !text; }
};

/// Source of child turns. Implementations own the waiting: they return once
/// the child has finished speaking or the window has elapsed.
class ChildInput {
 public:
  virtual ~ChildInput() = default;
  virtual ChildTurn await_turn(const TurnContext& context) = 0;
};

/// Agent audio output. Returns after playback completes.
class AudioSink {
 public:
  virtual ~AudioSink() = default;
  virtual void play(const AudioBuffer& audio) = 0;
};

/// Playback modeled as the clock advancing by the clip length.
class ClockPlayback : public AudioSink {
 public:
  explicit ClockPlayback(std::shared_ptr<Clock> clock) : clock_(std::move(clock)) {}
  void play(const AudioBuffer& audio) override { clock_->sleep_for(audio.duration_seconds()); }

 private:
  std::shared_ptr<Clock> clock_;
};

class NullPlayback : public AudioSink {
 public:
  void play(const AudioBuffer&) override {}
};

// ---------------------------------------------------------------------------
// Engine

struct SessionRuntime {
  std::shared_ptr<Clock> clock;
  std::shared_ptr<ChildInput> child;
  std::shared_ptr<AudioSink> playback;  // defaults to ClockPlayback(clock)
};

struct EngineOptions {
  std::string session_id = "session";
  std::optional<Paradigm> paradigm;   // defaults to builtin_paradigm()
  std::optional<PromptPack> prompts;  // defaults to the config locale's pack
  std::function<void(const SessionEvent&)> on_event;
};

enum class SessionState { prepared, in_topic, between_topics, ended };

/// Thrown by run_topic after the aborted topic_end has been logged.
class TopicAborted : public Error {
 public:
  TopicAborted(Topic topic, const ProviderError& cause);

  Topic topic() const noexcept { return topic_; }
  ProviderRole role() const noexcept { return role_; }

 private:
  Topic topic_;
  ProviderRole role_;
};

class SessionHandle {
 public:
  SessionHandle(SessionHandle&&) noexcept;
  SessionHandle& operator=(SessionHandle&&) noexcept;
  ~SessionHandle();

  SessionState state() const;
  const std::string& session_id() const;

  /// One topic of the turn-taking loop. Returns the topic's events.
  std::vector<SessionEvent> run_topic(const TopicSpec& topic);

  /// All configured topics that fit the total budget, then session_end.
  /// Aborted topics are flagged in the log rather than thrown.
  SessionRecord run_session();

  /// Thread-safe. The current topic times out at its next turn boundary and
  /// no further topics start.
  void request_end();

  SessionRecord record() const;
  std::vector<SessionEvent> events() const;
  /// Audio per event seq: agent speech and child clips.
  const std::map<std::int64_t, AudioBuffer>& audio() const;
  /// Every chat request sent, in order.
  const std::vector<ChatRequest>& chat_log() const;

 private:
  struct Impl;
  explicit SessionHandle(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> impl_;

  friend SessionHandle start_session(const ChildProfile&, const SessionConfig&, ProviderSet, SessionRuntime,
                                     EngineOptions);
};

/// Validates inputs, then returns a Prepared handle whose log holds only
/// session_start. Throws Error(invalid_config) or Error(provider_missing).
SessionHandle start_session(const ChildProfile& profile, const SessionConfig& config, ProviderSet providers,
                            SessionRuntime runtime, EngineOptions options = {});

// ---------------------------------------------------------------------------
// Scripted children for tests, demos, and replay

struct ScriptedTurn {
  enum class Kind { speak, silent, mumble };
  Kind kind = Kind::speak;
  std::string text;
  double latency_seconds = 1.0;
  double speech_seconds = 2.0;
};

/// Plays back a fixed script (cycling when exhausted). Spoken turns get a
/// distinct synthetic voice clip registered with `transcriber`; mumbles are
/// left unregistered so they transcribe as unrecognized.
class ScriptedChild : public ChildInput {
 public:
  ScriptedChild(std::shared_ptr<Clock> clock, std::shared_ptr<MockTranscriber> transcriber,
                std::vector<ScriptedTurn> script, int sample_rate_hz = 16000);

  ChildTurn await_turn(const TurnContext& context) override;

 private:
  std::shared_ptr<Clock> clock_;
  std::vector<ScriptedTurn> script_;
  std::vector<std::optional<AudioBuffer>> clips_;
  std::size_t next_ = 0;
};

/// Randomized but seeded child: answers from a per-topic phrase pool,
/// sometimes stays silent or mumbles.
class SeededChild : public ChildInput {
 public:
  SeededChild(std::shared_ptr<Clock> clock, std::shared_ptr<MockTranscriber> transcriber, std::uint64_t seed,
              std::string locale = "en", int sample_rate_hz = 16000);

  ChildTurn await_turn(const TurnContext& context) override;

 private:
  std::shared_ptr<Clock> clock_;
  std::shared_ptr<MockTranscriber> transcriber_;
  std::mt19937_64 rng_;
  std::string locale_;
  int rate_;
  std::uint64_t turn_ = 0;
};

/// Feeds back the child side of a recorded log: same turn kinds, clips, and
/// relative timing.
class ReplayChild : public ChildInput {
 public:
  ReplayChild(std::shared_ptr<Clock> clock, const std::vector<SessionEvent>& events,
              const std::map<std::int64_t, AudioBuffer>& audio);

  ChildTurn await_turn(const TurnContext& context) override;

 private:
  struct Step {
    bool silent = false;
    std::optional<AudioBuffer> audio;
    std::optional<std::string> text;
    double latency = 0.0;
    double duration = 0.0;
  };
  std::shared_ptr<Clock> clock_;
  std::vector<Step> steps_;
  std::size_t next_ = 0;
};

}  // namespace asdchat
