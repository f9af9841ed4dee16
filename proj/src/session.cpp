#include "asdchat/session.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <thread>

#include "asdchat/synth.hpp"
#include "asdchat/utf8.hpp"

namespace asdchat {

std::string_view event_kind_name(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::session_start: return "session_start";
    case EventKind::topic_start: return "topic_start";
    case EventKind::agent_utterance: return "agent_utterance";
    case EventKind::child_utterance: return "child_utterance";
    case EventKind::child_silence: return "child_silence";
    case EventKind::child_unrecognized: return "child_unrecognized";
    case EventKind::topic_timeout: return "topic_timeout";
    case EventKind::agent_farewell: return "agent_farewell";
    case EventKind::child_final_goodbye: return "child_final_goodbye";
    case EventKind::topic_end: return "topic_end";
    case EventKind::session_end: return "session_end";
  }
  return "";
}

std::optional<EventKind> parse_event_kind(std::string_view name) noexcept {
  for (int k = 0; k <= static_cast<int>(EventKind::session_end); ++k) {
    auto kind = static_cast<EventKind>(k);
    if (event_kind_name(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string_view speaker_name(Speaker speaker) noexcept {
  return speaker == Speaker::agent ? "agent" : "child";
}

std::vector<TranscriptEntry> project_transcript(const std::vector<SessionEvent>& events) {
  std::vector<TranscriptEntry> out;
  for (const auto& e : events) {
    if (!e.payload.text) continue;
    switch (e.kind) {
      case EventKind::agent_utterance:
      case EventKind::agent_farewell:
        out.push_back({Speaker::agent, *e.payload.text, e.t_start, e.t_end, e.seq});
        break;
      case EventKind::child_utterance:
      case EventKind::child_final_goodbye:
        out.push_back({Speaker::child, *e.payload.text, e.t_start, e.t_end, e.seq});
        break;
      default:
        break;
    }
  }
  return out;
}

std::vector<std::string> check_event_log(const std::vector<SessionEvent>& events) {
  std::vector<std::string> problems;
  auto problem = [&problems](const SessionEvent& e, std::string_view what) {
    problems.push_back(fmt::format("seq {} ({}): {}", e.seq, event_kind_name(e.kind), what));
  };

  for (size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (i > 0 && e.seq <= events[i - 1].seq) problem(e, "seq not strictly increasing");
    if (e.t_start > e.t_end) problem(e, "t_start > t_end");
  }
  if (!events.empty() && events.front().kind != EventKind::session_start) {
    problem(events.front(), "log does not open with session_start");
  }

  const SessionEvent* open = nullptr;
  std::vector<const SessionEvent*> block;
  for (const auto& e : events) {
    if (e.kind == EventKind::topic_start) {
      if (open) problem(e, "topic_start inside an open topic");
      open = &e;
      block.clear();
      continue;
    }
    if (!open) {
      if (e.kind != EventKind::session_start && e.kind != EventKind::session_end) {
        problem(e, "event outside any topic block");
      }
      continue;
    }
    if (e.kind != EventKind::topic_end) {
      block.push_back(&e);
      continue;
    }
    size_t agent = 0, timeouts = 0, farewells = 0, goodbyes = 0;
    for (const auto* b : block) {
      agent += b->kind == EventKind::agent_utterance;
      timeouts += b->kind == EventKind::topic_timeout;
      farewells += b->kind == EventKind::agent_farewell;
      goodbyes += b->kind == EventKind::child_final_goodbye;
      if (b->t_start < open->t_start || b->t_end > e.t_end) problem(*b, "outside its topic interval");
    }
    if (!e.payload.aborted) {
      if (agent < 1) problem(e, "topic block without agent_utterance");
      if (timeouts != 1) problem(e, "topic block needs exactly one topic_timeout");
      if (farewells != 1) problem(e, "topic block needs exactly one agent_farewell");
    }
    if (goodbyes > 1) problem(e, "more than one child_final_goodbye");
    open = nullptr;
  }
  if (open) problem(*open, "topic block never closed");
  return problems;
}

// ---------------------------------------------------------------------------

double SimulatedClock::now() const {
  std::lock_guard lock(mu_);
  return t_;
}

void SimulatedClock::sleep_for(double seconds) {
  std::lock_guard lock(mu_);
  if (seconds > 0.0) t_ += seconds;
}

SteadyClock::SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

double SteadyClock::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin_).count();
}

void SteadyClock::sleep_for(double seconds) {
  if (seconds > 0.0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

// ---------------------------------------------------------------------------

TopicAborted::TopicAborted(Topic topic, const ProviderError& cause)
    : Error(Errc::provider_failure, fmt::format("topic '{}' aborted: {}", topic_name(topic), cause.detail())),
      topic_(topic),
      role_(cause.role()) {}

struct SessionHandle::Impl {
  ChildProfile profile;
  SessionConfig config;
  ProviderSet providers;
  SessionRuntime runtime;
  EngineOptions options;
  Paradigm paradigm;
  PromptPack pack;

  SessionState state = SessionState::prepared;
  mutable std::mutex mu;
  std::vector<SessionEvent> events;
  std::map<std::int64_t, AudioBuffer> audio;
  std::vector<ChatRequest> chat_log;
  std::atomic<bool> end_requested{false};
  std::int64_t next_seq = 0;

  double now() const { return runtime.clock->now(); }

  const SessionEvent& emit(EventKind kind, double t0, double t1, EventPayload payload) {
    SessionEvent e{next_seq++, kind, t0, std::max(t0, t1), std::move(payload)};
    {
      std::lock_guard lock(mu);
      events.push_back(std::move(e));
    }
    const SessionEvent& ref = events.back();
    if (options.on_event) options.on_event(ref);
    return ref;
  }

  static std::string audio_ref(std::int64_t seq) { return fmt::format("audio/{}.wav", seq); }

  void agent_say(std::vector<ChatMessage>& context, EventKind kind, Topic topic) {
    ChatRequest request{options.session_id, context};
    chat_log.push_back(request);
    std::string reply = providers.chat->chat(request);
    if (reply.empty()) throw ProviderError(ProviderRole::chat, ProviderFault::empty_reply, "empty reply");
    AudioBuffer speech = providers.synthesizer->synthesize(reply);

    const double t0 = now();
    runtime.playback->play(speech);
    const double t1 = now();

    EventPayload p;
    p.topic = std::string(topic_name(topic));
    p.text = reply;
    p.audio_ref = audio_ref(next_seq);
    const auto& e = emit(kind, t0, t1, std::move(p));
    audio.emplace(e.seq, std::move(speech));
    context.push_back({Role::agent, std::move(reply)});
  }

  // Waits for one child turn and logs it. Returns the control branch that
  // was appended to the context, or nullopt in the final window.
  void child_turn(std::vector<ChatMessage>& context, Topic topic, bool final_window) {
    TurnContext ctx;
    ctx.session_id = options.session_id;
    ctx.topic = topic;
    ctx.window_seconds = config.response_window_seconds;
    ctx.final_window = final_window;
    for (auto it = context.rbegin(); it != context.rend(); ++it) {
      if (it->role == Role::agent) {
        ctx.last_agent_text = it->text;
        break;
      }
    }

    const double t_wait = now();
    ChildTurn turn = runtime.child->await_turn(ctx);
    const double t_done = std::max(now(), t_wait);
    const double start = std::clamp(turn.speech_start, t_wait, t_done);
    const double end = std::clamp(turn.speech_end, start, t_done);

    EventPayload p;
    p.topic = std::string(topic_name(topic));
    p.final_window = final_window;
    ControlContext control;
    control.window_seconds = config.response_window_seconds;

    if (turn.is_silence()) {
      if (!final_window) p.branch = ControlBranch::silence;
      emit(EventKind::child_silence, t_wait, t_done, std::move(p));
      if (!final_window) context.push_back({Role::system, control_prompt(ControlBranch::silence, control, pack)});
      return;
    }

    std::optional<std::string> text = turn.text;
    double speech_seconds = end - start;
    if (turn.audio) {
      auto result = providers.transcriber->transcribe(*turn.audio);
      speech_seconds = result.speech_seconds;
      if (!turn.text && result.text && !result.text->empty()) text = result.text;
      p.audio_ref = audio_ref(next_seq);
    }
    p.speech_seconds = speech_seconds;

    const EventKind kind = final_window ? EventKind::child_final_goodbye
                           : text       ? EventKind::child_utterance
                                        : EventKind::child_unrecognized;
    if (text) p.text = *text;
    if (!final_window) p.branch = text ? ControlBranch::continue_topic : ControlBranch::unrecognized_speech;
    const auto& e = emit(kind, start, end, std::move(p));
    if (turn.audio) audio.emplace(e.seq, std::move(*turn.audio));
    if (final_window) return;

    if (text) {
      context.push_back({Role::child, *text});
      context.push_back({Role::system, control_prompt(ControlBranch::continue_topic, control, pack)});
    } else {
      control.speech_seconds = speech_seconds;
      context.push_back({Role::system, control_prompt(ControlBranch::unrecognized_speech, control, pack)});
    }
  }
};

SessionHandle::SessionHandle(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
SessionHandle::SessionHandle(SessionHandle&&) noexcept = default;
SessionHandle& SessionHandle::operator=(SessionHandle&&) noexcept = default;
SessionHandle::~SessionHandle() = default;

SessionState SessionHandle::state() const { return impl_->state; }
const std::string& SessionHandle::session_id() const { return impl_->options.session_id; }
void SessionHandle::request_end() { impl_->end_requested = true; }
const std::map<std::int64_t, AudioBuffer>& SessionHandle::audio() const { return impl_->audio; }
const std::vector<ChatRequest>& SessionHandle::chat_log() const { return impl_->chat_log; }

std::vector<SessionEvent> SessionHandle::events() const {
  std::lock_guard lock(impl_->mu);
  return impl_->events;
}

SessionRecord SessionHandle::record() const {
  SessionRecord r;
  r.session_id = impl_->options.session_id;
  r.condition = "asdchat";
  r.profile = impl_->profile;
  r.config = impl_->config;
  r.events = events();
  r.transcript = project_transcript(r.events);
  r.provider_ids = impl_->providers.ids();
  return r;
}

std::vector<SessionEvent> SessionHandle::run_topic(const TopicSpec& topic) {
  auto& s = *impl_;
  if (s.state != SessionState::prepared && s.state != SessionState::between_topics) {
    throw Error(Errc::invalid_state, "run_topic requires a prepared or between-topics session");
  }
  s.state = SessionState::in_topic;
  const size_t first = s.events.size();
  const std::string name(topic_name(topic.name));

  const double t_topic = s.now();
  EventPayload start;
  start.topic = name;
  s.emit(EventKind::topic_start, t_topic, t_topic, std::move(start));

  std::vector<ChatMessage> context;
  try {
    context.push_back({Role::system, build_system_prompt(s.profile, topic, s.paradigm, s.pack)});
    s.agent_say(context, EventKind::agent_utterance, topic.name);
    for (;;) {
      s.child_turn(context, topic.name, false);
      // Timeout is only checked here, at the turn boundary.
      if (s.now() - t_topic >= topic.budget_seconds || s.end_requested) break;
      s.agent_say(context, EventKind::agent_utterance, topic.name);
    }

    context.push_back({Role::system, control_prompt(ControlBranch::timeout, {}, s.pack)});
    const double t_timeout = s.now();
    EventPayload timeout;
    timeout.topic = name;
    timeout.branch = ControlBranch::timeout;
    s.emit(EventKind::topic_timeout, t_timeout, t_timeout, std::move(timeout));
    s.agent_say(context, EventKind::agent_farewell, topic.name);
    s.child_turn(context, topic.name, true);
  } catch (const ProviderError& e) {
    const double t = s.now();
    EventPayload end;
    end.topic = name;
    end.aborted = true;
    end.error = e.what();
    s.emit(EventKind::topic_end, t, t, std::move(end));
    s.state = SessionState::between_topics;
    throw TopicAborted(topic.name, e);
  }

  const double t_end = s.now();
  EventPayload end;
  end.topic = name;
  s.emit(EventKind::topic_end, t_end, t_end, std::move(end));
  s.state = SessionState::between_topics;

  std::lock_guard lock(s.mu);
  return {s.events.begin() + static_cast<std::ptrdiff_t>(first), s.events.end()};
}

SessionRecord SessionHandle::run_session() {
  auto& s = *impl_;
  if (s.state != SessionState::prepared) {
    throw Error(Errc::invalid_state, "run_session requires a prepared session");
  }
  double scheduled = 0.0;
  for (const auto& topic : scheduled_topics(s.config, s.paradigm)) {
    if (s.end_requested) break;
    if (scheduled + topic.budget_seconds > s.config.total_budget_seconds + 1e-9) break;
    scheduled += topic.budget_seconds;
    try {
      run_topic(topic);
    } catch (const TopicAborted&) {
      // flagged on the topic_end event; carry on with the next topic
    }
  }
  const double t = s.now();
  s.emit(EventKind::session_end, t, t, {});
  s.state = SessionState::ended;
  return record();
}

SessionHandle start_session(const ChildProfile& profile, const SessionConfig& config, ProviderSet providers,
                            SessionRuntime runtime, EngineOptions options) {
  auto violations = validate_config(config);
  auto profile_violations = validate_profile(profile);
  violations.insert(violations.end(), profile_violations.begin(), profile_violations.end());
  if (has_errors(violations)) {
    std::string detail;
    for (const auto& v : violations) {
      if (v.severity != Severity::error) continue;
      if (!detail.empty()) detail += "; ";
      detail += v.code + " (" + v.detail + ")";
    }
    throw Error(Errc::invalid_config, detail);
  }
  if (auto missing = providers.missing_session_roles(); !missing.empty()) {
    std::string detail;
    for (const auto& m : missing) detail += (detail.empty() ? "" : ", ") + m;
    throw Error(Errc::provider_missing, detail);
  }
  if (!runtime.clock || !runtime.child) throw Error(Errc::invalid_config, "runtime needs a clock and a child input");
  if (!runtime.playback) runtime.playback = std::make_shared<ClockPlayback>(runtime.clock);

  auto impl = std::make_unique<SessionHandle::Impl>();
  impl->profile = profile;
  impl->config = config;
  impl->providers = std::move(providers);
  impl->runtime = std::move(runtime);
  impl->paradigm = options.paradigm ? *options.paradigm : builtin_paradigm();
  impl->pack = options.prompts ? *options.prompts : builtin_prompt_pack(config.locale);
  impl->options = std::move(options);

  const double t = impl->now();
  impl->emit(EventKind::session_start, t, t, {});
  return SessionHandle(std::move(impl));
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::array<double, 3>, 5> kChildVowels = {{
    {850.0, 1600.0, 2900.0},   // a
    {450.0, 2500.0, 3300.0},   // i
    {470.0, 1100.0, 2700.0},   // u
    {600.0, 2100.0, 3000.0},   // e
    {560.0, 1000.0, 2800.0},   // o
}};

AudioBuffer child_clip(std::uint64_t index, double seconds, int rate) {
  synth::VowelSpec v;
  v.f0_hz = 280.0 + std::fmod(7.3 * static_cast<double>(index), 160.0);
  v.formants_hz = kChildVowels[index % kChildVowels.size()];
  v.bandwidths_hz = {90.0, 110.0, 150.0};
  v.seconds = seconds;
  v.sample_rate_hz = rate;
  v.peak = 0.45;
  AudioBuffer clip = synth::vowel(v);
  // faint index-seeded dither keeps every clip's fingerprint distinct
  AudioBuffer dither = synth::white_noise(seconds, rate, 2e-3, 0xC11D0000ULL + index);
  for (size_t i = 0; i < clip.samples.size() && i < dither.samples.size(); ++i) clip.samples[i] += dither.samples[i];
  return quantize_pcm16(clip);
}

ChildTurn speak(Clock& clock, AudioBuffer clip, double latency) {
  clock.sleep_for(latency);
  ChildTurn turn;
  turn.speech_start = clock.now();
  clock.sleep_for(clip.duration_seconds());
  turn.speech_end = clock.now();
  turn.audio = std::move(clip);
  return turn;
}

ChildTurn stay_silent(Clock& clock, double window) {
  ChildTurn turn;
  turn.speech_start = clock.now();
  clock.sleep_for(window);
  turn.speech_end = clock.now();
  return turn;
}

}  // namespace

ScriptedChild::ScriptedChild(std::shared_ptr<Clock> clock, std::shared_ptr<MockTranscriber> transcriber,
                             std::vector<ScriptedTurn> script, int sample_rate_hz)
    : clock_(std::move(clock)), script_(std::move(script)) {
  clips_.resize(script_.size());
  for (size_t i = 0; i < script_.size(); ++i) {
    const auto& t = script_[i];
    if (t.kind == ScriptedTurn::Kind::silent) continue;
    clips_[i] = child_clip(i, t.speech_seconds, sample_rate_hz);
    if (t.kind == ScriptedTurn::Kind::speak && transcriber) transcriber->add(*clips_[i], t.text);
  }
}

ChildTurn ScriptedChild::await_turn(const TurnContext& context) {
  if (script_.empty()) return stay_silent(*clock_, context.window_seconds);
  const size_t i = next_++ % script_.size();
  const auto& t = script_[i];
  if (t.kind == ScriptedTurn::Kind::silent || t.latency_seconds >= context.window_seconds) {
    return stay_silent(*clock_, context.window_seconds);
  }
  return speak(*clock_, *clips_[i], t.latency_seconds);
}

namespace {

const std::map<Topic, std::vector<const char*>>& answer_pool(const std::string& locale) {
  static const std::map<Topic, std::vector<const char*>> en = {
      {Topic::food, {"I like noodles", "apples", "my mom cooks rice", "ice cream", "I ate eggs today"}},
      {Topic::animal, {"a dog", "I have a cat", "the lion is big", "fish live in water", "a rabbit"}},
      {Topic::toy, {"my car", "blocks", "I play with my brother", "the teddy bear", "in my room"}},
      {Topic::family, {"mom and dad", "my grandma", "my sister", "we go to the park", "at home"}},
      {Topic::color, {"red", "blue is my favorite", "the sky is blue", "green grass", "yellow"}},
  };
  static const std::map<Topic, std::vector<const char*>> zh = {
      {Topic::food, {"我喜欢面条", "苹果", "妈妈做米饭", "冰淇淋", "我今天吃了鸡蛋"}},
      {Topic::animal, {"小狗", "我有一只猫", "狮子很大", "鱼在水里", "小兔子"}},
      {Topic::toy, {"我的小汽车", "积木", "我和哥哥玩", "小熊", "在我房间里"}},
      {Topic::family, {"爸爸妈妈", "我的奶奶", "我的姐姐", "我们去公园", "在家里"}},
      {Topic::color, {"红色", "我最喜欢蓝色", "天空是蓝色的", "绿色的草", "黄色"}},
  };
  return locale == "zh" ? zh : en;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

SeededChild::SeededChild(std::shared_ptr<Clock> clock, std::shared_ptr<MockTranscriber> transcriber,
                         std::uint64_t seed, std::string locale, int sample_rate_hz)
    : clock_(std::move(clock)),
      transcriber_(std::move(transcriber)),
      rng_(seed),
      locale_(std::move(locale)),
      rate_(sample_rate_hz) {}

ChildTurn SeededChild::await_turn(const TurnContext& context) {
  const std::uint64_t index = 1000 + turn_++;
  const double roll = unit(rng_);
  const double latency = 0.5 + 2.5 * unit(rng_);
  const auto& pool = answer_pool(locale_).at(context.topic);
  const std::string answer = context.final_window ? (locale_ == "zh" ? "再见" : "bye bye")
                                                  : pool[rng_() % pool.size()];
  if (roll < 0.12 || latency >= context.window_seconds) return stay_silent(*clock_, context.window_seconds);

  const double words = static_cast<double>(utf8::length(answer)) / (locale_ == "zh" ? 1.0 : 4.0);
  const double seconds = std::min(6.0, 0.6 + 0.35 * words);
  AudioBuffer clip = child_clip(index, seconds, rate_);
  if (roll >= 0.2 && transcriber_) transcriber_->add(clip, answer);  // else: mumbled
  return speak(*clock_, std::move(clip), latency);
}

ReplayChild::ReplayChild(std::shared_ptr<Clock> clock, const std::vector<SessionEvent>& events,
                         const std::map<std::int64_t, AudioBuffer>& audio)
    : clock_(std::move(clock)) {
  double prev_end = 0.0;
  for (const auto& e : events) {
    const bool child = e.kind == EventKind::child_utterance || e.kind == EventKind::child_silence ||
                       e.kind == EventKind::child_unrecognized || e.kind == EventKind::child_final_goodbye;
    if (child) {
      Step s;
      s.silent = e.kind == EventKind::child_silence;
      if (!s.silent) {
        if (auto it = audio.find(e.seq); it != audio.end()) {
          s.audio = it->second;
        } else {
          s.text = e.payload.text;
        }
        s.latency = e.t_start - prev_end;
        s.duration = e.t_end - e.t_start;
      }
      steps_.push_back(std::move(s));
    }
    if (e.kind != EventKind::topic_timeout) prev_end = e.t_end;
  }
}

ChildTurn ReplayChild::await_turn(const TurnContext& context) {
  if (next_ >= steps_.size()) return stay_silent(*clock_, context.window_seconds);
  const Step& s = steps_[next_++];
  if (s.silent) return stay_silent(*clock_, context.window_seconds);
  if (s.audio) return speak(*clock_, *s.audio, s.latency);
  clock_->sleep_for(s.latency);
  ChildTurn turn;
  turn.speech_start = clock_->now();
  clock_->sleep_for(s.duration);
  turn.speech_end = clock_->now();
  turn.text = s.text;
  return turn;
}

}  // namespace asdchat
