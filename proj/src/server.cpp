#include "asdchat/server.hpp"

#include <fmt/format.h>
#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <regex>
#include <thread>

#include "asdchat/codec.hpp"
#include "asdchat/store.hpp"

namespace asdchat {

namespace {

using nlohmann::json;

/// Child turns arrive over the API; a window with no submission is silence.
class ApiChild : public ChildInput {
 public:
  explicit ApiChild(std::shared_ptr<Clock> clock) : clock_(std::move(clock)) {}

  ChildTurn await_turn(const TurnContext& context) override {
    std::unique_lock lk(mu_);
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(context.window_seconds));
    cv_.wait_until(lk, deadline, [&] { return !queue_.empty() || closed_; });
    ChildTurn turn;
    const double now = clock_->now();
    turn.speech_start = turn.speech_end = now;
    if (!queue_.empty()) {
      turn = std::move(queue_.front());
      queue_.pop_front();
      turn.speech_end = now;
      turn.speech_start = turn.audio ? now - turn.audio->duration_seconds() : now;
    }
    return turn;
  }

  void push(ChildTurn turn) {
    {
      std::lock_guard lk(mu_);
      queue_.push_back(std::move(turn));
    }
    cv_.notify_all();
  }

  void close() {
    {
      std::lock_guard lk(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::shared_ptr<Clock> clock_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<ChildTurn> queue_;
  bool closed_ = false;
};

struct LiveSession {
  std::string id;
  std::mutex mu;
  std::condition_variable cv;
  std::vector<SessionEvent> events;
  bool finished = false;
  std::optional<std::string> failure;
  std::shared_ptr<ApiChild> api_child;
  std::optional<SessionHandle> handle;
  std::thread runner;
};

int status_for(Errc code) {
  switch (code) {
    case Errc::invalid_config:
    case Errc::parse_error:
    case Errc::unknown_topic:
      return 400;
    case Errc::provider_missing:
      return 503;
    case Errc::invalid_state:
      return 409;
    default:
      return 500;
  }
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& detail) {
  res.status = status;
  res.set_content(json{{"error", {{"code", code}, {"detail", detail}}}}.dump() + "\n", "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  send_error(res, status_for(e.code()), errc_name(e.code()), e.detail());
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

bool valid_name(const std::string& s) {
  static const std::regex ok(R"([A-Za-z0-9._-]{1,128})");
  return std::regex_match(s, ok) && s != "." && s != "..";
}

}  // namespace

std::pair<std::string, int> parse_listen_address(const std::string& addr) {
  auto colon = addr.rfind(':');
  std::string host = colon == std::string::npos ? "127.0.0.1" : addr.substr(0, colon);
  std::string port = colon == std::string::npos ? addr : addr.substr(colon + 1);
  if (host.empty()) host = "0.0.0.0";
  auto p = parse_number(port);
  if (!p || *p < 0 || *p > 65535 || *p != static_cast<int>(*p)) {
    throw Error(Errc::invalid_config, fmt::format("bad listen address '{}'", addr));
  }
  return {host, static_cast<int>(*p)};
}

struct ApiServer::Impl {
  ServeOptions opts;
  httplib::Server svr;
  std::thread listener;
  int bound_port = 0;
  std::atomic<bool> stopping{false};
  std::mutex mu;
  std::map<std::string, std::shared_ptr<LiveSession>> sessions;
  std::size_t counter = 0;
  std::mutex done_mu;
  std::condition_variable done_cv;
  bool stopped = false;

  std::shared_ptr<LiveSession> find(const std::string& id) {
    std::lock_guard lk(mu);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    json body = json::object();
    if (!req.body.empty()) {
      try {
        body = parse_json(req.body, "request");
      } catch (const Error& e) {
        return send_error(res, e);
      }
    }
    try {
      SessionConfig config = opts.config.session;
      if (body.contains("config")) {
        json merged = config;
        merged.merge_patch(body["config"]);
        config = merged.get<SessionConfig>();
      }
      ChildProfile profile = opts.config.profile.value_or(demo_profile());
      if (body.contains("profile")) profile = body["profile"].get<ChildProfile>();
      const std::string child_kind = body.value("child", "api");
      const std::string playback = body.value("playback", "clock");
      if (child_kind != "api" && child_kind != "seeded") {
        throw Error(Errc::invalid_config, fmt::format("child must be 'api' or 'seeded', not '{}'", child_kind));
      }
      if (playback != "clock" && playback != "none") {
        throw Error(Errc::invalid_config, fmt::format("playback must be 'clock' or 'none', not '{}'", playback));
      }

      auto session = std::make_shared<LiveSession>();
      {
        std::lock_guard lk(mu);
        session->id = body.value("session_id", fmt::format("s{}", ++counter));
        if (!valid_name(session->id)) throw Error(Errc::invalid_config, "session_id must match [A-Za-z0-9._-]+");
        if (sessions.contains(session->id)) {
          throw Error(Errc::invalid_state, fmt::format("session '{}' already exists", session->id));
        }
      }

      ProviderSet providers;
      SessionRuntime runtime;
      std::shared_ptr<MockTranscriber> transcriber;
      if (opts.live) {
        providers = live_providers(opts.config.providers);
      } else {
        auto mocks = mock_providers(opts.config.analysis.embed_seed);
        providers = mocks.set;
        transcriber = mocks.transcriber;
      }
      if (child_kind == "seeded") {
        if (!transcriber) throw Error(Errc::invalid_config, "seeded children need mock providers");
        runtime.clock = std::make_shared<SimulatedClock>();
        runtime.child = std::make_shared<SeededChild>(runtime.clock, transcriber, body.value("seed", opts.config.seed),
                                                      config.locale);
      } else {
        runtime.clock = std::make_shared<SteadyClock>();
        session->api_child = std::make_shared<ApiChild>(runtime.clock);
        runtime.child = session->api_child;
      }
      if (playback == "none") runtime.playback = std::make_shared<NullPlayback>();

      EngineOptions eo;
      eo.session_id = session->id;
      eo.paradigm = opts.config.paradigm;
      eo.prompts = opts.config.prompts;
      std::weak_ptr<LiveSession> weak = session;
      eo.on_event = [weak](const SessionEvent& e) {
        if (auto s = weak.lock()) {
          {
            std::lock_guard lk(s->mu);
            s->events.push_back(e);
          }
          s->cv.notify_all();
        }
      };
      session->handle.emplace(start_session(profile, config, providers, runtime, eo));

      {
        std::lock_guard lk(mu);
        if (sessions.contains(session->id)) {
          throw Error(Errc::invalid_state, fmt::format("session '{}' already exists", session->id));
        }
        sessions[session->id] = session;
      }
      session->runner = std::thread([this, session] {
        try {
          auto record = session->handle->run_session();
          save_session(opts.root, record, session->handle->audio());
        } catch (const std::exception& e) {
          std::lock_guard lk(session->mu);
          session->failure = e.what();
        }
        {
          std::lock_guard lk(session->mu);
          session->finished = true;
        }
        session->cv.notify_all();
      });
      send_json(res, 201, {{"session_id", session->id},
                           {"events_url", fmt::format("/sessions/{}/events", session->id)},
                           {"child", child_kind}});
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "PARSE_ERROR", e.what());
    }
  }

  void turn(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return send_error(res, 404, "NOT_FOUND", "no such session");
    if (!s->api_child) return send_error(res, 409, "INVALID_STATE", "this session's child is simulated");
    {
      std::lock_guard lk(s->mu);
      if (s->finished) return send_error(res, 409, "INVALID_STATE", "session has ended");
    }
    try {
      const auto body = parse_json(req.body, "turn");
      ChildTurn t;
      if (body.contains("audio_base64")) t.audio = decode_wav(base64_decode(body["audio_base64"].get<std::string>()));
      if (body.contains("text")) t.text = body["text"].get<std::string>();
      if (t.audio && t.audio->empty()) throw Error(Errc::invalid_config, "empty audio");
      if (t.text && t.text->empty()) t.text.reset();
      s->api_child->push(std::move(t));
      send_json(res, 202, {{"accepted", true}});
    } catch (const Error& e) {
      send_error(res, e.code() == Errc::parse_error ? 400 : status_for(e.code()), errc_name(e.code()), e.detail());
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 400, "PARSE_ERROR", e.what());
    }
  }

  void end(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return send_error(res, 404, "NOT_FOUND", "no such session");
    s->handle->request_end();
    if (s->api_child) s->api_child->close();
    send_json(res, 202, {{"ending", true}});
  }

  json status(LiveSession& s) {
    std::lock_guard lk(s.mu);
    std::string state = "running";
    if (!s.events.empty() && s.events.back().kind == EventKind::session_end) state = "ended";
    if (s.finished) state = s.failure ? "failed" : "saved";
    json j = {{"session_id", s.id}, {"state", state}, {"events", s.events.size()}};
    if (s.failure) j["error"] = *s.failure;
    return j;
  }

  void events(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    if (!s) return send_error(res, 404, "NOT_FOUND", "no such session");
    std::int64_t from = 0;
    if (req.has_param("from_seq")) {
      auto v = parse_number(req.get_param_value("from_seq"));
      if (!v || *v < 0) return send_error(res, 400, "PARSE_ERROR", "from_seq must be a nonnegative integer");
      from = static_cast<std::int64_t>(*v);
    }
    auto cursor = std::make_shared<std::size_t>(0);
    res.set_chunked_content_provider("application/x-ndjson", [this, s, cursor, from](size_t, httplib::DataSink& sink) {
      std::string chunk;
      bool done = false;
      {
        std::unique_lock lk(s->mu);
        s->cv.wait_for(lk, std::chrono::milliseconds(200),
                       [&] { return s->events.size() > *cursor || s->finished || stopping.load(); });
        for (; *cursor < s->events.size(); ++*cursor) {
          const auto& e = s->events[*cursor];
          if (e.seq >= from) chunk += event_to_line(e) + "\n";
        }
        done = s->finished || stopping.load();
      }
      if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
      if (done) sink.done();
      return true;
    });
  }

  void report(const httplib::Request& req, httplib::Response& res) {
    const std::string name = req.matches[1];
    if (!valid_name(name)) return send_error(res, 400, "PARSE_ERROR", "bad report name");
    const auto path = opts.root / "reports" / name;
    if (!std::filesystem::is_regular_file(path)) return send_error(res, 404, "NOT_FOUND", "no such report");
    try {
      const auto type = path.extension() == ".tsv" ? "text/tab-separated-values; charset=utf-8"
                                                   : "text/plain; charset=utf-8";
      res.set_content(read_text_file(path), type);
    } catch (const Error& e) {
      send_error(res, e);
    }
  }

  void routes() {
    svr.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); });
    svr.Post("/sessions", [this](const httplib::Request& q, httplib::Response& r) { create(q, r); });
    svr.Get("/sessions", [this](const httplib::Request&, httplib::Response& r) {
      std::vector<std::shared_ptr<LiveSession>> all;
      {
        std::lock_guard lk(mu);
        for (const auto& [id, s] : sessions) all.push_back(s);
      }
      json list = json::array();
      for (const auto& s : all) list.push_back(status(*s));
      send_json(r, 200, {{"sessions", list}});
    });
    svr.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& q, httplib::Response& r) {
      auto s = find(q.matches[1]);
      if (!s) return send_error(r, 404, "NOT_FOUND", "no such session");
      send_json(r, 200, status(*s));
    });
    svr.Post(R"(/sessions/([^/]+)/turns)", [this](const httplib::Request& q, httplib::Response& r) { turn(q, r); });
    svr.Post(R"(/sessions/([^/]+)/end)", [this](const httplib::Request& q, httplib::Response& r) { end(q, r); });
    svr.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& q, httplib::Response& r) { events(q, r); });
    svr.Get(R"(/reports/([^/]+))", [this](const httplib::Request& q, httplib::Response& r) { report(q, r); });
  }
};

ApiServer::ApiServer(ServeOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->opts = std::move(options);
  impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

void ApiServer::start() {
  auto& i = *impl_;
  // httplib's default also sets SO_REUSEPORT, which lets two servers share a port
  i.svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  if (i.opts.port == 0) {
    i.bound_port = i.svr.bind_to_any_port(i.opts.host);
  } else {
    i.bound_port = i.svr.bind_to_port(i.opts.host, i.opts.port) ? i.opts.port : -1;
  }
  if (i.bound_port <= 0) {
    throw Error(Errc::bind_failure, fmt::format("cannot listen on {}:{}", i.opts.host, i.opts.port));
  }
  i.listener = std::thread([&i] { i.svr.listen_after_bind(); });
  i.svr.wait_until_ready();  // stop() before the loop starts would never return
}

int ApiServer::port() const { return impl_->bound_port; }

void ApiServer::stop() {
  auto& i = *impl_;
  if (i.stopping.exchange(true)) return;
  std::vector<std::shared_ptr<LiveSession>> all;
  {
    std::lock_guard lk(i.mu);
    for (const auto& [id, s] : i.sessions) all.push_back(s);
  }
  for (const auto& s : all) {
    s->handle->request_end();
    if (s->api_child) s->api_child->close();
    s->cv.notify_all();
  }
  for (const auto& s : all) {
    if (s->runner.joinable()) s->runner.join();
  }
  i.svr.stop();
  if (i.listener.joinable()) i.listener.join();
  {
    std::lock_guard lk(i.done_mu);
    i.stopped = true;
  }
  i.done_cv.notify_all();
}

void ApiServer::wait() {
  std::unique_lock lk(impl_->done_mu);
  impl_->done_cv.wait(lk, [&] { return impl_->stopped; });
}

}  // namespace asdchat
