#pragma once
// Session service over HTTP.
//
//   GET  /health                            {"status":"ok"}
//   POST /sessions                          create and start a session
//   GET  /sessions                          ids and states
//   GET  /sessions/{id}                     state of one session
//   POST /sessions/{id}/turns               submit one child turn
//   GET  /sessions/{id}/events?from_seq=N   event feed, one JSON event per line
//   POST /sessions/{id}/end                 request the end of the session
//   GET  /reports/{name}                    files under <root>/reports/
//
// Errors are {"error": {"code": "...", "detail": "..."}}.

#include <filesystem>
#include <memory>
#include <string>

#include "asdchat/config.hpp"

namespace asdchat {

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path root = ".";  // sessions are saved under root/sessions
  AppConfig config;
  bool live = false;  // live providers instead of mocks
};

class ApiServer {
 public:
  explicit ApiServer(ServeOptions options);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds and starts serving on a background thread. BIND_FAILURE.
  void start();
  int port() const;
  /// Ends running sessions, waits for them, and stops listening.
  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port" (or ":port", or "port").
std::pair<std::string, int> parse_listen_address(const std::string& addr);

}  // namespace asdchat
