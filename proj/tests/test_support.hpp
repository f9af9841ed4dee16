#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <memory>
#include <random>
#include <string>

#include "asdchat/codec.hpp"
#include "asdchat/config.hpp"
#include "asdchat/session.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& rel) {
  return std::filesystem::path(ASDCHAT_TEST_DATA_DIR) / rel;
}

inline std::string read_data(const std::string& rel) { return asdchat::read_text_file(data_path(rel)); }

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("asdchat-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline asdchat::ChildProfile test_profile() {
  asdchat::ChildProfile p;
  p.child_id = "c-01";
  p.age_years = 5;
  p.sex = asdchat::Sex::male;
  p.preferences = {{"food", {"apples", "noodles"}}, {"animal", {"dogs"}}};
  p.recent_experiences = {"went to the zoo last weekend"};
  return p;
}

/// Short budgets so a whole session stays small.
inline asdchat::SessionConfig short_config(double per_topic = 40.0) {
  asdchat::SessionConfig c;
  c.per_topic_budget_seconds = per_topic;
  c.total_budget_seconds = per_topic * 5;
  return c;
}

struct ScriptedRig {
  std::shared_ptr<asdchat::SimulatedClock> clock = std::make_shared<asdchat::SimulatedClock>();
  std::shared_ptr<asdchat::MockTranscriber> transcriber = std::make_shared<asdchat::MockTranscriber>();
  asdchat::ProviderSet providers;
  std::shared_ptr<asdchat::ScriptedChild> child;

  explicit ScriptedRig(std::vector<asdchat::ScriptedTurn> script) {
    providers.chat = std::make_shared<asdchat::EchoTopicChat>();
    providers.transcriber = transcriber;
    providers.synthesizer = std::make_shared<asdchat::ToneSynthesizer>();
    child = std::make_shared<asdchat::ScriptedChild>(clock, transcriber, std::move(script));
  }

  asdchat::SessionHandle start(const asdchat::SessionConfig& config, const std::string& id = "t-session") {
    asdchat::EngineOptions opts;
    opts.session_id = id;
    return asdchat::start_session(test_profile(), config, providers, {clock, child, nullptr}, opts);
  }
};

inline std::vector<asdchat::ScriptedTurn> mixed_script() {
  using K = asdchat::ScriptedTurn::Kind;
  return {
      {K::speak, "I like noodles", 1.0, 1.5},
      {K::mumble, "", 0.5, 2.0},
      {K::silent, "", 0.0, 0.0},
      {K::speak, "my dog is big", 2.0, 2.5},
  };
}

}  // namespace testing
