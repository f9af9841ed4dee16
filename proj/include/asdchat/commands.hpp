#pragma once
// Command implementations behind the asdchat executable. Each returns the
// process exit code and writes diagnostics to `err`.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "asdchat/error.hpp"

namespace asdchat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitProvider = 3;
inline constexpr int kExitIo = 4;

/// 3 for provider and credential failures, 4 for I/O, 2 for everything else.
int exit_code_for(Errc code) noexcept;

struct RunArgs {
  std::filesystem::path config;
  bool live = false;
  std::filesystem::path out = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> session_id;
  std::optional<std::filesystem::path> profile;
  bool simulate_fnirs = false;  // mock only: attach a synthetic device trace
};

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);

struct IngestArgs {
  std::filesystem::path transcript;
  std::filesystem::path speaker_map;
  std::filesystem::path profile;
  std::optional<std::filesystem::path> recording;
  std::optional<std::filesystem::path> topics;
  std::optional<std::filesystem::path> fnirs;
  std::optional<double> fnirs_start;  // session time of fNIRS sample 0
  std::optional<std::filesystem::path> config;
  std::string session_id;
  std::string condition = "interventionist";
  std::filesystem::path out = ".";
};

int cmd_ingest(const IngestArgs& args, std::ostream& out, std::ostream& err);

enum class AnalysisKind { text, audio, fnirs };

struct AnalyzeArgs {
  AnalysisKind kind = AnalysisKind::text;
  // session directories, or roots holding sessions/<id>/
  std::vector<std::filesystem::path> sessions;
  std::filesystem::path out;
  std::optional<std::filesystem::path> config;
  bool live_embedder = false;
  std::optional<std::size_t> waveform_channel;  // 1-based
  std::optional<std::string> waveform_topic;
};

/// text:  subject/condition rows of words_per_turn, speech_seconds_per_turn,
///        qa_cosine.
/// audio: speech-table rows; also <out>.segments.tsv and <out>.table.txt.
/// fnirs: hbo_<statistic>.<topic>[.ch<k>] rows; optional waveform exports
///        <out>.waveform.<session>.tsv.
int cmd_analyze(const AnalyzeArgs& args, std::ostream& out, std::ostream& err);

struct ReportArgs {
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path out;  // TSV; the text summary goes to <out>.txt
  int decimals = 2;
};

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);

struct FixtureArgs {
  std::filesystem::path out;
  std::string subject = "S1";
  std::uint64_t seed = 1;
  double topic_seconds = 24.0;
};

/// Writes an interventionist ingest bundle (see fixtures.hpp).
int cmd_make_fixture(const FixtureArgs& args, std::ostream& out, std::ostream& err);

/// Session directories named by `paths`: a directory with a manifest, or a
/// root whose sessions/ subdirectory holds them (sorted by id).
std::vector<std::filesystem::path> expand_session_dirs(const std::vector<std::filesystem::path>& paths);

}  // namespace asdchat::cli
