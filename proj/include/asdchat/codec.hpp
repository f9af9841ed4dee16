#pragma once

// JSON forms of the persisted value types. Field names here are the
// on-disk and on-wire contract; keep them stable.

#include <json.hpp>

#include "asdchat/paradigm.hpp"
#include "asdchat/session.hpp"

namespace asdchat {

void to_json(nlohmann::json& j, const TopicSpec& topic);
void from_json(const nlohmann::json& j, TopicSpec& topic);

void to_json(nlohmann::json& j, const SessionConfig& config);
void from_json(const nlohmann::json& j, SessionConfig& config);

void to_json(nlohmann::json& j, const ChildProfile& profile);
void from_json(const nlohmann::json& j, ChildProfile& profile);

void to_json(nlohmann::json& j, const SessionEvent& event);
void from_json(const nlohmann::json& j, SessionEvent& event);

/// Compact single-line JSON for one event, the events.ndtext line format.
std::string event_to_line(const SessionEvent& event);
SessionEvent event_from_line(std::string_view line);

/// Reads a whole file as bytes; throws Error(io_error).
std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

/// Shortest text form that parses back to the same double.
std::string format_double(double value);

/// Whole-string decimal number, or nullopt.
std::optional<double> parse_number(std::string_view text);

/// Splits on a single-character separator, keeping empty fields.
std::vector<std::string_view> split(std::string_view text, char sep);

/// Parses JSON, rethrowing syntax errors as Error(parse_error).
nlohmann::json parse_json(std::string_view text, std::string_view what);

}  // namespace asdchat
