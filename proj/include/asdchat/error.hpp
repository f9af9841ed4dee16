#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asdchat {

/// Machine-readable failure codes shared by every module.
enum class Errc {
  unknown_topic,
  missing_duration,
  invalid_config,
  invalid_state,
  provider_missing,
  provider_failure,
  unsubstituted_placeholder,
  io_error,
  integrity_error,
  parse_error,
  unknown_speaker,
  nonpositive_intensity,
  zero_vector,
  divide_by_zero,
  empty_audio,
  too_short,
  not_voiced,
  insufficient_resonances,
  all_flagged,
  rate_too_low,
  singular_extinction,
  insufficient_baseline,
  zero_variance_baseline,
  empty_interval,
  out_of_range,
  shape_mismatch,
  no_alignment,
  missing_condition,
  bind_failure,
};

/// Upper-case wire name, e.g. "UNKNOWN_TOPIC".
std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace asdchat
