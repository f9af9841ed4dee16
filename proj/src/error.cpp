#include "asdchat/error.hpp"

namespace asdchat {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::unknown_topic: return "UNKNOWN_TOPIC";
    case Errc::missing_duration: return "MISSING_DURATION";
    case Errc::invalid_config: return "INVALID_CONFIG";
    case Errc::invalid_state: return "INVALID_STATE";
    case Errc::provider_missing: return "PROVIDER_MISSING";
    case Errc::provider_failure: return "PROVIDER_FAILURE";
    case Errc::unsubstituted_placeholder: return "UNSUBSTITUTED_PLACEHOLDER";
    case Errc::io_error: return "IO_ERROR";
    case Errc::integrity_error: return "INTEGRITY_ERROR";
    case Errc::parse_error: return "PARSE_ERROR";
    case Errc::unknown_speaker: return "UNKNOWN_SPEAKER";
    case Errc::nonpositive_intensity: return "NONPOSITIVE_INTENSITY";
    case Errc::zero_vector: return "ZERO_VECTOR";
    case Errc::divide_by_zero: return "DIVIDE_BY_ZERO";
    case Errc::empty_audio: return "EMPTY_AUDIO";
    case Errc::too_short: return "TOO_SHORT";
    case Errc::not_voiced: return "NOT_VOICED";
    case Errc::insufficient_resonances: return "INSUFFICIENT_RESONANCES";
    case Errc::all_flagged: return "ALL_FLAGGED";
    case Errc::rate_too_low: return "RATE_TOO_LOW";
    case Errc::singular_extinction: return "SINGULAR_EXTINCTION";
    case Errc::insufficient_baseline: return "INSUFFICIENT_BASELINE";
    case Errc::zero_variance_baseline: return "ZERO_VARIANCE_BASELINE";
    case Errc::empty_interval: return "EMPTY_INTERVAL";
    case Errc::out_of_range: return "OUT_OF_RANGE";
    case Errc::shape_mismatch: return "SHAPE_MISMATCH";
    case Errc::no_alignment: return "NO_ALIGNMENT";
    case Errc::missing_condition: return "MISSING_CONDITION";
    case Errc::bind_failure: return "BIND_FAILURE";
  }
  return "UNKNOWN";
}

namespace {

std::string compose(Errc code, const std::string& detail) {
  std::string msg(errc_name(code));
  if (!detail.empty()) {
    msg += ": ";
    msg += detail;
  }
  return msg;
}

}  // namespace

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(compose(code, detail)), code_(code), detail_(detail) {}

}  // namespace asdchat
