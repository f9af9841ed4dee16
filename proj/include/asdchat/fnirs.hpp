#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "asdchat/session.hpp"
#include "asdchat/store.hpp"

namespace asdchat::fnirs {

/// channels x wavelengths x samples, same shape as the source intensity.
struct OpticalDensity {
  double sample_rate_hz = 30.0;
  std::vector<std::vector<std::vector<double>>> data;

  std::size_t channels() const { return data.size(); }
  std::size_t samples() const { return data.empty() || data[0].empty() ? 0 : data[0][0].size(); }
};

/// OD = -log10(I / mean(I)) per channel and wavelength.
OpticalDensity intensity_to_od(const FnirsRecording& recording);

struct MotionParams {
  double window_seconds = 0.5;
  double mask_pad_seconds = 1.0;
  double std_threshold = 50.0;
  double amp_threshold = 5.0;
};

using Mask = std::vector<std::vector<bool>>;  // [channel][sample]

/// A sample is an artifact when the largest change from it to any sample
/// within the following window exceeds std_threshold times the standard
/// deviation of the first difference, or amp_threshold in absolute OD.
/// Flags are padded on both sides and merged across wavelengths.
Mask detect_motion_artifacts(const OpticalDensity& od, const MotionParams& params = {});

/// Each flagged run is replaced by a natural cubic spline through up to
/// anchor_seconds of clean samples on either side; runs touching an end
/// take the nearest clean value. ALL_FLAGGED when a channel has no clean
/// sample.
OpticalDensity spline_correct(const OpticalDensity& od, const Mask& mask, double anchor_seconds = 0.5);

/// Natural cubic spline through (xs, ys), evaluated at `at`. xs ascending.
std::vector<double> natural_cubic_spline(const std::vector<double>& xs, const std::vector<double>& ys,
                                         const std::vector<double>& at);

// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxFirTaps = 4095;

/// Hamming-windowed sinc band-pass, order 3 * rate / low rounded to even
/// and capped so the kernel has at most kMaxFirTaps taps. Unity gain at the
/// band center.
std::vector<double> design_bandpass(double sample_rate_hz, double low_hz, double high_hz,
                                    std::size_t max_taps = kMaxFirTaps);

/// Forward-backward application with odd-reflection padding.
std::vector<double> filtfilt(const std::vector<double>& taps, const std::vector<double>& x);

struct FilterInfo {
  std::size_t taps = 0;
  std::size_t edge_samples = 0;  // transient region at each end
};

struct Filtered {
  OpticalDensity od;
  FilterInfo info;
};

/// RATE_TOO_LOW unless rate > 2 * high.
Filtered bandpass_fir(const OpticalDensity& od, double low_hz = 0.01, double high_hz = 0.2);

/// Frequency response magnitude of a kernel at `freq_hz`.
double fir_gain(const std::vector<double>& taps, double freq_hz, double sample_rate_hz);

// ---------------------------------------------------------------------------

struct BeerLambertParams {
  // per wavelength, in the recording's wavelength order; molar extinction
  // coefficients in 1/(cm*M)
  std::array<double, 2> eps_hbo = {1486.5865, 2526.391};
  std::array<double, 2> eps_hbr = {3843.707, 1798.643};
  std::array<double, 2> dpf = {6.0, 6.0};
  double distance_cm = 3.0;
};

/// Tabulated coefficients for 760/850 nm; other wavelengths must be supplied.
BeerLambertParams default_beer_lambert(const std::vector<double>& wavelengths_nm);

/// Condition number of the 2x2 extinction matrix.
double extinction_condition(const BeerLambertParams& params);

/// Forward model: the OD pair produced by a concentration change.
std::array<double, 2> forward_od(double d_hbo, double d_hbr, const BeerLambertParams& params);

struct HbSeries {
  double sample_rate_hz = 30.0;
  std::vector<std::vector<double>> hbo;  // [channel][sample], molar
  std::vector<std::vector<double>> hbr;
  bool zscored = false;
  std::optional<std::pair<double, double>> baseline_window;

  std::size_t samples() const { return hbo.empty() ? 0 : hbo[0].size(); }
  double duration_seconds() const { return static_cast<double>(samples()) / sample_rate_hz; }
};

/// Solves the 2x2 modified Beer-Lambert system per sample.
/// SINGULAR_EXTINCTION when the condition number reaches 1e6.
HbSeries od_to_concentration(const OpticalDensity& od, const BeerLambertParams& params);

/// HbO only, per channel, against [start - 1 s, start) in recording time.
/// INSUFFICIENT_BASELINE below 30 samples (or one second at other rates);
/// ZERO_VARIANCE_BASELINE when a channel's baseline is flat.
HbSeries zscore_baseline(HbSeries hb, double conversation_start_s);

enum class Statistic { mean_abs, mean, peak_to_peak };

std::string_view statistic_name(Statistic s) noexcept;
std::optional<Statistic> parse_statistic(std::string_view name) noexcept;

struct TopicAmplitude {
  std::vector<double> per_channel;
  double channel_mean = 0.0;
};

/// Statistic of HbO over samples with t in [t0, t1), recording time.
/// EMPTY_INTERVAL when no sample falls inside; OUT_OF_RANGE when the
/// interval leaves the recording.
TopicAmplitude topic_amplitude(const HbSeries& hb, double t0, double t1, Statistic statistic = Statistic::mean_abs);

// ---------------------------------------------------------------------------

struct SpeakerDurations {
  double total_seconds = 0.0;
  double agent_seconds = 0.0;
  double child_seconds = 0.0;
};

/// Talk-time sums over entries clipped to the window; total is the window
/// length, or the transcript's span without a window.
SpeakerDurations speaker_durations(const std::vector<TranscriptEntry>& transcript,
                                   const std::optional<TopicInterval>& window = std::nullopt);

struct Annotation {
  Speaker speaker = Speaker::agent;
  double t_start = 0.0;  // recording time
  double t_end = 0.0;
};

struct Waveform {
  std::size_t channel = 0;  // zero-based
  std::vector<std::pair<double, double>> points;  // (recording t, HbO)
  std::vector<Annotation> annotations;
  SpeakerDurations durations;
};

/// NO_ALIGNMENT without an fNIRS epoch; OUT_OF_RANGE for a bad channel.
Waveform align_and_export_waveform(const HbSeries& hb, const std::vector<TranscriptEntry>& transcript,
                                   std::size_t channel, const ClockEpoch& epoch,
                                   const std::optional<TopicInterval>& window = std::nullopt);

std::string dump_waveform(const Waveform& waveform);

// ---------------------------------------------------------------------------

struct PipelineParams {
  MotionParams motion;
  double anchor_seconds = 0.5;
  double low_hz = 0.01;
  double high_hz = 0.2;
  std::optional<BeerLambertParams> beer_lambert;  // default_beer_lambert(wavelengths)
};

struct PipelineResult {
  HbSeries hb;  // z-scored
  Mask motion_mask;
  FilterInfo filter;
};

/// OD, motion detection, spline correction, band-pass, Beer-Lambert, then
/// baseline z-scoring.
PipelineResult run_pipeline(const FnirsRecording& recording, double conversation_start_s,
                            const PipelineParams& params = {});

}  // namespace asdchat::fnirs
