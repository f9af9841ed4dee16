#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asdchat/audio_io.hpp"
#include "asdchat/session.hpp"

namespace asdchat::audio {

struct AudioSegment {
  std::vector<float> samples;
  int sample_rate_hz = 16000;
  double t_start = 0.0;
  double t_end = 0.0;
  Speaker speaker = Speaker::child;

  std::span<const float> view() const { return samples; }
  double rms() const;
};

AudioSegment whole(const AudioBuffer& audio, double t_start = 0.0, Speaker speaker = Speaker::child);

// ---------------------------------------------------------------------------
// Segmentation

struct VadParams {
  double frame_seconds = 0.025;
  double hop_seconds = 0.010;
  double rms_threshold = 0.01;
  double merge_gap_seconds = 0.2;
};

struct OutlierParams {
  double min_seconds = 0.2;
  double max_seconds = 30.0;
  double mad_factor = 3.0;
};

/// Maximal runs of frames with RMS above the threshold, with short gaps
/// merged. Segment times are offset by `t_offset`. EMPTY_AUDIO on no samples.
std::vector<AudioSegment> detect_segments(const AudioBuffer& audio, const VadParams& params = {},
                                          double t_offset = 0.0, Speaker speaker = Speaker::child);

/// Drops segments outside [min, max] seconds, then those whose RMS lies more
/// than mad_factor median-absolute-deviations from the median RMS of the
/// survivors. Apply once per session so the median is session-wide.
std::vector<AudioSegment> discard_outliers(std::vector<AudioSegment> segments, const OutlierParams& params = {});

std::vector<AudioSegment> segment_speech(const AudioBuffer& audio, const VadParams& vad = {},
                                         const OutlierParams& outliers = {});

// ---------------------------------------------------------------------------
// Features

/// Sign changes between consecutive samples over N - 1. Zero counts as
/// positive. TOO_SHORT below two samples.
double zero_cross_rate(std::span<const float> samples);

struct F0Params {
  double frame_seconds = 0.040;
  double hop_seconds = 0.010;
  double min_hz = 100.0;
  double max_hz = 1000.0;
  double periodicity_threshold = 0.3;
};

/// Median over periodic frames of the normalized-autocorrelation pitch;
/// nullopt when no frame clears the periodicity threshold. TOO_SHORT below
/// one frame.
std::optional<double> estimate_f0(std::span<const float> samples, int sample_rate_hz, const F0Params& params = {});

struct Resonance {
  double frequency_hz = 0.0;
  double bandwidth_hz = 0.0;
};

struct LpcParams {
  double pre_emphasis = 0.97;
  int order = 0;  // 0: 2 + rate / 1000
  double frame_seconds = 0.030;
  double hop_seconds = 0.010;
};

/// LPC predictor polynomial [1, a1, ..., ap] (autocorrelation method,
/// Levinson-Durbin) of a single frame, after pre-emphasis and a Hamming
/// window.
std::vector<double> lpc(std::span<const float> frame, int order, double pre_emphasis);

/// Upper-half-plane roots of the predictor polynomial as resonances,
/// ascending by frequency.
std::vector<Resonance> lpc_resonances(std::span<const double> predictor, int sample_rate_hz);

/// Resonances of each analysis frame with enough energy to analyze.
std::vector<std::vector<Resonance>> frame_resonances(std::span<const float> samples, int sample_rate_hz,
                                                     const LpcParams& params = {});

struct VoicingParams {
  double max_zcr = 0.15;
  double resonance_ceiling_hz = 4000.0;
  double resonance_max_bandwidth_hz = 700.0;
  std::size_t min_resonances = 2;
};

struct FormantParams {
  double max_bandwidth_hz = 400.0;
  double min_frequency_hz = 90.0;
};

struct FeatureParams {
  F0Params f0;
  LpcParams lpc;
  VoicingParams voicing;
  FormantParams formants;
};

bool classify_voiced(const AudioSegment& segment, const FeatureParams& params = {});

/// Per-frame first three resonances narrower than the bandwidth limit,
/// medians across frames. NOT_VOICED, INSUFFICIENT_RESONANCES.
std::array<double, 3> estimate_formants(const AudioSegment& segment, const FeatureParams& params = {});

struct AcousticFeatures {
  std::optional<double> f0_hz;
  double zcr = 0.0;
  bool voiced = false;
  std::optional<double> f1_hz, f2_hz, f3_hz;
};

/// Voiced additionally requires that formant estimation succeeds, so the
/// formant fields are present exactly when voiced is true.
AcousticFeatures analyze_segment(const AudioSegment& segment, const FeatureParams& params = {});

// ---------------------------------------------------------------------------
// Table-III-shaped aggregation

struct SegmentRow {
  std::string subject;
  std::string condition;  // asdchat | interventionist
  std::string session_id;
  double t_start = 0.0;
  double t_end = 0.0;
  AcousticFeatures features;
};

std::string dump_feature_rows(const std::vector<SegmentRow>& rows);

enum class TableMetric { speech_f0, speech_zcr, voiced_f0, voiced_zcr, f1, f2, f3 };
inline constexpr std::array<TableMetric, 7> kTableMetrics = {TableMetric::speech_f0, TableMetric::speech_zcr,
                                                             TableMetric::voiced_f0,  TableMetric::voiced_zcr,
                                                             TableMetric::f1,         TableMetric::f2,
                                                             TableMetric::f3};

std::string_view table_metric_name(TableMetric metric) noexcept;
std::optional<TableMetric> parse_table_metric(std::string_view name) noexcept;
bool is_zcr(TableMetric metric) noexcept;

struct TableRow {
  TableMetric metric = TableMetric::speech_f0;
  std::string condition;
  std::vector<std::optional<double>> cells;  // one per table subject
  std::optional<double> avg;                 // mean of the present cells
};

struct SpeechTable {
  std::vector<std::string> subjects;
  std::vector<TableRow> rows;  // metric-major, asdchat before interventionist
};

std::optional<double> mean_of_present(const std::vector<std::optional<double>>& cells);

/// Per subject and condition: mean F0/ZCR over all segments, mean
/// F0/ZCR/F1/F2/F3 over voiced segments. Subjects in first-seen order.
SpeechTable aggregate_speech_table(const std::vector<SegmentRow>& rows);

/// avg rounded as reported: integer Hz, three-decimal ZCR.
double round_avg(TableMetric metric, double value);

/// The table laid out as published: field, metric, type, subjects..., avg.
std::string format_speech_table(const SpeechTable& table);

/// Long form, one line per cell: subject, condition, metric, value.
std::string dump_speech_table_tsv(const SpeechTable& table);

}  // namespace asdchat::audio
