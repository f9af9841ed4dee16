#include "asdchat/audio_features.hpp"

#include <fmt/format.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>

#include "asdchat/codec.hpp"
#include "asdchat/error.hpp"
#include "asdchat/text_metrics.hpp"

namespace asdchat::audio {

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

size_t to_samples(double seconds, int rate) {
  return static_cast<size_t>(std::llround(seconds * rate));
}

double rms_of(std::span<const float> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (float v : x) acc += static_cast<double>(v) * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

}  // namespace

double AudioSegment::rms() const { return rms_of(samples); }

AudioSegment whole(const AudioBuffer& audio, double t_start, Speaker speaker) {
  return {audio.samples, audio.sample_rate_hz, t_start, t_start + audio.duration_seconds(), speaker};
}

std::vector<AudioSegment> detect_segments(const AudioBuffer& audio, const VadParams& params, double t_offset,
                                          Speaker speaker) {
  if (audio.samples.empty()) throw Error(Errc::empty_audio, "no samples to segment");
  const int rate = audio.sample_rate_hz;
  const size_t n = audio.samples.size();
  const size_t frame = std::max<size_t>(1, to_samples(params.frame_seconds, rate));
  const size_t hop = std::max<size_t>(1, to_samples(params.hop_seconds, rate));
  const size_t gap = to_samples(params.merge_gap_seconds, rate);

  // sample ranges [begin, end)
  std::vector<std::pair<size_t, size_t>> runs;
  std::span<const float> all(audio.samples);
  for (size_t start = 0; start < n; start += hop) {
    const size_t len = std::min(frame, n - start);
    if (rms_of(all.subspan(start, len)) <= params.rms_threshold) continue;
    const size_t end = start + len;
    if (!runs.empty() && start <= runs.back().second + gap) {
      runs.back().second = std::max(runs.back().second, end);
    } else {
      runs.emplace_back(start, end);
    }
    if (start + frame >= n) break;
  }
  // merge once more now that every run is final
  std::vector<std::pair<size_t, size_t>> merged;
  for (const auto& r : runs) {
    if (!merged.empty() && r.first < merged.back().second + gap) {
      merged.back().second = std::max(merged.back().second, r.second);
    } else {
      merged.push_back(r);
    }
  }

  std::vector<AudioSegment> out;
  for (const auto& [b, e] : merged) {
    AudioSegment s;
    s.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(b),
                     audio.samples.begin() + static_cast<std::ptrdiff_t>(e));
    s.sample_rate_hz = rate;
    s.t_start = t_offset + static_cast<double>(b) / rate;
    s.t_end = t_offset + static_cast<double>(e) / rate;
    s.speaker = speaker;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<AudioSegment> discard_outliers(std::vector<AudioSegment> segments, const OutlierParams& params) {
  std::vector<AudioSegment> kept;
  for (auto& s : segments) {
    const double d = s.t_end - s.t_start;
    if (d >= params.min_seconds && d <= params.max_seconds) kept.push_back(std::move(s));
  }
  if (kept.size() < 3) return kept;

  std::vector<double> rms;
  for (const auto& s : kept) rms.push_back(s.rms());
  const double med = median(rms);
  std::vector<double> dev;
  for (double r : rms) dev.push_back(std::abs(r - med));
  const double mad = median(dev);
  if (mad <= 1e-12 * std::max(1.0, med)) return kept;

  std::vector<AudioSegment> out;
  for (size_t i = 0; i < kept.size(); ++i) {
    if (std::abs(rms[i] - med) <= params.mad_factor * mad) out.push_back(std::move(kept[i]));
  }
  return out;
}

std::vector<AudioSegment> segment_speech(const AudioBuffer& audio, const VadParams& vad,
                                         const OutlierParams& outliers) {
  return discard_outliers(detect_segments(audio, vad), outliers);
}

// ---------------------------------------------------------------------------

double zero_cross_rate(std::span<const float> x) {
  if (x.size() < 2) throw Error(Errc::too_short, "zero-crossing rate needs at least two samples");
  size_t changes = 0;
  for (size_t i = 1; i < x.size(); ++i) changes += (x[i - 1] >= 0.0f) != (x[i] >= 0.0f);
  return static_cast<double>(changes) / static_cast<double>(x.size() - 1);
}

namespace {

// Normalized autocorrelation pitch of one frame: {f0, peak value}.
std::optional<std::pair<double, double>> frame_pitch(std::span<const float> x, int rate, const F0Params& p) {
  const size_t n = x.size();
  const auto lag_min = static_cast<size_t>(std::ceil(rate / p.max_hz));
  const auto lag_max = std::min(n / 2, static_cast<size_t>(std::floor(rate / p.min_hz)));
  if (lag_min < 2 || lag_max <= lag_min + 1) return std::nullopt;

  // prefix energies make each lag's normalization O(1)
  std::vector<double> energy(n + 1, 0.0);
  for (size_t i = 0; i < n; ++i) energy[i + 1] = energy[i] + static_cast<double>(x[i]) * x[i];
  if (energy[n] <= 0.0) return std::nullopt;

  std::vector<double> r(lag_max + 2, 0.0);
  for (size_t lag = lag_min - 1; lag <= lag_max + 1 && lag < n; ++lag) {
    double acc = 0.0;
    for (size_t i = 0; i + lag < n; ++i) acc += static_cast<double>(x[i]) * x[i + lag];
    const double e0 = energy[n - lag];
    const double e1 = energy[n] - energy[lag];
    r[lag] = (e0 > 0.0 && e1 > 0.0) ? acc / std::sqrt(e0 * e1) : 0.0;
  }

  double best = -1.0;
  for (size_t lag = lag_min; lag <= lag_max; ++lag) best = std::max(best, r[lag]);
  if (best <= 0.0) return std::nullopt;
  for (size_t lag = lag_min; lag <= lag_max; ++lag) {
    const bool peak = r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1];
    if (!peak || r[lag] < 0.9 * best) continue;
    const double a = r[lag - 1], b = r[lag], c = r[lag + 1];
    const double denom = a - 2.0 * b + c;
    const double shift = denom < 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
    const double peak_value = b - 0.25 * (a - c) * shift;
    return std::pair{rate / (static_cast<double>(lag) + shift), peak_value};
  }
  return std::nullopt;
}

}  // namespace

std::optional<double> estimate_f0(std::span<const float> x, int rate, const F0Params& p) {
  const size_t frame = to_samples(p.frame_seconds, rate);
  const size_t hop = std::max<size_t>(1, to_samples(p.hop_seconds, rate));
  if (frame == 0 || x.size() < frame) {
    throw Error(Errc::too_short, fmt::format("{} samples is shorter than one {} s pitch frame", x.size(),
                                             p.frame_seconds));
  }
  std::vector<double> f0s;
  for (size_t start = 0; start + frame <= x.size(); start += hop) {
    auto fp = frame_pitch(x.subspan(start, frame), rate, p);
    if (fp && fp->second >= p.periodicity_threshold) f0s.push_back(fp->first);
  }
  if (f0s.empty()) return std::nullopt;
  return median(f0s);
}

// ---------------------------------------------------------------------------

std::vector<double> lpc(std::span<const float> frame, int order, double pre_emphasis) {
  const size_t n = frame.size();
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) {
    double v = frame[i] - (i > 0 ? pre_emphasis * frame[i - 1] : 0.0);
    double w = n > 1 ? 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / (n - 1)) : 1.0;
    x[i] = v * w;
  }
  const auto p = static_cast<size_t>(order);
  std::vector<double> r(p + 1, 0.0);
  for (size_t k = 0; k <= p && k < n; ++k) {
    for (size_t i = k; i < n; ++i) r[k] += x[i] * x[i - k];
  }
  std::vector<double> a(p + 1, 0.0);
  a[0] = 1.0;
  if (r[0] <= 0.0) return a;
  r[0] *= 1.0 + 1e-9;  // tiny white-noise floor keeps the recursion stable

  double err = r[0];
  std::vector<double> prev(p + 1);
  for (size_t i = 1; i <= p; ++i) {
    double acc = r[i];
    for (size_t j = 1; j < i; ++j) acc += a[j] * r[i - j];
    const double k = -acc / err;
    prev = a;
    for (size_t j = 1; j < i; ++j) a[j] = prev[j] + k * prev[i - j];
    a[i] = k;
    err *= 1.0 - k * k;
    if (err <= 0.0) break;
  }
  return a;
}

std::vector<Resonance> lpc_resonances(std::span<const double> a, int rate) {
  std::vector<Resonance> out;
  if (a.size() < 2) return out;
  const Eigen::Index p = static_cast<Eigen::Index>(a.size()) - 1;
  // companion matrix of z^p + a1 z^(p-1) + ... + ap
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) companion(0, j) = -a[static_cast<size_t>(j) + 1] / a[0];
  for (Eigen::Index i = 1; i < p; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  if (solver.info() != Eigen::Success) return out;
  const auto& roots = solver.eigenvalues();
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    const std::complex<double> z = roots[i];
    if (z.imag() <= 0.0) continue;
    const double mag = std::abs(z);
    if (mag <= 0.0) continue;
    out.push_back({std::arg(z) * rate / (2.0 * std::numbers::pi), -std::log(mag) * rate / std::numbers::pi});
  }
  std::sort(out.begin(), out.end(),
            [](const Resonance& l, const Resonance& r) { return l.frequency_hz < r.frequency_hz; });
  return out;
}

std::vector<std::vector<Resonance>> frame_resonances(std::span<const float> x, int rate, const LpcParams& params) {
  const int order = params.order > 0 ? params.order : 2 + rate / 1000;
  const size_t frame = to_samples(params.frame_seconds, rate);
  const size_t hop = std::max<size_t>(1, to_samples(params.hop_seconds, rate));
  std::vector<std::vector<Resonance>> out;
  if (frame == 0 || x.size() < frame) {
    if (x.size() < static_cast<size_t>(2 * order)) return out;
    auto a = lpc(x, order, params.pre_emphasis);
    out.push_back(lpc_resonances(a, rate));
    return out;
  }
  // skip near-silent frames: they only contribute numerical noise
  const double floor_rms = 0.05 * rms_of(x);
  for (size_t start = 0; start + frame <= x.size(); start += hop) {
    auto f = x.subspan(start, frame);
    if (rms_of(f) <= floor_rms || rms_of(f) == 0.0) continue;
    auto a = lpc(f, order, params.pre_emphasis);
    out.push_back(lpc_resonances(a, rate));
  }
  return out;
}

namespace {

bool has_resonance_structure(const std::vector<std::vector<Resonance>>& frames, const VoicingParams& v) {
  if (frames.empty()) return false;
  size_t qualifying_frames = 0;
  for (const auto& frame : frames) {
    size_t count = 0;
    for (const auto& r : frame) {
      count += r.frequency_hz > 0.0 && r.frequency_hz < v.resonance_ceiling_hz &&
               r.bandwidth_hz < v.resonance_max_bandwidth_hz;
    }
    qualifying_frames += count >= v.min_resonances;
  }
  return 2 * qualifying_frames >= frames.size();
}

std::optional<std::array<double, 3>> formants_from(const std::vector<std::vector<Resonance>>& frames,
                                                   const FormantParams& fp) {
  std::array<std::vector<double>, 3> per;
  for (const auto& frame : frames) {
    std::vector<double> f;
    for (const auto& r : frame) {
      if (r.bandwidth_hz < fp.max_bandwidth_hz && r.frequency_hz > fp.min_frequency_hz) f.push_back(r.frequency_hz);
    }
    if (f.size() < 3) continue;
    for (size_t k = 0; k < 3; ++k) per[k].push_back(f[k]);
  }
  if (per[0].empty()) return std::nullopt;
  std::array<double, 3> out{median(per[0]), median(per[1]), median(per[2])};
  if (!(out[0] < out[1] && out[1] < out[2])) return std::nullopt;
  return out;
}

bool voiced_from(const std::optional<double>& f0, double zcr,
                 const std::vector<std::vector<Resonance>>& frames, const FeatureParams& p) {
  return f0.has_value() && zcr < p.voicing.max_zcr && has_resonance_structure(frames, p.voicing);
}

std::optional<double> safe_f0(const AudioSegment& s, const F0Params& p) {
  if (s.samples.size() < to_samples(p.frame_seconds, s.sample_rate_hz)) return std::nullopt;
  return estimate_f0(s.view(), s.sample_rate_hz, p);
}

}  // namespace

bool classify_voiced(const AudioSegment& s, const FeatureParams& p) {
  if (s.samples.size() < 2) return false;
  const double zcr = zero_cross_rate(s.view());
  if (zcr >= p.voicing.max_zcr) return false;
  auto f0 = safe_f0(s, p.f0);
  if (!f0) return false;
  return voiced_from(f0, zcr, frame_resonances(s.view(), s.sample_rate_hz, p.lpc), p);
}

std::array<double, 3> estimate_formants(const AudioSegment& s, const FeatureParams& p) {
  if (!classify_voiced(s, p)) throw Error(Errc::not_voiced, "formants need a voiced segment");
  auto f = formants_from(frame_resonances(s.view(), s.sample_rate_hz, p.lpc), p.formants);
  if (!f) throw Error(Errc::insufficient_resonances, "fewer than three qualifying resonances");
  return *f;
}

AcousticFeatures analyze_segment(const AudioSegment& s, const FeatureParams& p) {
  AcousticFeatures out;
  out.zcr = zero_cross_rate(s.view());
  out.f0_hz = safe_f0(s, p.f0);
  if (out.f0_hz && out.zcr < p.voicing.max_zcr) {
    auto frames = frame_resonances(s.view(), s.sample_rate_hz, p.lpc);
    if (voiced_from(out.f0_hz, out.zcr, frames, p)) {
      if (auto f = formants_from(frames, p.formants)) {
        out.voiced = true;
        out.f1_hz = (*f)[0];
        out.f2_hz = (*f)[1];
        out.f3_hz = (*f)[2];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

}  // namespace

std::string dump_feature_rows(const std::vector<SegmentRow>& rows) {
  std::string out = "subject\tcondition\tsession_id\tt_start\tt_end\tf0_hz\tzcr\tvoiced\tf1_hz\tf2_hz\tf3_hz\n";
  for (const auto& r : rows) {
    const auto& f = r.features;
    out += fmt::format("{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n", r.subject, r.condition, r.session_id,
                       format_double(r.t_start), format_double(r.t_end), opt_cell(f.f0_hz), format_double(f.zcr),
                       f.voiced ? 1 : 0, opt_cell(f.f1_hz), opt_cell(f.f2_hz), opt_cell(f.f3_hz));
  }
  return out;
}

std::string_view table_metric_name(TableMetric metric) noexcept {
  switch (metric) {
    case TableMetric::speech_f0: return "speech_f0";
    case TableMetric::speech_zcr: return "speech_zcr";
    case TableMetric::voiced_f0: return "voiced_f0";
    case TableMetric::voiced_zcr: return "voiced_zcr";
    case TableMetric::f1: return "voiced_f1";
    case TableMetric::f2: return "voiced_f2";
    case TableMetric::f3: return "voiced_f3";
  }
  return "";
}

std::optional<TableMetric> parse_table_metric(std::string_view name) noexcept {
  for (auto m : kTableMetrics) {
    if (table_metric_name(m) == name) return m;
  }
  return std::nullopt;
}

bool is_zcr(TableMetric metric) noexcept {
  return metric == TableMetric::speech_zcr || metric == TableMetric::voiced_zcr;
}

std::optional<double> mean_of_present(const std::vector<std::optional<double>>& cells) {
  double acc = 0.0;
  size_t n = 0;
  for (const auto& c : cells) {
    if (!c) continue;
    acc += *c;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return acc / static_cast<double>(n);
}

SpeechTable aggregate_speech_table(const std::vector<SegmentRow>& rows) {
  SpeechTable table;
  for (const auto& r : rows) {
    if (std::find(table.subjects.begin(), table.subjects.end(), r.subject) == table.subjects.end()) {
      table.subjects.push_back(r.subject);
    }
  }
  const std::array<std::string, 2> conditions = {"asdchat", "interventionist"};
  for (auto metric : kTableMetrics) {
    for (const auto& condition : conditions) {
      TableRow row;
      row.metric = metric;
      row.condition = condition;
      for (const auto& subject : table.subjects) {
        std::vector<std::optional<double>> values;
        for (const auto& r : rows) {
          if (r.subject != subject || r.condition != condition) continue;
          const auto& f = r.features;
          switch (metric) {
            case TableMetric::speech_f0: values.push_back(f.f0_hz); break;
            case TableMetric::speech_zcr: values.push_back(f.zcr); break;
            case TableMetric::voiced_f0: if (f.voiced) values.push_back(f.f0_hz); break;
            case TableMetric::voiced_zcr: if (f.voiced) values.push_back(f.zcr); break;
            case TableMetric::f1: if (f.voiced) values.push_back(f.f1_hz); break;
            case TableMetric::f2: if (f.voiced) values.push_back(f.f2_hz); break;
            case TableMetric::f3: if (f.voiced) values.push_back(f.f3_hz); break;
          }
        }
        row.cells.push_back(mean_of_present(values));
      }
      row.avg = mean_of_present(row.cells);
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

double round_avg(TableMetric metric, double value) {
  return text::round_half_up(value, is_zcr(metric) ? 3 : 0);
}

std::string format_speech_table(const SpeechTable& table) {
  std::string out = "field\tmetrics\ttype";
  for (const auto& s : table.subjects) out += "\t" + s;
  out += "\tavg\n";
  for (const auto& row : table.rows) {
    const bool speech = row.metric == TableMetric::speech_f0 || row.metric == TableMetric::speech_zcr;
    std::string label;
    switch (row.metric) {
      case TableMetric::speech_f0:
      case TableMetric::voiced_f0: label = "F0"; break;
      case TableMetric::speech_zcr:
      case TableMetric::voiced_zcr: label = "ZCR"; break;
      case TableMetric::f1: label = "F1"; break;
      case TableMetric::f2: label = "F2"; break;
      case TableMetric::f3: label = "F3"; break;
    }
    const int cell_decimals = is_zcr(row.metric) ? 3 : (label == "F0" ? 1 : 0);
    out += fmt::format("{}\t{}\t{}", speech ? "speech sound" : "voiced sound", label,
                       row.condition == "asdchat" ? "ASD-Chat" : "Interventionist");
    for (const auto& c : row.cells) {
      out += "\t";
      if (c) out += fmt::format("{:.{}f}", text::round_half_up(*c, cell_decimals), cell_decimals);
    }
    out += "\t";
    if (row.avg) {
      out += fmt::format("{:.{}f}", round_avg(row.metric, *row.avg), is_zcr(row.metric) ? 3 : 0);
    }
    out += "\n";
  }
  return out;
}

std::string dump_speech_table_tsv(const SpeechTable& table) {
  std::string out;
  for (const auto& row : table.rows) {
    for (size_t i = 0; i < row.cells.size() && i < table.subjects.size(); ++i) {
      if (!row.cells[i]) continue;
      out += fmt::format("{}\t{}\t{}\t{}\n", table.subjects[i], row.condition, table_metric_name(row.metric),
                         format_double(*row.cells[i]));
    }
  }
  return out;
}

}  // namespace asdchat::audio
