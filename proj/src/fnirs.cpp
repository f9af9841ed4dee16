#include "asdchat/fnirs.hpp"

#include <fmt/format.h>

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "asdchat/codec.hpp"
#include "asdchat/error.hpp"

namespace asdchat::fnirs {

namespace {

size_t to_samples(double seconds, double rate) {
  return static_cast<size_t>(std::llround(seconds * rate));
}

}  // namespace

OpticalDensity intensity_to_od(const FnirsRecording& rec) {
  OpticalDensity od;
  od.sample_rate_hz = rec.sample_rate_hz;
  od.data.resize(rec.channels());
  for (size_t c = 0; c < rec.channels(); ++c) {
    for (size_t w = 0; w < rec.intensity[c].size(); ++w) {
      const auto& in = rec.intensity[c][w];
      double mean = 0.0;
      for (size_t i = 0; i < in.size(); ++i) {
        if (!(in[i] > 0.0)) {
          throw Error(Errc::nonpositive_intensity, fmt::format("channel {} sample {}: {}", c + 1, i, in[i]));
        }
        mean += in[i];
      }
      mean /= static_cast<double>(std::max<size_t>(1, in.size()));
      std::vector<double> out(in.size());
      for (size_t i = 0; i < in.size(); ++i) out[i] = -std::log10(in[i] / mean);
      od.data[c].push_back(std::move(out));
    }
  }
  return od;
}

Mask detect_motion_artifacts(const OpticalDensity& od, const MotionParams& p) {
  const size_t n = od.samples();
  const size_t win = std::max<size_t>(1, to_samples(p.window_seconds, od.sample_rate_hz));
  const auto pad = static_cast<std::ptrdiff_t>(to_samples(p.mask_pad_seconds, od.sample_rate_hz));
  Mask mask(od.channels(), std::vector<bool>(n, false));
  if (n < 2) return mask;

  for (size_t c = 0; c < od.channels(); ++c) {
    std::vector<bool> hit(n, false);
    for (const auto& x : od.data[c]) {
      double mean = 0.0;
      for (size_t i = 1; i < n; ++i) mean += x[i] - x[i - 1];
      mean /= static_cast<double>(n - 1);
      double var = 0.0;
      for (size_t i = 1; i < n; ++i) var += std::pow(x[i] - x[i - 1] - mean, 2);
      const double limit_std = p.std_threshold * std::sqrt(var / static_cast<double>(n - 1));

      for (size_t i = 0; i < n; ++i) {
        for (size_t k = 1; k <= win && i + k < n; ++k) {
          const double change = std::abs(x[i + k] - x[i]);
          if (change > limit_std || change > p.amp_threshold) {
            for (size_t j = i; j <= i + k; ++j) hit[j] = true;
          }
        }
      }
    }
    for (size_t i = 0; i < n; ++i) {
      if (!hit[i]) continue;
      const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(i) - pad);
      const auto hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, static_cast<std::ptrdiff_t>(i) + pad);
      for (auto j = lo; j <= hi; ++j) mask[c][static_cast<size_t>(j)] = true;
    }
  }
  return mask;
}

std::vector<double> natural_cubic_spline(const std::vector<double>& xs, const std::vector<double>& ys,
                                         const std::vector<double>& at) {
  const size_t n = xs.size();
  std::vector<double> out;
  out.reserve(at.size());
  if (n == 0) return std::vector<double>(at.size(), 0.0);
  if (n == 1) return std::vector<double>(at.size(), ys[0]);

  // second derivatives, zero at both ends; tridiagonal solve
  std::vector<double> m(n, 0.0);
  if (n > 2) {
    std::vector<double> sub(n, 0.0), diag(n, 0.0), sup(n, 0.0), rhs(n, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
      const double h0 = xs[i] - xs[i - 1], h1 = xs[i + 1] - xs[i];
      sub[i] = h0;
      diag[i] = 2.0 * (h0 + h1);
      sup[i] = h1;
      rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    for (size_t i = 2; i + 1 < n; ++i) {
      const double f = sub[i] / diag[i - 1];
      diag[i] -= f * sup[i - 1];
      rhs[i] -= f * rhs[i - 1];
    }
    for (size_t i = n - 2; i >= 1; --i) {
      m[i] = (rhs[i] - (i + 2 < n ? sup[i] * m[i + 1] : 0.0)) / diag[i];
      if (i == 1) break;
    }
  }

  for (double x : at) {
    size_t k = static_cast<size_t>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin());
    k = std::clamp<size_t>(k, 1, n - 1) - 1;
    const double h = xs[k + 1] - xs[k];
    const double a = xs[k + 1] - x, b = x - xs[k];
    out.push_back(m[k] * a * a * a / (6.0 * h) + m[k + 1] * b * b * b / (6.0 * h) +
                  (ys[k] / h - m[k] * h / 6.0) * a + (ys[k + 1] / h - m[k + 1] * h / 6.0) * b);
  }
  return out;
}

OpticalDensity spline_correct(const OpticalDensity& od, const Mask& mask, double anchor_seconds) {
  const size_t n = od.samples();
  if (mask.size() != od.channels()) throw Error(Errc::shape_mismatch, "mask channel count");
  const size_t anchors = std::max<size_t>(1, to_samples(anchor_seconds, od.sample_rate_hz));
  OpticalDensity out = od;

  for (size_t c = 0; c < od.channels(); ++c) {
    const auto& m = mask[c];
    if (m.size() != n) throw Error(Errc::shape_mismatch, fmt::format("mask length for channel {}", c + 1));
    if (n > 0 && std::all_of(m.begin(), m.end(), [](bool b) { return b; })) {
      throw Error(Errc::all_flagged, fmt::format("channel {} is entirely flagged", c + 1));
    }
    size_t i = 0;
    while (i < n) {
      if (!m[i]) {
        ++i;
        continue;
      }
      size_t j = i;
      while (j < n && m[j]) ++j;  // run [i, j)

      for (auto& series : out.data[c]) {
        if (i == 0 || j == n) {
          const double fill = i == 0 ? series[j] : series[i - 1];
          for (size_t k = i; k < j; ++k) series[k] = fill;
          continue;
        }
        std::vector<double> xs, ys, at;
        for (size_t k = i; k-- > 0 && !m[k] && i - k <= anchors;) {
          xs.push_back(static_cast<double>(k));
          ys.push_back(series[k]);
        }
        std::reverse(xs.begin(), xs.end());
        std::reverse(ys.begin(), ys.end());
        for (size_t k = j; k < n && !m[k] && k - j < anchors; ++k) {
          xs.push_back(static_cast<double>(k));
          ys.push_back(series[k]);
        }
        for (size_t k = i; k < j; ++k) at.push_back(static_cast<double>(k));
        auto filled = natural_cubic_spline(xs, ys, at);
        for (size_t k = i; k < j; ++k) series[k] = filled[k - i];
      }
      i = j;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

double fir_gain(const std::vector<double>& taps, double freq_hz, double rate) {
  const double w = 2.0 * std::numbers::pi * freq_hz / rate;
  std::complex<double> acc = 0.0;
  for (size_t k = 0; k < taps.size(); ++k) acc += taps[k] * std::polar(1.0, -w * static_cast<double>(k));
  return std::abs(acc);
}

std::vector<double> design_bandpass(double rate, double low_hz, double high_hz, size_t max_taps) {
  if (!(rate > 2.0 * high_hz)) {
    throw Error(Errc::rate_too_low, fmt::format("rate {} Hz must exceed twice the {} Hz cutoff", rate, high_hz));
  }
  if (!(low_hz > 0.0 && low_hz < high_hz)) throw Error(Errc::invalid_config, "band edges must satisfy 0 < low < high");
  auto order = static_cast<size_t>(std::llround(3.0 * rate / low_hz));
  order += order % 2;
  if (order + 1 > max_taps) order = (max_taps - 1) - (max_taps - 1) % 2;
  const size_t taps = order + 1;

  const double fl = low_hz / rate, fh = high_hz / rate;
  const double mid = static_cast<double>(order) / 2.0;
  auto sinc_lp = [](double f, double t) {
    if (t == 0.0) return 2.0 * f;
    return std::sin(2.0 * std::numbers::pi * f * t) / (std::numbers::pi * t);
  };
  std::vector<double> h(taps);
  for (size_t k = 0; k < taps; ++k) {
    const double t = static_cast<double>(k) - mid;
    const double window = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(k) / order);
    h[k] = window * (sinc_lp(fh, t) - sinc_lp(fl, t));
  }
  const double g = fir_gain(h, 0.5 * (low_hz + high_hz), rate);
  for (double& v : h) v /= g;
  return h;
}

namespace {

std::vector<double> causal(const std::vector<double>& h, const std::vector<double>& x) {
  std::vector<double> y(x.size(), 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    const size_t kmax = std::min(h.size() - 1, i);
    double acc = 0.0;
    for (size_t k = 0; k <= kmax; ++k) acc += h[k] * x[i - k];
    y[i] = acc;
  }
  return y;
}

}  // namespace

std::vector<double> filtfilt(const std::vector<double>& h, const std::vector<double>& x) {
  const size_t n = x.size();
  if (n == 0 || h.empty()) return std::vector<double>(n, 0.0);
  const size_t pad = std::min(3 * h.size(), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (size_t k = pad; k >= 1; --k) ext.push_back(2.0 * x[0] - x[k]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (size_t k = 1; k <= pad; ++k) ext.push_back(2.0 * x[n - 1] - x[n - 1 - k]);

  auto y = causal(h, ext);
  std::reverse(y.begin(), y.end());
  y = causal(h, y);
  std::reverse(y.begin(), y.end());
  return {y.begin() + static_cast<std::ptrdiff_t>(pad), y.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

Filtered bandpass_fir(const OpticalDensity& od, double low_hz, double high_hz) {
  const auto h = design_bandpass(od.sample_rate_hz, low_hz, high_hz);
  Filtered out;
  out.od.sample_rate_hz = od.sample_rate_hz;
  out.od.data.resize(od.channels());
  for (size_t c = 0; c < od.channels(); ++c) {
    for (const auto& series : od.data[c]) out.od.data[c].push_back(filtfilt(h, series));
  }
  out.info.taps = h.size();
  out.info.edge_samples = std::min(h.size(), od.samples());
  return out;
}

// ---------------------------------------------------------------------------

BeerLambertParams default_beer_lambert(const std::vector<double>& wl) {
  auto near = [](double a, double b) { return std::abs(a - b) < 0.5; };
  BeerLambertParams p;
  if (wl.size() == 2 && near(wl[0], 760.0) && near(wl[1], 850.0)) return p;
  if (wl.size() == 2 && near(wl[0], 850.0) && near(wl[1], 760.0)) {
    std::swap(p.eps_hbo[0], p.eps_hbo[1]);
    std::swap(p.eps_hbr[0], p.eps_hbr[1]);
    return p;
  }
  throw Error(Errc::invalid_config, "no tabulated extinction coefficients for these wavelengths; supply them");
}

double extinction_condition(const BeerLambertParams& p) {
  Eigen::Matrix2d e;
  e << p.eps_hbo[0], p.eps_hbr[0], p.eps_hbo[1], p.eps_hbr[1];
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(e);
  const auto s = svd.singularValues();
  if (s(1) <= 0.0) return std::numeric_limits<double>::infinity();
  return s(0) / s(1);
}

std::array<double, 2> forward_od(double d_hbo, double d_hbr, const BeerLambertParams& p) {
  std::array<double, 2> od{};
  for (size_t i = 0; i < 2; ++i) od[i] = (p.eps_hbo[i] * d_hbo + p.eps_hbr[i] * d_hbr) * p.distance_cm * p.dpf[i];
  return od;
}

HbSeries od_to_concentration(const OpticalDensity& od, const BeerLambertParams& p) {
  const double cond = extinction_condition(p);
  if (!(cond < 1e6)) throw Error(Errc::singular_extinction, fmt::format("condition number {}", cond));
  if (!(p.distance_cm > 0.0 && p.dpf[0] > 0.0 && p.dpf[1] > 0.0)) {
    throw Error(Errc::invalid_config, "distance and DPF must be positive");
  }
  // rows scaled by path length; closed-form 2x2 inverse
  const double a = p.eps_hbo[0] * p.distance_cm * p.dpf[0], b = p.eps_hbr[0] * p.distance_cm * p.dpf[0];
  const double c = p.eps_hbo[1] * p.distance_cm * p.dpf[1], d = p.eps_hbr[1] * p.distance_cm * p.dpf[1];
  const double det = a * d - b * c;

  HbSeries hb;
  hb.sample_rate_hz = od.sample_rate_hz;
  for (size_t ch = 0; ch < od.channels(); ++ch) {
    if (od.data[ch].size() != 2) throw Error(Errc::shape_mismatch, "Beer-Lambert needs two wavelengths");
    const auto& o1 = od.data[ch][0];
    const auto& o2 = od.data[ch][1];
    std::vector<double> hbo(o1.size()), hbr(o1.size());
    for (size_t i = 0; i < o1.size(); ++i) {
      hbo[i] = (d * o1[i] - b * o2[i]) / det;
      hbr[i] = (a * o2[i] - c * o1[i]) / det;
    }
    hb.hbo.push_back(std::move(hbo));
    hb.hbr.push_back(std::move(hbr));
  }
  return hb;
}

HbSeries zscore_baseline(HbSeries hb, double start) {
  const double rate = hb.sample_rate_hz;
  const double need = std::max(30.0, std::floor(rate + 1e-9));
  // samples with t = i / rate in [start - 1, start)
  const auto i0 = static_cast<std::int64_t>(std::ceil((start - 1.0) * rate - 1e-9));
  const auto i1 = static_cast<std::int64_t>(std::ceil(start * rate - 1e-9));
  if (i0 < 0 || i1 > static_cast<std::int64_t>(hb.samples()) || static_cast<double>(i1 - i0) < need) {
    throw Error(Errc::insufficient_baseline,
                fmt::format("need {} samples before t = {} s; window [{}, {}) of {}", need, start, i0, i1,
                            hb.samples()));
  }
  for (size_t c = 0; c < hb.hbo.size(); ++c) {
    auto& x = hb.hbo[c];
    const auto count = static_cast<double>(i1 - i0);
    double mu = 0.0;
    for (auto i = i0; i < i1; ++i) mu += x[static_cast<size_t>(i)];
    mu /= count;
    double var = 0.0;
    for (auto i = i0; i < i1; ++i) var += std::pow(x[static_cast<size_t>(i)] - mu, 2);
    const double sigma = std::sqrt(var / count);
    if (!(sigma > 1e-12 * std::max(1.0, std::abs(mu))) || sigma == 0.0) {
      throw Error(Errc::zero_variance_baseline, fmt::format("channel {}", c + 1));
    }
    for (double& v : x) v = (v - mu) / sigma;
  }
  hb.zscored = true;
  hb.baseline_window = std::pair{start - 1.0, start};
  return hb;
}

std::string_view statistic_name(Statistic s) noexcept {
  switch (s) {
    case Statistic::mean_abs: return "mean_abs";
    case Statistic::mean: return "mean";
    case Statistic::peak_to_peak: return "peak_to_peak";
  }
  return "";
}

std::optional<Statistic> parse_statistic(std::string_view name) noexcept {
  for (auto s : {Statistic::mean_abs, Statistic::mean, Statistic::peak_to_peak}) {
    if (statistic_name(s) == name) return s;
  }
  return std::nullopt;
}

TopicAmplitude topic_amplitude(const HbSeries& hb, double t0, double t1, Statistic statistic) {
  const double rate = hb.sample_rate_hz;
  if (t0 < -1e-9 || t1 > hb.duration_seconds() + 1.0 / rate) {
    throw Error(Errc::out_of_range, fmt::format("[{}, {}) outside the {} s recording", t0, t1, hb.duration_seconds()));
  }
  const auto i0 = static_cast<size_t>(std::max(0.0, std::ceil(t0 * rate - 1e-9)));
  const auto i1 = std::min(hb.samples(), static_cast<size_t>(std::max(0.0, std::ceil(t1 * rate - 1e-9))));
  if (i1 <= i0) throw Error(Errc::empty_interval, fmt::format("no samples in [{}, {})", t0, t1));

  TopicAmplitude out;
  for (const auto& x : hb.hbo) {
    double v = 0.0;
    switch (statistic) {
      case Statistic::mean_abs:
        for (size_t i = i0; i < i1; ++i) v += std::abs(x[i]);
        v /= static_cast<double>(i1 - i0);
        break;
      case Statistic::mean:
        for (size_t i = i0; i < i1; ++i) v += x[i];
        v /= static_cast<double>(i1 - i0);
        break;
      case Statistic::peak_to_peak: {
        auto [lo, hi] = std::minmax_element(x.begin() + static_cast<std::ptrdiff_t>(i0),
                                            x.begin() + static_cast<std::ptrdiff_t>(i1));
        v = *hi - *lo;
        break;
      }
    }
    out.per_channel.push_back(v);
  }
  for (double v : out.per_channel) out.channel_mean += v;
  if (!out.per_channel.empty()) out.channel_mean /= static_cast<double>(out.per_channel.size());
  return out;
}

// ---------------------------------------------------------------------------

SpeakerDurations speaker_durations(const std::vector<TranscriptEntry>& transcript,
                                   const std::optional<TopicInterval>& window) {
  SpeakerDurations d;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& t : transcript) {
    double s = t.t_start, e = t.t_end;
    if (window) {
      s = std::max(s, window->t_start);
      e = std::min(e, window->t_end);
    }
    if (e <= s) continue;
    (t.speaker == Speaker::agent ? d.agent_seconds : d.child_seconds) += e - s;
    lo = std::min(lo, s);
    hi = std::max(hi, e);
  }
  if (window) {
    d.total_seconds = window->t_end - window->t_start;
  } else if (hi > lo) {
    d.total_seconds = hi - lo;
  }
  return d;
}

Waveform align_and_export_waveform(const HbSeries& hb, const std::vector<TranscriptEntry>& transcript,
                                   size_t channel, const ClockEpoch& epoch,
                                   const std::optional<TopicInterval>& window) {
  if (!epoch.fnirs_start_session_s) throw Error(Errc::no_alignment, "manifest has no fNIRS epoch");
  if (channel >= hb.hbo.size()) {
    throw Error(Errc::out_of_range, fmt::format("channel {} of {}", channel + 1, hb.hbo.size()));
  }
  const double offset = *epoch.fnirs_start_session_s;
  Waveform w;
  w.channel = channel;
  w.durations = speaker_durations(transcript, window);

  double lo = 0.0, hi = hb.duration_seconds();
  if (window) {
    lo = std::max(lo, window->t_start - offset);
    hi = std::min(hi, window->t_end - offset);
  }
  const auto& x = hb.hbo[channel];
  for (size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / hb.sample_rate_hz;
    if (t >= lo - 1e-9 && t <= hi + 1e-9) w.points.emplace_back(t, x[i]);
  }
  for (const auto& e : transcript) {
    double s = e.t_start - offset, f = e.t_end - offset;
    s = std::max(s, lo);
    f = std::min(f, hi);
    if (f > s) w.annotations.push_back({e.speaker, s, f});
  }
  return w;
}

std::string dump_waveform(const Waveform& w) {
  std::string out = fmt::format("# channel {}\n# total_seconds {}\n# agent_seconds {}\n# child_seconds {}\n",
                                w.channel + 1, format_double(w.durations.total_seconds),
                                format_double(w.durations.agent_seconds), format_double(w.durations.child_seconds));
  for (const auto& a : w.annotations) {
    out += fmt::format("interval\t{}\t{}\t{}\n", speaker_name(a.speaker), format_double(a.t_start),
                       format_double(a.t_end));
  }
  for (const auto& [t, v] : w.points) out += fmt::format("point\t{}\t{}\n", format_double(t), format_double(v));
  return out;
}

PipelineResult run_pipeline(const FnirsRecording& rec, double conversation_start_s, const PipelineParams& p) {
  auto od = intensity_to_od(rec);
  PipelineResult r;
  r.motion_mask = detect_motion_artifacts(od, p.motion);
  od = spline_correct(od, r.motion_mask, p.anchor_seconds);
  auto filtered = bandpass_fir(od, p.low_hz, p.high_hz);
  r.filter = filtered.info;
  const auto bl = p.beer_lambert ? *p.beer_lambert : default_beer_lambert(rec.wavelengths_nm);
  r.hb = zscore_baseline(od_to_concentration(filtered.od, bl), conversation_start_s);
  return r;
}

}  // namespace asdchat::fnirs
