#include "asdchat/text_metrics.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>

#include "asdchat/error.hpp"

namespace asdchat::text {

std::size_t count_words(std::string_view text) {
  // same segmentation the hashing embedder uses
  return embedding_tokens(text).size();
}

EngagementMetrics engagement(const std::vector<TranscriptEntry>& transcript,
                             const std::map<std::int64_t, double>& durations, const WordCounter& counter) {
  EngagementMetrics m;
  for (const auto& t : transcript) {
    if (t.speaker != Speaker::child) continue;
    auto it = durations.find(t.seq);
    if (it == durations.end()) {
      throw Error(Errc::missing_duration, fmt::format("child utterance {} has no audio duration", t.seq));
    }
    m.total_words += static_cast<double>(counter(t.text));
    m.total_seconds += it->second;
    ++m.n_turns;
  }
  return pool({m});
}

EngagementMetrics pool(const std::vector<EngagementMetrics>& parts) {
  EngagementMetrics m;
  for (const auto& p : parts) {
    m.total_words += p.total_words;
    m.total_seconds += p.total_seconds;
    m.n_turns += p.n_turns;
  }
  if (m.n_turns > 0) {
    m.mean_words_per_child_turn = m.total_words / static_cast<double>(m.n_turns);
    m.mean_child_speech_seconds_per_turn = m.total_seconds / static_cast<double>(m.n_turns);
  }
  return m;
}

std::vector<QaPair> pair_question_answers(const std::vector<TranscriptEntry>& transcript) {
  std::vector<QaPair> out;
  for (size_t i = 1; i < transcript.size(); ++i) {
    if (transcript[i].speaker == Speaker::child && transcript[i - 1].speaker == Speaker::agent) {
      out.push_back({transcript[i - 1].text, transcript[i].text, transcript[i].seq});
    }
  }
  return out;
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() != v.dim()) throw Error(Errc::shape_mismatch, fmt::format("dims {} and {}", u.dim(), v.dim()));
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (size_t i = 0; i < u.dim(); ++i) {
    dot += u.values[i] * v.values[i];
    nu += u.values[i] * u.values[i];
    nv += v.values[i] * v.values[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error(Errc::zero_vector, "cosine of a zero-norm embedding");
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

QualityMetrics quality(const std::vector<TranscriptEntry>& transcript, Embedder& embedder) {
  std::vector<double> scores;
  for (const auto& p : pair_question_answers(transcript)) {
    scores.push_back(cosine(embedder.embed(p.prompt), embedder.embed(p.response)));
  }
  return quality_from_scores(std::move(scores));
}

QualityMetrics quality_from_scores(std::vector<double> pair_scores) {
  QualityMetrics q;
  q.n_pairs = pair_scores.size();
  q.mean_pair_cosine = mean(pair_scores);
  q.pair_scores = std::move(pair_scores);
  return q;
}

double percent_difference(double ours, double theirs) {
  if (theirs == 0.0) throw Error(Errc::divide_by_zero, "percent difference against zero");
  return 100.0 * (ours - theirs) / theirs;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double scaled = std::abs(value) * scale;
  // nudge by a few ulps of the scaled value so x.xx5 written in decimal rounds up
  const double r = std::floor(scaled + 0.5 + scaled * 1e-12);
  if (r == 0.0) return 0.0;
  return std::copysign(r / scale, value);
}

double mean(const std::vector<double>& values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

}  // namespace asdchat::text
