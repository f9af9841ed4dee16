#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "asdchat/providers.hpp"
#include "asdchat/session.hpp"

namespace asdchat::text {

/// Each CJK character is one word; each maximal run of Latin letters or
/// digits is one word; punctuation and whitespace count nothing.
std::size_t count_words(std::string_view text);

using WordCounter = std::function<std::size_t(std::string_view)>;

struct EngagementMetrics {
  double mean_words_per_child_turn = 0.0;
  double mean_child_speech_seconds_per_turn = 0.0;
  std::size_t n_turns = 0;
  // sums, so several sessions of one subject can be pooled
  double total_words = 0.0;
  double total_seconds = 0.0;
};

/// Means over the child turns of `transcript`. `durations` maps a child
/// entry's seq to its speech length; a child entry without one throws
/// MISSING_DURATION.
EngagementMetrics engagement(const std::vector<TranscriptEntry>& transcript,
                             const std::map<std::int64_t, double>& durations,
                             const WordCounter& counter = count_words);

/// Pools turn-level sums across sessions before taking means.
EngagementMetrics pool(const std::vector<EngagementMetrics>& parts);

struct QaPair {
  std::string prompt;
  std::string response;
  std::int64_t response_seq = -1;
};

/// One pair per child entry immediately preceded by an agent entry.
std::vector<QaPair> pair_question_answers(const std::vector<TranscriptEntry>& transcript);

/// Throws ZERO_VECTOR for a zero-norm input, SHAPE_MISMATCH on unequal dims.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

struct QualityMetrics {
  double mean_pair_cosine = 0.0;
  std::size_t n_pairs = 0;
  std::vector<double> pair_scores;
};

QualityMetrics quality(const std::vector<TranscriptEntry>& transcript, Embedder& embedder);
QualityMetrics quality_from_scores(std::vector<double> pair_scores);

/// 100 * (ours - theirs) / theirs; DIVIDE_BY_ZERO when theirs is 0.
double percent_difference(double ours, double theirs);

/// Half away from zero at `decimals` places, tolerant of binary
/// representation error (2.675 rounds to 2.68).
double round_half_up(double value, int decimals);

double mean(const std::vector<double>& values);

}  // namespace asdchat::text
