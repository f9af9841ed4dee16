#include <doctest.h>

#include <cmath>

#include "asdchat/text_metrics.hpp"

using namespace asdchat;
using namespace asdchat::text;

namespace {

std::string words(std::size_t n) {
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += (i ? " w" : "w") + std::to_string(i);
  return s;
}

/// n_turns child turns; the first `long_turns` get one extra word and one
/// extra second over the base values.
struct Built {
  std::vector<TranscriptEntry> transcript;
  std::map<std::int64_t, double> durations;
};

Built build(std::size_t n_turns, std::size_t long_words, std::size_t base_words, std::size_t long_secs,
            double base_secs) {
  Built b;
  std::int64_t seq = 0;
  double t = 0;
  for (std::size_t i = 0; i < n_turns; ++i) {
    b.transcript.push_back({Speaker::agent, "What is it?", t, t + 1, seq++});
    const auto w = base_words + (i < long_words ? 1 : 0);
    const double d = base_secs + (i < long_secs ? 1.0 : 0.0);
    b.transcript.push_back({Speaker::child, words(w), t + 1, t + 1 + d, seq});
    b.durations[seq++] = d;
    t += 2 + d;
  }
  return b;
}

class StubEmbedder : public Embedder {
 public:
  std::map<std::string, std::vector<double>> table;
  std::string id() const override { return "stub"; }
  EmbeddingVector embed(std::string_view text) override { return {table.at(std::string(text))}; }
};

}  // namespace

TEST_SUITE("text_metrics") {

TEST_CASE("word counting") {
  CHECK(count_words("我喜欢狗") == 4);
  CHECK(count_words("hello world!") == 2);
  CHECK(count_words("") == 0);
  CHECK(count_words("  ,.!? ") == 0);
  CHECK(count_words("I have 2 dogs.") == 4);
  CHECK(count_words("我有2只dog") == 5);
  CHECK(count_words("café au lait") == 3);
  for (const auto& [a, b] : std::vector<std::pair<std::string, std::string>>{{"red ball", "blue sky"}, {"one", ""}}) {
    CHECK(count_words(a + " " + b) == count_words(a) + count_words(b));
  }
}

TEST_CASE("engagement means reproduce the reported bars") {
  // 447 x 8 words + 553 x 7 words = 7447 over 1000 turns; 335 x 6 s + 665 x 5 s = 5335 s
  const auto ours = build(1000, 447, 7, 335, 5.0);
  const auto e = engagement(ours.transcript, ours.durations);
  CHECK(e.n_turns == 1000);
  CHECK(e.mean_words_per_child_turn == doctest::Approx(7.447).epsilon(1e-12));
  CHECK(e.mean_child_speech_seconds_per_turn == doctest::Approx(5.335).epsilon(1e-12));
  CHECK(round_half_up(e.mean_words_per_child_turn, 2) == 7.45);
  CHECK(round_half_up(e.mean_child_speech_seconds_per_turn, 2) == 5.34);

  // 584 x 7 + 416 x 6 = 6584 words; 730 x 4 + 270 x 3 = 3730 s
  const auto theirs = build(1000, 584, 6, 730, 3.0);
  const auto i = engagement(theirs.transcript, theirs.durations);
  CHECK(i.mean_words_per_child_turn == doctest::Approx(6.584).epsilon(1e-12));
  CHECK(i.mean_child_speech_seconds_per_turn == doctest::Approx(3.730).epsilon(1e-12));
}

TEST_CASE("engagement edge cases") {
  const auto empty = engagement({}, {});
  CHECK(empty.n_turns == 0);
  CHECK(empty.mean_words_per_child_turn == 0.0);
  CHECK(empty.mean_child_speech_seconds_per_turn == 0.0);

  std::vector<TranscriptEntry> one = {{Speaker::child, "我喜欢狗", 0, 2, 5}};
  const auto e = engagement(one, {{5, 2.0}});
  CHECK(e.mean_words_per_child_turn == 4.0);
  CHECK(e.mean_child_speech_seconds_per_turn == 2.0);
  CHECK(e.n_turns == 1);

  try {
    engagement(one, {});
    FAIL("expected MISSING_DURATION");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::missing_duration);
  }

  // pluggable counter
  const auto chars = engagement(one, {{5, 2.0}}, [](std::string_view) { return std::size_t{10}; });
  CHECK(chars.mean_words_per_child_turn == 10.0);
}

TEST_CASE("pooling sums turns before averaging") {
  EngagementMetrics a{2.0, 1.0, 1, 2.0, 1.0};
  EngagementMetrics b{5.0, 4.0, 3, 15.0, 12.0};
  const auto p = pool({a, b});
  CHECK(p.n_turns == 4);
  CHECK(p.mean_words_per_child_turn == doctest::Approx(17.0 / 4));
  CHECK(p.mean_child_speech_seconds_per_turn == doctest::Approx(13.0 / 4));
  CHECK(pool({}).n_turns == 0);
}

TEST_CASE("question-answer pairing") {
  using S = Speaker;
  auto e = [](S s, const char* t) { return TranscriptEntry{s, t, 0, 0, -1}; };
  CHECK(pair_question_answers({e(S::agent, "q1"), e(S::child, "a1"), e(S::agent, "q2"), e(S::child, "a2")}).size() == 2);
  CHECK(pair_question_answers({e(S::child, "a1")}).empty());
  const auto p = pair_question_answers({e(S::agent, "q1"), e(S::child, "a1"), e(S::child, "a2")});
  REQUIRE(p.size() == 1);
  CHECK(p[0].prompt == "q1");
  CHECK(p[0].response == "a1");
}

TEST_CASE("cosine and quality") {
  CHECK(cosine({{1, 0}}, {{0, 1}}) == 0.0);
  CHECK(cosine({{1, 2, 3}}, {{2, 4, 6}}) == doctest::Approx(1.0).epsilon(1e-12));
  try {
    cosine({{0, 0}}, {{1, 0}});
    FAIL("expected ZERO_VECTOR");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::zero_vector);
  }
  try {
    cosine({{1, 0}}, {{1, 0, 0}});
    FAIL("expected SHAPE_MISMATCH");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::shape_mismatch);
  }

  StubEmbedder stub;
  stub.table = {{"q", {1, 0}}, {"a", {0, 1}}, {"q2", {3, 4}}, {"a2", {3, 4}}};
  std::vector<TranscriptEntry> t = {{Speaker::agent, "q", 0, 1, 0}, {Speaker::child, "a", 1, 2, 1}};
  CHECK(quality(t, stub).mean_pair_cosine == 0.0);
  t.push_back({Speaker::agent, "q2", 2, 3, 2});
  t.push_back({Speaker::child, "a2", 3, 4, 3});
  const auto q = quality(t, stub);
  CHECK(q.n_pairs == 2);
  CHECK(q.mean_pair_cosine == doctest::Approx(0.5));

  // positive scaling of every vector leaves the score alone
  StubEmbedder scaled;
  for (auto& [k, v] : stub.table) {
    auto w = v;
    for (auto& x : w) x *= 7.5;
    scaled.table[k] = w;
  }
  CHECK(quality(t, scaled).mean_pair_cosine == doctest::Approx(q.mean_pair_cosine).epsilon(1e-12));

  HashingEmbedder h(3);
  std::vector<TranscriptEntry> same = {{Speaker::agent, "the red ball", 0, 1, 0},
                                       {Speaker::child, "the red ball", 1, 2, 1}};
  CHECK(quality(same, h).mean_pair_cosine == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("stored per-pair scores reproduce the quality bars") {
  const auto ours = quality_from_scores({4.5, 5.0, 5.32, 4.9, 4.98});
  const auto theirs = quality_from_scores({5.2, 5.8, 5.71, 5.55, 5.6});
  CHECK(round_half_up(ours.mean_pair_cosine, 2) == 4.94);
  CHECK(round_half_up(theirs.mean_pair_cosine, 2) == 5.57);
  CHECK(ours.n_pairs == 5);
}

TEST_CASE("percent difference and half-up rounding") {
  CHECK(percent_difference(7.447, 6.584) == doctest::Approx(13.11).epsilon(0.01 / 13.11));
  CHECK(std::abs(percent_difference(7.447, 6.584) - 13.11) <= 0.01);
  CHECK(std::abs(percent_difference(5.335, 3.730) - 43.03) <= 0.01);
  CHECK(std::abs(percent_difference(4.940, 5.570) + 11.31) <= 0.01);
  try {
    percent_difference(1.0, 0.0);
    FAIL("expected DIVIDE_BY_ZERO");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::divide_by_zero);
  }
  CHECK(round_half_up(2.675, 2) == 2.68);
  CHECK(round_half_up(-2.675, 2) == -2.68);
  CHECK(round_half_up(0.0284167, 3) == 0.028);
  CHECK(round_half_up(654.5, 0) == 655.0);
  CHECK(mean({1, 2, 3, 4}) == 2.5);
}

}  // TEST_SUITE
