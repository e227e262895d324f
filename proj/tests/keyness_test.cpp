#include <gtest/gtest.h>

#include <sstream>

#include "engage/keyness.hpp"
#include "engage/synthetic.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

using namespace engage;

TEST(Keyness, HandArithmeticExample) {
  // ln(5.5/15) - ln(0.5/105)
  EXPECT_NEAR(keyness_score(5, 10, 0, 100, 10, 0.5), 4.3438, 1e-4);
}

TEST(Keyness, ScoresAreFiniteWhenCountsAreZero) {
  EXPECT_TRUE(std::isfinite(keyness_score(0, 10, 0, 100, 10, 0.5)));
  EXPECT_LT(keyness_score(0, 10, 7, 100, 10, 0.5), 0.0);
}

TEST(Keyness, ContrastTableSplitsAtGoldSpans) {
  Corpus c;
  c.transcripts.push_back(support::make_transcript("t1", {"premio premio clase", "clase libro", "premio"}));
  const auto table = build_contrast_table(c, {support::message("g1", "gold", "t1", 0, 0)});
  EXPECT_EQ(table.message_total, 3u);
  EXPECT_EQ(table.background_total, 3u);
  EXPECT_EQ(table.message_count("premio"), 2u);
  EXPECT_EQ(table.background_count("premio"), 1u);
  EXPECT_EQ(table.vocabulary_size(), 3u);
  const auto ranked = score_keywords(table);
  EXPECT_EQ(ranked.front().token, "premio");
}

TEST(Keyness, RejectsUnusableInput) {
  Corpus c;
  c.transcripts.push_back(support::make_transcript("t1", {"uno dos", "tres"}));
  EXPECT_THROW(build_contrast_table(c, {support::message("g", "gold", "tX", 0, 0)}), Error);
  auto not_msg = support::message("g", "gold", "t1", 0, 0);
  not_msg.decision = Decision::not_a_message();
  EXPECT_THROW(build_contrast_table(c, {not_msg}), Error);
  try {
    score_keywords(build_contrast_table(c, {}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMessageSide);
  }
  try {
    score_keywords(build_contrast_table(c, {support::message("g", "gold", "t1", 0, 1)}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyBackground);
  }
}

TEST(Keyness, TiesBreakByMessageCountThenToken) {
  ContrastTable t;
  t.vocabulary = {"bb", "aa", "cc"};
  t.message_counts = {{"aa", 1}, {"bb", 1}};
  t.background_counts = {{"aa", 1}, {"bb", 1}, {"cc", 1}};
  t.message_total = 2;
  t.background_total = 3;
  const auto r = score_keywords(t);
  EXPECT_EQ(r[0].token, "aa");
  EXPECT_EQ(r[1].token, "bb");
  EXPECT_EQ(r[2].token, "cc");
}

TEST(KeynessProperty, MatchesBruteForceOracle) {
  support::Rng rng(21);
  for (int n = 0; n < 200; ++n) {
    Corpus c;
    std::vector<MessageAnnotation> gold;
    std::vector<std::string> msg_tokens, bg_tokens;
    const auto segs = support::random_segments(rng, 3 + rng.below(10), 2 + rng.below(8), 5);
    c.transcripts.push_back(support::make_transcript("t", support::join_each(segs)));
    std::vector<bool> in_msg(segs.size(), false);
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (rng.coin(0.3)) {
        gold.push_back(support::message("g" + std::to_string(i), "gold", "t", i, i));
        in_msg[i] = true;
      }
    }
    for (std::size_t i = 0; i < segs.size(); ++i)
      for (const auto& tok : segs[i]) (in_msg[i] ? msg_tokens : bg_tokens).push_back(tok);
    if (msg_tokens.empty() || bg_tokens.empty()) continue;
    const double alpha = 0.1 + rng.below(20) * 0.1;
    for (const auto& s : score_keywords(build_contrast_table(c, gold), alpha))
      EXPECT_NEAR(s.score, oracle::keyness(s.token, msg_tokens, bg_tokens, alpha), 1e-12);
  }
}

TEST(Keyness, CandidateListsArePrefixesAndClamp) {
  std::vector<KeywordScore> ranked;
  for (int i = 0; i < 120; ++i) ranked.push_back({"k" + std::to_string(i), 0.0, 0, 0});
  const auto c = candidate_lists(ranked, default_size_grid());
  ASSERT_EQ(c.lists.size(), 11u);
  EXPECT_EQ(c.lists.front().name, "top-100");
  EXPECT_EQ(c.lists.front().size(), 100u);
  EXPECT_EQ(c.lists.back().size(), 120u);
  EXPECT_EQ(c.warnings.size(), 6u);
  for (std::size_t i = 0; i < 100; ++i) EXPECT_EQ(c.lists[3].keywords[i], ranked[i].token);
  EXPECT_THROW(candidate_lists(ranked, {}), Error);
}

TEST(Keyness, KeywordFileRoundTripAndErrors) {
  const auto list = make_keyword_list("mine", {"premio", "nota", "examen"});
  std::stringstream io;
  write_keyword_list(list, io, "abc");
  EXPECT_EQ(read_keyword_list(io, "mine").keywords, list.keywords);
  std::istringstream accents("Exámen\n");
  EXPECT_EQ(read_keyword_list(accents, "x").keywords, std::vector<std::string>{"examen"});
  std::istringstream two("dos palabras\n");
  EXPECT_THROW(read_keyword_list(two, "x"), Error);
  std::istringstream dup("nota\nNota\n");
  EXPECT_THROW(read_keyword_list(dup, "x"), Error);
  EXPECT_THROW(make_keyword_list("x", {"a", "a"}), Error);
}

TEST(Keyness, FormatFixedHasNoNegativeZero) {
  EXPECT_EQ(format_fixed(-0.0000001, 4), "0.0000");
  EXPECT_EQ(format_fixed(1.23456, 2), "1.23");
}

// ---- synthetic generator ----

TEST(Synthetic, SameSeedSameCorpus) {
  SynthesisParams p;
  p.transcript_count = 3;
  const auto a = generate_synthetic_corpus(p);
  const auto b = generate_synthetic_corpus(p);
  EXPECT_EQ(corpus_to_json(a.corpus), corpus_to_json(b.corpus));
  EXPECT_EQ(a.gold, b.gold);
  p.seed = 8;
  EXPECT_NE(corpus_to_json(generate_synthetic_corpus(p).corpus), corpus_to_json(a.corpus));
}

TEST(Synthetic, GoldIsValidAndAnchored) {
  SynthesisParams p;
  p.transcript_count = 4;
  const auto s = generate_synthetic_corpus(p);
  EXPECT_NO_THROW(check_gold(s.corpus, s.gold));
  const std::set<std::string> truth(s.discriminative_tokens.begin(), s.discriminative_tokens.end());
  EXPECT_EQ(truth.size(), p.message_vocabulary);
  for (const auto& g : s.gold) {
    const auto& t = *s.corpus.find(g.transcript_id);
    bool anchored = false;
    for (std::size_t i = g.span.start; i <= g.span.end; ++i)
      for (const auto& tok : normalize(t.segments[i].text, {})) anchored = anchored || truth.count(tok);
    EXPECT_TRUE(anchored) << g.id;
  }
}

TEST(Synthetic, PlantedCountFollowsBinomial) {
  SynthesisParams p;
  p.transcript_count = 4;
  p.segments_per_transcript = 500;
  const auto [lo, hi] = oracle::binomial_interval(2000, p.message_rate, 0.99);
  int outside = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    p.seed = seed;
    const auto n = generate_synthetic_corpus(p).gold.size();
    if (n < lo || n > hi) ++outside;
  }
  EXPECT_LE(outside, 2);
}

TEST(Synthetic, RejectsBadParams) {
  SynthesisParams p;
  p.message_rate = 0.0;
  EXPECT_THROW(generate_synthetic_corpus(p), Error);
  p = {};
  p.max_tokens = 1;
  EXPECT_THROW(generate_synthetic_corpus(p), Error);
}
