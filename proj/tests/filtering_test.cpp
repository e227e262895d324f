#include <gtest/gtest.h>

#include <sstream>

#include "engage/filtering.hpp"
#include "properties.hpp"
#include "support.hpp"

using namespace engage;

namespace {
Corpus small_corpus() {
  Corpus c;
  c.transcripts.push_back(support::make_transcript("t1", {"abrid el libro", "hay examen mañana", "silencio por favor",
                                                          "muy bien", "ya"}));
  return c;
}
}  // namespace

TEST(Filtering, RetainsMatchesAndWindow) {
  const auto c = small_corpus();
  const auto list = make_keyword_list("k", {"examen"});
  EXPECT_EQ(filter_transcript(c.transcripts[0], list, 0).retained, (std::set<std::size_t>{1}));
  const auto w1 = filter_transcript(c.transcripts[0], list, 1);
  EXPECT_EQ(w1.retained, (std::set<std::size_t>{0, 1, 2}));
  EXPECT_EQ(w1.matches.at(1), std::set<std::string>{"examen"});
  EXPECT_EQ(w1.matches.count(0), 0u);
}

TEST(Filtering, EmptyListIsAnError) {
  try {
    filter_transcript(small_corpus().transcripts[0], {"empty", {}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyKeywordList);
  }
}

TEST(Filtering, ReductionAndRecall) {
  const auto c = small_corpus();
  const auto set = filter_corpus(c, make_keyword_list("k", {"examen"}));
  const auto red = reduction_report(c, set.transcripts, 3);
  EXPECT_EQ(red.total_tokens, 12u);
  EXPECT_EQ(red.retained_tokens, 3u);
  EXPECT_DOUBLE_EQ(red.retained_fraction, 0.25);
  EXPECT_DOUBLE_EQ(red.total_pages, 4.0);
  const auto rec = recall_report(c, set.transcripts,
                                 {support::message("g1", "gold", "t1", 1, 2), support::message("g2", "gold", "t1", 3, 3)});
  EXPECT_DOUBLE_EQ(rec.recall, 0.5);
  EXPECT_EQ(rec.missed, std::vector<std::string>{"g2"});
  EXPECT_DOUBLE_EQ(rec.coverage[0].fraction, 0.5);
  EXPECT_DOUBLE_EQ(recall_report(c, set.transcripts, {}).recall, 1.0);
}

TEST(Filtering, OrphanAnnotation) {
  const auto c = small_corpus();
  try {
    recall_report(c, {}, {support::message("g1", "gold", "t1", 1, 1)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OrphanAnnotation);
  }
}

TEST(Filtering, DegenerateGoldSpan) {
  Corpus c;
  c.transcripts.push_back(support::make_transcript("t1", {"a 1", "hola"}));
  try {
    completeness_list(c, {support::message("g", "gold", "t1", 0, 0)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateGoldSpan);
  }
}

TEST(Filtering, SerializationRoundTrips) {
  const auto c = small_corpus();
  const auto set = filter_corpus(c, make_keyword_list("k", {"examen", "bien"}), 1);
  EXPECT_EQ(filtered_set_from_json(filtered_set_to_json(set)), set);
  std::stringstream io;
  write_filtered_set(set, c, io);
  EXPECT_EQ(read_filtered_set(io), set);
}

TEST(Filtering, FingerprintTracksInputs) {
  const auto a = make_keyword_list("k", {"examen"});
  const auto b = make_keyword_list("k", {"examen", "bien"});
  EXPECT_EQ(filter_fingerprint(a, 0, {}), filter_fingerprint(a, 0, {}));
  EXPECT_NE(filter_fingerprint(a, 0, {}), filter_fingerprint(b, 0, {}));
  EXPECT_NE(filter_fingerprint(a, 0, {}), filter_fingerprint(a, 1, {}));
}

TEST(FilteringProperty, AllPropertiesOnRandomInstances) {
  support::Rng rng(31);
  for (int n = 0; n < 100; ++n) {
    const auto inst = props::make_instance(rng);
    EXPECT_EQ(props::check_oracle(inst), "");
    EXPECT_EQ(props::check_monotone(inst), "");
    EXPECT_EQ(props::check_window_monotone(inst), "");
    EXPECT_EQ(props::check_idempotent(inst), "");
    EXPECT_EQ(props::check_completeness(inst), "");
  }
}
