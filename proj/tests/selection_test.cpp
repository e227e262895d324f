#include <gtest/gtest.h>

#include <sstream>

#include "engage/selection.hpp"
#include "engage/synthetic.hpp"
#include "support.hpp"

using namespace engage;

namespace {
EvaluationRow row(std::string list, std::size_t size, double recall, double rf) {
  EvaluationRow r;
  r.list = std::move(list);
  r.size = size;
  r.recall = recall;
  r.retained_fraction = rf;
  return r;
}
}  // namespace

TEST(Selection, RecallIsAHardConstraint) {
  EvaluationTable t{{row("top-100", 100, 0.98, 0.05), row("top-120", 120, 1.0, 0.11), row("top-110", 110, 1.0, 0.10)}};
  const auto s = select_list(t);
  EXPECT_EQ(s.row.list, "top-110");
  EXPECT_EQ(s.feasible, 2u);
  SelectionPolicy lax;
  lax.recall_threshold = 0.95;
  EXPECT_EQ(select_list(t, lax).row.list, "top-100");
}

TEST(Selection, TiesGoToSmallerListThenName) {
  EvaluationTable t{{row("b", 120, 1.0, 0.1), row("c", 110, 1.0, 0.1), row("a", 110, 1.0, 0.1)}};
  EXPECT_EQ(select_list(t).row.list, "a");
}

TEST(Selection, NoFeasibleListReportsBestRecall) {
  EvaluationTable t{{row("a", 100, 0.9, 0.1), row("b", 110, 0.95, 0.2)}};
  try {
    select_list(t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoFeasibleList);
    EXPECT_DOUBLE_EQ(e.details().at("best_recall").get<double>(), 0.95);
  }
  SelectionPolicy bad;
  bad.recall_threshold = 0.0;
  EXPECT_THROW(select_list(t, bad), Error);
}

TEST(Selection, EvaluationMarksFailedRowsAndSorts) {
  Corpus c;
  c.transcripts.push_back(support::make_transcript("t1", {"premio hoy", "nada", "examen", "otra"}));
  const std::vector<MessageAnnotation> gold = {support::message("g", "gold", "t1", 0, 0)};
  const auto table = evaluate_lists(
      c, gold, {make_keyword_list("wide", {"premio", "examen"}), {"empty", {}}, make_keyword_list("narrow", {"premio"})});
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_EQ(table.rows[0].list, "narrow");
  EXPECT_EQ(table.rows[1].list, "wide");
  EXPECT_TRUE(table.rows[2].failed);
  EXPECT_EQ(select_list(table).row.list, "narrow");
}

TEST(Selection, TsvRoundTrip) {
  EvaluationTable t{{row("top-100", 100, 1.0, 0.0552468019), row("top-105", 105, 0.5, 0.25)}};
  t.rows[1].missed_count = 3;
  EvaluationRow failed = row("broken", 0, 0, 0);
  failed.failed = true;
  failed.error = "EmptyKeywordList: keyword list is empty";
  t.rows.push_back(failed);
  std::stringstream io;
  io << "# config: abc\n";
  write_evaluation_tsv(t, io);
  write_selection_footer(select_list(t), io);
  const auto back = read_evaluation_tsv(io);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[1].missed_count, 3u);
  EXPECT_DOUBLE_EQ(back.rows[0].retained_fraction, 0.0552468019);
}

TEST(Selection, SyntheticPipelineSelectsFullRecall) {
  SynthesisParams p;
  p.transcript_count = 8;
  const auto syn = generate_synthetic_corpus(p);
  const auto ranked = score_keywords(build_contrast_table(syn.corpus, syn.gold));
  const auto table = evaluate_lists(syn.corpus, syn.gold, candidate_lists(ranked, default_size_grid()).lists);
  const auto s = select_list(table);
  EXPECT_EQ(s.row.recall, 1.0);
  EXPECT_LE(s.row.retained_fraction, 0.15);
}
