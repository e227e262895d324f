#pragma once

// Constructed inputs whose aggregates are known in advance.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "engage/engage.hpp"
#include "support.hpp"

namespace fixtures {

using engage::Appeal;
using engage::Category;
using engage::Frame;
using engage::MessageAnnotation;

struct CoderPair {
  std::vector<MessageAnnotation> a;
  std::vector<MessageAnnotation> b;
};

/// Every unit is a matched pair on its own segment of transcript "r".
/// Overall: 2525 agreeing of 2558 units. GainIntrinsic: 54 agreeing pairs
/// plus one pair where only coder a says GainIntrinsic. GainIdentified: 93
/// agreeing pairs plus 32 where only coder a says GainIdentified. The other
/// side of every disagreement is GainExtrinsic, which absorbs the rest of
/// the agreeing pairs.
inline CoderPair reliability_fixture() {
  const Category gi{Frame::Gain, Appeal::Intrinsic};
  const Category gd{Frame::Gain, Appeal::Identified};
  const Category ge{Frame::Gain, Appeal::Extrinsic};
  const Category others[] = {{Frame::Loss, Appeal::Extrinsic}, {Frame::Loss, Appeal::Introjected},
                             {Frame::Loss, Appeal::Identified}, {Frame::Loss, Appeal::Intrinsic},
                             {Frame::Gain, Appeal::Introjected}};
  CoderPair p;
  std::size_t seg = 0;
  const auto add = [&](Category ca, Category cb) {
    const auto i = std::to_string(seg);
    p.a.push_back(support::message("a" + i, "ca", "r", seg, seg, ca));
    p.b.push_back(support::message("b" + i, "cb", "r", seg, seg, cb));
    ++seg;
  };
  for (int i = 0; i < 54; ++i) add(gi, gi);
  add(gi, ge);
  for (int i = 0; i < 93; ++i) add(gd, gd);
  for (int i = 0; i < 32; ++i) add(gd, ge);
  for (int i = 0; i < 2378; ++i) add(i < 300 ? ge : others[i % 5], i < 300 ? ge : others[i % 5]);
  return p;
}

/// n identical units, the last `disagree` of which differ in category.
inline CoderPair simple_pair(std::size_t n, std::size_t disagree) {
  CoderPair p;
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = support::category(static_cast<int>(i % 8));
    const auto d = i + disagree >= n ? support::category(static_cast<int>((i + 1) % 8)) : c;
    p.a.push_back(support::message("a" + std::to_string(i), "ca", "r", i, i, c));
    p.b.push_back(support::message("b" + std::to_string(i), "cb", "r", i, i, d));
  }
  return p;
}

struct AnalyticsFixture {
  engage::Corpus corpus;
  std::vector<MessageAnnotation> annotations;
};

/// 856 message annotations over one transcript per (grade, trimester) cell.
/// Cell counts fill the grade totals 302/176/157/221 and trimester totals
/// 353/331/172 north-west-corner style; categories cycle in table order.
inline AnalyticsFixture analytics_fixture() {
  const std::vector<std::tuple<int, int, std::size_t>> cells = {
      {9, 1, 302}, {10, 1, 51}, {10, 2, 125}, {11, 2, 157}, {12, 2, 49}, {12, 3, 172}};
  AnalyticsFixture f;
  f.corpus.group_registry = engage::default_group_registry();
  std::size_t k = 0;
  for (const auto& [grade, trimester, n] : cells) {
    const std::string id = "g" + std::to_string(grade) + "t" + std::to_string(trimester);
    f.corpus.transcripts.push_back(
        support::make_transcript(id, std::vector<std::string>(n, "vamos chicos"), grade, trimester));
    for (std::size_t i = 0; i < n; ++i, ++k)
      f.annotations.push_back(
          support::message("m" + std::to_string(k), "adj", id, i, i, support::category(static_cast<int>(k % 8))));
  }
  return f;
}

struct ReductionFixture {
  engage::Corpus corpus;
  engage::KeywordList keywords;
  std::vector<MessageAnnotation> gold;
};

/// 22,500 ten-token segments (225,000 tokens, 750 pages of 300 words);
/// every tenth segment carries the keyword, so 22,500 tokens (75 pages)
/// survive. Gold spans each cover one keyword segment and its neighbour.
inline ReductionFixture reduction_fixture() {
  ReductionFixture f;
  const std::string filler = "uno dos tres cuatro cinco seis siete ocho nueve diez";
  const std::string keyed = "clave dos tres cuatro cinco seis siete ocho nueve diez";
  for (int t = 0; t < 10; ++t) {
    std::vector<std::string> texts(2250, filler);
    for (std::size_t i = 0; i < texts.size(); i += 10) texts[i] = keyed;
    const std::string id = "p" + std::to_string(t);
    f.corpus.transcripts.push_back(support::make_transcript(id, texts, 9 + t % 4, 1 + t % 3));
    for (std::size_t i = 0; i + 1 < texts.size(); i += 150)
      f.gold.push_back(support::message(id + "-" + std::to_string(i), "gold", id, i, i + 1));
  }
  f.keywords = engage::make_keyword_list("fixture", {"clave"});
  return f;
}

}  // namespace fixtures
