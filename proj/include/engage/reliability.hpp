#pragma once

// Pairwise inter-coder reliability: align two coders' annotations by span
// overlap, then percent agreement overall and per category.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "engage/codebook.hpp"
#include "engage/corpus.hpp"
#include "engage/error.hpp"

namespace engage {

inline constexpr double kDefaultOverlapThreshold = 0.5;

struct AlignedPair {
  MessageAnnotation a;
  MessageAnnotation b;
  std::size_t intersection = 0;
  std::size_t union_size = 0;

  double overlap() const noexcept {
    return union_size == 0 ? 0.0 : static_cast<double>(intersection) / static_cast<double>(union_size);
  }
  bool agrees() const { return a.decision == b.decision; }
};

struct AlignedPairs {
  std::vector<AlignedPair> matched;
  std::vector<MessageAnnotation> unmatched_a;
  std::vector<MessageAnnotation> unmatched_b;

  std::size_t units() const noexcept { return matched.size() + unmatched_a.size() + unmatched_b.size(); }
};

struct CategoryAgreement {
  std::size_t agreements = 0;     // matched pairs both labeled c
  std::size_t disagreements = 0;  // units where exactly one side is c
  std::optional<double> percent;  // absent when both are zero
};

struct AgreementReport {
  double overall_percent = 0.0;
  std::map<Category, CategoryAgreement> per_category;
  std::size_t agreeing = 0;
  std::size_t disagreeing = 0;
  std::size_t unmatched_a = 0;
  std::size_t unmatched_b = 0;
};

/// Jaccard overlap of two inclusive segment ranges, as (|A∩B|, |A∪B|).
inline std::pair<std::size_t, std::size_t> span_jaccard(const SegmentSpan& x, const SegmentSpan& y) {
  const std::size_t lo = std::max(x.start, y.start);
  const std::size_t hi = std::min(x.end, y.end);
  const std::size_t inter = hi >= lo ? hi - lo + 1 : 0;
  return {inter, x.length() + y.length() - inter};
}

/// Greedy one-to-one matching within each transcript: candidate pairs with
/// overlap >= threshold are taken in descending overlap, ties broken by the
/// earlier span start and then by annotation id. Every tie-break key is
/// symmetric in the two coders, so swapping a and b mirrors the result.
inline AlignedPairs align_annotations(const std::vector<MessageAnnotation>& a, const std::vector<MessageAnnotation>& b,
                                      double threshold = kDefaultOverlapThreshold, const Corpus* corpus = nullptr) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw Error(ErrorCode::InvalidArgument, "overlap threshold must lie in (0, 1]", {{"threshold", threshold}});
  if (corpus) {
    for (const auto* side : {&a, &b})
      for (const auto& ann : *side)
        if (!corpus->find(ann.transcript_id))
          throw Error(ErrorCode::CorpusMismatch, "annotation references a transcript outside the corpus",
                      {{"annotation_id", ann.id}, {"transcript_id", ann.transcript_id}});
  }

  struct Candidate {
    std::size_t ia, ib, inter, uni;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (a[i].transcript_id != b[j].transcript_id) continue;
      const auto [inter, uni] = span_jaccard(a[i].span, b[j].span);
      if (inter == 0 || static_cast<double>(inter) / static_cast<double>(uni) < threshold) continue;
      cands.push_back({i, j, inter, uni});
    }
  }
  const auto key = [&](const Candidate& c) {
    const auto& x = a[c.ia];
    const auto& y = b[c.ib];
    return std::make_tuple(std::min(x.span.start, y.span.start), std::max(x.span.start, y.span.start),
                           std::cref(x.transcript_id), std::min(x.id, y.id), std::max(x.id, y.id));
  };
  std::sort(cands.begin(), cands.end(), [&](const Candidate& p, const Candidate& q) {
    const auto lp = p.inter * q.uni;
    const auto lq = q.inter * p.uni;
    if (lp != lq) return lp > lq;
    const auto kp = key(p);
    const auto kq = key(q);
    if (kp != kq) return kp < kq;
    return std::tie(p.ia, p.ib) < std::tie(q.ia, q.ib);
  });

  AlignedPairs out;
  std::vector<bool> used_a(a.size(), false);
  std::vector<bool> used_b(b.size(), false);
  for (const auto& c : cands) {
    if (used_a[c.ia] || used_b[c.ib]) continue;
    used_a[c.ia] = used_b[c.ib] = true;
    out.matched.push_back({a[c.ia], b[c.ib], c.inter, c.uni});
  }
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!used_a[i]) out.unmatched_a.push_back(a[i]);
  for (std::size_t j = 0; j < b.size(); ++j)
    if (!used_b[j]) out.unmatched_b.push_back(b[j]);
  return out;
}

/// 100 * agreeing / (agreeing + disagreeing + unmatched_a + unmatched_b).
/// A matched pair agrees when both decisions are identical.
inline double percent_agreement(const AlignedPairs& pairs) {
  if (pairs.units() == 0) throw Error(ErrorCode::NoUnits, "no coding units to compare");
  std::size_t agreeing = 0;
  for (const auto& p : pairs.matched)
    if (p.agrees()) ++agreeing;
  return 100.0 * static_cast<double>(agreeing) / static_cast<double>(pairs.units());
}

/// Occurrence agreement for one category: A / (A + D) * 100 where A counts
/// matched pairs both labeled c and D counts units where exactly one side is
/// c, unmatched annotations included.
inline CategoryAgreement category_agreement_counts(const AlignedPairs& pairs, Category c) {
  CategoryAgreement out;
  const auto is_c = [&](const MessageAnnotation& m) { return m.decision.category() == c; };
  for (const auto& p : pairs.matched) {
    const bool x = is_c(p.a);
    const bool y = is_c(p.b);
    if (x && y) ++out.agreements;
    else if (x || y) ++out.disagreements;
  }
  for (const auto& m : pairs.unmatched_a)
    if (is_c(m)) ++out.disagreements;
  for (const auto& m : pairs.unmatched_b)
    if (is_c(m)) ++out.disagreements;
  const auto den = out.agreements + out.disagreements;
  if (den > 0) out.percent = 100.0 * static_cast<double>(out.agreements) / static_cast<double>(den);
  return out;
}

inline std::optional<double> category_agreement(const AlignedPairs& pairs, Category c) {
  return category_agreement_counts(pairs, c).percent;
}

inline AgreementReport agreement_report(const AlignedPairs& pairs) {
  AgreementReport r;
  r.overall_percent = percent_agreement(pairs);
  for (const auto& p : pairs.matched) (p.agrees() ? r.agreeing : r.disagreeing) += 1;
  r.unmatched_a = pairs.unmatched_a.size();
  r.unmatched_b = pairs.unmatched_b.size();
  for (Category c : kAllCategories) r.per_category[c] = category_agreement_counts(pairs, c);
  return r;
}

inline nlohmann::json to_json(const AgreementReport& r) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& [c, ca] : r.per_category) {
    cats.push_back({{"category", c.name()},
                    {"frame", std::string(to_string(c.frame))},
                    {"appeal", std::string(to_string(c.appeal))},
                    {"agreements", ca.agreements},
                    {"disagreements", ca.disagreements},
                    {"percent", ca.percent ? nlohmann::json(*ca.percent) : nlohmann::json(nullptr)}});
  }
  return {{"overall_percent", r.overall_percent},
          {"per_category", std::move(cats)},
          {"units",
           {{"agreeing", r.agreeing},
            {"disagreeing", r.disagreeing},
            {"unmatched_a", r.unmatched_a},
            {"unmatched_b", r.unmatched_b}}}};
}

}  // namespace engage
