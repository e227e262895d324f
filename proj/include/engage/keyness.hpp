#pragma once

// Contrastive keyword extraction: token counts inside coded message spans
// against everything else, ranked by a smoothed log ratio of relative
// frequencies.
//
// Keyword list file: UTF-8 text, one keyword per line, '#' starts a comment
// line, blank lines ignored, order significant.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "engage/codebook.hpp"
#include "engage/corpus.hpp"
#include "engage/error.hpp"
#include "engage/normalize.hpp"

namespace engage {

inline constexpr double kDefaultAlpha = 0.5;

struct ContrastTable {
  std::set<std::string> vocabulary;
  std::map<std::string, std::size_t> message_counts;     // inside gold spans
  std::map<std::string, std::size_t> background_counts;  // every other segment
  std::size_t message_total = 0;
  std::size_t background_total = 0;

  std::size_t vocabulary_size() const noexcept { return vocabulary.size(); }

  std::size_t message_count(const std::string& token) const {
    const auto it = message_counts.find(token);
    return it == message_counts.end() ? 0 : it->second;
  }
  std::size_t background_count(const std::string& token) const {
    const auto it = background_counts.find(token);
    return it == background_counts.end() ? 0 : it->second;
  }
};

struct KeywordScore {
  std::string token;
  double score = 0.0;
  std::size_t message_count = 0;
  std::size_t background_count = 0;
};

struct KeywordList {
  std::string name;
  std::vector<std::string> keywords;

  std::set<std::string> as_set() const { return {keywords.begin(), keywords.end()}; }
  std::size_t size() const noexcept { return keywords.size(); }
};

inline KeywordList make_keyword_list(std::string name, std::vector<std::string> keywords) {
  std::set<std::string> seen;
  for (const auto& k : keywords) {
    if (!seen.insert(k).second)
      throw Error(ErrorCode::InvalidArgument, "duplicate keyword '" + k + "'", {{"list", name}});
  }
  return {std::move(name), std::move(keywords)};
}

/// Every gold annotation must be a validated Message against a corpus
/// transcript; anything else is UnvalidatedAnnotation.
inline void check_gold(const Corpus& corpus, const std::vector<MessageAnnotation>& gold) {
  for (const auto& a : gold) {
    const Transcript* t = corpus.find(a.transcript_id);
    if (!t)
      throw Error(ErrorCode::UnvalidatedAnnotation, "gold annotation references unknown transcript",
                  {{"annotation_id", a.id}, {"transcript_id", a.transcript_id}});
    const auto report = validate_annotation(a, *t);
    if (!report.ok())
      throw Error(ErrorCode::UnvalidatedAnnotation, "gold annotation fails validation",
                  {{"annotation_id", a.id}, {"violations", report.to_json()}});
    if (!a.decision.is_message())
      throw Error(ErrorCode::UnvalidatedAnnotation, "gold annotation is not a message", {{"annotation_id", a.id}});
  }
}

/// Per transcript id, which segments any gold span covers.
inline std::map<std::string, std::vector<bool>> gold_coverage(const Corpus& corpus,
                                                               const std::vector<MessageAnnotation>& gold) {
  std::map<std::string, std::vector<bool>> covered;
  for (const auto& t : corpus.transcripts) covered[t.id].assign(t.segments.size(), false);
  for (const auto& a : gold) {
    auto& mask = covered[a.transcript_id];
    for (std::size_t i = a.span.start; i <= a.span.end && i < mask.size(); ++i) mask[i] = true;
  }
  return covered;
}

inline ContrastTable build_contrast_table(const Corpus& corpus, const std::vector<MessageAnnotation>& gold,
                                          const NormalizationConfig& config = {}) {
  check_gold(corpus, gold);
  const auto covered = gold_coverage(corpus, gold);
  ContrastTable table;
  for (const auto& t : corpus.transcripts) {
    const auto& mask = covered.at(t.id);
    for (std::size_t i = 0; i < t.segments.size(); ++i) {
      const bool in_message = mask[i];
      for (auto& tok : normalize(t.segments[i].text, config)) {
        if (in_message) {
          ++table.message_counts[tok];
          ++table.message_total;
        } else {
          ++table.background_counts[tok];
          ++table.background_total;
        }
        table.vocabulary.insert(std::move(tok));
      }
    }
  }
  return table;
}

/// ln((c_m+a)/(N_m+aV)) - ln((c_b+a)/(N_b+aV))
inline double keyness_score(std::size_t c_m, std::size_t n_m, std::size_t c_b, std::size_t n_b, std::size_t vocab,
                            double alpha) {
  const double v = static_cast<double>(vocab);
  return std::log((static_cast<double>(c_m) + alpha) / (static_cast<double>(n_m) + alpha * v)) -
         std::log((static_cast<double>(c_b) + alpha) / (static_cast<double>(n_b) + alpha * v));
}

/// Ranked by score descending; ties by higher message count, then token.
inline std::vector<KeywordScore> score_keywords(const ContrastTable& table, double alpha = kDefaultAlpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha))
    throw Error(ErrorCode::InvalidArgument, "alpha must be a positive finite number", {{"alpha", alpha}});
  if (table.message_total == 0) throw Error(ErrorCode::EmptyMessageSide, "no tokens inside gold message spans");
  if (table.background_total == 0) throw Error(ErrorCode::EmptyBackground, "no background tokens");

  std::vector<KeywordScore> ranked;
  ranked.reserve(table.vocabulary.size());
  for (const auto& tok : table.vocabulary) {
    const auto cm = table.message_count(tok);
    const auto cb = table.background_count(tok);
    ranked.push_back({tok,
                      keyness_score(cm, table.message_total, cb, table.background_total, table.vocabulary_size(), alpha),
                      cm, cb});
  }
  std::sort(ranked.begin(), ranked.end(), [](const KeywordScore& a, const KeywordScore& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.message_count != b.message_count) return a.message_count > b.message_count;
    return a.token < b.token;
  });
  return ranked;
}

struct CandidateLists {
  std::vector<KeywordList> lists;  // ascending size
  std::vector<std::string> warnings;
};

/// 100, 105, ..., 150.
inline std::set<int> default_size_grid() {
  std::set<int> sizes;
  for (int k = 100; k <= 150; k += 5) sizes.insert(k);
  return sizes;
}

inline std::string candidate_name(int size) { return "top-" + std::to_string(size); }

/// Top-k prefixes of the ranking, one per requested size. Sizes beyond the
/// vocabulary are clamped and reported in `warnings`.
inline CandidateLists candidate_lists(const std::vector<KeywordScore>& ranked, const std::set<int>& sizes) {
  if (sizes.empty()) throw Error(ErrorCode::InvalidArgument, "no candidate sizes given");
  CandidateLists out;
  for (int k : sizes) {
    if (k < 1) throw Error(ErrorCode::InvalidArgument, "candidate size must be >= 1", {{"size", k}});
    std::size_t take = static_cast<std::size_t>(k);
    if (take > ranked.size()) {
      out.warnings.push_back("size " + std::to_string(k) + " exceeds vocabulary of " + std::to_string(ranked.size()) +
                             "; clamped");
      take = ranked.size();
    }
    KeywordList list{candidate_name(k), {}};
    list.keywords.reserve(take);
    for (std::size_t i = 0; i < take; ++i) list.keywords.push_back(ranked[i].token);
    out.lists.push_back(std::move(list));
  }
  return out;
}

/// Every keyword line must normalize to exactly one token; that token is
/// what the list holds.
inline KeywordList read_keyword_list(std::istream& in, std::string name, const NormalizationConfig& config = {}) {
  std::vector<std::string> keywords;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto tokens = normalize(line, config);
    if (tokens.size() != 1)
      throw Error(ErrorCode::MalformedRecord,
                  tokens.empty() ? "keyword normalizes to nothing" : "keyword must be a single word",
                  {{"line", line_no}, {"text", line}});
    if (!seen.insert(tokens[0]).second)
      throw Error(ErrorCode::MalformedRecord, "duplicate keyword '" + tokens[0] + "'", {{"line", line_no}});
    keywords.push_back(tokens[0]);
  }
  return {std::move(name), std::move(keywords)};
}

inline void write_keyword_list(const KeywordList& list, std::ostream& out, const std::string& config_stamp = {}) {
  out << "# list: " << list.name << '\n';
  if (!config_stamp.empty()) out << "# config: " << config_stamp << '\n';
  for (const auto& k : list.keywords) out << k << '\n';
}

inline std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s == "-0" || s.find_first_not_of("-0.") == std::string::npos) s.erase(0, s[0] == '-' ? 1 : 0);
  return s;
}

/// rank token score message_count background_count
inline void write_ranking_tsv(const std::vector<KeywordScore>& ranked, std::ostream& out) {
  out << "rank\ttoken\tscore\tmessage_count\tbackground_count\n";
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    out << (i + 1) << '\t' << r.token << '\t' << format_fixed(r.score, 10) << '\t' << r.message_count << '\t'
        << r.background_count << '\n';
  }
}

}  // namespace engage
