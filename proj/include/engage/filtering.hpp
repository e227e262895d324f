#pragma once

// Keyword filtering of transcripts plus the reduction and recall metrics
// used to judge a keyword list.
//
// Filtered output file (JSON Lines): a header record
//   {"type":"header","list":"top-111","config_hash":"...","window":0,"keywords":[...]}
// followed by one record per transcript, in corpus order:
//   {"type":"transcript","transcript_id":"t1",
//    "segments":[{"index":4,"text":"...","matches":["examen"]}, ...]}
// Segments retained only through the context window carry "matches": [].

#include <algorithm>
#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "engage/codebook.hpp"
#include "engage/corpus.hpp"
#include "engage/error.hpp"
#include "engage/hash.hpp"
#include "engage/keyness.hpp"
#include "engage/normalize.hpp"

namespace engage {

struct FilteredTranscript {
  std::string transcript_id;
  std::set<std::size_t> retained;
  std::map<std::size_t, std::set<std::string>> matches;  // only matched segments

  friend bool operator==(const FilteredTranscript&, const FilteredTranscript&) = default;
};

/// A whole-corpus filtering run together with its provenance.
struct FilteredSet {
  std::string list_name;
  std::string config_hash;
  std::size_t window = 0;
  std::vector<std::string> keywords;
  std::vector<FilteredTranscript> transcripts;

  const FilteredTranscript* find(const std::string& transcript_id) const {
    for (const auto& f : transcripts)
      if (f.transcript_id == transcript_id) return &f;
    return nullptr;
  }

  friend bool operator==(const FilteredSet&, const FilteredSet&) = default;
};

struct ReductionReport {
  std::size_t total_tokens = 0;
  std::size_t retained_tokens = 0;
  double retained_fraction = 0.0;
  double total_pages = 0.0;
  double retained_pages = 0.0;
};

struct MessageCoverage {
  std::string annotation_id;
  double fraction = 0.0;
};

struct RecallReport {
  std::size_t gold_total = 0;
  std::size_t gold_retained = 0;
  double recall = 1.0;
  std::vector<std::string> missed;
  std::vector<MessageCoverage> coverage;
};

namespace detail {

/// Filtering over pre-normalized segment tokens; shared by the one-shot and
/// the batch (many lists, one corpus) paths.
inline FilteredTranscript filter_tokens(const std::string& transcript_id,
                                        const std::vector<std::vector<std::string>>& segment_tokens,
                                        const std::set<std::string>& keys, std::size_t window) {
  FilteredTranscript out{transcript_id, {}, {}};
  const std::size_t n = segment_tokens.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::set<std::string> hit;
    for (const auto& tok : segment_tokens[i])
      if (keys.contains(tok)) hit.insert(tok);
    if (hit.empty()) continue;
    out.matches.emplace(i, std::move(hit));
    const std::size_t lo = i >= window ? i - window : 0;
    const std::size_t hi = std::min(n - 1, i + window);
    for (std::size_t j = lo; j <= hi; ++j) out.retained.insert(j);
  }
  return out;
}

inline std::vector<std::vector<std::string>> tokenize_segments(const Transcript& t, const NormalizationConfig& config) {
  std::vector<std::vector<std::string>> toks;
  toks.reserve(t.segments.size());
  for (const auto& s : t.segments) toks.push_back(normalize(s.text, config));
  return toks;
}

}  // namespace detail

/// A segment matches when its normalized tokens intersect the list; the
/// retained set adds every index within `window` of a match.
inline FilteredTranscript filter_transcript(const Transcript& transcript, const KeywordList& list,
                                            std::size_t window = 0, const NormalizationConfig& config = {}) {
  if (list.keywords.empty())
    throw Error(ErrorCode::EmptyKeywordList, "keyword list is empty", {{"list", list.name}});
  return detail::filter_tokens(transcript.id, detail::tokenize_segments(transcript, config), list.as_set(), window);
}

/// Fingerprint of everything that determines a filtering outcome.
inline std::string filter_fingerprint(const KeywordList& list, std::size_t window, const NormalizationConfig& config) {
  return config_hash({{"keywords", list.keywords}, {"window", window}, {"normalization", config}});
}

inline FilteredSet filter_corpus(const Corpus& corpus, const KeywordList& list, std::size_t window = 0,
                                 const NormalizationConfig& config = {}) {
  FilteredSet set{list.name, filter_fingerprint(list, window, config), window, list.keywords, {}};
  set.transcripts.reserve(corpus.transcripts.size());
  for (const auto& t : corpus.transcripts) set.transcripts.push_back(filter_transcript(t, list, window, config));
  return set;
}

/// Token-weighted share of the corpus the filter keeps. Token counts are the
/// ones computed at ingest.
inline ReductionReport reduction_report(const Corpus& corpus, const std::vector<FilteredTranscript>& filtered,
                                        int words_per_page = kDefaultWordsPerPage) {
  if (words_per_page < 1)
    throw Error(ErrorCode::InvalidArgument, "words_per_page must be >= 1", {{"words_per_page", words_per_page}});
  ReductionReport r;
  for (const auto& t : corpus.transcripts) r.total_tokens += t.token_count();
  for (const auto& f : filtered) {
    const Transcript* t = corpus.find(f.transcript_id);
    if (!t)
      throw Error(ErrorCode::InvalidArgument, "filtered transcript not in corpus", {{"transcript_id", f.transcript_id}});
    for (std::size_t i : f.retained) {
      if (i >= t->segments.size())
        throw Error(ErrorCode::InvalidArgument, "retained index out of range",
                    {{"transcript_id", f.transcript_id}, {"index", i}});
      r.retained_tokens += t->segments[i].token_count;
    }
  }
  r.retained_fraction =
      r.total_tokens == 0 ? 0.0 : static_cast<double>(r.retained_tokens) / static_cast<double>(r.total_tokens);
  r.total_pages = static_cast<double>(r.total_tokens) / words_per_page;
  r.retained_pages = static_cast<double>(r.retained_tokens) / words_per_page;
  return r;
}

/// A gold message counts as retained when at least one of its segments is.
/// Coverage is the retained share of the span's tokens (of its segments when
/// the span has no tokens). With no gold messages recall is vacuously 1.
inline RecallReport recall_report(const Corpus& corpus, const std::vector<FilteredTranscript>& filtered,
                                  const std::vector<MessageAnnotation>& gold) {
  std::map<std::string, const FilteredTranscript*> by_id;
  for (const auto& f : filtered) by_id[f.transcript_id] = &f;
  for (const auto& a : gold) {
    if (!by_id.contains(a.transcript_id))
      throw Error(ErrorCode::OrphanAnnotation, "gold annotation references a transcript outside the filtered set",
                  {{"annotation_id", a.id}, {"transcript_id", a.transcript_id}});
  }
  check_gold(corpus, gold);

  RecallReport r;
  r.gold_total = gold.size();
  for (const auto& a : gold) {
    const auto& f = *by_id.at(a.transcript_id);
    const Transcript& t = *corpus.find(a.transcript_id);
    std::size_t span_tokens = 0;
    std::size_t kept_tokens = 0;
    std::size_t kept_segments = 0;
    for (std::size_t i = a.span.start; i <= a.span.end; ++i) {
      span_tokens += t.segments[i].token_count;
      if (f.retained.contains(i)) {
        kept_tokens += t.segments[i].token_count;
        ++kept_segments;
      }
    }
    if (kept_segments > 0) ++r.gold_retained;
    else r.missed.push_back(a.id);
    const double frac = span_tokens > 0 ? static_cast<double>(kept_tokens) / static_cast<double>(span_tokens)
                                        : static_cast<double>(kept_segments) / static_cast<double>(a.span.length());
    r.coverage.push_back({a.id, frac});
  }
  r.recall = r.gold_total == 0 ? 1.0 : static_cast<double>(r.gold_retained) / static_cast<double>(r.gold_total);
  return r;
}

/// The list of every token occurring in any gold span. Filtering with it must
/// reach recall 1; spans whose text normalizes to nothing make that
/// impossible and are rejected as DegenerateGoldSpan.
inline KeywordList completeness_list(const Corpus& corpus, const std::vector<MessageAnnotation>& gold,
                                     const NormalizationConfig& config = {}) {
  check_gold(corpus, gold);
  std::set<std::string> tokens;
  for (const auto& a : gold) {
    const Transcript& t = *corpus.find(a.transcript_id);
    std::size_t found = 0;
    for (std::size_t i = a.span.start; i <= a.span.end; ++i) {
      for (auto& tok : normalize(t.segments[i].text, config)) {
        tokens.insert(std::move(tok));
        ++found;
      }
    }
    if (found == 0)
      throw Error(ErrorCode::DegenerateGoldSpan, "gold span has no tokens after normalization",
                  {{"annotation_id", a.id}, {"transcript_id", a.transcript_id}});
  }
  return {"gold-union", {tokens.begin(), tokens.end()}};
}

inline void write_filtered_set(const FilteredSet& set, const Corpus& corpus, std::ostream& out) {
  nlohmann::json header = {{"type", "header"},
                           {"list", set.list_name},
                           {"config_hash", set.config_hash},
                           {"window", set.window},
                           {"keywords", set.keywords}};
  out << header.dump() << '\n';
  for (const auto& f : set.transcripts) {
    const Transcript* t = corpus.find(f.transcript_id);
    nlohmann::json segs = nlohmann::json::array();
    for (std::size_t i : f.retained) {
      nlohmann::json s = {{"index", i}, {"text", t ? t->segments.at(i).text : std::string{}}};
      const auto m = f.matches.find(i);
      s["matches"] = m == f.matches.end() ? nlohmann::json::array() : nlohmann::json(m->second);
      segs.push_back(std::move(s));
    }
    out << nlohmann::json{{"type", "transcript"}, {"transcript_id", f.transcript_id}, {"segments", std::move(segs)}}.dump()
        << '\n';
  }
}

inline nlohmann::json filtered_set_to_json(const FilteredSet& set) {
  nlohmann::json transcripts = nlohmann::json::array();
  for (const auto& f : set.transcripts) {
    nlohmann::json segs = nlohmann::json::array();
    for (std::size_t i : f.retained) {
      const auto m = f.matches.find(i);
      segs.push_back({{"index", i}, {"matches", m == f.matches.end() ? nlohmann::json::array() : nlohmann::json(m->second)}});
    }
    transcripts.push_back({{"transcript_id", f.transcript_id}, {"segments", std::move(segs)}});
  }
  return {{"list", set.list_name},
          {"config_hash", set.config_hash},
          {"window", set.window},
          {"keywords", set.keywords},
          {"transcripts", std::move(transcripts)}};
}

namespace detail {
inline FilteredTranscript filtered_transcript_from_json(const nlohmann::json& j) {
  FilteredTranscript f;
  f.transcript_id = j.at("transcript_id").get<std::string>();
  for (const auto& s : j.at("segments")) {
    const auto idx = s.at("index").get<std::size_t>();
    f.retained.insert(idx);
    auto m = s.value("matches", std::set<std::string>{});
    if (!m.empty()) f.matches.emplace(idx, std::move(m));
  }
  return f;
}
}  // namespace detail

inline FilteredSet filtered_set_from_json(const nlohmann::json& j) {
  try {
    FilteredSet set;
    set.list_name = j.at("list").get<std::string>();
    set.config_hash = j.at("config_hash").get<std::string>();
    set.window = j.value("window", std::size_t{0});
    set.keywords = j.value("keywords", std::vector<std::string>{});
    for (const auto& t : j.at("transcripts")) set.transcripts.push_back(detail::filtered_transcript_from_json(t));
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("invalid filtered set: ") + e.what());
  }
}

inline FilteredSet read_filtered_set(std::istream& in) {
  FilteredSet set;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "header") {
        set.list_name = j.at("list").get<std::string>();
        set.config_hash = j.at("config_hash").get<std::string>();
        set.window = j.value("window", std::size_t{0});
        set.keywords = j.value("keywords", std::vector<std::string>{});
        header = true;
      } else if (type == "transcript") {
        set.transcripts.push_back(detail::filtered_transcript_from_json(j));
      } else {
        throw Error(ErrorCode::MalformedRecord, "unknown record type '" + type + "'", {{"line", line_no}});
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, e.what(), {{"line", line_no}});
    }
  }
  if (!header) throw Error(ErrorCode::MalformedRecord, "filtered output lacks a header record");
  return set;
}

inline nlohmann::json to_json(const ReductionReport& r) {
  return {{"total_tokens", r.total_tokens},       {"retained_tokens", r.retained_tokens},
          {"retained_fraction", r.retained_fraction}, {"total_pages", r.total_pages},
          {"retained_pages", r.retained_pages}};
}

inline nlohmann::json to_json(const RecallReport& r) {
  nlohmann::json cov = nlohmann::json::array();
  for (const auto& c : r.coverage) cov.push_back({{"annotation_id", c.annotation_id}, {"fraction", c.fraction}});
  return {{"gold_total", r.gold_total},
          {"gold_retained", r.gold_retained},
          {"recall", r.recall},
          {"missed", r.missed},
          {"coverage", std::move(cov)}};
}

}  // namespace engage
