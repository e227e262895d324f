#pragma once

// Candidate keyword list evaluation and selection.
//
// Evaluation table export (TSV):
//   list size recall retained_fraction missed_count
// sorted by retained_fraction. Rows that failed to evaluate appear as
// "# failed: <list>\t<code>\t<message>" comment lines, and a selection is
// appended as a single "# selection: {json}" footer line.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "engage/codebook.hpp"
#include "engage/corpus.hpp"
#include "engage/error.hpp"
#include "engage/filtering.hpp"
#include "engage/keyness.hpp"
#include "engage/normalize.hpp"

namespace engage {

struct EvaluationRow {
  std::string list;
  std::size_t size = 0;
  double recall = 0.0;
  double retained_fraction = 0.0;
  std::vector<std::string> missed;
  std::size_t missed_count = 0;  // kept separately: tables read back from disk carry no ids
  bool failed = false;
  std::string error;
};

struct EvaluationTable {
  std::vector<EvaluationRow> rows;
};

struct SelectionPolicy {
  double recall_threshold = 1.0;

  void validate() const {
    if (!(recall_threshold > 0.0 && recall_threshold <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "recall_threshold must lie in (0, 1]",
                  {{"recall_threshold", recall_threshold}});
  }
};

struct Selection {
  EvaluationRow row;
  double recall_threshold = 1.0;
  std::size_t feasible = 0;
  std::size_t candidates = 0;
};

namespace detail {
inline bool row_before(const EvaluationRow& a, const EvaluationRow& b) {
  if (a.failed != b.failed) return !a.failed;
  if (a.retained_fraction != b.retained_fraction) return a.retained_fraction < b.retained_fraction;
  if (a.size != b.size) return a.size < b.size;
  return a.list < b.list;
}
}  // namespace detail

/// Filters the corpus with each candidate and scores it on recall of the gold
/// messages and retained token share. Segments are normalized once for all
/// candidates.
inline EvaluationTable evaluate_lists(const Corpus& corpus, const std::vector<MessageAnnotation>& gold,
                                      const std::vector<KeywordList>& candidates, std::size_t window = 0,
                                      const NormalizationConfig& config = {},
                                      int words_per_page = kDefaultWordsPerPage) {
  if (candidates.empty()) throw Error(ErrorCode::InvalidArgument, "no candidate lists to evaluate");
  std::vector<std::vector<std::vector<std::string>>> tokens;
  tokens.reserve(corpus.transcripts.size());
  for (const auto& t : corpus.transcripts) tokens.push_back(detail::tokenize_segments(t, config));

  EvaluationTable table;
  for (const auto& list : candidates) {
    EvaluationRow row;
    row.list = list.name;
    row.size = list.size();
    try {
      if (list.keywords.empty())
        throw Error(ErrorCode::EmptyKeywordList, "keyword list is empty", {{"list", list.name}});
      const auto keys = list.as_set();
      std::vector<FilteredTranscript> filtered;
      filtered.reserve(corpus.transcripts.size());
      for (std::size_t i = 0; i < corpus.transcripts.size(); ++i)
        filtered.push_back(detail::filter_tokens(corpus.transcripts[i].id, tokens[i], keys, window));
      const auto recall = recall_report(corpus, filtered, gold);
      const auto reduction = reduction_report(corpus, filtered, words_per_page);
      row.recall = recall.recall;
      row.retained_fraction = reduction.retained_fraction;
      row.missed = recall.missed;
      row.missed_count = recall.missed.size();
    } catch (const Error& e) {
      row.failed = true;
      row.error = std::string(to_string(e.code())) + ": " + e.message();
    }
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), detail::row_before);
  return table;
}

/// Hard recall constraint first, then the smallest retained fraction; ties go
/// to the smaller list, then the lexicographically first name.
inline Selection select_list(const EvaluationTable& table, const SelectionPolicy& policy = {}) {
  policy.validate();
  if (table.rows.empty()) throw Error(ErrorCode::InvalidArgument, "evaluation table is empty");
  const EvaluationRow* best = nullptr;
  std::size_t feasible = 0;
  for (const auto& row : table.rows) {
    if (row.failed || row.recall < policy.recall_threshold) continue;
    ++feasible;
    if (!best || detail::row_before(row, *best)) best = &row;
  }
  if (!best) {
    double best_recall = 0.0;
    for (const auto& row : table.rows)
      if (!row.failed) best_recall = std::max(best_recall, row.recall);
    throw Error(ErrorCode::NoFeasibleList, "no candidate list reaches the recall threshold",
                {{"recall_threshold", policy.recall_threshold}, {"best_recall", best_recall}});
  }
  return {*best, policy.recall_threshold, feasible, table.rows.size()};
}

inline void write_evaluation_tsv(const EvaluationTable& table, std::ostream& out) {
  out << "list\tsize\trecall\tretained_fraction\tmissed_count\n";
  for (const auto& r : table.rows) {
    if (r.failed) continue;
    out << r.list << '\t' << r.size << '\t' << format_fixed(r.recall, 10) << '\t'
        << format_fixed(r.retained_fraction, 10) << '\t' << r.missed_count << '\n';
  }
  for (const auto& r : table.rows) {
    if (!r.failed) continue;
    out << "# failed: " << r.list << '\t' << r.error << '\n';
  }
}

inline nlohmann::json selection_to_json(const Selection& s) {
  return {{"list", s.row.list},
          {"size", s.row.size},
          {"recall", s.row.recall},
          {"retained_fraction", s.row.retained_fraction},
          {"missed_count", s.row.missed_count},
          {"recall_threshold", s.recall_threshold},
          {"feasible", s.feasible},
          {"candidates", s.candidates}};
}

inline void write_selection_footer(const Selection& s, std::ostream& out) {
  out << "# selection: " << selection_to_json(s).dump() << '\n';
}

/// Reads the TSV export back; comment lines (failures, footers) are skipped.
inline EvaluationTable read_evaluation_tsv(std::istream& in) {
  EvaluationTable table;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto cols = detail::split_tabs(line);
    if (!header) {
      if (cols.size() != 5 || cols[0] != "list")
        throw Error(ErrorCode::MalformedRecord, "evaluation table header mismatch", {{"line", line_no}});
      header = true;
      continue;
    }
    if (cols.size() != 5)
      throw Error(ErrorCode::MalformedRecord, "expected 5 columns", {{"line", line_no}});
    EvaluationRow r;
    try {
      r.list = cols[0];
      r.size = std::stoul(cols[1]);
      r.recall = std::stod(cols[2]);
      r.retained_fraction = std::stod(cols[3]);
      r.missed_count = std::stoul(cols[4]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedRecord, "non-numeric evaluation field", {{"line", line_no}});
    }
    table.rows.push_back(std::move(r));
  }
  if (!header) throw Error(ErrorCode::MalformedRecord, "evaluation table is empty");
  return table;
}

}  // namespace engage
