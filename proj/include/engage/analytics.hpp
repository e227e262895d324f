#pragma once

// Descriptive tables over an adjudicated annotation set: category counts by
// group, per-grade ratios (count / groups at that grade), percentages, and
// figure-ready exports.
//
// Group keys: overall tables use the single key 0, by-grade tables the grades
// 9..12 and by-trimester tables the trimesters 1..3. Every key of the domain
// is present, so a by-grade table always has 8 x 4 cells.

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "engage/codebook.hpp"
#include "engage/corpus.hpp"
#include "engage/error.hpp"
#include "engage/keyness.hpp"

namespace engage {

enum class Grouping { Overall, ByGrade, ByTrimester };

constexpr std::string_view to_string(Grouping g) noexcept {
  switch (g) {
    case Grouping::Overall: return "overall";
    case Grouping::ByGrade: return "by_grade";
    case Grouping::ByTrimester: return "by_trimester";
  }
  return "?";
}

inline std::optional<Grouping> parse_grouping(std::string_view s) {
  if (s == "overall") return Grouping::Overall;
  if (s == "by_grade" || s == "grade") return Grouping::ByGrade;
  if (s == "by_trimester" || s == "trimester") return Grouping::ByTrimester;
  return std::nullopt;
}

inline std::vector<int> group_keys(Grouping g) {
  std::vector<int> keys;
  switch (g) {
    case Grouping::Overall: keys.push_back(0); break;
    case Grouping::ByGrade:
      for (int k = kMinGrade; k <= kMaxGrade; ++k) keys.push_back(k);
      break;
    case Grouping::ByTrimester:
      for (int k = kMinTrimester; k <= kMaxTrimester; ++k) keys.push_back(k);
      break;
  }
  return keys;
}

inline std::string group_label(Grouping g, int key) {
  switch (g) {
    case Grouping::Overall: return "all";
    case Grouping::ByGrade: return "grade_" + std::to_string(key);
    case Grouping::ByTrimester: return "trimester_" + std::to_string(key);
  }
  return "?";
}

using CellKey = std::pair<int, int>;  // (category index, group key)

struct CountTable {
  Grouping grouping = Grouping::Overall;
  std::map<CellKey, std::size_t> cells;
  std::size_t total = 0;

  explicit CountTable(Grouping g = Grouping::Overall) : grouping(g) {
    for (Category c : kAllCategories)
      for (int k : group_keys(g)) cells[{c.index(), k}] = 0;
  }
  std::size_t count(Category c, int key) const {
    const auto it = cells.find({c.index(), key});
    return it == cells.end() ? 0 : it->second;
  }
  std::size_t group_total(int key) const {
    std::size_t s = 0;
    for (Category c : kAllCategories) s += count(c, key);
    return s;
  }
  std::size_t category_total(Category c) const {
    std::size_t s = 0;
    for (int k : group_keys(grouping)) s += count(c, k);
    return s;
  }
  void add(Category c, int key, std::size_t n = 1) {
    cells.at({c.index(), key}) += n;
    total += n;
  }
};

struct RatioTable {
  std::map<CellKey, double> cells;  // group key is the grade
  std::map<int, int> groups;        // divisor used per grade

  double ratio(Category c, int grade) const {
    const auto it = cells.find({c.index(), grade});
    return it == cells.end() ? 0.0 : it->second;
  }
  double grade_total(int grade) const {
    double s = 0.0;
    for (Category c : kAllCategories) s += ratio(c, grade);
    return s;
  }
};

enum class PercentBasis { Counts, Ratios };
/// Whole: cells divide by the table sum, so all cells together give 100.
/// WithinGroup: cells divide by their group's sum, so each group gives 100.
enum class PercentScope { Whole, WithinGroup };

constexpr std::string_view to_string(PercentBasis b) noexcept { return b == PercentBasis::Counts ? "counts" : "ratios"; }
constexpr std::string_view to_string(PercentScope s) noexcept { return s == PercentScope::Whole ? "whole" : "within_group"; }

struct PercentTable {
  Grouping grouping = Grouping::Overall;
  PercentBasis basis = PercentBasis::Counts;
  PercentScope scope = PercentScope::Whole;
  std::vector<int> keys;
  std::map<CellKey, double> cells;

  double percent(Category c, int key) const {
    const auto it = cells.find({c.index(), key});
    return it == cells.end() ? 0.0 : it->second;
  }
};

/// Rejects an annotation set in which two coders marked the identical span.
inline void check_adjudicated(const std::vector<MessageAnnotation>& annotations) {
  std::map<std::tuple<std::string, std::size_t, std::size_t>, const MessageAnnotation*> seen;
  for (const auto& a : annotations) {
    const auto [it, inserted] = seen.emplace(std::make_tuple(a.transcript_id, a.span.start, a.span.end), &a);
    if (!inserted && it->second->coder_id != a.coder_id)
      throw Error(ErrorCode::UnresolvedDuplicates, "identical span coded by two coders; adjudicate first",
                  {{"transcript_id", a.transcript_id},
                   {"span", {a.span.start, a.span.end}},
                   {"annotation_ids", {it->second->id, a.id}}});
  }
}

/// Counts Message annotations per category and group. NotAMessage decisions
/// carry no category and are skipped.
inline CountTable category_counts(const std::vector<MessageAnnotation>& annotations, const Corpus& corpus,
                                  Grouping grouping) {
  check_adjudicated(annotations);
  CountTable table(grouping);
  for (const auto& a : annotations) {
    const auto cat = a.decision.category();
    if (!cat) continue;
    const Transcript* t = corpus.find(a.transcript_id);
    if (!t)
      throw Error(ErrorCode::UnvalidatedAnnotation, "annotation references an unknown transcript",
                  {{"annotation_id", a.id}, {"transcript_id", a.transcript_id}});
    int key = 0;
    if (grouping == Grouping::ByGrade) key = t->grade;
    if (grouping == Grouping::ByTrimester) key = t->trimester;
    if (!table.cells.count({cat->index(), key}))
      throw Error(ErrorCode::InvalidArgument, "group key outside the domain",
                  {{"transcript_id", t->id}, {"key", key}});
    table.add(*cat, key);
  }
  return table;
}

inline RatioTable level_ratios(const CountTable& counts, const std::map<int, int>& registry) {
  if (counts.grouping != Grouping::ByGrade)
    throw Error(ErrorCode::InvalidArgument, "level ratios need a by-grade count table");
  RatioTable out;
  for (int grade : group_keys(Grouping::ByGrade)) {
    const auto it = registry.find(grade);
    if (it == registry.end()) {
      if (counts.group_total(grade) == 0) continue;
      throw Error(ErrorCode::MissingRegistryEntry, "no group count for grade", {{"grade", grade}});
    }
    if (it->second < 1) throw Error(ErrorCode::ZeroGroups, "group count must be at least 1", {{"grade", grade}});
    out.groups[grade] = it->second;
    for (Category c : kAllCategories)
      out.cells[{c.index(), grade}] = static_cast<double>(counts.count(c, grade)) / static_cast<double>(it->second);
  }
  return out;
}

namespace detail {

inline PercentTable percent_of(std::map<CellKey, double> values, std::vector<int> keys, Grouping grouping,
                               PercentBasis basis, PercentScope scope) {
  PercentTable out;
  out.grouping = grouping;
  out.basis = basis;
  out.scope = scope;
  if (scope == PercentScope::Whole) {
    double sum = 0.0;
    for (const auto& [k, v] : values) sum += v;
    if (!(sum > 0.0)) throw Error(ErrorCode::ZeroTotal, "table total is zero");
    for (const auto& [k, v] : values) out.cells[k] = v / sum * 100.0;
    out.keys = std::move(keys);
    return out;
  }
  // Groups with nothing in them have no shares and are left out.
  for (int key : keys) {
    double sum = 0.0;
    for (Category c : kAllCategories) sum += values[{c.index(), key}];
    if (!(sum > 0.0)) continue;
    out.keys.push_back(key);
    for (Category c : kAllCategories) out.cells[{c.index(), key}] = values[{c.index(), key}] / sum * 100.0;
  }
  if (out.keys.empty()) throw Error(ErrorCode::ZeroTotal, "table total is zero");
  return out;
}

}  // namespace detail

inline PercentTable percentages(const CountTable& table, PercentScope scope = PercentScope::Whole) {
  std::map<CellKey, double> values;
  for (const auto& [k, v] : table.cells) values[k] = static_cast<double>(v);
  return detail::percent_of(std::move(values), group_keys(table.grouping), table.grouping, PercentBasis::Counts, scope);
}

inline PercentTable percentages(const RatioTable& table, PercentScope scope = PercentScope::Whole) {
  std::vector<int> keys;
  for (const auto& [grade, groups] : table.groups) keys.push_back(grade);
  return detail::percent_of(table.cells, std::move(keys), Grouping::ByGrade, PercentBasis::Ratios, scope);
}

/// Column sums of a percent table, one per group key.
inline std::map<int, double> group_shares(const PercentTable& t) {
  std::map<int, double> out;
  for (int k : t.keys) {
    double s = 0.0;
    for (Category c : kAllCategories) s += t.percent(c, k);
    out[k] = s;
  }
  return out;
}

/// Row sums of a percent table, one per category.
inline std::map<Category, double> category_shares(const PercentTable& t) {
  std::map<Category, double> out;
  for (Category c : kAllCategories) {
    double s = 0.0;
    for (int k : t.keys) s += t.percent(c, k);
    out[c] = s;
  }
  return out;
}

// ---- export ----

enum class TableFormat { Csv, Tsv, Json };

inline std::optional<TableFormat> parse_table_format(std::string_view s) {
  if (s == "csv") return TableFormat::Csv;
  if (s == "tsv") return TableFormat::Tsv;
  if (s == "json") return TableFormat::Json;
  return std::nullopt;
}

namespace detail {

struct WideTable {
  std::string kind;
  Grouping grouping;
  std::vector<int> keys;
  std::map<CellKey, std::string> text;  // rendered cells
  std::map<CellKey, nlohmann::json> value;
  nlohmann::json extra = nlohmann::json::object();
};

inline double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  const double r = std::round(v * scale) / scale;
  return r == 0.0 ? 0.0 : r;
}

inline std::string render_wide(const WideTable& t, TableFormat format) {
  std::ostringstream out;
  if (format == TableFormat::Json) {
    nlohmann::json columns = nlohmann::json::array();
    for (int k : t.keys) columns.push_back(group_label(t.grouping, k));
    nlohmann::json rows = nlohmann::json::array();
    for (Category c : kAllCategories) {
      nlohmann::json values = nlohmann::json::object();
      for (int k : t.keys) values[group_label(t.grouping, k)] = t.value.at({c.index(), k});
      rows.push_back({{"category", c.name()},
                      {"frame", std::string(to_string(c.frame))},
                      {"appeal", std::string(to_string(c.appeal))},
                      {"values", std::move(values)}});
    }
    nlohmann::json doc = {{"table", t.kind},
                          {"grouping", std::string(to_string(t.grouping))},
                          {"columns", std::move(columns)},
                          {"rows", std::move(rows)}};
    for (const auto& [k, v] : t.extra.items()) doc[k] = v;
    out << doc.dump(2) << '\n';
    return out.str();
  }
  const char sep = format == TableFormat::Csv ? ',' : '\t';
  out << "category" << sep << "frame" << sep << "appeal";
  for (int k : t.keys) out << sep << group_label(t.grouping, k);
  out << '\n';
  for (Category c : kAllCategories) {
    out << c.name() << sep << to_string(c.frame) << sep << to_string(c.appeal);
    for (int k : t.keys) out << sep << t.text.at({c.index(), k});
    out << '\n';
  }
  return out.str();
}

}  // namespace detail

inline std::string render_table(const CountTable& t, TableFormat format) {
  detail::WideTable w{"counts", t.grouping, group_keys(t.grouping), {}, {}};
  for (const auto& [k, v] : t.cells) {
    w.text[k] = std::to_string(v);
    w.value[k] = v;
  }
  w.extra["total"] = t.total;
  return detail::render_wide(w, format);
}

inline std::string render_table(const RatioTable& t, TableFormat format) {
  detail::WideTable w{"ratios", Grouping::ByGrade, {}, {}, {}};
  for (const auto& [grade, groups] : t.groups) w.keys.push_back(grade);
  for (const auto& [k, v] : t.cells) {
    w.text[k] = format_fixed(v, 4);
    w.value[k] = detail::round_to(v, 4);
  }
  nlohmann::json groups = nlohmann::json::object();
  for (const auto& [grade, n] : t.groups) groups[std::to_string(grade)] = n;
  w.extra["groups"] = std::move(groups);
  return detail::render_wide(w, format);
}

inline std::string render_table(const PercentTable& t, TableFormat format) {
  detail::WideTable w{"percent", t.grouping, t.keys, {}, {}};
  for (const auto& [k, v] : t.cells) {
    w.text[k] = format_fixed(v, 2);
    w.value[k] = detail::round_to(v, 2);
  }
  w.extra["basis"] = std::string(to_string(t.basis));
  w.extra["scope"] = std::string(to_string(t.scope));
  return detail::render_wide(w, format);
}

template <class Table>
void export_table(const Table& table, TableFormat format, const std::filesystem::path& destination) {
  const std::string bytes = render_table(table, format);
  std::ofstream out(destination, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open export destination", {{"path", destination.string()}});
  out << bytes;
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failed", {{"path", destination.string()}});
}

// ---- figure data ----

namespace detail {

inline nlohmann::json figure_series(const std::string& name, const PercentTable& t) {
  nlohmann::json groups = nlohmann::json::array();
  for (int k : t.keys) groups.push_back(group_label(t.grouping, k));
  nlohmann::json series = nlohmann::json::array();
  for (Category c : kAllCategories) {
    nlohmann::json values = nlohmann::json::array();
    for (int k : t.keys) values.push_back(round_to(t.percent(c, k), 2));
    series.push_back({{"category", c.name()},
                      {"frame", std::string(to_string(c.frame))},
                      {"appeal", std::string(to_string(c.appeal))},
                      {"values", std::move(values)}});
  }
  nlohmann::json totals = nlohmann::json::array();
  for (const auto& [k, v] : group_shares(t)) totals.push_back(round_to(v, 2));
  return {{"figure", name},
          {"grouping", std::string(to_string(t.grouping))},
          {"basis", std::string(to_string(t.basis))},
          {"groups", std::move(groups)},
          {"series", std::move(series)},
          {"group_totals", std::move(totals)}};
}

}  // namespace detail

/// Per-figure percent series: category shares overall, category by grade on
/// the ratio basis, and category by trimester on the count basis. All three
/// normalize over the whole table.
inline nlohmann::json figure_data(const CountTable& overall, const CountTable& by_grade, const CountTable& by_trimester,
                                  const std::map<int, int>& registry) {
  const auto ratios = level_ratios(by_grade, registry);
  nlohmann::json grade_ratio_totals = nlohmann::json::object();
  for (const auto& [grade, groups] : ratios.groups)
    grade_ratio_totals[group_label(Grouping::ByGrade, grade)] = detail::round_to(ratios.grade_total(grade), 4);
  return {{"total", overall.total},
          {"grade_ratio_totals", std::move(grade_ratio_totals)},
          {"figures",
           {detail::figure_series("categories_overall", percentages(overall)),
            detail::figure_series("categories_by_grade", percentages(ratios)),
            detail::figure_series("categories_by_trimester", percentages(by_trimester))}}};
}

inline nlohmann::json figure_data(const std::vector<MessageAnnotation>& annotations, const Corpus& corpus) {
  return figure_data(category_counts(annotations, corpus, Grouping::Overall),
                     category_counts(annotations, corpus, Grouping::ByGrade),
                     category_counts(annotations, corpus, Grouping::ByTrimester), corpus.group_registry);
}

}  // namespace engage
