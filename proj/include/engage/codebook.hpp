#pragma once

// Frame x appeal taxonomy of engaging messages and the annotation model.
//
// Annotation export is tab-separated with a header row and the fixed columns
//   annotation_id coder_id transcript_id start end frame appeal decision note
// `decision` is "message" or "not_a_message"; frame/appeal are lowercase and
// empty for not_a_message. Tabs, newlines and backslashes in notes are
// backslash-escaped.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "engage/corpus.hpp"
#include "engage/error.hpp"

namespace engage {

enum class Frame : std::uint8_t { Gain, Loss };
enum class Appeal : std::uint8_t { Extrinsic, Introjected, Identified, Intrinsic };

inline constexpr std::array<Frame, 2> kAllFrames = {Frame::Gain, Frame::Loss};
inline constexpr std::array<Appeal, 4> kAllAppeals = {Appeal::Extrinsic, Appeal::Introjected, Appeal::Identified,
                                                      Appeal::Intrinsic};

constexpr std::string_view to_string(Frame f) noexcept { return f == Frame::Gain ? "gain" : "loss"; }

constexpr std::string_view to_string(Appeal a) noexcept {
  switch (a) {
    case Appeal::Extrinsic: return "extrinsic";
    case Appeal::Introjected: return "introjected";
    case Appeal::Identified: return "identified";
    case Appeal::Intrinsic: return "intrinsic";
  }
  return "";
}

namespace detail {
inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}
}  // namespace detail

inline std::optional<Frame> parse_frame(std::string_view s) {
  const auto l = detail::ascii_lower(s);
  for (Frame f : kAllFrames)
    if (l == to_string(f)) return f;
  return std::nullopt;
}

inline std::optional<Appeal> parse_appeal(std::string_view s) {
  const auto l = detail::ascii_lower(s);
  for (Appeal a : kAllAppeals)
    if (l == to_string(a)) return a;
  return std::nullopt;
}

/// One cell of the 2x4 taxonomy. Ordering (and index()) follows the codebook
/// table: the gain row first, appeals from extrinsic to intrinsic.
struct Category {
  Frame frame = Frame::Gain;
  Appeal appeal = Appeal::Extrinsic;

  constexpr int index() const noexcept {
    return static_cast<int>(frame) * static_cast<int>(kAllAppeals.size()) + static_cast<int>(appeal);
  }

  static constexpr Category from_index(int i) noexcept {
    return {static_cast<Frame>(i / 4), static_cast<Appeal>(i % 4)};
  }

  /// "GainExtrinsic", "LossIdentified", ...
  std::string name() const {
    std::string f(to_string(frame));
    std::string a(to_string(appeal));
    f[0] = static_cast<char>(f[0] - 'a' + 'A');
    a[0] = static_cast<char>(a[0] - 'a' + 'A');
    return f + a;
  }

  friend constexpr bool operator==(Category x, Category y) noexcept { return x.index() == y.index(); }
  friend constexpr auto operator<=>(Category x, Category y) noexcept { return x.index() <=> y.index(); }
};

inline constexpr int kCategoryCount = 8;

constexpr Category category_of(Frame f, Appeal a) noexcept { return {f, a}; }

constexpr std::pair<Frame, Appeal> decompose(Category c) noexcept { return {c.frame, c.appeal}; }

inline constexpr std::array<Category, kCategoryCount> kAllCategories = [] {
  std::array<Category, kCategoryCount> all{};
  for (int i = 0; i < kCategoryCount; ++i) all[static_cast<std::size_t>(i)] = Category::from_index(i);
  return all;
}();

inline std::optional<Category> parse_category(std::string_view name) {
  const auto l = detail::ascii_lower(name);
  for (Category c : kAllCategories)
    if (l == detail::ascii_lower(c.name())) return c;
  return std::nullopt;
}

/// Either a coded message carrying a category, or an explicit rejection.
class Decision {
 public:
  static Decision message(Category c) { return Decision(c); }
  static Decision not_a_message() { return Decision(std::nullopt); }

  bool is_message() const noexcept { return category_.has_value(); }
  const std::optional<Category>& category() const noexcept { return category_; }

  std::string label() const { return is_message() ? category_->name() : std::string("NotAMessage"); }

  friend bool operator==(const Decision&, const Decision&) = default;

 private:
  explicit Decision(std::optional<Category> c) : category_(c) {}
  std::optional<Category> category_;
};

/// Inclusive segment index range within one transcript.
struct SegmentSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const noexcept { return end >= start ? end - start + 1 : 0; }
  bool contains(std::size_t i) const noexcept { return i >= start && i <= end; }

  friend bool operator==(const SegmentSpan&, const SegmentSpan&) = default;
};

struct MessageAnnotation {
  std::string id;
  std::string coder_id;
  std::string transcript_id;
  SegmentSpan span;
  Decision decision = Decision::not_a_message();
  std::optional<std::string> note;
  std::uint64_t created_at = 0;

  friend bool operator==(const MessageAnnotation&, const MessageAnnotation&) = default;
};

enum class ViolationKind { InvalidSpan, SpanOutOfRange, MissingCategory, UnknownFrame, UnknownAppeal, MissingField };

constexpr std::string_view to_string(ViolationKind k) noexcept {
  switch (k) {
    case ViolationKind::InvalidSpan: return "InvalidSpan";
    case ViolationKind::SpanOutOfRange: return "SpanOutOfRange";
    case ViolationKind::MissingCategory: return "MissingCategory";
    case ViolationKind::UnknownFrame: return "UnknownFrame";
    case ViolationKind::UnknownAppeal: return "UnknownAppeal";
    case ViolationKind::MissingField: return "MissingField";
  }
  return "";
}

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }
  bool has(ViolationKind k) const {
    for (const auto& v : violations)
      if (v.kind == k) return true;
    return false;
  }
  void add(ViolationKind k, std::string msg) { violations.push_back({k, std::move(msg)}); }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& v : violations) arr.push_back({{"kind", std::string(to_string(v.kind))}, {"message", v.message}});
    return arr;
  }
};

/// Structural codebook checks: a contiguous span inside the transcript, and a
/// category on every message. Whether the utterance really aims to engage
/// students is the coder's call and is not checked here.
inline ValidationReport validate_annotation(const MessageAnnotation& a, const Transcript& transcript) {
  if (a.transcript_id != transcript.id)
    throw Error(ErrorCode::TranscriptMismatch, "annotation targets another transcript",
                {{"annotation_id", a.id}, {"annotation_transcript", a.transcript_id}, {"transcript", transcript.id}});
  ValidationReport report;
  if (a.span.start > a.span.end)
    report.add(ViolationKind::InvalidSpan,
               "span [" + std::to_string(a.span.start) + "," + std::to_string(a.span.end) + "] is reversed");
  else if (a.span.end >= transcript.segments.size())
    report.add(ViolationKind::SpanOutOfRange, "span end " + std::to_string(a.span.end) + " beyond " +
                                                   std::to_string(transcript.segments.size()) + " segments");
  return report;
}

inline nlohmann::json annotation_to_json(const MessageAnnotation& a) {
  nlohmann::json j = {{"id", a.id},
                      {"coder_id", a.coder_id},
                      {"transcript_id", a.transcript_id},
                      {"start", a.span.start},
                      {"end", a.span.end},
                      {"decision", a.decision.is_message() ? "message" : "not_a_message"},
                      {"created_at", a.created_at}};
  if (const auto& c = a.decision.category()) {
    j["frame"] = std::string(to_string(c->frame));
    j["appeal"] = std::string(to_string(c->appeal));
  }
  if (a.note) j["note"] = *a.note;
  return j;
}

struct DecodedAnnotation {
  std::optional<MessageAnnotation> annotation;
  ValidationReport report;
};

/// Wire form to model. Problems that the type system rules out for in-memory
/// annotations (a message without a category, an unknown frame) surface here
/// as violations instead.
inline DecodedAnnotation decode_annotation(const nlohmann::json& j) {
  DecodedAnnotation out;
  auto& rep = out.report;
  const auto get_str = [&](const char* key, bool required) -> std::string {
    if (j.contains(key) && j[key].is_string()) return j[key].get<std::string>();
    if (required) rep.add(ViolationKind::MissingField, std::string("missing field '") + key + "'");
    return {};
  };
  if (!j.is_object()) {
    rep.add(ViolationKind::MissingField, "annotation is not an object");
    return out;
  }
  MessageAnnotation a;
  a.id = get_str("id", false);
  a.coder_id = get_str("coder_id", true);
  a.transcript_id = get_str("transcript_id", true);

  long long start = -1;
  long long end = -1;
  if (j.contains("start") && j["start"].is_number_integer()) start = j["start"].get<long long>();
  else rep.add(ViolationKind::MissingField, "missing integer field 'start'");
  if (j.contains("end") && j["end"].is_number_integer()) end = j["end"].get<long long>();
  else rep.add(ViolationKind::MissingField, "missing integer field 'end'");
  if (j.contains("start") && j.contains("end") && (start < 0 || end < 0 || start > end))
    rep.add(ViolationKind::InvalidSpan, "span [" + std::to_string(start) + "," + std::to_string(end) + "] is invalid");

  const std::string decision = get_str("decision", true);
  if (decision == "message") {
    const std::string fs = get_str("frame", false);
    const std::string as = get_str("appeal", false);
    if (fs.empty() || as.empty()) {
      rep.add(ViolationKind::MissingCategory, "message decision without frame and appeal");
    } else {
      const auto f = parse_frame(fs);
      const auto ap = parse_appeal(as);
      if (!f) rep.add(ViolationKind::UnknownFrame, "unknown frame '" + fs + "'");
      if (!ap) rep.add(ViolationKind::UnknownAppeal, "unknown appeal '" + as + "'");
      if (f && ap) a.decision = Decision::message(category_of(*f, *ap));
    }
  } else if (decision != "not_a_message" && !decision.empty()) {
    rep.add(ViolationKind::MissingField, "decision must be 'message' or 'not_a_message'");
  }
  if (j.contains("note") && j["note"].is_string()) a.note = j["note"].get<std::string>();
  if (j.contains("created_at") && j["created_at"].is_number_unsigned()) a.created_at = j["created_at"].get<std::uint64_t>();

  if (rep.ok()) {
    a.span = {static_cast<std::size_t>(start), static_cast<std::size_t>(end)};
    out.annotation = std::move(a);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tabular export

inline constexpr std::array<std::string_view, 9> kAnnotationColumns = {
    "annotation_id", "coder_id", "transcript_id", "start", "end", "frame", "appeal", "decision", "note"};

namespace detail {

inline std::string tsv_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string tsv_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    switch (s[++i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      default: out.push_back(s[i]);
    }
  }
  return out;
}

inline std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> cols;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    cols.emplace_back(line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos));
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
  }
  return cols;
}

}  // namespace detail

inline void write_annotations_tsv(const std::vector<MessageAnnotation>& annotations, std::ostream& out) {
  for (std::size_t i = 0; i < kAnnotationColumns.size(); ++i) out << (i ? "\t" : "") << kAnnotationColumns[i];
  out << '\n';
  for (const auto& a : annotations) {
    const auto& c = a.decision.category();
    out << detail::tsv_escape(a.id) << '\t' << detail::tsv_escape(a.coder_id) << '\t'
        << detail::tsv_escape(a.transcript_id) << '\t' << a.span.start << '\t' << a.span.end << '\t'
        << (c ? to_string(c->frame) : "") << '\t' << (c ? to_string(c->appeal) : "") << '\t'
        << (a.decision.is_message() ? "message" : "not_a_message") << '\t'
        << detail::tsv_escape(a.note.value_or("")) << '\n';
  }
}

/// Reads the tabular export. The export carries no creation sequence, so
/// created_at is the 1-based row number.
inline std::vector<MessageAnnotation> read_annotations_tsv(std::istream& in) {
  std::vector<MessageAnnotation> out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = detail::split_tabs(line);
    if (!header_seen) {
      header_seen = true;
      if (cols.size() != kAnnotationColumns.size() || cols[0] != kAnnotationColumns[0])
        throw Error(ErrorCode::MalformedRecord, "annotation table header mismatch", {{"line", line_no}});
      continue;
    }
    if (cols.size() != kAnnotationColumns.size())
      throw Error(ErrorCode::MalformedRecord, "expected 9 columns, got " + std::to_string(cols.size()),
                  {{"line", line_no}});
    nlohmann::json j = {{"id", detail::tsv_unescape(cols[0])},
                        {"coder_id", detail::tsv_unescape(cols[1])},
                        {"transcript_id", detail::tsv_unescape(cols[2])},
                        {"decision", cols[7]},
                        {"created_at", out.size() + 1}};
    try {
      j["start"] = std::stoll(cols[3]);
      j["end"] = std::stoll(cols[4]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::MalformedRecord, "start/end must be integers", {{"line", line_no}});
    }
    if (!cols[5].empty()) j["frame"] = cols[5];
    if (!cols[6].empty()) j["appeal"] = cols[6];
    if (!cols[8].empty()) j["note"] = detail::tsv_unescape(cols[8]);
    auto decoded = decode_annotation(j);
    if (!decoded.report.ok())
      throw Error(ErrorCode::ValidationFailed, "invalid annotation row",
                  {{"line", line_no}, {"violations", decoded.report.to_json()}});
    out.push_back(std::move(*decoded.annotation));
  }
  return out;
}

}  // namespace engage
