#pragma once

// Transcript ingestion and corpus-level size statistics.
//
// Transcript file (JSON Lines, UTF-8): one record per non-blank line,
//   {"id": "s0", "index": 0, "text": "..."}
// with optional "silence": true (allows empty text) and optional numeric
// "start"/"end" timestamps, which are carried but never interpreted.
// "index" must equal the record's ordinal position.
//
// Corpus manifest (JSON):
//   {"group_registry": {"9": 41, "10": 30, ...},
//    "transcripts": [{"path": "t1.jsonl", "id": "t1", "teacher_id": "T01",
//                     "group_id": "G01", "grade": 9, "trimester": 1,
//                     "academic_year": "2021-2022"}, ...]}
// Relative paths resolve against the manifest's directory. A missing
// registry falls back to default_group_registry().

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "engage/error.hpp"
#include "engage/normalize.hpp"

namespace engage {

inline constexpr int kMinGrade = 9;
inline constexpr int kMaxGrade = 12;
inline constexpr int kMinTrimester = 1;
inline constexpr int kMaxTrimester = 3;
inline constexpr int kDefaultWordsPerPage = 300;

struct Segment {
  std::string id;
  std::size_t index = 0;
  std::string text;
  std::size_t token_count = 0;
  bool silence = false;
  std::optional<double> start;
  std::optional<double> end;

  friend bool operator==(const Segment&, const Segment&) = default;
};

struct TranscriptMetadata {
  std::string id;
  std::string teacher_id;
  std::string group_id;
  int grade = 0;
  int trimester = 0;
  std::string academic_year;

  friend bool operator==(const TranscriptMetadata&, const TranscriptMetadata&) = default;
};

struct Transcript {
  std::string id;
  std::string teacher_id;
  std::string group_id;
  int grade = 0;
  int trimester = 0;
  std::string academic_year;
  std::vector<Segment> segments;

  TranscriptMetadata metadata() const {
    return {id, teacher_id, group_id, grade, trimester, academic_year};
  }

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.token_count;
    return n;
  }

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

/// Group counts per grade used in the original study design.
inline std::map<int, int> default_group_registry() { return {{9, 41}, {10, 30}, {11, 18}, {12, 37}}; }

struct Corpus {
  std::vector<Transcript> transcripts;
  std::map<int, int> group_registry = default_group_registry();

  const Transcript* find(const std::string& transcript_id) const {
    for (const auto& t : transcripts)
      if (t.id == transcript_id) return &t;
    return nullptr;
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct CorpusStats {
  std::size_t transcript_count = 0;
  std::size_t segment_count = 0;
  std::size_t token_count = 0;
  double page_equivalents = 0.0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

inline void validate_metadata(const TranscriptMetadata& meta) {
  if (meta.id.empty() || meta.teacher_id.empty() || meta.group_id.empty() || meta.academic_year.empty())
    throw Error(ErrorCode::InvalidArgument, "transcript metadata incomplete", {{"transcript_id", meta.id}});
  if (meta.grade < kMinGrade || meta.grade > kMaxGrade)
    throw Error(ErrorCode::InvalidGrade, "grade outside 9..12",
                {{"transcript_id", meta.id}, {"grade", meta.grade}});
  if (meta.trimester < kMinTrimester || meta.trimester > kMaxTrimester)
    throw Error(ErrorCode::InvalidTrimester, "trimester outside 1..3",
                {{"transcript_id", meta.id}, {"trimester", meta.trimester}});
}

namespace detail {

inline Segment parse_segment_record(const nlohmann::json& rec, std::size_t ordinal, std::size_t line,
                                    const std::string& transcript_id) {
  const auto malformed = [&](const std::string& why) {
    return Error(ErrorCode::MalformedRecord, why,
                 {{"transcript_id", transcript_id}, {"line", line}});
  };
  if (!rec.is_object()) throw malformed("record is not an object");
  if (!rec.contains("id") || !rec["id"].is_string() || rec["id"].get<std::string>().empty())
    throw malformed("missing string field 'id'");
  if (!rec.contains("index") || !rec["index"].is_number_integer())
    throw malformed("missing integer field 'index'");
  if (!rec.contains("text") || !rec["text"].is_string()) throw malformed("missing string field 'text'");

  Segment seg;
  seg.id = rec["id"].get<std::string>();
  const auto index = rec["index"].get<long long>();
  if (index < 0 || static_cast<std::size_t>(index) != ordinal)
    throw malformed("index " + std::to_string(index) + " out of sequence, expected " + std::to_string(ordinal));
  seg.index = ordinal;
  seg.text = rec["text"].get<std::string>();
  if (rec.contains("silence")) {
    if (!rec["silence"].is_boolean()) throw malformed("'silence' must be boolean");
    seg.silence = rec["silence"].get<bool>();
  }
  if (seg.text.empty() && !seg.silence) throw malformed("empty text without silence flag");
  for (const char* key : {"start", "end"}) {
    if (!rec.contains(key)) continue;
    if (!rec[key].is_number()) throw malformed(std::string("'") + key + "' must be numeric");
    (key[0] == 's' ? seg.start : seg.end) = rec[key].get<double>();
  }
  return seg;
}

inline Transcript assemble_transcript(const TranscriptMetadata& meta, std::vector<Segment> segments,
                                      const NormalizationConfig& config) {
  if (segments.empty())
    throw Error(ErrorCode::EmptyTranscript, "transcript has no segments", {{"transcript_id", meta.id}});
  std::set<std::string> ids;
  for (const auto& s : segments) {
    if (!ids.insert(s.id).second)
      throw Error(ErrorCode::DuplicateSegmentId, "segment id '" + s.id + "' repeated",
                  {{"transcript_id", meta.id}, {"segment_id", s.id}});
  }
  for (auto& s : segments) s.token_count = normalize(s.text, config).size();
  Transcript t;
  t.id = meta.id;
  t.teacher_id = meta.teacher_id;
  t.group_id = meta.group_id;
  t.grade = meta.grade;
  t.trimester = meta.trimester;
  t.academic_year = meta.academic_year;
  t.segments = std::move(segments);
  return t;
}

}  // namespace detail

/// Reads a transcript file. Token counts use `config`, the same normalizer
/// the keyword stage uses.
inline Transcript ingest_transcript(std::istream& records, const TranscriptMetadata& meta,
                                    const NormalizationConfig& config = {}) {
  validate_metadata(meta);
  std::vector<Segment> segments;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(records, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::MalformedRecord, std::string("invalid JSON: ") + e.what(),
                  {{"transcript_id", meta.id}, {"line", line_no}});
    }
    segments.push_back(detail::parse_segment_record(rec, segments.size(), line_no, meta.id));
  }
  return detail::assemble_transcript(meta, std::move(segments), config);
}

inline nlohmann::json segment_record(const Segment& s) {
  nlohmann::json rec = {{"id", s.id}, {"index", s.index}, {"text", s.text}};
  if (s.silence) rec["silence"] = true;
  if (s.start) rec["start"] = *s.start;
  if (s.end) rec["end"] = *s.end;
  return rec;
}

/// Writes the transcript file form; ingest_transcript reads it back unchanged.
inline void export_transcript(const Transcript& t, std::ostream& out) {
  for (const auto& s : t.segments) out << segment_record(s).dump() << '\n';
}

inline void validate_registry(const Corpus& corpus) {
  for (const auto& [grade, groups] : corpus.group_registry) {
    if (groups < 1)
      throw Error(ErrorCode::InvalidArgument, "group count must be >= 1",
                  {{"grade", grade}, {"groups", groups}});
  }
  std::set<std::string> ids;
  for (const auto& t : corpus.transcripts) {
    if (!corpus.group_registry.contains(t.grade))
      throw Error(ErrorCode::RegistryGap, "grade " + std::to_string(t.grade) + " missing from group registry",
                  {{"transcript_id", t.id}, {"grade", t.grade}});
    if (!ids.insert(t.id).second)
      throw Error(ErrorCode::InvalidArgument, "transcript id '" + t.id + "' repeated", {{"transcript_id", t.id}});
  }
}

namespace detail {

inline TranscriptMetadata metadata_from_json(const nlohmann::json& j) {
  const auto str = [&](const char* key) {
    return j.contains(key) && j[key].is_string() ? j[key].get<std::string>() : std::string{};
  };
  const auto num = [&](const char* key) {
    return j.contains(key) && j[key].is_number_integer() ? j[key].get<int>() : 0;
  };
  return {str("id"), str("teacher_id"), str("group_id"), num("grade"), num("trimester"), str("academic_year")};
}

inline nlohmann::json metadata_to_json(const TranscriptMetadata& m) {
  return {{"id", m.id},
          {"teacher_id", m.teacher_id},
          {"group_id", m.group_id},
          {"grade", m.grade},
          {"trimester", m.trimester},
          {"academic_year", m.academic_year}};
}

inline std::map<int, int> registry_from_json(const nlohmann::json& j) {
  std::map<int, int> reg;
  for (const auto& [key, value] : j.items()) {
    int grade = 0;
    try {
      grade = std::stoi(key);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "group registry key '" + key + "' is not a grade");
    }
    if (!value.is_number_integer())
      throw Error(ErrorCode::InvalidArgument, "group registry value for grade " + key + " is not an integer");
    reg[grade] = value.get<int>();
  }
  return reg;
}

inline nlohmann::json registry_to_json(const std::map<int, int>& reg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [grade, groups] : reg) j[std::to_string(grade)] = groups;
  return j;
}

}  // namespace detail

/// Loads every transcript listed by a manifest, in manifest order.
inline Corpus load_corpus(const std::filesystem::path& manifest_path, const NormalizationConfig& config = {}) {
  std::ifstream in(manifest_path);
  if (!in)
    throw Error(ErrorCode::MissingFile, "cannot open manifest " + manifest_path.string(),
                {{"path", manifest_path.string()}});
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("manifest is not valid JSON: ") + e.what(),
                {{"path", manifest_path.string()}});
  }
  if (!manifest.is_object() || !manifest.contains("transcripts") || !manifest["transcripts"].is_array())
    throw Error(ErrorCode::MalformedRecord, "manifest lacks a 'transcripts' array", {{"path", manifest_path.string()}});

  Corpus corpus;
  if (manifest.contains("group_registry")) corpus.group_registry = detail::registry_from_json(manifest["group_registry"]);
  const auto base = manifest_path.parent_path();
  for (const auto& entry : manifest["transcripts"]) {
    if (!entry.contains("path") || !entry["path"].is_string())
      throw Error(ErrorCode::MalformedRecord, "manifest entry lacks 'path'", {{"entry", entry}});
    std::filesystem::path p = entry["path"].get<std::string>();
    if (p.is_relative()) p = base / p;
    std::ifstream tin(p);
    if (!tin) throw Error(ErrorCode::MissingFile, "cannot open transcript " + p.string(), {{"path", p.string()}});
    corpus.transcripts.push_back(ingest_transcript(tin, detail::metadata_from_json(entry), config));
  }
  validate_registry(corpus);
  return corpus;
}

/// Self-contained corpus document (metadata plus segments inline), the form
/// the coding service accepts on POST /corpora.
inline nlohmann::json corpus_to_json(const Corpus& corpus) {
  nlohmann::json transcripts = nlohmann::json::array();
  for (const auto& t : corpus.transcripts) {
    nlohmann::json jt = detail::metadata_to_json(t.metadata());
    nlohmann::json segs = nlohmann::json::array();
    for (const auto& s : t.segments) segs.push_back(segment_record(s));
    jt["segments"] = std::move(segs);
    transcripts.push_back(std::move(jt));
  }
  return {{"group_registry", detail::registry_to_json(corpus.group_registry)}, {"transcripts", std::move(transcripts)}};
}

inline Corpus corpus_from_json(const nlohmann::json& doc, const NormalizationConfig& config = {}) {
  if (!doc.is_object() || !doc.contains("transcripts") || !doc["transcripts"].is_array())
    throw Error(ErrorCode::MalformedRecord, "corpus document lacks a 'transcripts' array");
  Corpus corpus;
  if (doc.contains("group_registry")) corpus.group_registry = detail::registry_from_json(doc["group_registry"]);
  for (const auto& jt : doc["transcripts"]) {
    const auto meta = detail::metadata_from_json(jt);
    validate_metadata(meta);
    std::vector<Segment> segments;
    if (jt.contains("segments") && jt["segments"].is_array()) {
      std::size_t ordinal = 0;
      for (const auto& rec : jt["segments"]) {
        segments.push_back(detail::parse_segment_record(rec, ordinal, ordinal + 1, meta.id));
        ++ordinal;
      }
    }
    corpus.transcripts.push_back(detail::assemble_transcript(meta, std::move(segments), config));
  }
  validate_registry(corpus);
  return corpus;
}

/// Reads either a manifest or a self-contained corpus document.
inline Corpus read_corpus(const std::filesystem::path& path, const NormalizationConfig& config = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open " + path.string(), {{"path", path.string()}});
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("not valid JSON: ") + e.what(), {{"path", path.string()}});
  }
  const bool inline_segments = doc.is_object() && doc.contains("transcripts") && doc["transcripts"].is_array() &&
                               !doc["transcripts"].empty() && doc["transcripts"][0].contains("segments");
  return inline_segments ? corpus_from_json(doc, config) : load_corpus(path, config);
}

/// Writes `dir`/manifest.json plus one transcript file per transcript under
/// `dir`/transcripts; load_corpus on the manifest reproduces the corpus.
inline std::filesystem::path save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "transcripts", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (dir / "transcripts").string() + ": " + ec.message());
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& t : corpus.transcripts) {
    const std::string rel = "transcripts/" + t.id + ".jsonl";
    std::ofstream out(dir / rel, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + (dir / rel).string());
    export_transcript(t, out);
    nlohmann::json e = detail::metadata_to_json(t.metadata());
    e["path"] = rel;
    entries.push_back(std::move(e));
  }
  const auto manifest_path = dir / "manifest.json";
  std::ofstream m(manifest_path, std::ios::binary);
  if (!m) throw Error(ErrorCode::IoFailure, "cannot write " + manifest_path.string());
  m << nlohmann::json{{"group_registry", detail::registry_to_json(corpus.group_registry)}, {"transcripts", entries}}.dump(2)
    << '\n';
  return manifest_path;
}

inline CorpusStats corpus_stats(const Corpus& corpus, int words_per_page = kDefaultWordsPerPage) {
  if (words_per_page < 1)
    throw Error(ErrorCode::InvalidArgument, "words_per_page must be >= 1", {{"words_per_page", words_per_page}});
  CorpusStats stats;
  stats.transcript_count = corpus.transcripts.size();
  for (const auto& t : corpus.transcripts) {
    stats.segment_count += t.segments.size();
    stats.token_count += t.token_count();
  }
  stats.page_equivalents = static_cast<double>(stats.token_count) / words_per_page;
  return stats;
}

inline nlohmann::json to_json(const CorpusStats& s) {
  return {{"transcript_count", s.transcript_count},
          {"segment_count", s.segment_count},
          {"token_count", s.token_count},
          {"page_equivalents", s.page_equivalents}};
}

}  // namespace engage
