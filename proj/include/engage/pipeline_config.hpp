#pragma once

// One JSON document configuring every pipeline stage. Its hash stamps every
// CLI output. `paths` is carried along but excluded from the hash, so moving
// a data directory does not change the stamp.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "engage/corpus.hpp"
#include "engage/error.hpp"
#include "engage/hash.hpp"
#include "engage/keyness.hpp"
#include "engage/normalize.hpp"
#include "engage/reliability.hpp"
#include "engage/selection.hpp"
#include "engage/synthetic.hpp"

namespace engage {

struct PipelineConfig {
  NormalizationConfig normalization;
  double alpha = kDefaultAlpha;
  std::set<int> sizes = default_size_grid();
  std::size_t window = 0;
  int words_per_page = kDefaultWordsPerPage;
  SelectionPolicy selection;
  double overlap_threshold = kDefaultOverlapThreshold;
  SynthesisParams synthesis;  // synthesis.seed is the pipeline seed
  nlohmann::json paths = nlohmann::json::object();

  void validate() const {
    normalization.validate();
    if (!(alpha > 0.0)) throw Error(ErrorCode::InvalidArgument, "alpha must be positive", {{"alpha", alpha}});
    if (sizes.empty() || *sizes.begin() < 1)
      throw Error(ErrorCode::InvalidArgument, "size grid must hold positive sizes");
    if (words_per_page < 1) throw Error(ErrorCode::InvalidArgument, "words_per_page must be >= 1");
    selection.validate();
    if (!(overlap_threshold > 0.0 && overlap_threshold <= 1.0))
      throw Error(ErrorCode::InvalidArgument, "overlap_threshold must lie in (0, 1]");
    synthesis.validate();
  }

  /// Everything except paths.
  nlohmann::json hashed_json() const {
    return {{"normalization", normalization},
            {"alpha", alpha},
            {"sizes", sizes},
            {"window", window},
            {"words_per_page", words_per_page},
            {"selection", {{"recall_threshold", selection.recall_threshold}}},
            {"overlap_threshold", overlap_threshold},
            {"synthesis", to_json(synthesis)}};
  }

  nlohmann::json to_json_doc() const {
    auto j = hashed_json();
    j["paths"] = paths;
    return j;
  }

  std::string hash() const { return config_hash(hashed_json()); }
};

inline SynthesisParams synthesis_from_json(const nlohmann::json& j) {
  SynthesisParams p;
  p.seed = j.value("seed", p.seed);
  p.transcript_count = j.value("transcript_count", p.transcript_count);
  p.segments_per_transcript = j.value("segments_per_transcript", p.segments_per_transcript);
  p.background_vocabulary = j.value("background_vocabulary", p.background_vocabulary);
  p.message_vocabulary = j.value("message_vocabulary", p.message_vocabulary);
  p.message_rate = j.value("message_rate", p.message_rate);
  p.keyword_injection = j.value("keyword_injection", p.keyword_injection);
  p.background_leak = j.value("background_leak", p.background_leak);
  p.min_tokens = j.value("min_tokens", p.min_tokens);
  p.max_tokens = j.value("max_tokens", p.max_tokens);
  p.max_message_segments = j.value("max_message_segments", p.max_message_segments);
  return p;
}

/// Missing keys keep their defaults; unknown top-level keys are rejected.
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"normalization", "alpha",             "sizes",     "window",
                                              "words_per_page", "selection",        "overlap_threshold",
                                              "synthesis",     "seed",              "paths"};
  if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "pipeline config must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw Error(ErrorCode::InvalidArgument, "unknown config key '" + k + "'");
  PipelineConfig c;
  try {
    if (j.contains("normalization")) c.normalization = j["normalization"].get<NormalizationConfig>();
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("sizes")) c.sizes = j["sizes"].get<std::set<int>>();
    c.window = j.value("window", c.window);
    c.words_per_page = j.value("words_per_page", c.words_per_page);
    if (j.contains("selection"))
      c.selection.recall_threshold = j["selection"].value("recall_threshold", c.selection.recall_threshold);
    c.overlap_threshold = j.value("overlap_threshold", c.overlap_threshold);
    if (j.contains("synthesis")) c.synthesis = synthesis_from_json(j["synthesis"]);
    if (j.contains("seed")) c.synthesis.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("paths")) c.paths = j["paths"];
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, "cannot open config " + path.string(), {{"path", path.string()}});
  try {
    return pipeline_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("config is not valid JSON: ") + e.what(),
                {{"path", path.string()}});
  }
}

}  // namespace engage
