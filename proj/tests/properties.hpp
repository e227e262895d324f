#pragma once

// Randomized filtering instances and the property checks run over them.
// Each check returns an empty string on success, else a description.

#include <string>
#include <vector>

#include "engage/engage.hpp"
#include "oracles/oracles.hpp"
#include "support.hpp"

namespace props {

struct FilterInstance {
  engage::Corpus corpus;
  std::vector<std::vector<std::vector<std::string>>> tokens;  // per transcript, per segment
  engage::KeywordList small;                                  // small ⊆ large
  engage::KeywordList large;
  std::size_t w1 = 0;  // w1 <= w2
  std::size_t w2 = 0;
  std::vector<engage::MessageAnnotation> gold;
};

inline FilterInstance make_instance(support::Rng& rng) {
  FilterInstance inst;
  const std::size_t vocab = 4 + rng.below(20);
  const std::size_t transcripts = 1 + rng.below(3);
  for (std::size_t t = 0; t < transcripts; ++t) {
    auto segs = support::random_segments(rng, 1 + rng.below(25), vocab);
    const std::string id = "t" + std::to_string(t);
    inst.corpus.transcripts.push_back(support::make_transcript(id, support::join_each(segs), 9 + static_cast<int>(t % 4)));
    for (std::size_t g = 0; g < segs.size(); ++g) {
      if (!rng.coin(0.15)) continue;
      const std::size_t end = std::min(segs.size() - 1, g + rng.below(3));
      bool has_tokens = false;
      for (std::size_t i = g; i <= end; ++i) has_tokens = has_tokens || !segs[i].empty();
      if (has_tokens)
        inst.gold.push_back(support::message(id + "-g" + std::to_string(g), "gold", id, g, end));
    }
    inst.tokens.push_back(std::move(segs));
  }
  std::vector<std::string> small, large;
  for (std::size_t v = 0; v < vocab; ++v) {
    const std::string w = "w" + std::to_string(v);
    const int r = static_cast<int>(rng.below(4));
    if (r == 0) small.push_back(w);
    if (r <= 1) large.push_back(w);
  }
  if (small.empty()) small.push_back("w0");
  if (std::find(large.begin(), large.end(), small[0]) == large.end()) large.push_back(small[0]);
  inst.small = engage::make_keyword_list("small", small);
  inst.large = engage::make_keyword_list("large", large);
  inst.w1 = rng.below(3);
  inst.w2 = inst.w1 + rng.below(3);
  return inst;
}

inline bool subset(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

inline std::string check_oracle(const FilterInstance& inst) {
  for (std::size_t t = 0; t < inst.corpus.transcripts.size(); ++t) {
    const auto got = engage::filter_transcript(inst.corpus.transcripts[t], inst.large, inst.w1).retained;
    if (got != oracle::retained(inst.tokens[t], inst.large.as_set(), inst.w1)) return "oracle mismatch";
  }
  return {};
}

inline std::string check_monotone(const FilterInstance& inst) {
  for (std::size_t w : {inst.w1, inst.w2}) {
    const auto a = engage::filter_corpus(inst.corpus, inst.small, w);
    const auto b = engage::filter_corpus(inst.corpus, inst.large, w);
    for (std::size_t t = 0; t < a.transcripts.size(); ++t)
      if (!subset(a.transcripts[t].retained, b.transcripts[t].retained)) return "list monotonicity violated";
  }
  return {};
}

inline std::string check_window_monotone(const FilterInstance& inst) {
  const auto a = engage::filter_corpus(inst.corpus, inst.large, inst.w1);
  const auto b = engage::filter_corpus(inst.corpus, inst.large, inst.w2);
  for (std::size_t t = 0; t < a.transcripts.size(); ++t)
    if (!subset(a.transcripts[t].retained, b.transcripts[t].retained)) return "window monotonicity violated";
  return {};
}

/// Filtering the retained sub-corpus again with the same list and window
/// keeps every segment of it.
inline std::string check_idempotent(const FilterInstance& inst) {
  const auto first = engage::filter_corpus(inst.corpus, inst.large, inst.w1);
  for (std::size_t t = 0; t < first.transcripts.size(); ++t) {
    const auto& kept = first.transcripts[t].retained;
    if (kept.empty()) continue;
    std::vector<std::string> texts;
    for (std::size_t i : kept) texts.push_back(inst.corpus.transcripts[t].segments[i].text);
    const auto sub = support::make_transcript("sub", texts);
    const auto second = engage::filter_transcript(sub, inst.large, inst.w1);
    if (second.retained.size() != texts.size()) return "idempotence violated";
  }
  return {};
}

inline std::string check_completeness(const FilterInstance& inst) {
  if (inst.gold.empty()) return {};
  const auto list = engage::completeness_list(inst.corpus, inst.gold);
  const auto set = engage::filter_corpus(inst.corpus, list, 0);
  const auto r = engage::recall_report(inst.corpus, set.transcripts, inst.gold);
  return r.recall == 1.0 ? std::string() : "completeness recall " + std::to_string(r.recall);
}

}  // namespace props
