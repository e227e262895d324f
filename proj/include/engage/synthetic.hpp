#pragma once

// Seeded synthetic lesson corpus with planted engaging messages.
//
// Ground truth: every planted message is recorded exactly as a gold
// annotation, and the discriminative token set is the message vocabulary,
// reported in `discriminative_tokens` ordered from most to least likely.
//
// Generation, per transcript, walks `segments_per_transcript` slots. Each
// slot independently (probability `message_rate`) plants a message of
// 1..max_message_segments segments; otherwise it emits one background
// segment. The planted count over all slots is therefore exactly
// Binomial(transcript_count * segments_per_transcript, message_rate).
// Tokens in message segments come from the message vocabulary with
// probability `keyword_injection` and from the background vocabulary
// otherwise; each message is guaranteed at least one message-vocabulary
// token. Background tokens leak in from the message vocabulary with
// probability `background_leak`. Both vocabularies are Zipf-distributed.
//
// All sampling is implemented on top of std::mt19937_64 output directly, so
// a seed gives the same corpus on every platform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "engage/codebook.hpp"
#include "engage/corpus.hpp"
#include "engage/error.hpp"
#include "engage/normalize.hpp"

namespace engage {

struct SynthesisParams {
  std::uint64_t seed = 7;
  std::size_t transcript_count = 24;
  std::size_t segments_per_transcript = 250;
  std::size_t background_vocabulary = 4000;
  std::size_t message_vocabulary = 110;
  double message_rate = 0.03;
  double keyword_injection = 0.4;
  double background_leak = 0.001;
  std::size_t min_tokens = 6;
  std::size_t max_tokens = 14;
  std::size_t max_message_segments = 2;

  void validate() const {
    const auto bad = [](const std::string& why) { return Error(ErrorCode::InvalidArgument, why); };
    if (transcript_count == 0 || segments_per_transcript == 0) throw bad("counts must be positive");
    if (background_vocabulary == 0 || message_vocabulary == 0) throw bad("vocabulary sizes must be positive");
    if (background_vocabulary + message_vocabulary > 300000) throw bad("vocabulary too large");
    if (!(message_rate > 0.0 && message_rate < 1.0)) throw bad("message_rate must lie in (0, 1)");
    if (!(keyword_injection > 0.0 && keyword_injection <= 1.0)) throw bad("keyword_injection must lie in (0, 1]");
    if (!(background_leak >= 0.0 && background_leak < 1.0)) throw bad("background_leak must lie in [0, 1)");
    if (min_tokens == 0 || max_tokens < min_tokens) throw bad("token range invalid");
    if (max_message_segments == 0) throw bad("max_message_segments must be positive");
  }
};

inline nlohmann::json to_json(const SynthesisParams& p) {
  return {{"seed", p.seed},
          {"transcript_count", p.transcript_count},
          {"segments_per_transcript", p.segments_per_transcript},
          {"background_vocabulary", p.background_vocabulary},
          {"message_vocabulary", p.message_vocabulary},
          {"message_rate", p.message_rate},
          {"keyword_injection", p.keyword_injection},
          {"background_leak", p.background_leak},
          {"min_tokens", p.min_tokens},
          {"max_tokens", p.max_tokens},
          {"max_message_segments", p.max_message_segments}};
}

struct SyntheticCorpus {
  Corpus corpus;
  std::vector<MessageAnnotation> gold;
  std::vector<std::string> discriminative_tokens;
};

namespace detail {

class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 engine_;
};

class ZipfSampler {
 public:
  explicit ZipfSampler(std::size_t n, double exponent = 1.0) : cdf_(n) {
    double acc = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      acc += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cdf_[r] = acc;
    }
    for (double& c : cdf_) c /= acc;
  }
  std::size_t operator()(SynthRng& rng) const {
    const double u = rng.uniform();
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
  }

 private:
  std::vector<double> cdf_;
};

/// Pseudo-word for an index: three consonant-vowel syllables, scrambled so
/// neighbouring indices do not look alike. Injective below 70^3.
inline std::string pseudo_word(std::size_t index) {
  static constexpr char kCons[] = "bcdfgklmnprstv";
  static constexpr char kVow[] = "aeiou";
  constexpr std::size_t kSyl = 14 * 5;
  constexpr std::size_t kSpace = kSyl * kSyl * kSyl;
  std::size_t k = (index * 7919 + 13) % kSpace;
  std::string w;
  for (int s = 0; s < 3; ++s) {
    const std::size_t syl = k % kSyl;
    k /= kSyl;
    w.push_back(kCons[syl / 5]);
    w.push_back(kVow[syl % 5]);
  }
  return w;
}

inline std::string render_segment(const std::vector<std::string>& words) {
  std::string text;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) text.push_back(' ');
    text += words[i];
  }
  if (!text.empty()) text[0] = static_cast<char>(text[0] - 'a' + 'A');
  text.push_back('.');
  return text;
}

}  // namespace detail

inline SyntheticCorpus generate_synthetic_corpus(const SynthesisParams& params) {
  params.validate();
  detail::SynthRng rng(params.seed);
  const detail::ZipfSampler background_dist(params.background_vocabulary);
  const detail::ZipfSampler message_dist(params.message_vocabulary);
  const auto background_word = [&](std::size_t r) { return detail::pseudo_word(r); };
  const auto message_word = [&](std::size_t r) { return detail::pseudo_word(params.background_vocabulary + r); };

  SyntheticCorpus out;
  out.corpus.group_registry = default_group_registry();
  for (std::size_t r = 0; r < params.message_vocabulary; ++r) out.discriminative_tokens.push_back(message_word(r));

  const auto token_count = [&] { return params.min_tokens + rng.below(params.max_tokens - params.min_tokens + 1); };
  std::size_t gold_seq = 0;
  char buf[32];
  for (std::size_t t = 0; t < params.transcript_count; ++t) {
    Transcript tr;
    std::snprintf(buf, sizeof buf, "t%04zu", t);
    tr.id = buf;
    std::snprintf(buf, sizeof buf, "T%03zu", t % 75);
    tr.teacher_id = buf;
    std::snprintf(buf, sizeof buf, "G%04zu", t);
    tr.group_id = buf;
    tr.grade = kMinGrade + static_cast<int>(t % 4);
    tr.trimester = kMinTrimester + static_cast<int>((t / 4) % 3);
    tr.academic_year = (t / 12) % 2 == 0 ? "2021-2022" : "2022-2023";

    const auto push_segment = [&](std::vector<std::string> words) {
      Segment s;
      s.index = tr.segments.size();
      std::snprintf(buf, sizeof buf, "s%05zu", s.index);
      s.id = buf;
      s.text = detail::render_segment(words);
      s.token_count = normalize(s.text, NormalizationConfig{}).size();
      tr.segments.push_back(std::move(s));
    };

    for (std::size_t slot = 0; slot < params.segments_per_transcript; ++slot) {
      if (!rng.bernoulli(params.message_rate)) {
        std::vector<std::string> words(token_count());
        for (auto& w : words)
          w = rng.bernoulli(params.background_leak) ? message_word(message_dist(rng)) : background_word(background_dist(rng));
        push_segment(std::move(words));
        continue;
      }
      const std::size_t length = 1 + rng.below(params.max_message_segments);
      std::vector<std::vector<std::string>> body(length);
      bool has_keyword = false;
      for (auto& words : body) {
        words.resize(token_count());
        for (auto& w : words) {
          if (rng.bernoulli(params.keyword_injection)) {
            w = message_word(message_dist(rng));
            has_keyword = true;
          } else {
            w = background_word(background_dist(rng));
          }
        }
      }
      if (!has_keyword) body[0][rng.below(body[0].size())] = message_word(message_dist(rng));

      MessageAnnotation a;
      std::snprintf(buf, sizeof buf, "g%06zu", gold_seq);
      a.id = buf;
      a.coder_id = "gold";
      a.transcript_id = tr.id;
      a.span = {tr.segments.size(), tr.segments.size() + length - 1};
      a.decision = Decision::message(Category::from_index(static_cast<int>(rng.below(kCategoryCount))));
      a.created_at = ++gold_seq;
      out.gold.push_back(std::move(a));
      for (auto& words : body) push_segment(std::move(words));
    }
    out.corpus.transcripts.push_back(std::move(tr));
  }
  return out;
}

}  // namespace engage
