#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "engage/detail/utf8.hpp"
#include "engage/error.hpp"

namespace engage {

struct NormalizationConfig {
  bool lowercase = true;
  bool strip_diacritics = true;
  bool strip_punctuation = true;
  bool drop_numeric_tokens = true;
  std::set<std::string> stoplist;  // compared after the earlier steps
  int min_token_length = 2;        // in code points

  void validate() const {
    if (min_token_length < 1)
      throw Error(ErrorCode::InvalidArgument, "min_token_length must be >= 1",
                  {{"min_token_length", min_token_length}});
  }

  friend bool operator==(const NormalizationConfig&, const NormalizationConfig&) = default;
};

inline void to_json(nlohmann::json& j, const NormalizationConfig& c) {
  j = {{"lowercase", c.lowercase},
       {"strip_diacritics", c.strip_diacritics},
       {"strip_punctuation", c.strip_punctuation},
       {"drop_numeric_tokens", c.drop_numeric_tokens},
       {"stoplist", c.stoplist},
       {"min_token_length", c.min_token_length}};
}

inline void from_json(const nlohmann::json& j, NormalizationConfig& c) {
  NormalizationConfig d;
  c.lowercase = j.value("lowercase", d.lowercase);
  c.strip_diacritics = j.value("strip_diacritics", d.strip_diacritics);
  c.strip_punctuation = j.value("strip_punctuation", d.strip_punctuation);
  c.drop_numeric_tokens = j.value("drop_numeric_tokens", d.drop_numeric_tokens);
  c.stoplist = j.value("stoplist", std::set<std::string>{});
  c.min_token_length = j.value("min_token_length", d.min_token_length);
  c.validate();
}

namespace detail {

// Intra-word joiners: apostrophes and periods glue word characters together
// ("don't", "p.ej."); comma only glues digits ("3,5").
constexpr bool is_word_joiner(char32_t c) noexcept {
  return c == U'\'' || c == 0x2019 || c == U'.' || c == 0xB7;
}
constexpr bool is_numeric_joiner(char32_t c) noexcept { return c == U',' || c == U';'; }

/// Word segmentation: maximal runs of word characters, allowing a single
/// joiner between two word characters. A combining mark is a word character
/// only when it attaches to one. Everything else is a boundary.
inline std::vector<std::u32string> segment_words(std::u32string_view text) {
  const std::size_t n = text.size();
  std::vector<bool> word(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const char32_t c = text[i];
    word[i] = is_combining_mark(c) ? (i > 0 && word[i - 1]) : is_word_char(c);
  }

  std::vector<std::u32string> words;
  std::u32string cur;
  for (std::size_t i = 0; i < n; ++i) {
    const char32_t c = text[i];
    if (word[i]) {
      cur.push_back(c);
      continue;
    }
    const bool between = !cur.empty() && i + 1 < n && word[i + 1] && !is_combining_mark(text[i + 1]);
    if (between && is_word_joiner(c)) {
      cur.push_back(c);
      continue;
    }
    if (between && is_numeric_joiner(c) && is_digit(cur.back()) && is_digit(text[i + 1])) {
      cur.push_back(c);
      continue;
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    cur.clear();
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

}  // namespace detail

/// Text to normalized tokens. Steps run in a fixed order: word segmentation,
/// lowercase, strip diacritics, strip punctuation, drop numerics, drop
/// stoplist, drop short tokens. Output never contains whitespace, so
/// normalize(join(normalize(t))) == normalize(t).
inline std::vector<std::string> normalize(std::string_view text, const NormalizationConfig& config) {
  std::vector<std::string> out;
  for (std::u32string word : detail::segment_words(detail::decode_utf8(text))) {
    if (config.lowercase) {
      for (char32_t& c : word) c = detail::to_lower(c);
    }
    if (config.strip_diacritics) {
      std::u32string stripped;
      stripped.reserve(word.size());
      for (char32_t c : word) {
        if (const char32_t base = detail::strip_diacritic(c); base != 0) stripped.push_back(base);
      }
      word = std::move(stripped);
    }
    if (config.strip_punctuation) {
      std::erase_if(word, [](char32_t c) { return !detail::is_word_char(c); });
    }
    if (word.empty()) continue;
    if (config.drop_numeric_tokens) {
      const bool has_digit = std::any_of(word.begin(), word.end(), detail::is_digit);
      const bool has_letter = std::any_of(word.begin(), word.end(), detail::is_letter);
      if (has_digit && !has_letter) continue;
    }
    std::string token = detail::encode_utf8(word);
    if (config.stoplist.contains(token)) continue;
    if (static_cast<int>(word.size()) < config.min_token_length) continue;
    out.push_back(std::move(token));
  }
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace engage
