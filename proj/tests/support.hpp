#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "engage/engage.hpp"

namespace support {

inline engage::Transcript make_transcript(const std::string& id, const std::vector<std::string>& texts, int grade = 9,
                                          int trimester = 1) {
  std::vector<engage::Segment> segs;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    engage::Segment s;
    s.id = "s" + std::to_string(i);
    s.index = i;
    s.text = texts[i];
    s.silence = texts[i].empty();
    segs.push_back(s);
  }
  return engage::detail::assemble_transcript({id, "T1", "G-" + id, grade, trimester, "2021-2022"}, std::move(segs),
                                             engage::NormalizationConfig{});
}

inline engage::MessageAnnotation message(const std::string& id, const std::string& coder, const std::string& transcript,
                                         std::size_t start, std::size_t end,
                                         engage::Category c = {engage::Frame::Gain, engage::Appeal::Extrinsic}) {
  engage::MessageAnnotation a;
  a.id = id;
  a.coder_id = coder;
  a.transcript_id = transcript;
  a.span = {start, end};
  a.decision = engage::Decision::message(c);
  return a;
}

inline engage::Category category(int i) { return engage::Category::from_index(i); }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("engage-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

struct Rng {
  std::mt19937_64 engine;
  explicit Rng(std::uint64_t seed) : engine(seed) {}
  std::size_t below(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(engine); }
};

/// Random segments over a small vocabulary "w0".."w{v-1}".
inline std::vector<std::vector<std::string>> random_segments(Rng& rng, std::size_t n, std::size_t vocab,
                                                             std::size_t max_len = 6) {
  std::vector<std::vector<std::string>> out(n);
  for (auto& seg : out) {
    seg.resize(rng.below(max_len + 1));
    for (auto& t : seg) t = "w" + std::to_string(rng.below(vocab));
  }
  return out;
}

inline std::vector<std::string> join_each(const std::vector<std::vector<std::string>>& segs) {
  std::vector<std::string> out;
  for (const auto& s : segs) out.push_back(engage::join_tokens(s));
  return out;
}

}  // namespace support
