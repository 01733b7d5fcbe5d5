#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace imil {

using Rng = std::mt19937_64;

/// Derives an independent generator from a run seed and a stream path
/// (e.g. {epoch, purpose}). Same inputs always yield the same stream.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * stream.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto s : stream) push(s);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Stream identifiers, kept distinct so consumers never share draws.
namespace stream {
inline constexpr std::uint64_t kShuffle = 1;
inline constexpr std::uint64_t kAugment = 2;
inline constexpr std::uint64_t kInit = 3;
inline constexpr std::uint64_t kSplit = 4;
inline constexpr std::uint64_t kSynthetic = 5;
inline constexpr std::uint64_t kFeedback = 6;
}  // namespace stream

}  // namespace imil
