#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace hyfem {

// Independent generator for (seed, tags...), e.g. make_rng(seed, {client, round}).
inline std::mt19937_64 make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 * (tags.size() + 1));
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

}  // namespace hyfem
