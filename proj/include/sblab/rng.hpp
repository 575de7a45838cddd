#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sblab {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed of the named stream `name` under the master seed. Streams with
/// different names are statistically independent, so drawing more numbers
/// from one never shifts another.
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view name) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char ch : name) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  return splitmix64(master ^ splitmix64(h));
}

inline Rng make_stream(std::uint64_t master, std::string_view name) {
  return Rng(stream_seed(master, name));
}

/// Sub-stream by index (trial k of a Monte-Carlo loop, start k of a multi-start).
inline Rng make_substream(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(seed ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
}

}  // namespace sblab
