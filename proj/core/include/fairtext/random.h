#pragma once

#include <cstdint>
#include <string_view>

namespace fairtext {

// Small, fully specified random primitives. Standard library distributions
// are implementation-defined, which would make seeded output differ across
// toolchains.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Uniform integer in [0, bound) by rejection; bound must be > 0.
template <typename Engine>
std::uint64_t uniform_below(Engine& engine, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t draw;
  do {
    draw = static_cast<std::uint64_t>(engine());
  } while (draw >= limit);
  return draw % bound;
}

// Uniform double in [0, 1) from the top 53 bits.
template <typename Engine>
double uniform_unit(Engine& engine) {
  return static_cast<double>(static_cast<std::uint64_t>(engine()) >> 11) *
         0x1.0p-53;
}

}  // namespace fairtext
