#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace coopfusion {

using RngStream = std::mt19937_64;

/// Independent, reproducible generator for a named consumer (one per sensor
/// per platform), so removing one consumer leaves every other sequence intact.
inline RngStream make_stream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : name) {
    h ^= c;
    h *= 1099511628211ull;
  }
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (h | 1ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  std::seed_seq seq{static_cast<std::uint32_t>(z), static_cast<std::uint32_t>(z >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return RngStream(seq);
}

}  // namespace coopfusion
