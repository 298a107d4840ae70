#pragma once

#include <cstdint>
#include <random>

namespace dmshm {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates seeds derived from one base seed.
constexpr std::uint64_t mix_seed(std::uint64_t v) noexcept {
  v += 0x9E3779B97F4A7C15ULL;
  v = (v ^ (v >> 30)) * 0xBF58476D1CE4E5B9ULL;
  v = (v ^ (v >> 27)) * 0x94D049BB133111EBULL;
  return v ^ (v >> 31);
}

/// Seed for an independent sub-stream `(purpose, index)` of `base`.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t purpose,
                                    std::uint64_t index = 0) noexcept {
  return mix_seed(mix_seed(mix_seed(base) ^ purpose) ^ index);
}

}  // namespace dmshm
