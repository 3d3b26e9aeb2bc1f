#pragma once

#include <cstdint>
#include <random>

namespace norst {

/// Counter-based seed splitting: every generator draws from
/// mt19937_64(splitmix64(seed, stream)) so each one is reproducible on its own.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  kSubspaceInit = 1,
  kSubspaceRotation = 2,
  kCoefficients = 3,
  kMissing = 4,
  kOutlierSupport = 5,
  kOutlierValues = 6,
  kNoise = 7,
  kSvd = 8,
  kBench = 9,
};

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t counter = 0) {
  const auto tag = static_cast<std::uint64_t>(stream);
  return Rng(splitmix64(splitmix64(seed ^ (tag << 56)) + counter));
}

}  // namespace norst
