#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace relrank {

using Engine = std::mt19937_64;

/// Named purposes for derived random streams. Each consumer of randomness
/// draws from its own stream so that adding draws in one place never
/// shifts the sequence seen by another.
enum class Stream : std::uint64_t {
  init = 1,
  initial_selection,
  pairing,
  training,
  posterior,
  random_selection,
  split,
  test_pairs,
  validation_pairs,
  oracle,
  synth,
};

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds a key path into a single 64-bit seed. Order of keys matters.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = mix64(base);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Engine make_engine(std::uint64_t base, Stream stream, std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = derive_seed(base, {static_cast<std::uint64_t>(stream)});
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return Engine{h};
}

/// Uniform double in [0, 1) from the top 53 bits of one engine output.
inline double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
inline std::uint64_t uniform_index(Engine& rng, std::uint64_t n) {
  const std::uint64_t limit = Engine::max() - Engine::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace relrank
