#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

namespace fm3d {

// mt19937_64 has a fully specified output sequence; the helpers below avoid
// the implementation-defined std distributions so that every stdlib produces
// the same numbers.
using Rng = std::mt19937_64;

// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

// Uniform integer in [0, n), n >= 1, by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = Rng::max() - Rng::max() % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

// Fisher-Yates.
template <typename U>
void shuffle(std::span<U> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = std::size_t(uniform_index(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

std::string save_rng_state(const Rng& rng);
void load_rng_state(Rng& rng, const std::string& state);

}  // namespace fm3d
