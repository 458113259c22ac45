#pragma once

// Seed derivation and shuffling with fully specified algorithms, so results
// do not depend on how a standard library implements its distributions.

#include <cstdint>
#include <numeric>
#include <random>
#include <string_view>
#include <vector>

#include "vfae/tensor.hpp"

namespace vfae {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Independent child seed for (`stream`, `index`) under `master`.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t index = 0) {
  std::uint64_t h = splitmix64(master);
  for (char c : stream) h = splitmix64(h ^ static_cast<unsigned char>(c));
  return splitmix64(h ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
}

/// Uniform integer in [0, n) by rejection, independent of the library.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

/// Fisher-Yates shuffle.
template <typename T>
void shuffle_in_place(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

inline std::vector<Index> shuffled_indices(Index n, std::mt19937_64& rng) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), Index{0});
  shuffle_in_place(v, rng);
  return v;
}

}  // namespace vfae
