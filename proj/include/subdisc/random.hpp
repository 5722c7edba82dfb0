#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

namespace subdisc {

// mt19937_64's output sequence is fixed by the standard; the boost
// distributions are used instead of <random>'s because their algorithms are
// the same on every standard library, so seeded output is portable.
using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Sub-seed for the `index`-th child of `seed`:
///   derive_seed(seed, i) = splitmix64(seed + (i + 1) * 0x9E3779B97F4A7C15)
/// Stable across releases; changing it changes every seeded result.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

inline std::size_t uniform_index(Rng& rng, std::size_t upper_exclusive) {
  boost::random::uniform_int_distribution<std::size_t> dist(0, upper_exclusive - 1);
  return dist(rng);
}

inline double standard_normal(Rng& rng) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

/// k distinct indices from [0, n), uniformly, in draw order (partial Fisher-Yates).
inline std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + uniform_index(rng, n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

template <typename T>
void shuffle(Rng& rng, std::vector<T>& items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

}  // namespace subdisc
