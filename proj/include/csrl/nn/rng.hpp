#pragma once

#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

namespace csrl::nn {

// Deterministic helpers over std::mt19937_64. std::uniform_*_distribution
// is implementation-defined, so results would differ across standard
// libraries; these keep sampled values reproducible everywhere.

// Uniform double in [0, 1) with 53 random bits.
inline double rand_unit(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline double rand_uniform(std::mt19937_64& g, double lo, double hi) {
  return lo + (hi - lo) * rand_unit(g);
}

// Uniform index in [0, n) via rejection sampling.
inline std::size_t rand_index(std::mt19937_64& g, std::size_t n) {
  if (n == 0) throw std::invalid_argument("rand_index: empty range");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = g();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rand_index(g, i)]);
}

// k distinct indices drawn from [0, n), in draw order.
inline std::vector<int> sample_without_replacement(std::mt19937_64& g,
                                                   std::size_t n,
                                                   std::size_t k) {
  if (k > n)
    throw std::invalid_argument("sample_without_replacement: k exceeds n");
  std::vector<int> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<int>(i);
  std::vector<int> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    std::size_t j = i + rand_index(g, n - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace csrl::nn
