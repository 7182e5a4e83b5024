#pragma once

#include <cstdint>
#include <random>
#include <vector>

// Deterministic RNG helpers. std::mt19937 produces the same stream on every
// platform, but the standard distributions do not, so the conversions to
// bounded ints and unit-interval reals live here instead.

namespace lgn {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed, e.g. one per epoch.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

// Unbiased integer in [0, n) via Lemire's multiply-shift rejection.
inline uint32_t uniform_u32(std::mt19937& rng, uint32_t n) {
  uint64_t m = uint64_t(rng()) * n;
  auto lo = uint32_t(m);
  if (lo < n) {
    uint32_t threshold = -n % n;
    while (lo < threshold) {
      m = uint64_t(rng()) * n;
      lo = uint32_t(m);
    }
  }
  return uint32_t(m >> 32);
}

// 53-bit double in [0, 1).
inline double uniform_real01(std::mt19937& rng) {
  uint32_t a = rng() >> 5, b = rng() >> 6;
  return (a * 67108864.0 + b) * (1.0 / 9007199254740992.0);
}

template <typename T>
void shuffle_fisher_yates(std::vector<T>& v, std::mt19937& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = uniform_u32(rng, uint32_t(i));
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct indices from [0, n), uniformly without replacement, in draw
// order. If forced >= 0 that index occupies slot 0 and the rest are drawn
// from the remainder.
inline std::vector<uint32_t> sample_without_replacement(std::mt19937& rng, uint32_t n, uint32_t k,
                                                        int64_t forced = -1) {
  std::vector<uint32_t> pool(n);
  for (uint32_t i = 0; i < n; ++i) pool[i] = i;
  uint32_t start = 0;
  if (forced >= 0) {
    std::swap(pool[0], pool[size_t(forced)]);
    start = 1;
  }
  for (uint32_t i = start; i < k; ++i) {
    uint32_t j = i + uniform_u32(rng, n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace lgn
