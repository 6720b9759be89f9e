#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Seeded randomness helpers. std::uniform_int_distribution and friends are
// not pinned across standard library implementations, so every draw that can
// end up in a persisted artifact goes through these fixed algorithms instead.
namespace odm::rng {

using Engine = std::mt19937_64;

inline Engine make(std::uint64_t seed) { return Engine(seed); }

// splitmix64 finalizer; spreads low-entropy seeds across the state space.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derive an independent stream for a named sub-task of a run seed.
inline Engine fork(std::uint64_t seed, std::uint64_t stream) {
  return Engine(mix64(seed ^ mix64(stream)));
}

inline std::uint64_t next_u64(Engine& g) { return g(); }

// Unbiased index in [0, n) via rejection sampling.
inline std::size_t uniform_index(Engine& g, std::size_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = g();
  while (v >= limit) v = g();
  return static_cast<std::size_t>(v % n);
}

// Uniform double in [0, 1) with 53 bits of precision.
inline double uniform01(Engine& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

inline float uniformf(Engine& g, float lo, float hi) {
  return lo + static_cast<float>(uniform01(g)) * (hi - lo);
}

inline int uniform_int(Engine& g, int lo, int hi) {  // inclusive range
  return lo + static_cast<int>(uniform_index(g, static_cast<std::size_t>(hi - lo + 1)));
}

// Standard normal via Box-Muller.
inline float normalf(Engine& g) {
  double u1 = uniform01(g);
  while (u1 <= 0.0) u1 = uniform01(g);
  const double u2 = uniform01(g);
  return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) *
                            std::cos(2.0 * 3.14159265358979323846 * u2));
}

template <class T>
void shuffle(std::vector<T>& v, Engine& g) {  // Fisher-Yates
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[uniform_index(g, i)]);
  }
}

// k distinct indices drawn from [0, n), in draw order.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Engine& g) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k && i < n; ++i) {
    const std::size_t j = i + uniform_index(g, n - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

}  // namespace odm::rng
