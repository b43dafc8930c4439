#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace semicount {

// splitmix64 finalizer; the workhorse for deriving independent seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, for folding string ids into seeds.
inline std::uint64_t hash_str(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed) { return splitmix64(seed); }

// Order-sensitive mix: mix_seed(s,a,b) != mix_seed(s,b,a) in general.
template <class... Rest>
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t v, Rest... rest) {
  return mix_seed(splitmix64(seed ^ splitmix64(v)), rest...);
}

inline std::uint64_t tag_seed(std::uint64_t seed, std::string_view tag) {
  return splitmix64(seed ^ hash_str(tag));
}

using Rng = std::mt19937_64;

// Canonical double in [0,1); bit-stable across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Integer in [lo, hi] inclusive. Modulo bias is irrelevant at these ranges
// but rejection keeps draws exactly uniform.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
  std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  std::uint64_t limit = std::uint64_t(-1) - (std::uint64_t(-1) % span);
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit && span != 0);
  return lo + static_cast<std::int64_t>(v % span);
}

// Marsaglia polar; two uniforms per accepted pair, cached second value
// deliberately not kept so each call is stateless given the rng.
inline double normal(Rng& rng, double mean = 0.0, double stddev = 1.0) {
  double u, v, s;
  do {
    u = 2.0 * uniform01(rng) - 1.0;
    v = 2.0 * uniform01(rng) - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return mean + stddev * u * std::sqrt(-2.0 * std::log(s) / s);
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i - 1)));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace semicount
