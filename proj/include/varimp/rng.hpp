#pragma once

#include <cstdint>
#include <cstring>
#include <string_view>
#include <vector>

#include "varimp/core.hpp"

namespace varimp {

// Splittable counter-based RNG. Streams are identified by a 64-bit key;
// output i is a mix of (key, i), so any stream can be sampled at any
// offset and derived streams never overlap by construction.

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_u64(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ mix64(v));
}

inline std::uint64_t hash_str(std::uint64_t seed, std::string_view s) {
  // FNV-1a folded into the stream key.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hash_u64(seed, h);
}

/// Key identifying one RNG stream; child() derives disjoint sub-streams.
struct RngKey {
  std::uint64_t key = 0;

  explicit RngKey(std::uint64_t seed = 0) : key(mix64(seed)) {}

  RngKey child(std::string_view tag) const {
    RngKey k(0);
    k.key = hash_str(key, tag);
    return k;
  }
  RngKey child(std::uint64_t index) const {
    RngKey k(0);
    k.key = hash_u64(key, index);
    return k;
  }
  RngKey child(std::string_view tag, std::uint64_t index) const {
    return child(tag).child(index);
  }
};

class RngStream {
 public:
  explicit RngStream(RngKey k) : key_(k.key) {}
  explicit RngStream(std::uint64_t seed) : key_(RngKey(seed).key) {}

  std::uint64_t next_u64() { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard normal via Box-Muller; pairs are cached.
  double next_normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    have_cached_ = true;
    return r * std::cos(theta);
  }

  double next_normal(double mu, double sigma) { return mu + sigma * next_normal(); }

  /// Unbiased integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw config_error("next_below: n must be positive");
    const std::uint64_t threshold = (~n + 1) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

  /// k distinct indices from [0, n), in random order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k) {
    if (k > n) throw config_error("sample_without_replacement: k > n");
    std::vector<std::size_t> p = permutation(n);
    p.resize(k);
    return p;
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace varimp
