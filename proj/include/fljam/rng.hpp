#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace fljam {

// Seeded random stream with hand-rolled distributions. std::mt19937_64 output
// is pinned by the standard, and the samplers below avoid the
// implementation-defined std::*_distribution algorithms, so a (seed, call
// sequence) pair reproduces bit-identically everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], rejection-sampled so the law is exact.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());  // full range
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller (cosine branch). Two words per draw.
  double normal() {
    const double u = 1.0 - uniform();  // (0, 1]
    const double v = uniform();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * kPi * v);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Exponential with given mean.
  double exponential(double mean) {
    return -mean * std::log(1.0 - uniform());
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;
  std::mt19937_64 engine_;
};

namespace detail {

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Derives independent named substreams from one master seed. All randomness in
// a simulation flows through here, keyed by (name, up to three indices), so
// e.g. the jamming draws can change without disturbing dataset synthesis.
class StreamFactory {
 public:
  explicit StreamFactory(std::uint64_t master_seed) : master_(master_seed) {}

  std::uint64_t master_seed() const { return master_; }

  Rng stream(std::string_view name, std::uint64_t a = 0, std::uint64_t b = 0,
             std::uint64_t c = 0) const {
    std::uint64_t h = detail::splitmix64(master_ ^ detail::fnv1a(name));
    h = detail::splitmix64(h ^ a);
    h = detail::splitmix64(h ^ b);
    h = detail::splitmix64(h ^ c);
    return Rng(h);
  }

 private:
  std::uint64_t master_;
};

}  // namespace fljam
