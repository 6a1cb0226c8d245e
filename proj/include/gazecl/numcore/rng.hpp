#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gazecl::numcore {

// Deterministic random stream. std::mt19937_64 has a standard-specified
// output sequence, and all value transforms below are written out explicitly
// instead of going through std:: distributions (whose algorithms are
// implementation-defined), so a seed pins every draw.
//
// fork(k) derives an independent child stream from the parent's base seed
// and k alone; it never consumes parent state. Substream trees such as
// (corpus seed -> viewer -> recording) are therefore reproducible and safe
// to evaluate in parallel.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(0x6a09e667f3bcc908ULL, seed)) {}

  std::uint64_t seed() const { return seed_; }

  Rng fork(std::uint64_t k) const { return Rng(mix(seed_, k)); }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive. Rejection sampling keeps the
  // draw unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next_u64());  // full range
    const std::uint64_t limit = (~std::uint64_t{0} / range) * range;
    std::uint64_t u;
    do {
      u = next_u64();
    } while (u >= limit);
    return lo + static_cast<std::int64_t>(u % range);
  }

  // Box-Muller without caching, so the number of raw draws per call is fixed.
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace gazecl::numcore
