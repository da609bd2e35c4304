#ifndef CROSSPOP_RNG_HPP
#define CROSSPOP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace crosspop {

// Deterministic, self-contained RNG so that draw streams are identical
// across platforms and builds. xoshiro256++ seeded through splitmix64.
// Substreams are derived by folding a list of stream ids into the seed,
// which lets parallel workers own statistically independent streams keyed
// by (seed, draw, country, ...) without any shared state.
class Rng {
public:
  explicit Rng(std::uint64_t seed) { seed_state(seed); }

  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
    std::uint64_t x = seed;
    for (std::uint64_t id : stream) x = splitmix64(x ^ (id + 0x9e3779b97f4a7c15ULL));
    seed_state(x);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via the Marsaglia polar method. The second value of
  // each accepted pair is discarded; the stream stays reproducible.
  double normal() {
    for (;;) {
      const double u = 2.0 * uniform() - 1.0;
      const double v = 2.0 * uniform() - 1.0;
      const double r2 = u * u + v * v;
      if (r2 > 0.0 && r2 < 1.0) return u * std::sqrt(-2.0 * std::log(r2) / r2);
    }
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Uniform integer in [lo, hi] inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    // Rejection to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return lo + static_cast<std::int64_t>(r % span);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  void seed_state(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& w : s_) {
      x = splitmix64(x);
      w = x;
    }
    // All-zero state is invalid for xoshiro; splitmix64 never yields four
    // zero words from any seed, but guard anyway.
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x1ULL;
  }

  std::uint64_t s_[4];
};

} // namespace crosspop

#endif
