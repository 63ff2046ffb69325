#pragma once

#include <cstdint>
#include <random>

namespace qsynth {

// Deterministic random source. Every random draw in the library flows through
// one of these so that a fixed seed reproduces a run exactly when
// single-threaded. Child streams decouple independent concerns (target
// sampling, exploration noise, optimizer restarts) from each other.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() { return unit_(engine_); }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal draw.
  double normal() { return normal_(engine_); }

  /// Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }

  /// Next raw 64-bit engine output.
  std::uint64_t raw() { return engine_(); }

  /// Independent child stream (optionally salted), derived from this stream.
  Rng child(std::uint64_t salt = 0) { return Rng(splitmix(engine_() ^ salt)); }

  /// Stateless stream derivation: same (seed, salt) always gives same stream.
  static Rng from(std::uint64_t seed, std::uint64_t salt) {
    return Rng(splitmix(seed ^ splitmix(salt)));
  }

  template <class It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace qsynth
