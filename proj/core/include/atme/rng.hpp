#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace atme {

/// splitmix64 step (Steele/Lea/Flood). Used for seeding and for deriving
/// independent per-replication seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for replication `rep` derived from `master`. Replications get
/// disjoint, reproducible streams regardless of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t rep) {
  std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (rep + 1));
  return splitmix64(s);
}

/// xoshiro256++ (Blackman & Vigna, 2019 reference implementation).
/// Chosen over std::mt19937 because its output sequence is fully
/// specified: identical seeds give identical draws on every platform.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform draw in [0, 1) with 53 bits of mantissa.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform draw in (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller. Always consumes exactly two uniforms
  /// (no caching of the second variate) so the stream position is a pure
  /// function of the number of calls.
  double normal() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Index into a discrete distribution given cumulative probabilities.
  std::size_t discrete(const std::vector<double>& cum) {
    const double u = uniform();
    for (std::size_t i = 0; i + 1 < cum.size(); ++i)
      if (u < cum[i]) return i;
    return cum.empty() ? 0 : cum.size() - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_{};
};

}  // namespace atme
