#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace mtbias {

/// Counter-based random numbers: every draw is a pure function of a key
/// (seed, individual, node, ...). Editing one part of a model never shifts the
/// draws of unrelated nodes, and any subset of individuals can be generated
/// in any order or on any thread with identical results.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  constexpr std::uint64_t bits(std::initializer_list<std::uint64_t> counter) const {
    std::uint64_t h = mix(seed_);
    for (auto c : counter) h = mix(h ^ mix(c + 0x632BE59BD9B4E019ULL));
    return h;
  }

  /// Uniform on the open interval (0, 1).
  constexpr double uniform(std::initializer_list<std::uint64_t> counter) const {
    return (static_cast<double>(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on two derived uniforms.
  double normal(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) const {
    const double u1 = uniform({a, b, c, d, 0});
    const double u2 = uniform({a, b, c, d, 1});
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Seed of an independent child stream, e.g. one per Monte Carlo replication.
  constexpr std::uint64_t substream(std::uint64_t index) const { return bits({0x5EEDULL, index}); }

  constexpr std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace mtbias
