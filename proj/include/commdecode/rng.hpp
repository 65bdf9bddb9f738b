#pragma once

#include <cstdint>
#include <random>

namespace commdecode {

/// Seeded random stream. All draws go through fixed bit-level constructions
/// (no distribution objects), so sequences are identical across platforms
/// and standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  /// Unbiased draw from [0, n) by rejection sampling.
  std::uint64_t uniform_below(std::uint64_t n);

  /// Uniform double strictly inside (0, 1).
  double uniform_open01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard Gumbel(0,1) sample.
  double gumbel();

  /// Independent child stream derived from this stream's seed and a tag.
  /// Does not consume from or depend on the parent's position.
  Rng derive(std::uint64_t tag) const;

  /// Seed mixing used by derive(); exposed so artifacts can record how
  /// sub-streams were obtained.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t tag);

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace commdecode
