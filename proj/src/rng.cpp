#include "commdecode/rng.hpp"

#include <cmath>

#include "commdecode/errors.hpp"

namespace commdecode {

std::uint64_t Rng::uniform_below(std::uint64_t n) {
  if (n == 0) throw DomainError("uniform_below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::gumbel() {
  const double u = uniform_open01();
  return -std::log(-std::log(u));
}

std::uint64_t Rng::mix(std::uint64_t seed, std::uint64_t tag) {
  // splitmix64 finalizer over the xored pair
  std::uint64_t z = seed ^ (tag + 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng Rng::derive(std::uint64_t tag) const { return Rng(mix(seed_, tag)); }

}  // namespace commdecode
