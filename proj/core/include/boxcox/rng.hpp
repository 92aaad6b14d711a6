#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace boxcox {

/// Deterministic stream-splittable RNG. Substreams are derived by mixing
/// the creating seed with an index, so replicate/chunk results do not
/// depend on thread count or execution order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on (0, 1].
  double uniform01() {
    return (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (pairwise, cached spare).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  /// splitmix64-style mixer for deriving substream seeds.
  static std::uint64_t mix(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Independent stream derived from this generator's seed (not its state).
  Rng substream(std::uint64_t index) const { return Rng(mix(seed_, index)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace boxcox
