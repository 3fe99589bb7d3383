// Seedable, splittable random source.
//
// Stream derivation rule: Rng(s) seeds std::mt19937_64 with splitmix64(s), and
// Rng(s).substream(i) is Rng(splitmix64(s ^ splitmix64(i + 0x9e3779b97f4a7c15))).
// Substreams of a substream compose the same way (order-sensitively), so a trial keyed by (grid point, outer, inner) draws from
// Rng(seed).substream(g).substream(a).substream(b) regardless of execution order.
// Uniforms take the top 53 bits of one engine output; normals use Box-Muller. Neither
// depends on the standard library's distribution classes, so streams are identical
// across toolchains.
#pragma once

#include <cstdint>
#include <random>

namespace ksync {

std::uint64_t splitmix64(std::uint64_t x);

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  Rng substream(std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [0, 2*pi).
  double angle();
  /// Standard normal.
  double normal();
  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ksync
