#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace itmainn {

// 64-bit FNV-1a; used to turn stable string ids into seed material.
std::uint64_t fnv1a64(std::string_view text);

// Mixes a base seed with a tag ("split", an image id, ...) into an independent
// stream seed. Stable across platforms and runs.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

// xoshiro256** seeded through SplitMix64. All sampling helpers are written
// out explicitly (no <random> distributions) so sequences are identical on
// every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound);
  // Uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Uniform double in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi);
  double normal();
  bool bernoulli(double p) { return uniform01() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t state_[4];
};

}  // namespace itmainn
