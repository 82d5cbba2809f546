#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace evolvesim {

// Stream derivation.
//
// Every random stream in a run is reconstructible from its path
// (master seed, step, slot). A path is folded through SplitMix64:
//
//   h_0 = splitmix64(master)
//   h_i = splitmix64(h_{i-1} ^ (path_i + 0x9E3779B97F4A7C15 * i))
//
// and the final value seeds an mt19937_64. Slots inside a selection step:
//   kSlotMutation  - the p mutator draws
//   kSlotChoice    - the frequency-weighted survivor draw
//   kSlotCandidate + j - fitness samples of distinct candidate j
//                        (j = 0 is the current representation r)

inline constexpr std::uint64_t kSlotMutation = 0;
inline constexpr std::uint64_t kSlotChoice = 1;
inline constexpr std::uint64_t kSlotCandidate = 2;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  std::uint64_t i = 1;
  for (std::uint64_t p : path) {
    h = splitmix64(h ^ (p + 0x9E3779B97F4A7C15ULL * i));
    ++i;
  }
  return h;
}

/// A deterministic random stream. Conversions to reals and bounded integers are
/// done here rather than through <random> distributions so that outputs do not
/// depend on the standard library implementation.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(std::uint64_t master, std::initializer_list<std::uint64_t> path)
      : engine_(derive_seed(master, path)) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform on {0, ..., bound - 1}; bound must be positive. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

  /// Standard normal via Box-Muller (one value per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace evolvesim
