#pragma once

#include <cstddef>
#include <cstdint>

namespace htbandit {

/// Counter-based uniform stream: draw n is a pure function of (seed, n), so any round's
/// randomness can be regenerated without replaying the rounds before it.
///
/// The mixing function is the SplitMix64 finalizer applied to key + (n + 1) * golden gamma,
/// i.e. the n-th SplitMix64 output for a seed-derived starting state.
class CounterStream {
 public:
  explicit CounterStream(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

  std::uint64_t bits(std::uint64_t counter) const { return mix(key_ + (counter + 1) * kGamma); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
};

/// Per-round layout of the trajectory stream: round t (1-based) owns draws
/// [(t-1)(K+1), t(K+1)); the first K generate the loss vector, the last picks the arm.
struct RoundDraws {
  const CounterStream* stream;
  std::size_t arms;
  std::size_t round;

  std::uint64_t base() const { return static_cast<std::uint64_t>(round - 1) * (arms + 1); }
  double loss_uniform(std::size_t arm) const { return stream->uniform(base() + arm); }
  double arm_uniform() const { return stream->uniform(base() + arms); }
};

}  // namespace htbandit
