#pragma once

#include <cstdint>
#include <limits>

namespace iontrap {

/// SplitMix64 finalizer; a bijective 64-bit mix.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Counter-keyed random bit generator.
///
/// Every Monte-Carlo shot owns one generator keyed by (seed, stream, index),
/// so the draws of a shot never depend on which worker ran it or in what
/// order. The output sequence is the SplitMix64 stream started from the mixed
/// key. Satisfies UniformRandomBitGenerator, so it plugs into the standard
/// <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

 private:
  std::uint64_t state_;
};

/// Stable 64-bit identifier for a named stream ("detection.bright", ...).
std::uint64_t stream_id(const char* name) noexcept;

}  // namespace iontrap
