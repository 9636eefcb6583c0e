#pragma once

#include <cstdint>
#include <random>

namespace rdelab {

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed of substream `index` of a run seeded with `seed`.
///
/// The derivation is counter based: the pair (seed, index) is hashed as
///   splitmix64(splitmix64(seed) ^ (index * 0xD1B54A32D192ED03 + 1))
/// so replicate r of a run always draws from the same stream regardless of
/// how replicates are scheduled across threads.
std::uint64_t derive_stream_seed(std::uint64_t seed, std::uint64_t index) noexcept;

/// An exclusive random stream. Not shareable across threads.
class RngStream {
 public:
  using result_type = std::mt19937_64::result_type;

  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  RngStream(std::uint64_t seed, std::uint64_t index)
      : engine_(derive_stream_seed(seed, index)) {}

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_pos() { return 1.0 - uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform index in [0, n).
  std::uint64_t index(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace rdelab
