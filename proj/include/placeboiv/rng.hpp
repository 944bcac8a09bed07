#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace placeboiv {

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3"). Maps a 128-bit counter and 64-bit key to 128
/// pseudo-random bits.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter block(Counter counter, Key key) noexcept;
};

/// SplitMix64 finalizer; used to derive child seeds from (seed, tag) pairs.
std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept;

/// A random stream addressed by (key, stream id). Counter words 2-3 hold the
/// stream id and words 0-1 the block index, so distinct stream ids never
/// overlap and any stream can be generated independently of the others.
class CounterRng {
 public:
  using result_type = std::uint32_t;

  CounterRng(std::uint64_t key, std::uint64_t stream) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal (Box-Muller, second variate cached).
  double normal() noexcept;
  /// Fair coin as 0/1.
  int bernoulli_half() noexcept { return static_cast<int>((*this)() >> 31); }
  /// Uniform integer in [0, bound); bound > 0. Lemire's multiply-shift with rejection.
  std::uint32_t below(std::uint32_t bound) noexcept;

 private:
  void refill() noexcept;

  Philox4x32::Key key_;
  Philox4x32::Counter counter_;
  Philox4x32::Counter buffer_{};
  unsigned position_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

/// In-place Fisher-Yates shuffle of `values` driven by `rng`.
template <class T>
void fisher_yates(std::span<T> values, CounterRng& rng) noexcept {
  for (std::size_t k = values.size(); k > 1; --k) {
    const auto j = rng.below(static_cast<std::uint32_t>(k));
    std::swap(values[k - 1], values[j]);
  }
}

}  // namespace placeboiv
