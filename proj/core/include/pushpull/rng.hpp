#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pushpull {

/// SplitMix64 finalizer. Every random draw in the library is a pure function
/// of a 64-bit key built by chaining this mix, so results are identical on
/// every platform and can be reproduced out of order.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Hash an ordered tuple of words into one key.
std::uint64_t hash_words(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0) noexcept;

/// Uniform double in [0, 1) from a key (53 significant bits).
double to_unit(std::uint64_t key) noexcept;

/// Counter-based generator: draw #i of stream (seed, stream) is
/// hash_words(seed, stream, i). Cheap to copy; no hidden global state.
class CounterRng {
public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : seed_(seed), stream_(stream) {}

  std::uint64_t next_u64() noexcept;
  double uniform() noexcept;
  /// Uniform integer in [0, bound); bound must be positive.
  std::size_t below(std::size_t bound) noexcept;
  /// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
  double normal() noexcept;

  template <class T>
  void shuffle(std::vector<T>& values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(values[i - 1], values[j]);
    }
  }

private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pushpull
