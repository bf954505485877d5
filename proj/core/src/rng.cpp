#include "pushpull/rng.hpp"

#include <cmath>
#include <numbers>

namespace pushpull {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_words(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                         std::uint64_t c) noexcept {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ a);
  h = mix64(h ^ (b + 0x632be59bd9b4e019ULL));
  h = mix64(h ^ (c + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

double to_unit(std::uint64_t key) noexcept {
  return static_cast<double>(key >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::next_u64() noexcept {
  return hash_words(seed_, stream_, counter_++);
}

double CounterRng::uniform() noexcept { return to_unit(next_u64()); }

std::size_t CounterRng::below(std::size_t bound) noexcept {
  // Lemire's multiply-shift; the bias is below 2^-40 for the bounds used here.
  __extension__ using u128 = unsigned __int128;
  const u128 wide = static_cast<u128>(next_u64()) * static_cast<u128>(bound);
  return static_cast<std::size_t>(wide >> 64);
}

double CounterRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

}  // namespace pushpull
