#pragma once

#include <cstdint>
#include <initializer_list>

namespace glocal {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based stream: the i-th draw is a pure function of (key, i), so a
/// stream keyed by e.g. (seed, subgraph, origin, epoch) yields the same
/// values no matter which thread runs it or in what order.
class CounterRng {
 public:
  CounterRng(std::initializer_list<std::uint64_t> key) noexcept {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (auto k : key) h = mix64(h ^ mix64(k));
    key_ = h;
  }

  std::uint64_t next() noexcept { return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift; bias is < n / 2^64 and irrelevant here.
    return std::uint64_t((static_cast<unsigned __int128>(next()) * n) >> 64);
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace glocal
