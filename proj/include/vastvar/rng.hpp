#pragma once

// Counter-based random streams. A stream is identified by a key derived from
// (seed, k1, k2, ...); output i of the stream is a SplitMix64 finalizer applied
// to key + i * golden. Streams for distinct keys can be created in any order
// on any thread and always yield the same numbers.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace vastvar {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t k = mix64(seed + kGolden);
  for (std::uint64_t v : keys) k = mix64(k ^ mix64(v + 0x632BE59BD9B4E019ULL));
  return k;
}

/// Uniform on the open interval (0, 1) from 53 high bits.
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// Single uniform draw addressed by key and counter, no stream object needed.
constexpr double counter_uniform(std::uint64_t key, std::uint64_t counter) noexcept {
  return to_open_unit(mix64(key + (counter + 1) * kGolden));
}

class StreamRng {
 public:
  using result_type = std::uint64_t;

  explicit StreamRng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys = {})
      : key_(derive_key(seed, keys)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix64(key_ + (++counter_) * kGolden); }

  double uniform() noexcept { return to_open_unit((*this)()); }

  double normal() { return normal_(*this); }

  double chi_squared(double dof) { return std::chi_squared_distribution<double>(dof)(*this); }

  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(*this);
  }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(*this); }

  std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace vastvar
