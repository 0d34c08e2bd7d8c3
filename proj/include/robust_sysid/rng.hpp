#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace rsid {

namespace detail {

// SplitMix64 output function (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = a ^ (0x9E3779B97F4A7C15ULL + b + (a << 12) + (a >> 4));
  h = splitmix64_mix(h + 0x9E3779B97F4A7C15ULL);
  return splitmix64_mix(h ^ b);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based pseudo-random stream (SplitMix64). A stream is identified by
/// its seed; child streams are derived from (seed, label) only, so they do not
/// depend on how much the parent has been consumed or on sibling order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t c = counter_;
    counter_ += 0x9E3779B97F4A7C15ULL;
    return detail::splitmix64_mix(seed_ + c + 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform draw in [0, 1) with 53 bits of precision.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    for (;;) {
      const double u = 2.0 * uniform01() - 1.0;
      const double v = 2.0 * uniform01() - 1.0;
      const double s = u * u + v * v;
      if (s >= 1.0 || s == 0.0) continue;
      return u * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  RngStream child(std::uint64_t label) const {
    return RngStream(detail::hash_combine(seed_, label));
  }

  RngStream child(std::string_view label) const {
    return child(detail::fnv1a64(label));
  }

  RngStream child(std::string_view label, std::uint64_t index) const {
    return RngStream(detail::hash_combine(detail::hash_combine(seed_, detail::fnv1a64(label)), index));
  }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace rsid
