#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace coral {

// Splittable counter-based generator (splitmix64 core). Every stochastic
// consumer derives a private stream keyed by integers or a label, so the
// number of draws taken in one component can never shift another.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : state_(finalize(seed + kGamma)) {}

  RngStream derive(uint64_t tag) const {
    uint64_t mixed = finalize(tag * 0xd1b54a32d192ed03ULL + kGamma);
    return RngStream(Raw{}, finalize(state_ ^ mixed));
  }

  RngStream derive(std::string_view label) const {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char ch : label) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    return derive(h);
  }

  uint64_t next_u64() {
    state_ += kGamma;
    return finalize(state_);
  }

  // Uniform in [0, 1).
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Standard normal, Box-Muller (one normal per two uniforms; no cached
  // second value, so draw counts stay predictable).
  double next_normal() {
    double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  void fill_normal(std::span<double> out) {
    for (double& x : out) x = next_normal();
  }

  // Uniform integer in [0, n), n > 0.
  uint64_t next_below(uint64_t n) {
    return uint64_t((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = size_t(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  struct Raw {};
  RngStream(Raw, uint64_t state) : state_(state) {}

  static constexpr uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  static uint64_t finalize(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  uint64_t state_;
};

}  // namespace coral
