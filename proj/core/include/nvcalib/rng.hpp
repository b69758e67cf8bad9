#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace nvcalib {

/// Deterministic random source. std::mt19937_64 supplies the raw bits;
/// uniform and gaussian variates are derived here rather than through
/// std::*_distribution, whose output is implementation-defined. Every
/// stochastic path in the library goes through this class so that a seed
/// pins results bit-for-bit across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller. The second variate of each pair is
  /// cached, so draws come in a fixed, reproducible order.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// FNV-1a accumulator used to derive independent noise streams from a base
/// seed plus whatever identifies the draw site (field values, sweep
/// parameters, record indices). Identical inputs give identical streams,
/// which is what makes simulated acquisitions idempotent.
class StreamKey {
 public:
  explicit StreamKey(std::uint64_t seed = 0) { mix(seed); }

  StreamKey& mix(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= (v >> (8 * i)) & 0xffu;
      state_ *= 0x100000001b3ull;
    }
    return *this;
  }

  StreamKey& mix(double v) { return mix(std::bit_cast<std::uint64_t>(v)); }

  StreamKey& mix(const char* s) {
    while (*s) {
      state_ ^= static_cast<std::uint64_t>(static_cast<unsigned char>(*s++));
      state_ *= 0x100000001b3ull;
    }
    return *this;
  }

  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

}  // namespace nvcalib
