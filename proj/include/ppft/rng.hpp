#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

#include "ppft/error.hpp"

namespace ppft {

// 64-bit FNV-1a. Keys per-token embedding streams and seed derivation.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

// Deterministic child seed for (base, a[, b]). Used to hand independent
// seeds to sweep cells, probe records and noisy training copies.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  std::uint64_t h = mix64(base ^ 0x6a09e667f3bcc909ull);
  h = mix64(h + 0x9e3779b97f4a7c15ull * (a + 1));
  h = mix64(h + 0x517cc1b727220a95ull * (b + 1));
  return h;
}

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// A (seed, stream) pair names a dedicated 2^64-block random sequence, so
// per-token / per-slot / per-trial consumers draw independently and the
// result never depends on evaluation order or parallel scheduling.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_lo_(static_cast<std::uint32_t>(stream)),
        stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) {
      fill_block();
      pos_ = 0;
    }
    return block_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return lo | (hi << 32);
  }

  // uniform in [0, 1), 53-bit resolution
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0, 1], safe to pass to log()
  double next_unit_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // standard normal, Marsaglia polar method
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    have_spare_ = true;
    return u * f;
  }

  // Gamma(shape, rate) via Marsaglia & Tsang (2000) rejection; exact for
  // shape >= 1 (callers pass shape = d_e >= 2).
  double next_gamma(double shape, double rate) {
    if (shape < 1.0) raise(ErrorCode::BadDimension, "gamma shape must be >= 1");
    if (rate <= 0.0) raise(ErrorCode::BadBudget, "gamma rate must be positive");
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = next_normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = next_unit_open();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  // uniform direction on the unit sphere: normalized standard-normal vector
  void fill_sphere(std::span<double> out) {
    for (;;) {
      double sq = 0.0;
      for (double& x : out) {
        x = next_normal();
        sq += x * x;
      }
      if (sq > 0.0) {
        const double inv = 1.0 / std::sqrt(sq);
        for (double& x : out) x *= inv;
        return;
      }
      // all-zero draw: resample (probability zero, handled for robustness)
    }
  }

 private:
  void fill_block() {
    std::uint32_t c[4] = {static_cast<std::uint32_t>(block_index_),
                          static_cast<std::uint32_t>(block_index_ >> 32), stream_lo_,
                          stream_hi_};
    std::uint32_t k0 = key_[0], k1 = key_[1];
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = 0xD2511F53ull * c[0];
      const std::uint64_t p1 = 0xCD9E8D57ull * c[2];
      const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
      const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
      const std::uint32_t n0 = hi1 ^ c[1] ^ k0;
      const std::uint32_t n2 = hi0 ^ c[3] ^ k1;
      c[0] = n0;
      c[1] = lo1;
      c[2] = n2;
      c[3] = lo0;
      k0 += 0x9E3779B9u;
      k1 += 0xBB67AE85u;
    }
    block_[0] = c[0];
    block_[1] = c[1];
    block_[2] = c[2];
    block_[3] = c[3];
    ++block_index_;
  }

  std::uint32_t key_[2];
  std::uint32_t stream_lo_;
  std::uint32_t stream_hi_;
  std::uint64_t block_index_ = 0;
  std::uint32_t block_[4] = {};
  int pos_ = 4;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ppft
