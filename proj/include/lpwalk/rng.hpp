#pragma once

#include <array>
#include <cstdint>

#include "lpwalk/error.hpp"

namespace lpwalk {

// Philox4x32-10 counter-based generator (Salmon et al., Random123).
// Pure function of (counter, key): any block of any stream can be produced
// without touching the others, which is what makes replicates independent of
// scheduling.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static constexpr Counter block(Counter c, Key k) noexcept {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kM0} * c[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * c[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += kW0;
      k[1] += kW1;
    }
    return c;
  }
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Identifies one logical stream: (master seed, experiment index, sub-run,
// replicate index, increment family). Family 0 is the base law; family
// 1 + i belongs to the i-th membrane point.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint32_t experiment = 0;
  std::uint32_t substream = 0;
  std::uint32_t replicate = 0;
  std::uint32_t family = 0;

  StreamKey with_family(std::uint32_t f) const noexcept {
    StreamKey k = *this;
    k.family = f;
    return k;
  }
  StreamKey with_replicate(std::uint32_t r) const noexcept {
    StreamKey k = *this;
    k.replicate = r;
    return k;
  }
  StreamKey with_substream(std::uint32_t s) const noexcept {
    StreamKey k = *this;
    k.substream = s;
    return k;
  }
};

// Sequential reader over one Philox stream. The draw counter is the only
// state, so two Streams built from the same key yield identical sequences.
class Stream {
 public:
  explicit Stream(const StreamKey& key) noexcept {
    const std::uint64_t k = splitmix64(key.seed ^ splitmix64(0xA5A5ull + key.experiment));
    key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
    ctr_ = {0u, key.substream, key.replicate, key.family};
  }

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform on (0, 1], 53-bit resolution.
  double uniform_open_closed() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // Uniform on (0, 1).
  double uniform_open() {
    for (;;) {
      const std::uint64_t v = next_u64() >> 11;
      if (v != 0) return static_cast<double>(v) * 0x1.0p-53;
    }
  }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n) (Lemire's multiply-and-reject).
  std::uint32_t bounded(std::uint32_t n) {
    std::uint64_t m = std::uint64_t{next_u32()} * n;
    auto low = static_cast<std::uint32_t>(m);
    if (low < n) {
      const std::uint32_t threshold = static_cast<std::uint32_t>(-n) % n;
      while (low < threshold) {
        m = std::uint64_t{next_u32()} * n;
        low = static_cast<std::uint32_t>(m);
      }
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  // Unbiased integer in [0, n) for 64-bit ranges.
  std::uint64_t bounded64(std::uint64_t n) {
    if (n <= 0xFFFFFFFFull) return bounded(static_cast<std::uint32_t>(n));
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    for (;;) {
      const std::uint64_t v = next_u64();
      if (v < limit) return v % n;
    }
  }

  // k uniform bits, 1 <= k <= 16, taken from a 32-bit reservoir. Leftover
  // bits are discarded when the reservoir runs short.
  std::uint32_t bits(int k) {
    if (avail_ < k) {
      reservoir_ = next_u32();
      avail_ = 32;
    }
    const std::uint32_t v = reservoir_ & ((1u << k) - 1u);
    reservoir_ >>= k;
    avail_ -= k;
    return v;
  }

  // Unbiased integer in [0, n) for n <= 2^16, Lemire's method on 16-bit chunks.
  std::uint32_t bounded16(std::uint32_t n) {
    const std::uint32_t threshold = (0x10000u - n) % n;
    for (;;) {
      const std::uint32_t m = bits(16) * n;
      if ((m & 0xFFFFu) >= threshold) return m >> 16;
    }
  }

  std::uint64_t blocks_used() const noexcept { return ctr_[0]; }

 private:
  void refill() {
    if (ctr_[0] == 0xFFFFFFFFu) throw Error("random stream exhausted (2^34 draws)");
    buf_ = Philox4x32::block(ctr_, key_);
    ++ctr_[0];
    pos_ = 0;
  }

  Philox4x32::Key key_{};
  Philox4x32::Counter ctr_{};
  Philox4x32::Counter buf_{};
  int pos_ = 4;
  std::uint32_t reservoir_ = 0;
  int avail_ = 0;
};

}  // namespace lpwalk
