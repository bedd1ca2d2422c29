#pragma once

/** @file
 * Counter-based normal streams. Philox4x32-10 maps (counter, key) to four
 * 32-bit words; a stream is a fixed key and a counter whose first word is
 * the block index, so any block can be generated independently of the
 * others and of the order in which streams are consumed.
 */

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>

namespace scalefisher {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon, Moraes, Dror and Shaw, SC 2011).
inline Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key) {
  constexpr std::uint32_t m0 = 0xD2511F53u;
  constexpr std::uint32_t m1 = 0xCD9E8D57u;
  constexpr std::uint32_t w0 = 0x9E3779B9u;
  constexpr std::uint32_t w1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += w0;
    key[1] += w1;
  }
  return ctr;
}

/// Independent standard normal stream identified by (seed, replicate, stream id).
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t replicate, std::uint32_t stream)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        replicate_(replicate),
        stream_(stream) {}

  /// Normals 2b and 2b+1 come from block b by Box-Muller, so element i of a
  /// stream is a function of (seed, replicate, stream, i) only.
  template <typename Out>
  void fill(Out& out, std::size_t count) const {
    for (std::size_t i = 0; i < count; i += 2) {
      const auto pair = block(i / 2);
      out[i] = pair[0];
      if (i + 1 < count) out[i + 1] = pair[1];
    }
  }

  std::array<double, 2> block(std::uint64_t index) const {
    const Philox4x32Counter ctr{static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(replicate_),
                                static_cast<std::uint32_t>(replicate_ >> 32),
                                stream_ ^ (static_cast<std::uint32_t>(index >> 32) << 16)};
    const auto w = philox4x32_10(ctr, key_);
    const double u1 = to_unit(w[0], w[1]);
    const double u2 = to_unit(w[2], w[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(angle), r * std::sin(angle)};
  }

  /// 52-bit uniform in the open interval (0, 1); 53 bits plus a half-step
  /// would round to 1 at the top.
  static double to_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 20) ^ (lo >> 12);
    return (static_cast<double>(bits & ((std::uint64_t{1} << 52) - 1)) + 0.5) * 0x1.0p-52;
  }

 private:
  Philox4x32Key key_;
  std::uint64_t replicate_;
  std::uint32_t stream_;
};

}  // namespace scalefisher
