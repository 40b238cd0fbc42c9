#pragma once

#include <array>
#include <cstdint>

namespace core {

/// Philox4x64-10 counter-based generator (Salmon et al., "Parallel random
/// numbers: as easy as 1, 2, 3"), bit-compatible with numpy.random.Philox.
/// Stateless: each 256-bit counter maps to an independent 256-bit output
/// block under a 128-bit key, so any block is addressable in O(1).
class Philox4x64 {
 public:
  using Counter = std::array<std::uint64_t, 4>;
  using Key = std::array<std::uint64_t, 2>;
  using Block = std::array<std::uint64_t, 4>;

  /// One 4x64 output block for the given counter/key.
  static Block block(Counter ctr, Key key) {
    for (int r = 0; r < 9; ++r) {
      ctr = round(ctr, key);
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return round(ctr, key);
  }

 private:
  static constexpr std::uint64_t kMult0 = 0xD2E7470EE14C6C93ull;
  static constexpr std::uint64_t kMult1 = 0xCA5A826395121157ull;
  static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ull;
  static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73Bull;

  static Counter round(const Counter& c, const Key& k) {
    const auto prod0 = static_cast<unsigned __int128>(kMult0) * c[0];
    const auto prod1 = static_cast<unsigned __int128>(kMult1) * c[2];
    const auto lo0 = static_cast<std::uint64_t>(prod0);
    const auto hi0 = static_cast<std::uint64_t>(prod0 >> 64);
    const auto lo1 = static_cast<std::uint64_t>(prod1);
    const auto hi1 = static_cast<std::uint64_t>(prod1 >> 64);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
};

}  // namespace core
