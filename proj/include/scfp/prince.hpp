#pragma once

#include <array>
#include <cstdint>

// PRINCE 64-bit block cipher with 128-bit key k0 || k1.
// Blocks and key halves use the designers' notation: nibble 0 is the most
// significant nibble of the 64-bit integer.
namespace scfp::prince {

struct Key {
  std::uint64_t k0 = 0;
  std::uint64_t k1 = 0;
};

inline constexpr std::array<std::uint64_t, 12> kRoundConstants = {
    0x0000000000000000ULL, 0x13198a2e03707344ULL, 0xa4093822299f31d0ULL, 0x082efa98ec4e6c89ULL,
    0x452821e638d01377ULL, 0xbe5466cf34e90c6cULL, 0x7ef84f78fd955cb1ULL, 0x85840851f1ac43aaULL,
    0xc882d32f25323c54ULL, 0x64a51195e0e3610dULL, 0xd3b5a399ca0c2399ULL, 0xc0ac29b7c97c50ddULL};

inline constexpr std::uint64_t kAlpha = 0xc0ac29b7c97c50ddULL;

inline constexpr std::array<std::uint8_t, 16> kSbox = {0xB, 0xF, 0x3, 0x2, 0xA, 0xC, 0x9, 0x1,
                                                       0x6, 0x7, 0x8, 0x0, 0xE, 0x5, 0xD, 0x4};

namespace detail {

constexpr std::array<std::uint8_t, 16> invert(const std::array<std::uint8_t, 16>& s) {
  std::array<std::uint8_t, 16> inv{};
  for (std::uint8_t i = 0; i < 16; ++i) inv[s[i]] = i;
  return inv;
}
inline constexpr auto kSboxInv = invert(kSbox);

// Output nibble i takes input nibble kShiftRows[i].
inline constexpr std::array<unsigned, 16> kShiftRows = {0, 5, 10, 15, 4, 9, 14, 3, 8, 13, 2, 7, 12, 1, 6, 11};
inline constexpr std::array<unsigned, 16> kShiftRowsInv = {0, 13, 10, 7, 4, 1, 14, 11, 8, 5, 2, 15, 12, 9, 6, 3};

constexpr unsigned nibble(std::uint64_t s, unsigned i) { return (s >> (60 - 4 * i)) & 0xF; }

constexpr std::uint64_t sub(std::uint64_t s, const std::array<std::uint8_t, 16>& box) {
  std::uint64_t out = 0;
  for (unsigned i = 0; i < 16; ++i) out |= std::uint64_t{box[nibble(s, i)]} << (60 - 4 * i);
  return out;
}

constexpr std::uint64_t permute_nibbles(std::uint64_t s, const std::array<unsigned, 16>& p) {
  std::uint64_t out = 0;
  for (unsigned i = 0; i < 16; ++i) out |= std::uint64_t{nibble(s, p[i])} << (60 - 4 * i);
  return out;
}

// One 16-bit chunk through M-hat(offset): block (bi, bj) is M_{(bi+bj+offset) mod 4},
// the 4x4 identity with a zero at diagonal position (bi+bj+offset) mod 4.
constexpr std::uint16_t mhat(std::uint16_t in, unsigned offset) {
  auto bit = [&](unsigned idx) { return (in >> (15 - idx)) & 1u; };  // idx 0 = MSB
  std::uint16_t out = 0;
  for (unsigned bi = 0; bi < 4; ++bi)
    for (unsigned t = 0; t < 4; ++t) {
      unsigned acc = 0;
      for (unsigned bj = 0; bj < 4; ++bj)
        if (t != (bi + bj + offset) % 4) acc ^= bit(4 * bj + t);
      out |= static_cast<std::uint16_t>(acc << (15 - (4 * bi + t)));
    }
  return out;
}

// M' = diag(M-hat0, M-hat1, M-hat1, M-hat0); an involution.
constexpr std::uint64_t mprime(std::uint64_t s) {
  constexpr unsigned offsets[4] = {0, 1, 1, 0};
  std::uint64_t out = 0;
  for (unsigned c = 0; c < 4; ++c) {
    const auto chunk = static_cast<std::uint16_t>(s >> (48 - 16 * c));
    out |= std::uint64_t{mhat(chunk, offsets[c])} << (48 - 16 * c);
  }
  return out;
}

constexpr std::uint64_t core(std::uint64_t s, std::uint64_t k1) {
  s ^= k1 ^ kRoundConstants[0];
  for (unsigned i = 1; i <= 5; ++i) {
    s = sub(s, kSbox);
    s = permute_nibbles(mprime(s), kShiftRows);
    s ^= kRoundConstants[i] ^ k1;
  }
  s = sub(s, kSbox);
  s = mprime(s);
  s = sub(s, kSboxInv);
  for (unsigned i = 6; i <= 10; ++i) {
    s ^= kRoundConstants[i] ^ k1;
    s = mprime(permute_nibbles(s, kShiftRowsInv));
    s = sub(s, kSboxInv);
  }
  return s ^ kRoundConstants[11] ^ k1;
}

constexpr std::uint64_t k0_prime(std::uint64_t k0) { return ((k0 >> 1) | (k0 << 63)) ^ (k0 >> 63); }

}  // namespace detail

constexpr std::uint64_t encrypt(std::uint64_t block, const Key& key) {
  return detail::core(block ^ key.k0, key.k1) ^ detail::k0_prime(key.k0);
}

// alpha-reflection: decryption is encryption under (k0', k0, k1 ^ alpha).
constexpr std::uint64_t decrypt(std::uint64_t block, const Key& key) {
  return detail::core(block ^ detail::k0_prime(key.k0), key.k1 ^ kAlpha) ^ key.k0;
}

}  // namespace scfp::prince
