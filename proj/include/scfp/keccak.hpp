#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <utility>

#include "scfp/bits.hpp"

// Keccak-p[b, nr] for the small widths b = 25*W with W in {2, 8}.
// State bit index i = W*(x + 5*y) + z, matching the standard string mapping.
namespace scfp::keccak {

// Standard Keccak-f[1600] round constants; narrower lanes take the low W bits.
inline constexpr std::array<std::uint64_t, 24> kRoundConstants = {
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808AULL, 0x8000000080008000ULL,
    0x000000000000808BULL, 0x0000000080000001ULL, 0x8000000080008081ULL, 0x8000000000008009ULL,
    0x000000000000008AULL, 0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000AULL,
    0x000000008000808BULL, 0x800000000000008BULL, 0x8000000000008089ULL, 0x8000000000008003ULL,
    0x8000000000008002ULL, 0x8000000000000080ULL, 0x000000000000800AULL, 0x800000008000000AULL,
    0x8000000080008081ULL, 0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL};

// rho offsets indexed [x + 5*y].
inline constexpr std::array<unsigned, 25> kRhoOffsets = {
    0,  1,  62, 28, 27,
    36, 44, 6,  55, 20,
    3,  10, 43, 25, 39,
    41, 45, 15, 21, 8,
    18, 2,  61, 56, 14};

template <unsigned W>
class KeccakP {
  static_assert(W == 2 || W == 8, "only lane widths 2 and 8 are supported");

public:
  static constexpr unsigned kWidth = 25 * W;
  static constexpr unsigned kLog2W = W == 2 ? 1 : 3;
  static constexpr unsigned kMaxRounds = 12 + 2 * kLog2W;
  using Lanes = std::array<std::uint8_t, 25>;

  static void permute(Lanes& a, unsigned rounds) {
    Planes p = to_planes(a);
    for (unsigned ir = kMaxRounds - rounds; ir < kMaxRounds; ++ir) plane_round(p, ir);
    a = from_planes(p);
  }

  static StateBits permute_state(const StateBits& s, unsigned rounds) {
    Planes p;
    for (unsigned y = 0; y < 5; ++y) p[y] = s.get(5 * W * y, 5 * W);
    for (unsigned ir = kMaxRounds - rounds; ir < kMaxRounds; ++ir) plane_round(p, ir);
    StateBits out(kWidth);
    for (unsigned y = 0; y < 5; ++y) out.put(5 * W * y, 5 * W, p[y]);
    return out;
  }

  static StateBits permute_inverse_state(const StateBits& s, unsigned rounds) {
    Planes p;
    for (unsigned y = 0; y < 5; ++y) p[y] = s.get(5 * W * y, 5 * W);
    for (unsigned ir = kMaxRounds; ir-- > kMaxRounds - rounds;) inverse_plane_round(p, ir);
    StateBits out(kWidth);
    for (unsigned y = 0; y < 5; ++y) out.put(5 * W * y, 5 * W, p[y]);
    return out;
  }

  // Byte-per-lane round, kept as the direct transcription of the steps.
  static void permute_lanewise(Lanes& a, unsigned rounds) {
    for (unsigned ir = kMaxRounds - rounds; ir < kMaxRounds; ++ir) round(a, ir);
  }

  static void permute_inverse(Lanes& a, unsigned rounds) {
    for (unsigned ir = kMaxRounds; ir-- > kMaxRounds - rounds;) inverse_round(a, ir);
  }

  static Lanes to_lanes(const StateBits& s) {
    Lanes a{};
    for (unsigned i = 0; i < 25; ++i) a[i] = static_cast<std::uint8_t>(s.get(i * W, W));
    return a;
  }
  static StateBits from_lanes(const Lanes& a) {
    StateBits s(kWidth);
    for (unsigned i = 0; i < 25; ++i) s.put(i * W, W, a[i]);
    return s;
  }

private:
  // One 64-bit word per plane y; lane x occupies bits [W*x, W*x + W).
  using Planes = std::array<std::uint64_t, 5>;
  static constexpr std::uint64_t kPlaneMask = (std::uint64_t{1} << (5 * W)) - 1;
  static constexpr std::uint64_t kLaneOnes = 1 | 1ull << W | 1ull << 2 * W | 1ull << 3 * W | 1ull << 4 * W;

  static Planes to_planes(const Lanes& a) {
    Planes p{};
    for (unsigned y = 0; y < 5; ++y)
      for (unsigned x = 0; x < 5; ++x) p[y] |= std::uint64_t{a[x + 5 * y]} << (W * x);
    return p;
  }
  static Lanes from_planes(const Planes& p) {
    Lanes a{};
    for (unsigned y = 0; y < 5; ++y)
      for (unsigned x = 0; x < 5; ++x) a[x + 5 * y] = static_cast<std::uint8_t>((p[y] >> (W * x)) & ((1u << W) - 1));
    return a;
  }
  // Lane x of the result is lane (x + k) mod 5 of v.
  static constexpr std::uint64_t shift_lanes(std::uint64_t v, unsigned k) {
    return ((v >> (W * k)) | (v << (W * (5 - k)))) & kPlaneMask;
  }
  // Rotates every lane left by one bit.
  static constexpr std::uint64_t rot1_lanes(std::uint64_t v) {
    constexpr std::uint64_t low = kLaneOnes, rest = kPlaneMask & ~low;
    return ((v << 1) & rest) | ((v >> (W - 1)) & low);
  }

  template <unsigned I>
  static void rho_pi_lane(const Planes& p, std::uint64_t d, Planes& b) {
    constexpr unsigned x = I % 5, y = I / 5, dst = kRhoPi.dst[I], r = kRhoPi.rot[I];
    const std::uint64_t lane = ((p[y] ^ d) >> (W * x)) & kMask;
    const std::uint64_t rot = r == 0 ? lane : ((lane << r) | (lane >> ((W - r) % W))) & kMask;
    b[dst / 5] |= rot << (W * (dst % 5));
  }
  template <std::size_t... I>
  static void rho_pi_planes(const Planes& p, std::uint64_t d, Planes& b, std::index_sequence<I...>) {
    (rho_pi_lane<I>(p, d, b), ...);
  }

  template <unsigned I>
  static void inverse_rho_pi_lane(const Planes& p, Planes& b) {
    constexpr unsigned x = I % 5, y = I / 5, src = kRhoPi.dst[I], r = kRhoPi.rot[I];
    const std::uint64_t lane = (p[src / 5] >> (W * (src % 5))) & kMask;
    const std::uint64_t rot = r == 0 ? lane : ((lane >> r) | (lane << (W - r))) & kMask;
    b[y] |= rot << (W * x);
  }
  template <std::size_t... I>
  static void inverse_rho_pi_planes(const Planes& p, Planes& b, std::index_sequence<I...>) {
    (inverse_rho_pi_lane<I>(p, b), ...);
  }

  static void inverse_plane_round(Planes& p, unsigned ir) {
    p[0] ^= kRoundConstants[ir] & kMask;
    // Two parallel fixed-point passes invert chi on 5-bit rows (checked exhaustively).
    for (unsigned y = 0; y < 5; ++y) {
      std::uint64_t a = p[y];
      for (int k = 0; k < 2; ++k) a = p[y] ^ (~shift_lanes(a, 1) & shift_lanes(a, 2) & kPlaneMask);
      p[y] = a;
    }
    Planes b{};
    inverse_rho_pi_planes(p, b, std::make_index_sequence<25>{});
    const std::uint64_t cp = b[0] ^ b[1] ^ b[2] ^ b[3] ^ b[4];
    static const auto& tab = parity_tables();
    std::uint64_t c = 0;
    for (unsigned x = 0; x < 5; ++x) c ^= tab[x][(cp >> (W * x)) & kMask];
    const std::uint64_t d = shift_lanes(c, 4) ^ rot1_lanes(shift_lanes(c, 1));
    for (unsigned y = 0; y < 5; ++y) p[y] = b[y] ^ d;
  }

  static void plane_round(Planes& p, unsigned ir) {
    const std::uint64_t c = p[0] ^ p[1] ^ p[2] ^ p[3] ^ p[4];
    const std::uint64_t d = shift_lanes(c, 4) ^ rot1_lanes(shift_lanes(c, 1));
    Planes b{};
    rho_pi_planes(p, d, b, std::make_index_sequence<25>{});
    for (unsigned y = 0; y < 5; ++y) p[y] = b[y] ^ (~shift_lanes(b[y], 1) & shift_lanes(b[y], 2) & kPlaneMask);
    p[0] ^= kRoundConstants[ir] & kMask;
  }

  static constexpr std::uint8_t kMask = static_cast<std::uint8_t>((1u << W) - 1);

  static constexpr std::uint8_t rotl(std::uint8_t v, unsigned n) {
    n %= W;
    if (n == 0) return v;
    return static_cast<std::uint8_t>(((v << n) | (v >> (W - n))) & kMask);
  }

  static constexpr std::uint8_t rotc(std::uint8_t v, unsigned n) {
    return n == 0 ? v : static_cast<std::uint8_t>(((v << n) | (v >> (W - n))) & kMask);
  }

  struct RhoPi {
    std::array<std::uint8_t, 25> dst{};
    std::array<std::uint8_t, 25> rot{};
  };
  static constexpr RhoPi make_rho_pi() {
    RhoPi t{};
    for (unsigned x = 0; x < 5; ++x)
      for (unsigned y = 0; y < 5; ++y) {
        t.dst[x + 5 * y] = static_cast<std::uint8_t>(y + 5 * ((2 * x + 3 * y) % 5));
        t.rot[x + 5 * y] = static_cast<std::uint8_t>(kRhoOffsets[x + 5 * y] % W);
      }
    return t;
  }
  static constexpr RhoPi kRhoPi = make_rho_pi();

  static void theta(Lanes& a) {
    std::uint8_t c[5];
    for (unsigned x = 0; x < 5; ++x) c[x] = a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20];
    const std::uint8_t d[5] = {
        static_cast<std::uint8_t>(c[4] ^ rotc(c[1], 1)), static_cast<std::uint8_t>(c[0] ^ rotc(c[2], 1)),
        static_cast<std::uint8_t>(c[1] ^ rotc(c[3], 1)), static_cast<std::uint8_t>(c[2] ^ rotc(c[4], 1)),
        static_cast<std::uint8_t>(c[3] ^ rotc(c[0], 1))};
    for (unsigned y = 0; y < 25; y += 5)
      for (unsigned x = 0; x < 5; ++x) a[y + x] ^= d[x];
  }

  static void rho_pi(Lanes& a) {
    Lanes b;
    for (unsigned i = 0; i < 25; ++i) b[kRhoPi.dst[i]] = rotc(a[i], kRhoPi.rot[i]);
    a = b;
  }

  static void chi(Lanes& a) {
    for (unsigned y = 0; y < 25; y += 5) {
      const std::uint8_t r0 = a[y], r1 = a[y + 1], r2 = a[y + 2], r3 = a[y + 3], r4 = a[y + 4];
      a[y] = r0 ^ (~r1 & r2 & kMask);
      a[y + 1] = r1 ^ (~r2 & r3 & kMask);
      a[y + 2] = r2 ^ (~r3 & r4 & kMask);
      a[y + 3] = r3 ^ (~r4 & r0 & kMask);
      a[y + 4] = r4 ^ (~r0 & r1 & kMask);
    }
  }

  static void iota(Lanes& a, unsigned ir) {
    a[0] ^= static_cast<std::uint8_t>(kRoundConstants[ir] & kMask);
  }

  static void round(Lanes& a, unsigned ir) {
    theta(a);
    rho_pi(a);
    chi(a);
    iota(a, ir);
  }

  // chi acts independently on each bit-slice of a row; invert via a 5-bit table.
  static constexpr std::array<std::uint8_t, 32> make_chi_inverse() {
    std::array<std::uint8_t, 32> inv{};
    for (unsigned v = 0; v < 32; ++v) {
      unsigned out = 0;
      for (unsigned x = 0; x < 5; ++x) {
        const unsigned b0 = (v >> x) & 1, b1 = (v >> ((x + 1) % 5)) & 1, b2 = (v >> ((x + 2) % 5)) & 1;
        out |= (b0 ^ ((b1 ^ 1) & b2)) << x;
      }
      inv[out] = static_cast<std::uint8_t>(v);
    }
    return inv;
  }

  static void inverse_chi(Lanes& a) {
    static constexpr auto inv = make_chi_inverse();
    for (unsigned y = 0; y < 25; y += 5) {
      std::uint8_t row[5] = {};
      for (unsigned z = 0; z < W; ++z) {
        unsigned slice = 0;
        for (unsigned x = 0; x < 5; ++x) slice |= ((a[y + x] >> z) & 1u) << x;
        const unsigned pre = inv[slice];
        for (unsigned x = 0; x < 5; ++x) row[x] |= static_cast<std::uint8_t>(((pre >> x) & 1u) << z);
      }
      for (unsigned x = 0; x < 5; ++x) a[y + x] = row[x];
    }
  }

  static void inverse_rho_pi(Lanes& a) {
    Lanes b;
    for (unsigned i = 0; i < 25; ++i) b[i] = rotl(a[kRhoPi.dst[i]], W - kRhoPi.rot[i]);
    a = b;
  }

  // Column parities C (5*W bits) map to C ^ D(C) under theta. The inverse of
  // that linear map is solved once by Gauss-Jordan elimination over GF(2).
  struct ParityInverse {
    std::array<std::uint64_t, 5 * W> rows{};  // rows[j] = mask of input bits feeding output bit j
  };

  static std::uint64_t parity_forward(std::uint64_t c) {
    auto bit = [&](unsigned x, unsigned z) { return (c >> (x * W + z)) & 1u; };
    std::uint64_t out = 0;
    for (unsigned x = 0; x < 5; ++x)
      for (unsigned z = 0; z < W; ++z) {
        const std::uint64_t d = bit((x + 4) % 5, z) ^ bit((x + 1) % 5, (z + W - 1) % W);
        out |= (bit(x, z) ^ d) << (x * W + z);
      }
    return out;
  }

  static const ParityInverse& parity_inverse() {
    static const ParityInverse inv = [] {
      constexpr unsigned n = 5 * W;
      // Augmented matrix [M | I]; column j of M is parity_forward(e_j).
      std::array<std::uint64_t, n> m{}, id{};
      for (unsigned j = 0; j < n; ++j) {
        const std::uint64_t col = parity_forward(std::uint64_t{1} << j);
        for (unsigned i = 0; i < n; ++i)
          if ((col >> i) & 1u) m[i] |= std::uint64_t{1} << j;
        id[j] = std::uint64_t{1} << j;
      }
      for (unsigned col = 0; col < n; ++col) {
        unsigned piv = col;
        while (piv < n && !((m[piv] >> col) & 1u)) ++piv;
        if (piv == n) throw ConfigError("theta parity map is singular");
        std::swap(m[piv], m[col]);
        std::swap(id[piv], id[col]);
        for (unsigned r = 0; r < n; ++r)
          if (r != col && ((m[r] >> col) & 1u)) {
            m[r] ^= m[col];
            id[r] ^= id[col];
          }
      }
      ParityInverse p;
      for (unsigned i = 0; i < n; ++i) p.rows[i] = id[i];
      return p;
    }();
    return inv;
  }

  // The parity inverse is linear, so it splits into one table per lane.
  using ParityTables = std::array<std::array<std::uint64_t, (1u << W)>, 5>;
  static const ParityTables& parity_tables() {
    static const ParityTables t = [] {
      const auto& inv = parity_inverse();
      ParityTables out{};
      for (unsigned x = 0; x < 5; ++x)
        for (unsigned v = 0; v < (1u << W); ++v) {
          const std::uint64_t cp = std::uint64_t{v} << (W * x);
          for (unsigned i = 0; i < 5 * W; ++i)
            out[x][v] |= static_cast<std::uint64_t>(std::popcount(inv.rows[i] & cp) & 1) << i;
        }
      return out;
    }();
    return t;
  }

  static void inverse_theta(Lanes& a) {
    std::uint64_t cp = 0;
    for (unsigned x = 0; x < 5; ++x) {
      const std::uint8_t c = a[x] ^ a[x + 5] ^ a[x + 10] ^ a[x + 15] ^ a[x + 20];
      cp |= std::uint64_t{c} << (x * W);
    }
    const auto& inv = parity_inverse();
    std::uint64_t c = 0;
    for (unsigned i = 0; i < 5 * W; ++i)
      c |= static_cast<std::uint64_t>(std::popcount(inv.rows[i] & cp) & 1) << i;
    std::uint8_t col[5], d[5];
    for (unsigned x = 0; x < 5; ++x) col[x] = static_cast<std::uint8_t>((c >> (x * W)) & kMask);
    for (unsigned x = 0; x < 5; ++x) d[x] = col[(x + 4) % 5] ^ rotl(col[(x + 1) % 5], 1);
    for (unsigned i = 0; i < 25; ++i) a[i] ^= d[i % 5];
  }

  static void inverse_round(Lanes& a, unsigned ir) {
    iota(a, ir);
    inverse_chi(a);
    inverse_rho_pi(a);
    inverse_theta(a);
  }
};

using KeccakP50 = KeccakP<2>;
using KeccakP200 = KeccakP<8>;

}  // namespace scfp::keccak
