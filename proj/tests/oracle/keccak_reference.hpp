#pragma once

// Bit-level reference for Keccak-p[b, nr], written directly from the step
// mappings on a three-dimensional array A[x][y][z]. Round constants come from
// the rc(t) LFSR and rho offsets from the (t+1)(t+2)/2 walk. Shares no code
// with include/scfp/keccak.hpp.

#include <array>
#include <cstdint>
#include <vector>

namespace oracle {

class KeccakReference {
public:
  explicit KeccakReference(unsigned width) : w_(width / 25) {
    l_ = 0;
    while ((1u << l_) < w_) ++l_;
  }

  // `bits` has 25*w entries, index w*(5y+x)+z.
  std::vector<int> permute(std::vector<int> bits, unsigned rounds) const {
    Cube a = load(bits);
    const unsigned total = 12 + 2 * l_;
    for (unsigned ir = total - rounds; ir < total; ++ir) a = rnd(a, ir);
    return store(a);
  }

private:
  using Cube = std::vector<std::vector<std::vector<int>>>;

  Cube empty() const { return Cube(5, std::vector<std::vector<int>>(5, std::vector<int>(w_, 0))); }

  Cube load(const std::vector<int>& s) const {
    Cube a = empty();
    for (unsigned x = 0; x < 5; ++x)
      for (unsigned y = 0; y < 5; ++y)
        for (unsigned z = 0; z < w_; ++z) a[x][y][z] = s[w_ * (5 * y + x) + z];
    return a;
  }
  std::vector<int> store(const Cube& a) const {
    std::vector<int> s(25 * w_);
    for (unsigned x = 0; x < 5; ++x)
      for (unsigned y = 0; y < 5; ++y)
        for (unsigned z = 0; z < w_; ++z) s[w_ * (5 * y + x) + z] = a[x][y][z];
    return s;
  }

  static unsigned md(int v, int m) { return static_cast<unsigned>(((v % m) + m) % m); }

  Cube theta(const Cube& a) const {
    std::vector<std::vector<int>> c(5, std::vector<int>(w_));
    for (unsigned x = 0; x < 5; ++x)
      for (unsigned z = 0; z < w_; ++z)
        c[x][z] = a[x][0][z] ^ a[x][1][z] ^ a[x][2][z] ^ a[x][3][z] ^ a[x][4][z];
    Cube out = empty();
    for (unsigned x = 0; x < 5; ++x)
      for (unsigned z = 0; z < w_; ++z) {
        const int d = c[md(int(x) - 1, 5)][z] ^ c[md(int(x) + 1, 5)][md(int(z) - 1, int(w_))];
        for (unsigned y = 0; y < 5; ++y) out[x][y][z] = a[x][y][z] ^ d;
      }
    return out;
  }

  Cube rho(const Cube& a) const {
    Cube out = a;
    unsigned x = 1, y = 0;
    for (int t = 0; t < 24; ++t) {
      for (unsigned z = 0; z < w_; ++z)
        out[x][y][z] = a[x][y][md(int(z) - (t + 1) * (t + 2) / 2, int(w_))];
      const unsigned nx = y, ny = (2 * x + 3 * y) % 5;
      x = nx;
      y = ny;
    }
    return out;
  }

  Cube pi(const Cube& a) const {
    Cube out = empty();
    for (unsigned x = 0; x < 5; ++x)
      for (unsigned y = 0; y < 5; ++y)
        for (unsigned z = 0; z < w_; ++z) out[x][y][z] = a[(x + 3 * y) % 5][x][z];
    return out;
  }

  Cube chi(const Cube& a) const {
    Cube out = empty();
    for (unsigned x = 0; x < 5; ++x)
      for (unsigned y = 0; y < 5; ++y)
        for (unsigned z = 0; z < w_; ++z)
          out[x][y][z] = a[x][y][z] ^ ((a[(x + 1) % 5][y][z] ^ 1) & a[(x + 2) % 5][y][z]);
    return out;
  }

  static int rc(unsigned t) {
    if (t % 255 == 0) return 1;
    std::array<int, 9> r{1, 0, 0, 0, 0, 0, 0, 0, 0};
    for (unsigned i = 1; i <= t % 255; ++i) {
      // R = 0 || R; then taps at 0,4,5,6 from bit 8; truncate to 8 bits.
      for (int k = 8; k > 0; --k) r[k] = r[k - 1];
      r[0] = 0;
      r[0] ^= r[8];
      r[4] ^= r[8];
      r[5] ^= r[8];
      r[6] ^= r[8];
    }
    return r[0];
  }

  Cube iota(Cube a, unsigned ir) const {
    for (unsigned j = 0; j <= l_; ++j) {
      const unsigned pos = (1u << j) - 1;
      if (pos < w_) a[0][0][pos] ^= rc(j + 7 * ir);
    }
    return a;
  }

  Cube rnd(const Cube& a, unsigned ir) const { return iota(chi(pi(rho(theta(a)))), ir); }

  unsigned w_;
  unsigned l_;
};

}  // namespace oracle
