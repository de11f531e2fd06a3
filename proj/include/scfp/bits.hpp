#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scfp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Fixed-capacity bit vector of up to 256 bits.
// Bit 0 is the least significant bit of byte 0 of the little-endian byte
// serialization; words are stored little-endian as well.
class StateBits {
public:
  static constexpr unsigned kMaxBits = 256;

  StateBits() = default;
  explicit StateBits(unsigned width) : width_(width) {
    if (width > kMaxBits) throw ConfigError("StateBits width exceeds 256");
  }

  unsigned width() const noexcept { return width_; }
  std::size_t byte_size() const noexcept { return (width_ + 7) / 8; }

  bool bit(unsigned i) const noexcept { return (w_[i / 64] >> (i % 64)) & 1u; }
  void set_bit(unsigned i, bool v) noexcept {
    const std::uint64_t m = std::uint64_t{1} << (i % 64);
    if (v) w_[i / 64] |= m; else w_[i / 64] &= ~m;
  }
  void flip(unsigned i) noexcept { w_[i / 64] ^= std::uint64_t{1} << (i % 64); }

  // Reads `len` <= 64 bits starting at `off`.
  std::uint64_t get(unsigned off, unsigned len) const noexcept {
    if (len == 0) return 0;
    const unsigned wi = off / 64, sh = off % 64;
    std::uint64_t v = w_[wi] >> sh;
    if (sh != 0 && wi + 1 < w_.size()) v |= w_[wi + 1] << (64 - sh);
    return len == 64 ? v : v & ((std::uint64_t{1} << len) - 1);
  }

  // Writes the low `len` <= 64 bits of `v` starting at `off`.
  void put(unsigned off, unsigned len, std::uint64_t v) noexcept {
    for (unsigned done = 0; done < len;) {
      const unsigned wi = (off + done) / 64, sh = (off + done) % 64;
      const unsigned take = std::min(len - done, 64 - sh);
      const std::uint64_t mask = take == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << take) - 1);
      const std::uint64_t chunk = (v >> done) & mask;
      w_[wi] = (w_[wi] & ~(mask << sh)) | (chunk << sh);
      done += take;
    }
  }

  StateBits slice(unsigned off, unsigned len) const {
    StateBits out(len);
    for (unsigned done = 0; done < len; done += 64) {
      const unsigned take = std::min(64u, len - done);
      out.put(done, take, get(off + done, take));
    }
    return out;
  }

  void deposit(unsigned off, const StateBits& src) noexcept {
    for (unsigned done = 0; done < src.width(); done += 64) {
      const unsigned take = std::min(64u, src.width() - done);
      put(off + done, take, src.get(done, take));
    }
  }

  StateBits& operator^=(const StateBits& o) {
    if (o.width_ != width_) throw ConfigError("StateBits width mismatch in xor");
    for (std::size_t i = 0; i < w_.size(); ++i) w_[i] ^= o.w_[i];
    return *this;
  }
  friend StateBits operator^(StateBits a, const StateBits& b) { return a ^= b; }
  friend bool operator==(const StateBits& a, const StateBits& b) noexcept {
    return a.width_ == b.width_ && a.w_ == b.w_;
  }

  bool is_zero() const noexcept {
    for (auto v : w_) if (v) return false;
    return true;
  }
  unsigned popcount() const noexcept {
    unsigned c = 0;
    for (auto v : w_) c += static_cast<unsigned>(std::popcount(v));
    return c;
  }

  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out(byte_size());
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<std::uint8_t>(w_[i / 8] >> (8 * (i % 8)));
    return out;
  }

  static StateBits from_bytes(unsigned width, std::span<const std::uint8_t> bytes) {
    StateBits s(width);
    if (bytes.size() != s.byte_size()) throw ConfigError("StateBits byte length mismatch");
    for (std::size_t i = 0; i < bytes.size(); ++i)
      s.w_[i / 8] |= std::uint64_t{bytes[i]} << (8 * (i % 8));
    s.trim();
    return s;
  }

  std::string to_hex() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    for (auto b : to_bytes()) {
      out.push_back(digits[b >> 4]);
      out.push_back(digits[b & 0xF]);
    }
    return out;
  }

  static StateBits from_hex(unsigned width, std::string_view hex);

  template <class Rng>
  static StateBits random(unsigned width, Rng& rng) {
    StateBits s(width);
    for (auto& v : s.w_) v = rng();
    s.trim();
    return s;
  }

private:
  void trim() noexcept {
    for (unsigned i = 0; i < w_.size(); ++i) {
      const unsigned lo = i * 64;
      if (lo >= width_) w_[i] = 0;
      else if (width_ - lo < 64) w_[i] &= (std::uint64_t{1} << (width_ - lo)) - 1;
    }
  }

  std::array<std::uint64_t, 4> w_{};
  unsigned width_ = 0;
};

inline std::vector<std::uint8_t> parse_hex_bytes(std::string_view hex) {
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  if (hex.size() % 2 != 0) throw ConfigError("odd-length hex string");
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = nib(hex[2 * i]), lo = nib(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw ConfigError("invalid hex digit");
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return out;
}

inline std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (auto b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xF]);
  }
  return out;
}

inline StateBits StateBits::from_hex(unsigned width, std::string_view hex) {
  const auto bytes = parse_hex_bytes(hex);
  StateBits s = from_bytes(width, bytes);
  // Bits beyond `width` in the last byte must be zero.
  StateBits check(width);
  check = s;
  if (check.to_bytes() != bytes) throw ConfigError("hex state has bits beyond its width");
  return s;
}

}  // namespace scfp
