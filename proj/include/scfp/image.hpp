#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfp/bits.hpp"
#include "scfp/sponge.hpp"

namespace scfp {

enum class ImageMode : std::uint8_t { Plain = 0, Ape = 1, Duplex = 2 };

struct ImageParseError : std::runtime_error {
  ImageParseError(std::size_t off, const std::string& msg)
      : std::runtime_error("image parse error at offset " + std::to_string(off) + ": " + msg), offset(off) {}
  std::size_t offset;
};

struct HandlerRecord {
  std::uint32_t vector = 0;
  StateBits entry_patch;

  friend bool operator==(const HandlerRecord&, const HandlerRecord&) = default;
};

struct EncryptedImage {
  std::uint8_t version = 1;
  ImageMode mode = ImageMode::Plain;
  SpongeParams params;  // perm key never populated from an image
  std::array<std::uint8_t, 16> nonce{};
  std::uint32_t entry_addr = 0;
  StateBits entry_patch;
  std::vector<std::uint32_t> code;
  std::vector<std::uint32_t> ext;  // r - 32 extension bits per code word
  std::vector<std::uint8_t> data;
  std::uint32_t data_base = 0x4000;
  std::vector<HandlerRecord> handlers;

  bool protected_image() const noexcept { return mode != ImageMode::Plain; }
  unsigned state_bytes() const noexcept { return (params.width() + 7) / 8; }
  unsigned ext_bytes() const noexcept { return (params.ext_bits() + 7) / 8; }

  friend bool operator==(const EncryptedImage& a, const EncryptedImage& b) {
    return a.version == b.version && a.mode == b.mode && a.nonce == b.nonce && a.entry_addr == b.entry_addr &&
           a.entry_patch == b.entry_patch && a.code == b.code && a.ext == b.ext && a.data == b.data &&
           a.data_base == b.data_base && a.handlers == b.handlers && a.params.perm.kind == b.params.perm.kind &&
           a.params.perm.width_b == b.params.perm.width_b && a.params.rate_r == b.params.rate_r &&
           a.params.capacity_x == b.params.capacity_x && a.params.redundancy_n == b.params.redundancy_n;
  }
};

namespace detail {

inline std::uint8_t perm_code(const PermSpec& p) {
  if (p.kind == PermKind::Prince) return 2;
  if (p.rounds != 12) throw ConfigError("image format records only 12-round Keccak-p");
  return p.width_b == 200 ? 0 : 1;
}

struct Writer {
  std::vector<std::uint8_t> out;
  void u8(std::uint64_t v) { out.push_back(static_cast<std::uint8_t>(v)); }
  void le(std::uint64_t v, unsigned bytes) {
    for (unsigned i = 0; i < bytes; ++i) u8(v >> (8 * i));
  }
  void bytes(const std::vector<std::uint8_t>& b) { out.insert(out.end(), b.begin(), b.end()); }
};

struct Reader {
  const std::vector<std::uint8_t>& in;
  std::size_t pos = 0;
  void need(std::size_t n, const char* what) const {
    if (in.size() - pos < n) throw ImageParseError(pos, std::string("truncated ") + what);
  }
  std::uint64_t le(unsigned bytes, const char* what) {
    need(bytes, what);
    std::uint64_t v = 0;
    for (unsigned i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
    pos += bytes;
    return v;
  }
  std::vector<std::uint8_t> bytes(std::size_t n, const char* what) {
    need(n, what);
    std::vector<std::uint8_t> b(in.begin() + static_cast<std::ptrdiff_t>(pos), in.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    return b;
  }
};

}  // namespace detail

// Header, code, data, handler table, then the ext section.
inline std::vector<std::uint8_t> serialize(const EncryptedImage& img) {
  detail::Writer w;
  w.bytes({'S', 'C', 'F', 'P'});
  w.u8(img.version);
  w.u8(static_cast<std::uint8_t>(img.mode));
  w.u8(detail::perm_code(img.params.perm));
  w.le(img.params.rate_r, 2);
  w.le(img.params.capacity_x, 2);
  w.u8(img.params.redundancy_n);
  w.u8(0);
  w.bytes({img.nonce.begin(), img.nonce.end()});
  w.le(img.entry_addr, 4);
  const unsigned sb = img.state_bytes();
  auto state = [&](const StateBits& s) {
    auto b = s.width() ? s.to_bytes() : std::vector<std::uint8_t>{};
    b.resize(sb, 0);
    w.bytes(b);
  };
  state(img.entry_patch);
  w.le(4 * img.code.size(), 4);
  for (auto c : img.code) w.le(c, 4);
  w.le(img.data.size(), 4);
  w.bytes(img.data);
  if (img.handlers.size() > 255) throw ConfigError("at most 255 interrupt handlers");
  w.u8(img.handlers.size());
  for (const auto& h : img.handlers) {
    w.le(h.vector, 4);
    state(h.entry_patch);
  }
  const unsigned eb = img.protected_image() ? img.ext_bytes() : 0;
  w.le(eb * img.ext.size(), 4);
  for (auto e : img.ext) w.le(e, eb);
  return w.out;
}

inline EncryptedImage parse_image(const std::vector<std::uint8_t>& bytes) {
  detail::Reader r{bytes};
  EncryptedImage img;
  auto magic = r.bytes(4, "magic");
  if (magic != std::vector<std::uint8_t>{'S', 'C', 'F', 'P'}) throw ImageParseError(0, "bad magic");
  img.version = static_cast<std::uint8_t>(r.le(1, "version"));
  if (img.version != 1) throw ImageParseError(4, "unsupported version " + std::to_string(img.version));
  const auto mode = r.le(1, "mode");
  if (mode > 2) throw ImageParseError(5, "bad mode byte");
  img.mode = static_cast<ImageMode>(mode);
  const auto perm = r.le(1, "perm");
  if (perm == 0) img.params.perm = PermSpec::keccak(200);
  else if (perm == 1) img.params.perm = PermSpec::keccak(50);
  else if (perm == 2) img.params.perm = PermSpec::prince();
  else throw ImageParseError(6, "bad permutation byte");
  img.params.rate_r = static_cast<unsigned>(r.le(2, "rate"));
  img.params.capacity_x = static_cast<unsigned>(r.le(2, "capacity"));
  img.params.redundancy_n = static_cast<unsigned>(r.le(1, "redundancy"));
  img.params.instr_i = kInstrBits;
  img.params.security_s = img.params.capacity_x / 2;
  img.params.mode = img.mode == ImageMode::Duplex ? SpongeMode::DuplexLike : SpongeMode::ApeLike;
  if (img.params.rate_r + img.params.capacity_x != img.params.width())
    throw ImageParseError(7, "rate plus capacity does not match the permutation width");
  if (img.params.rate_r < kInstrBits || img.params.rate_r - kInstrBits > 32)
    throw ImageParseError(7, "rate out of range");
  r.le(1, "reserved");
  auto nonce = r.bytes(16, "nonce");
  std::copy(nonce.begin(), nonce.end(), img.nonce.begin());
  img.entry_addr = static_cast<std::uint32_t>(r.le(4, "entry address"));
  const unsigned sb = img.state_bytes();
  auto state = [&](const char* what) { return StateBits::from_bytes(img.params.width(), r.bytes(sb, what)); };
  img.entry_patch = state("entry patch");
  const std::size_t code_off = r.pos;
  const auto code_len = r.le(4, "code length");
  if (code_len % 4 != 0) throw ImageParseError(code_off, "code length not a multiple of 4");
  r.need(code_len, "code section");
  for (std::uint64_t i = 0; i < code_len / 4; ++i) img.code.push_back(static_cast<std::uint32_t>(r.le(4, "code")));
  const auto data_len = r.le(4, "data length");
  img.data = r.bytes(data_len, "data section");
  const auto hc = r.le(1, "handler count");
  for (std::uint64_t h = 0; h < hc; ++h) {
    HandlerRecord rec;
    rec.vector = static_cast<std::uint32_t>(r.le(4, "handler vector"));
    rec.entry_patch = state("handler entry patch");
    img.handlers.push_back(std::move(rec));
  }
  const std::size_t ext_off = r.pos;
  const auto ext_len = r.le(4, "ext length");
  const unsigned eb = img.protected_image() ? img.ext_bytes() : 0;
  if (eb == 0 ? ext_len != 0 : ext_len != eb * img.code.size())
    throw ImageParseError(ext_off, "ext section length does not match the code section");
  for (std::size_t i = 0; eb && i < img.code.size(); ++i) img.ext.push_back(static_cast<std::uint32_t>(r.le(eb, "ext")));
  if (r.pos != bytes.size()) throw ImageParseError(r.pos, "trailing bytes");
  return img;
}

}  // namespace scfp
