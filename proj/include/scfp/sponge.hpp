#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "scfp/bits.hpp"
#include "scfp/perm.hpp"

namespace scfp {

enum class SpongeMode : std::uint8_t { ApeLike, DuplexLike };

inline constexpr unsigned kInstrBits = 32;

struct SpongeParams {
  PermSpec perm;
  unsigned rate_r = 32;
  unsigned capacity_x = 168;
  unsigned instr_i = kInstrBits;
  unsigned redundancy_n = 0;
  SpongeMode mode = SpongeMode::ApeLike;
  unsigned security_s = 84;

  unsigned width() const noexcept { return perm.width_b; }
  // Bits a patch covers: capacity for APE, the whole state for duplex.
  unsigned patch_bits() const noexcept { return mode == SpongeMode::ApeLike ? capacity_x : perm.width_b; }
  // 32-bit slot words needed for one patch value.
  unsigned slot_words() const noexcept { return (patch_bits() + 31) / 32; }
  unsigned ext_bits() const noexcept { return rate_r > instr_i ? rate_r - instr_i : 0; }

  friend bool operator==(const SpongeParams&, const SpongeParams&) = default;
};

struct Diagnostic {
  std::string rule;
  std::string message;
};

// Returns one diagnostic per violated rule; empty means ok.
inline std::vector<Diagnostic> validate_params(const SpongeParams& p) {
  std::vector<Diagnostic> out;
  try {
    check_perm_spec(p.perm, /*require_key=*/false);
  } catch (const ConfigError& e) {
    out.push_back({"permutation", e.what()});
  }
  if (p.rate_r + p.capacity_x != p.perm.width_b)
    out.push_back({"rate plus capacity", "r + x = " + std::to_string(p.rate_r + p.capacity_x) +
                                             " but the permutation width is " + std::to_string(p.perm.width_b)});
  if (p.instr_i != kInstrBits)
    out.push_back({"instruction width", "instruction width must be 32 bits"});
  if (p.rate_r != p.instr_i + p.redundancy_n)
    out.push_back({"rate equals i + n", "r = " + std::to_string(p.rate_r) + " but i + n = " +
                                            std::to_string(p.instr_i + p.redundancy_n)});
  if (p.redundancy_n > 32)
    out.push_back({"redundancy width", "at most 32 redundancy bits are supported"});
  if (p.perm.kind != PermKind::Prince && p.capacity_x < 2 * p.security_s)
    out.push_back({"capacity below 2s", "capacity " + std::to_string(p.capacity_x) + " is below 2s = " +
                                            std::to_string(2 * p.security_s)});
  return out;
}

inline void require_valid(const SpongeParams& p) {
  const auto diags = validate_params(p);
  if (diags.empty()) return;
  std::string msg = "invalid sponge parameters:";
  for (const auto& d : diags) msg += " [" + d.rule + "] " + d.message + ";";
  throw ConfigError(msg);
}

// Full b-bit state; the rate is bits [0, r) and the capacity bits [r, b).
class SpongeState {
public:
  SpongeState() = default;
  SpongeState(StateBits bits, unsigned rate_r) : bits_(std::move(bits)), rate_r_(rate_r) {}
  static SpongeState zero(const SpongeParams& p) { return {StateBits(p.width()), p.rate_r}; }

  const StateBits& bits() const noexcept { return bits_; }
  unsigned rate_bits() const noexcept { return rate_r_; }
  StateBits rate() const { return bits_.slice(0, rate_r_); }
  StateBits capacity() const { return bits_.slice(rate_r_, bits_.width() - rate_r_); }
  void set_capacity(const StateBits& c) { bits_.deposit(rate_r_, c); }
  void set_rate(const StateBits& r) { bits_.deposit(0, r); }

  std::string to_hex() const { return bits_.to_hex(); }

  friend bool operator==(const SpongeState&, const SpongeState&) = default;

private:
  StateBits bits_;
  unsigned rate_r_ = 0;
};

enum class PatchScope : std::uint8_t { Capacity, FullState };

struct PatchValue {
  PatchScope scope = PatchScope::Capacity;
  StateBits bits;

  friend bool operator==(const PatchValue&, const PatchValue&) = default;
};

inline PatchScope scope_for(SpongeMode m) {
  return m == SpongeMode::ApeLike ? PatchScope::Capacity : PatchScope::FullState;
}

inline PatchValue zero_patch(const SpongeParams& p) { return {scope_for(p.mode), StateBits(p.patch_bits())}; }

struct KeyMaterial {
  Key128 master_key{};
  std::array<std::uint8_t, 16> nonce{};
};

// The sponge permutation with the device key bound in for keyed permutations.
inline PermSpec bind_key(PermSpec perm, const KeyMaterial& km) {
  if (perm.kind == PermKind::Prince) perm.key = km.master_key;
  return perm;
}

inline SpongeParams bind_key(SpongeParams p, const KeyMaterial& km) {
  p.perm = bind_key(p.perm, km);
  return p;
}

// Absorbs N | k | context in floor(b/8)-byte chunks (pad 0x01 then zeros),
// permuting after each chunk.
inline SpongeState derive_initial_state(const SpongeParams& p, const KeyMaterial& km,
                                        std::span<const std::uint8_t> context) {
  std::vector<std::uint8_t> msg(km.nonce.begin(), km.nonce.end());
  msg.insert(msg.end(), km.master_key.begin(), km.master_key.end());
  msg.insert(msg.end(), context.begin(), context.end());
  msg.push_back(0x01);
  const std::size_t chunk = p.width() / 8;
  while (msg.size() % chunk != 0) msg.push_back(0);

  const PermSpec perm = bind_key(p.perm, km);
  StateBits s(p.width());
  for (std::size_t off = 0; off < msg.size(); off += chunk) {
    for (std::size_t i = 0; i < chunk; ++i) s.put(static_cast<unsigned>(8 * i), 8, s.get(static_cast<unsigned>(8 * i), 8) ^ msg[off + i]);
    s = permute(perm, s);
  }
  return {s, p.rate_r};
}

inline SpongeState derive_initial_state(const SpongeParams& p, const KeyMaterial& km, std::string_view tag,
                                        std::uint32_t address) {
  std::vector<std::uint8_t> ctx(tag.begin(), tag.end());
  for (unsigned i = 0; i < 4; ++i) ctx.push_back(static_cast<std::uint8_t>(address >> (8 * i)));
  return derive_initial_state(p, km, ctx);
}

inline SpongeState apply_patch(const SpongeState& z, const PatchValue& patch) {
  StateBits bits = z.bits();
  if (patch.scope == PatchScope::FullState) {
    if (patch.bits.width() != bits.width()) throw ConfigError("full-state patch width mismatch");
    bits ^= patch.bits;
  } else {
    const unsigned x = bits.width() - z.rate_bits();
    if (patch.bits.width() != x) throw ConfigError("capacity patch width mismatch");
    StateBits cap = bits.slice(z.rate_bits(), x);
    cap ^= patch.bits;
    bits.deposit(z.rate_bits(), cap);
  }
  return {bits, z.rate_bits()};
}

inline SpongeState apply_patch(const SpongeParams& p, const SpongeState& z, const PatchValue& patch) {
  if (patch.scope != scope_for(p.mode)) throw ConfigError("patch scope does not match the sponge mode");
  return apply_patch(z, patch);
}

struct UnpatchableDivergence : ConfigError {
  using ConfigError::ConfigError;
};

inline PatchValue compute_patch(const SpongeState& from, const SpongeState& to, PatchScope scope) {
  if (scope == PatchScope::FullState) return {scope, from.bits() ^ to.bits()};
  if (!(from.rate() == to.rate()))
    throw UnpatchableDivergence("unpatchable divergence: rates differ under a capacity-only patch");
  return {scope, from.capacity() ^ to.capacity()};
}

// A ciphertext is r bits: the 32-bit code word plus r-32 extension bits.
struct Ciphertext {
  std::uint32_t word = 0;
  std::uint32_t ext = 0;

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

struct DecryptResult {
  std::uint32_t plain = 0;
  std::uint32_t redundancy = 0;
  SpongeState state;  // state after the step (capacity_out for APE)
};

namespace detail {
inline StateBits load_rate(const SpongeParams& p, std::uint32_t low, std::uint32_t high) {
  StateBits r(p.rate_r);
  r.put(0, p.instr_i, low);
  r.put(p.instr_i, p.ext_bits(), high);
  return r;
}
}  // namespace detail

// P | red = f_r(C | x); the capacity is patched before the permutation.
inline DecryptResult ape_decrypt_step(const SpongeParams& p, const StateBits& capacity_in, Ciphertext c,
                                      const std::optional<PatchValue>& patch = std::nullopt) {
  StateBits cap = capacity_in;
  if (patch) {
    if (patch->scope != PatchScope::Capacity) throw ConfigError("APE mode takes capacity patches only");
    cap ^= patch->bits;
  }
  StateBits in(p.width());
  in.deposit(0, detail::load_rate(p, c.word, c.ext));
  in.deposit(p.rate_r, cap);
  const StateBits out = permute(p.perm, in);
  return {static_cast<std::uint32_t>(out.get(0, p.instr_i)),
          static_cast<std::uint32_t>(out.get(p.instr_i, p.ext_bits())), SpongeState(out, p.rate_r)};
}

struct BackwardResult {
  Ciphertext cipher;
  StateBits capacity_before;
};

// (C | x_before) = f^-1(P | 0^n | x_after).
inline BackwardResult ape_encrypt_step_backward(const SpongeParams& p, std::uint32_t plain,
                                                const StateBits& capacity_after) {
  StateBits out(p.width());
  out.deposit(0, detail::load_rate(p, plain, 0));
  out.deposit(p.rate_r, capacity_after);
  const StateBits in = permute_inverse(p.perm, out);
  return {{static_cast<std::uint32_t>(in.get(0, p.instr_i)), static_cast<std::uint32_t>(in.get(p.instr_i, p.ext_bits()))},
          in.slice(p.rate_r, p.capacity_x)};
}

// P | red = C ^ rate(z); z_out = f(P | red | capacity(z)).
inline DecryptResult duplex_decrypt_step(const SpongeParams& p, const SpongeState& z_in, Ciphertext c,
                                         const std::optional<PatchValue>& patch = std::nullopt) {
  const SpongeState z = patch ? apply_patch(p, z_in, *patch) : z_in;
  StateBits fed = detail::load_rate(p, c.word, c.ext) ^ z.rate();
  StateBits in = z.bits();
  in.deposit(0, fed);
  const StateBits out = permute(p.perm, in);
  return {static_cast<std::uint32_t>(fed.get(0, p.instr_i)), static_cast<std::uint32_t>(fed.get(p.instr_i, p.ext_bits())),
          SpongeState(out, p.rate_r)};
}

struct EncryptResult {
  Ciphertext cipher;
  SpongeState state;
};

inline EncryptResult duplex_encrypt_step(const SpongeParams& p, const SpongeState& z_in, std::uint32_t plain,
                                         const std::optional<PatchValue>& patch = std::nullopt) {
  const SpongeState z = patch ? apply_patch(p, z_in, *patch) : z_in;
  const StateBits fed = detail::load_rate(p, plain, 0);
  const StateBits ks = z.rate();
  const StateBits c = fed ^ ks;
  StateBits in = z.bits();
  in.deposit(0, fed);
  return {{static_cast<std::uint32_t>(c.get(0, p.instr_i)), static_cast<std::uint32_t>(c.get(p.instr_i, p.ext_bits()))},
          SpongeState(permute(p.perm, in), p.rate_r)};
}

// z' = z ^ e ^ z_entry
inline SpongeState combine_interrupt_exit(const SpongeState& z, const SpongeState& e, const SpongeState& z_entry) {
  if (z.bits().width() != e.bits().width() || z.bits().width() != z_entry.bits().width())
    throw ConfigError("interrupt states differ in width");
  return {z.bits() ^ e.bits() ^ z_entry.bits(), z.rate_bits()};
}

inline bool check_redundancy(std::uint32_t redundancy) noexcept { return redundancy == 0; }

// ---- text config: key=value lines ----

inline std::string to_config_text(const SpongeParams& p) {
  std::ostringstream os;
  os << "mode=" << (p.mode == SpongeMode::ApeLike ? "ape" : "duplex") << "\n";
  os << "perm=" << (p.perm.kind == PermKind::Prince ? "prince" : "keccak-p" + std::to_string(p.perm.width_b)) << "\n";
  os << "rounds=" << p.perm.rounds << "\n";
  os << "r=" << p.rate_r << "\n";
  os << "x=" << p.capacity_x << "\n";
  os << "n=" << p.redundancy_n << "\n";
  os << "s=" << p.security_s << "\n";
  return os.str();
}

inline SpongeParams parse_config_text(std::string_view text) {
  SpongeParams p;
  std::istringstream is{std::string(text)};
  std::string line;
  std::optional<unsigned> rounds;
  while (std::getline(is, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw ConfigError("config line without '=': " + line);
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    auto num = [&] {
      try {
        return static_cast<unsigned>(std::stoul(val));
      } catch (const std::exception&) {
        throw ConfigError("config value for '" + key + "' is not a number: " + val);
      }
    };
    if (key == "mode") {
      if (val == "ape") p.mode = SpongeMode::ApeLike;
      else if (val == "duplex") p.mode = SpongeMode::DuplexLike;
      else throw ConfigError("unknown mode: " + val);
    } else if (key == "perm") {
      if (val == "keccak-p200") p.perm = PermSpec::keccak(200);
      else if (val == "keccak-p50") p.perm = PermSpec::keccak(50);
      else if (val == "prince") p.perm = PermSpec::prince();
      else throw ConfigError("unknown perm: " + val);
    } else if (key == "rounds") {
      rounds = num();
    } else if (key == "r") p.rate_r = num();
    else if (key == "x") p.capacity_x = num();
    else if (key == "n") p.redundancy_n = num();
    else if (key == "s") p.security_s = num();
    else throw ConfigError("unknown config key: " + key);
  }
  if (p.perm.kind == PermKind::Prince) p.perm.rounds = 0;
  else p.perm.rounds = rounds.value_or(12);
  return p;
}

}  // namespace scfp
