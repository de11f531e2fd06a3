#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include "scfp/bits.hpp"
#include "scfp/keccak.hpp"
#include "scfp/prince.hpp"

namespace scfp {

using Key128 = std::array<std::uint8_t, 16>;

enum class PermKind : std::uint8_t { KeccakP, Prince };

// Which permutation f the sponge runs on. PRINCE is keyed; Keccak-p is not.
struct PermSpec {
  PermKind kind = PermKind::KeccakP;
  unsigned width_b = 200;
  unsigned rounds = 12;
  std::optional<Key128> key;  // PRINCE only
  unsigned security_sp = 0;   // informational: security of the keyed permutation

  bool keyed() const noexcept { return key.has_value(); }

  static PermSpec keccak(unsigned width, unsigned rounds = 12) {
    return PermSpec{PermKind::KeccakP, width, rounds, std::nullopt, 0};
  }
  static PermSpec prince(std::optional<Key128> key = std::nullopt) {
    return PermSpec{PermKind::Prince, 64, 0, key, 96};
  }

  std::string name() const {
    if (kind == PermKind::Prince) return "PRINCE";
    return "Keccak-p[" + std::to_string(width_b) + "," + std::to_string(rounds) + "]";
  }

  friend bool operator==(const PermSpec&, const PermSpec&) = default;
};

// Throws ConfigError when the spec is not one of the supported shapes.
inline void check_perm_spec(const PermSpec& spec, bool require_key = true) {
  if (spec.kind == PermKind::KeccakP) {
    if (spec.width_b != 50 && spec.width_b != 200)
      throw ConfigError("Keccak-p width must be 50 or 200");
    const unsigned max_rounds = spec.width_b == 50 ? keccak::KeccakP50::kMaxRounds : keccak::KeccakP200::kMaxRounds;
    if (spec.rounds > max_rounds) throw ConfigError("Keccak-p round count exceeds 12+2l");
    if (spec.key) throw ConfigError("Keccak-p is unkeyed");
  } else {
    if (spec.width_b != 64) throw ConfigError("PRINCE width must be 64");
    if (require_key && !spec.key) throw ConfigError("PRINCE requires a 128-bit key");
  }
}

inline prince::Key prince_key(const Key128& k) {
  prince::Key out;
  for (unsigned i = 0; i < 8; ++i) {
    out.k0 = out.k0 << 8 | k[i];
    out.k1 = out.k1 << 8 | k[8 + i];
  }
  return out;
}

namespace detail {

template <class Keccak>
StateBits keccak_apply(const StateBits& s, unsigned rounds, bool inverse) {
  return inverse ? Keccak::permute_inverse_state(s, rounds) : Keccak::permute_state(s, rounds);
}

inline StateBits apply(const PermSpec& spec, const StateBits& s, bool inverse) {
  if (s.width() != spec.width_b)
    throw ConfigError("state width " + std::to_string(s.width()) + " does not match " + spec.name());
  if (spec.kind == PermKind::KeccakP) {
    if (spec.width_b == 50) return keccak_apply<keccak::KeccakP50>(s, spec.rounds, inverse);
    if (spec.width_b == 200) return keccak_apply<keccak::KeccakP200>(s, spec.rounds, inverse);
    throw ConfigError("Keccak-p width must be 50 or 200");
  }
  if (!spec.key) throw ConfigError("PRINCE requires a 128-bit key");
  const auto key = prince_key(*spec.key);
  const std::uint64_t v = s.get(0, 64);
  StateBits out(64);
  out.put(0, 64, inverse ? prince::decrypt(v, key) : prince::encrypt(v, key));
  return out;
}

}  // namespace detail

inline StateBits permute(const PermSpec& spec, const StateBits& s) { return detail::apply(spec, s, false); }

inline StateBits permute_inverse(const PermSpec& spec, const StateBits& s) { return detail::apply(spec, s, true); }

}  // namespace scfp
