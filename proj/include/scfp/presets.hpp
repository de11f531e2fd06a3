#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "scfp/sponge.hpp"

namespace scfp {

struct Preset {
  std::string_view name;
  SpongeParams params;
  std::string_view note;
};

inline SpongeParams make_params(PermSpec perm, unsigned r, unsigned x, unsigned n, unsigned s,
                                SpongeMode mode = SpongeMode::ApeLike) {
  SpongeParams p;
  p.perm = perm;
  p.rate_r = r;
  p.capacity_x = x;
  p.instr_i = kInstrBits;
  p.redundancy_n = n;
  p.mode = mode;
  p.security_s = s;
  return p;
}

inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> all{
      {"AEE", make_params(PermSpec::keccak(200), 32, 168, 0, 84), "full protection"},
      {"IE", make_params(PermSpec::keccak(50), 34, 16, 2, 8), "lightweight, integrity only"},
      {"AEE_LIGHT", make_params(PermSpec::prince(), 32, 32, 0, 16), "keyed permutation"},
      {"MICRO", make_params(PermSpec::keccak(50), 42, 8, 10, 4), "not secure: statistics only"},
      {"MICRO_N0", make_params(PermSpec::keccak(50), 32, 18, 0, 9), "not secure: statistics only, n=0"},
  };
  return all;
}

inline std::optional<SpongeParams> find_preset(std::string_view name) {
  for (const auto& p : presets())
    if (p.name == name) return p.params;
  return std::nullopt;
}

inline SpongeParams preset(std::string_view name) {
  if (auto p = find_preset(name)) return *p;
  throw ConfigError("unknown preset: " + std::string(name));
}

inline SpongeParams with_mode(SpongeParams p, SpongeMode m) {
  p.mode = m;
  return p;
}

}  // namespace scfp
