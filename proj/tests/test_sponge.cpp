#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "scfp/presets.hpp"
#include "scfp/sponge.hpp"

using namespace scfp;

namespace {

bool has_rule(const std::vector<Diagnostic>& d, const std::string& rule) {
  return std::any_of(d.begin(), d.end(), [&](const Diagnostic& x) { return x.rule == rule; });
}

TEST(Params, PresetsValidateInBothModes) {
  for (const auto& p : presets()) {
    EXPECT_TRUE(validate_params(p.params).empty()) << p.name;
    EXPECT_TRUE(validate_params(with_mode(p.params, SpongeMode::DuplexLike)).empty()) << p.name;
  }
}

TEST(Params, PresetShapes) {
  EXPECT_EQ(preset("AEE").slot_words(), 6u);
  EXPECT_EQ(with_mode(preset("AEE"), SpongeMode::DuplexLike).slot_words(), 7u);
  EXPECT_EQ(preset("MICRO").slot_words(), 1u);
  EXPECT_EQ(with_mode(preset("MICRO"), SpongeMode::DuplexLike).slot_words(), 2u);
  EXPECT_EQ(preset("IE").ext_bits(), 2u);
  EXPECT_THROW(preset("NOPE"), ConfigError);
}

TEST(Params, RateCapacityMismatch) {
  auto p = preset("AEE");
  p.capacity_x = 167;
  EXPECT_TRUE(has_rule(validate_params(p), "rate plus capacity"));
}

TEST(Params, RateMustEqualInstrPlusRedundancy) {
  auto p = preset("IE");
  p.redundancy_n = 1;
  EXPECT_TRUE(has_rule(validate_params(p), "rate equals i + n"));
}

TEST(Params, InstructionWidthFixed) {
  auto p = preset("AEE");
  p.instr_i = 16;
  EXPECT_TRUE(has_rule(validate_params(p), "instruction width"));
}

TEST(Params, CapacityJustBelowTwoS) {
  auto p = preset("AEE");
  p.security_s = 85;
  EXPECT_TRUE(has_rule(validate_params(p), "capacity below 2s"));
  p.security_s = 84;
  EXPECT_TRUE(validate_params(p).empty());
  auto ie = preset("IE");
  ie.capacity_x = 15;
  ie.rate_r = 35;
  ie.redundancy_n = 3;
  EXPECT_TRUE(has_rule(validate_params(ie), "capacity below 2s"));
  EXPECT_EQ(validate_params(ie).size(), 1u);
}

TEST(Params, KeyedPermutationSkipsCapacityBound) {
  auto p = preset("AEE_LIGHT");
  p.security_s = 64;
  EXPECT_TRUE(validate_params(p).empty());
}

TEST(Params, BadPermutationWidth) {
  auto p = preset("AEE");
  p.perm = PermSpec::keccak(100);
  const auto d = validate_params(p);
  EXPECT_TRUE(has_rule(d, "permutation"));
  EXPECT_TRUE(has_rule(d, "rate plus capacity"));
}

TEST(Params, RequireValidNamesRules) {
  auto p = preset("IE");
  p.rate_r = 35;
  try {
    require_valid(p);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("rate plus capacity"), std::string::npos);
  }
}

TEST(Params, ConfigTextRoundTrip) {
  for (const auto& p : presets()) {
    for (auto m : {SpongeMode::ApeLike, SpongeMode::DuplexLike}) {
      const auto q = with_mode(p.params, m);
      EXPECT_EQ(parse_config_text(to_config_text(q)), q) << p.name;
    }
  }
}

TEST(Params, ConfigTextErrors) {
  EXPECT_THROW(parse_config_text("mode=sideways\n"), ConfigError);
  EXPECT_THROW(parse_config_text("r=abc\n"), ConfigError);
  EXPECT_THROW(parse_config_text("colour=red\n"), ConfigError);
  EXPECT_THROW(parse_config_text("garbage\n"), ConfigError);
  EXPECT_NO_THROW(parse_config_text("# comment only\n\n"));
}

KeyMaterial km(std::uint8_t seed) {
  KeyMaterial k;
  for (unsigned i = 0; i < 16; ++i) {
    k.master_key[i] = static_cast<std::uint8_t>(seed + i);
    k.nonce[i] = static_cast<std::uint8_t>(seed * 3 + i);
  }
  return k;
}

TEST(Sponge, InitialStateDependsOnEveryInput) {
  const auto p = preset("AEE");
  const auto a = derive_initial_state(p, km(1), "fn", 0x100);
  EXPECT_EQ(a, derive_initial_state(p, km(1), "fn", 0x100));
  EXPECT_NE(a, derive_initial_state(p, km(2), "fn", 0x100));
  EXPECT_NE(a, derive_initial_state(p, km(1), "fn", 0x104));
  EXPECT_NE(a, derive_initial_state(p, km(1), "irq", 0x100));
}

TEST(Sponge, ApeBackwardThenForward) {
  for (const char* name : {"AEE", "IE", "MICRO", "MICRO_N0"}) {
    const auto p = preset(name);
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
      const auto cap_after = StateBits::random(p.capacity_x, rng);
      const std::uint32_t plain = static_cast<std::uint32_t>(rng());
      const auto back = ape_encrypt_step_backward(p, plain, cap_after);
      const auto fwd = ape_decrypt_step(p, back.capacity_before, back.cipher);
      EXPECT_EQ(fwd.plain, plain);
      EXPECT_EQ(fwd.redundancy, 0u);
      EXPECT_EQ(fwd.state.capacity(), cap_after);
    }
  }
}

TEST(Sponge, ApePatchRedirectsCapacity) {
  const auto p = preset("AEE");
  std::mt19937_64 rng(4);
  const auto have = StateBits::random(p.capacity_x, rng);
  const auto back = ape_encrypt_step_backward(p, 0x1234, StateBits::random(p.capacity_x, rng));
  const PatchValue patch{PatchScope::Capacity, have ^ back.capacity_before};
  const auto r = ape_decrypt_step(p, have, back.cipher, patch);
  EXPECT_EQ(r.plain, 0x1234u);
  EXPECT_THROW(ape_decrypt_step(p, have, back.cipher, PatchValue{PatchScope::FullState, StateBits(200)}), ConfigError);
}

TEST(Sponge, DuplexRoundTrip) {
  const auto p = with_mode(preset("IE"), SpongeMode::DuplexLike);
  auto enc = derive_initial_state(p, km(5), "fn", 0);
  auto dec = enc;
  std::mt19937_64 rng(6);
  for (int t = 0; t < 50; ++t) {
    const std::uint32_t w = static_cast<std::uint32_t>(rng());
    const auto e = duplex_encrypt_step(p, enc, w);
    const auto d = duplex_decrypt_step(p, dec, e.cipher);
    EXPECT_EQ(d.plain, w);
    EXPECT_EQ(d.redundancy, 0u);
    EXPECT_EQ(d.state, e.state);
    enc = e.state;
    dec = d.state;
  }
}

TEST(Sponge, DuplexCiphertextDeltaEqualsPlaintextDelta) {
  const auto p = with_mode(preset("AEE"), SpongeMode::DuplexLike);
  const auto z = derive_initial_state(p, km(7), "fn", 0);
  const auto e = duplex_encrypt_step(p, z, 0xdeadbeef);
  for (unsigned bit = 0; bit < 32; ++bit) {
    Ciphertext c = e.cipher;
    c.word ^= 1u << bit;
    EXPECT_EQ(duplex_decrypt_step(p, z, c).plain, 0xdeadbeefu ^ (1u << bit));
  }
}

TEST(Sponge, ComputePatchReachesTarget) {
  const auto p = with_mode(preset("AEE"), SpongeMode::DuplexLike);
  const auto a = derive_initial_state(p, km(1), "a", 0);
  const auto b = derive_initial_state(p, km(1), "b", 0);
  const auto patch = compute_patch(a, b, PatchScope::FullState);
  EXPECT_EQ(apply_patch(p, a, patch), b);
  EXPECT_THROW(compute_patch(a, b, PatchScope::Capacity), UnpatchableDivergence);
  EXPECT_THROW(apply_patch(preset("AEE"), a, patch), ConfigError);
}

TEST(Sponge, CapacityPatchLeavesRate) {
  const auto p = preset("AEE");
  const auto a = derive_initial_state(p, km(1), "a", 0);
  std::mt19937_64 rng(9);
  const PatchValue patch{PatchScope::Capacity, StateBits::random(p.capacity_x, rng)};
  const auto b = apply_patch(p, a, patch);
  EXPECT_EQ(b.rate(), a.rate());
  EXPECT_EQ(b.capacity(), a.capacity() ^ patch.bits);
}

TEST(Sponge, InterruptExitCombination) {
  const auto p = preset("AEE");
  const auto z = derive_initial_state(p, km(1), "z", 0);
  const auto e = derive_initial_state(p, km(1), "e", 0);
  const auto ze = derive_initial_state(p, km(1), "ze", 0);
  const auto out = combine_interrupt_exit(z, e, ze);
  // e == z_entry restores z
  EXPECT_EQ(combine_interrupt_exit(z, ze, ze), z);
  EXPECT_EQ(out.bits(), z.bits() ^ e.bits() ^ ze.bits());
}

}  // namespace
