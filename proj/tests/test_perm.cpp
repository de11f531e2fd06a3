#include <gtest/gtest.h>

#include <random>

#include "oracle/keccak_reference.hpp"
#include "scfp/perm.hpp"

using namespace scfp;

namespace {

std::vector<int> to_bits(const StateBits& s) {
  std::vector<int> v(s.width());
  for (unsigned i = 0; i < s.width(); ++i) v[i] = s.bit(i);
  return v;
}

class KeccakOracle : public ::testing::TestWithParam<unsigned> {};

TEST_P(KeccakOracle, MatchesReferenceOnRandomStates) {
  const unsigned w = GetParam();
  const auto spec = PermSpec::keccak(w, 12);
  oracle::KeccakReference ref(w);
  std::mt19937_64 rng(1000 + w);
  for (int t = 0; t < 10; ++t) {
    const auto s = StateBits::random(w, rng);
    EXPECT_EQ(to_bits(permute(spec, s)), ref.permute(to_bits(s), 12)) << "state " << s.to_hex();
  }
}

TEST_P(KeccakOracle, MatchesReferenceForEveryRoundCount) {
  const unsigned w = GetParam();
  oracle::KeccakReference ref(w);
  std::mt19937_64 rng(7);
  const auto s = StateBits::random(w, rng);
  for (unsigned nr = 1; nr <= 12; ++nr) EXPECT_EQ(to_bits(permute(PermSpec::keccak(w, nr), s)), ref.permute(to_bits(s), nr)) << nr;
}

TEST_P(KeccakOracle, InverseUndoesForward) {
  const unsigned w = GetParam();
  const auto spec = PermSpec::keccak(w, 12);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto s = StateBits::random(w, rng);
    EXPECT_EQ(permute_inverse(spec, permute(spec, s)), s);
    EXPECT_EQ(permute(spec, permute_inverse(spec, s)), s);
  }
}

INSTANTIATE_TEST_SUITE_P(Widths, KeccakOracle, ::testing::Values(50u, 200u));

template <class K>
void lanewise_agrees() {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    typename K::Lanes a{}, b{};
    for (auto& x : a) x = static_cast<std::uint8_t>(rng() & ((1u << (K::kWidth / 25)) - 1));
    b = a;
    K::permute(a, 12);
    K::permute_lanewise(b, 12);
    EXPECT_EQ(a, b);
  }
}

TEST(Keccak, PlaneAndLanewiseRoundsAgree) {
  lanewise_agrees<keccak::KeccakP50>();
  lanewise_agrees<keccak::KeccakP200>();
}

TEST(Keccak, ZeroStateIsNotFixed) {
  const auto spec = PermSpec::keccak(200, 12);
  EXPECT_NE(permute(spec, StateBits(200)), StateBits(200));
}

// Published PRINCE test vectors (plaintext, k0, k1, ciphertext).
struct PrinceVector {
  std::uint64_t pt, k0, k1, ct;
};

TEST(Prince, PublishedVectors) {
  const PrinceVector v[] = {
      {0x0000000000000000ULL, 0x0000000000000000ULL, 0x0000000000000000ULL, 0x818665aa0d02dfdaULL},
      {0xffffffffffffffffULL, 0x0000000000000000ULL, 0x0000000000000000ULL, 0x604ae6ca03c20adaULL},
      {0x0000000000000000ULL, 0xffffffffffffffffULL, 0x0000000000000000ULL, 0x9fb51935fc3df524ULL},
      {0x0000000000000000ULL, 0x0000000000000000ULL, 0xffffffffffffffffULL, 0x78a54cbe737bb7efULL},
      {0x0123456789abcdefULL, 0x0000000000000000ULL, 0xfedcba9876543210ULL, 0xae25ad3ca8fa9ccfULL},
  };
  for (const auto& t : v) {
    const prince::Key k{t.k0, t.k1};
    EXPECT_EQ(prince::encrypt(t.pt, k), t.ct);
    EXPECT_EQ(prince::decrypt(t.ct, k), t.pt);
  }
}

TEST(Prince, KeyBytesAreBigEndianHalves) {
  Key128 key{};
  for (unsigned i = 0; i < 16; ++i) key[i] = static_cast<std::uint8_t>(i);
  const auto k = prince_key(key);
  EXPECT_EQ(k.k0, 0x0001020304050607ULL);
  EXPECT_EQ(k.k1, 0x08090a0b0c0d0e0fULL);
}

TEST(Prince, PermuteThroughSpec) {
  Key128 key{};
  key[15] = 0x10;
  const auto spec = PermSpec::prince(key);
  StateBits s(64);
  s.put(0, 64, 0x0123456789abcdefULL);
  const auto c = permute(spec, s);
  EXPECT_EQ(c.get(0, 64), prince::encrypt(0x0123456789abcdefULL, prince_key(key)));
  EXPECT_EQ(permute_inverse(spec, c), s);
}

TEST(PermSpec, RejectsBadShapes) {
  EXPECT_THROW(check_perm_spec(PermSpec::keccak(100)), ConfigError);
  EXPECT_THROW(check_perm_spec(PermSpec::keccak(50, 15)), ConfigError);
  EXPECT_THROW(check_perm_spec(PermSpec::prince()), ConfigError);
  EXPECT_NO_THROW(check_perm_spec(PermSpec::prince(), false));
  EXPECT_THROW(permute(PermSpec::keccak(50), StateBits(200)), ConfigError);
  EXPECT_THROW(permute(PermSpec::prince(), StateBits(64)), ConfigError);
}

}  // namespace
