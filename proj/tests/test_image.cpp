#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "scfp/linker.hpp"
#include "scfp/presets.hpp"

using namespace scfp;

namespace {

std::string read_program(const std::string& name) {
  std::ifstream f(std::string(SCFP_PROGRAMS_DIR) + "/" + name);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

KeyMaterial key_material() {
  KeyMaterial km;
  for (unsigned i = 0; i < 16; ++i) {
    km.master_key[i] = static_cast<std::uint8_t>(i * 17);
    km.nonce[i] = static_cast<std::uint8_t>(255 - i);
  }
  return km;
}

EncryptedImage linked(const std::string& file, const SpongeParams& p) {
  const auto prog = isa::assemble(read_program(file), {.slot_words = p.slot_words()});
  return link::link(prog, key_material(), p).image;
}

TEST(Image, RoundTripEveryPreset) {
  for (const auto& pr : presets()) {
    const auto img = linked("interrupt.s", pr.params);
    const auto bytes = serialize(img);
    const auto back = parse_image(bytes);
    EXPECT_EQ(back, img) << pr.name;
    EXPECT_EQ(serialize(back), bytes) << pr.name;
    EXPECT_FALSE(back.params.perm.keyed());
  }
}

TEST(Image, RoundTripDuplexAndData) {
  const auto p = with_mode(preset("IE"), SpongeMode::DuplexLike);
  const auto prog = isa::assemble("  lw r1, v(r0)\n  halt\n.data\nv: .word 0x01020304\n", {.slot_words = p.slot_words()});
  const auto img = link::link(prog, key_material(), p).image;
  EXPECT_EQ(img.data, (std::vector<std::uint8_t>{4, 3, 2, 1}));
  EXPECT_EQ(parse_image(serialize(img)), img);
  EXPECT_EQ(parse_image(serialize(img)).mode, ImageMode::Duplex);
}

TEST(Image, PlainImageRoundTrip) {
  const auto prog = isa::assemble(read_program("diamond.s"), {.unprotected = true});
  const auto img = link::plain_image(prog, preset("AEE"));
  const auto back = parse_image(serialize(img));
  EXPECT_EQ(back, img);
  EXPECT_TRUE(back.ext.empty());
}

TEST(Image, ExtensionBitsCarried) {
  const auto img = linked("diamond.s", preset("MICRO"));
  ASSERT_EQ(img.ext.size(), img.code.size());
  EXPECT_EQ(img.ext_bytes(), 2u);
  bool any = false;
  for (auto e : img.ext) {
    EXPECT_LT(e, 1u << 10);
    any |= e != 0;
  }
  EXPECT_TRUE(any);
}

std::size_t parse_error_offset(const std::vector<std::uint8_t>& b) {
  try {
    parse_image(b);
  } catch (const ImageParseError& e) {
    return e.offset;
  }
  return static_cast<std::size_t>(-1);
}

TEST(Image, ParseErrors) {
  const auto good = serialize(linked("diamond.s", preset("AEE")));
  auto b = good;
  b[0] = 'X';
  EXPECT_EQ(parse_error_offset(b), 0u);
  b = good;
  b[4] = 2;
  EXPECT_EQ(parse_error_offset(b), 4u);
  b = good;
  b[5] = 9;
  EXPECT_EQ(parse_error_offset(b), 5u);
  b = good;
  b[6] = 7;
  EXPECT_EQ(parse_error_offset(b), 6u);
  b = good;
  b[7] = 33;  // rate 33 + 168 != 200
  EXPECT_EQ(parse_error_offset(b), 7u);
  b = good;
  b.push_back(0);
  EXPECT_EQ(parse_error_offset(b), good.size());
  b = good;
  b.resize(b.size() - 1);
  EXPECT_THROW(parse_image(b), ImageParseError);
  EXPECT_THROW(parse_image({}), ImageParseError);
}

TEST(Image, NonceStoredKeyNot) {
  const auto img = linked("diamond.s", preset("AEE_LIGHT"));
  const auto bytes = serialize(img);
  const auto km = key_material();
  EXPECT_EQ(std::vector<std::uint8_t>(bytes.begin() + 13, bytes.begin() + 29),
            std::vector<std::uint8_t>(km.nonce.begin(), km.nonce.end()));
  EXPECT_EQ(std::search(bytes.begin(), bytes.end(), km.master_key.begin(), km.master_key.end()), bytes.end());
}

TEST(Image, PatchWordsLowBitsFirst) {
  std::vector<std::uint32_t> code(4);
  StateBits s(50);
  s.put(0, 50, 0x3FFFF12345678ULL);
  link::store_patch(code, 1, s, 2);
  EXPECT_EQ(code[1], static_cast<std::uint32_t>(0x3FFFF12345678ULL));
  EXPECT_EQ(code[2], static_cast<std::uint32_t>(0x3FFFF12345678ULL >> 32));
  EXPECT_EQ(link::load_patch(code, 1, 50), s);
}

}  // namespace
