#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "scfp/assembler.hpp"

using namespace scfp::isa;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

TEST(Isa, ExactlySixtyFourOpcodesDecode) {
  unsigned valid = 0;
  for (unsigned b = 0; b < 256; ++b)
    if (decode(b << 24 | 0x00ABCDEF)) ++valid;
  EXPECT_EQ(valid, kValidOpcodes);
}

TEST(Isa, DecodeIsTotalAndReencodes) {
  std::mt19937 rng(1);
  for (int t = 0; t < 100000; ++t) {
    const std::uint32_t w = rng();
    const auto in = decode(w);
    ASSERT_EQ(in.has_value(), opcode_valid(static_cast<std::uint8_t>(w >> 24)));
    if (in) {
      EXPECT_EQ(decode(encode(*in)), in);
    }
  }
}

TEST(Isa, MnemonicsRoundTrip) {
  for (unsigned v = 0; v <= static_cast<unsigned>(Op::IRET); ++v) {
    const auto op = static_cast<Op>(v);
    EXPECT_EQ(op_from_mnemonic(op_info(op).mnemonic), op);
  }
  EXPECT_FALSE(op_from_mnemonic("FROB"));
}

TEST(Isa, ReservedAliasesAreNops) {
  const auto in = decode(0x30000000);
  ASSERT_TRUE(in);
  EXPECT_EQ(in->op, Op::NOP);
  EXPECT_EQ(in->alias, 0x30);
  EXPECT_EQ(encode(*in), 0x30000000u);
}

TEST(Isa, ImmediateExtension) {
  Instruction a{Op::ADDI, 0, 1, 2, 0, -5};
  EXPECT_EQ(decode(encode(a))->imm, -5);
  Instruction o{Op::ORI, 0, 1, 2, 0, 0xFFFF};
  EXPECT_EQ(decode(encode(o))->imm, 0xFFFF);
  Instruction j{Op::JMPP, 0, 0, 0, 0, -400};
  EXPECT_EQ(decode(encode(j))->imm, -400);
}

TEST(Isa, UnprotectedForms) {
  EXPECT_EQ(unprotected_form(Op::BPLT), Op::BLT);
  EXPECT_EQ(unprotected_form(Op::CALLRP), Op::CALLR);
  EXPECT_EQ(unprotected_form(Op::XRET), Op::RETU);
  EXPECT_EQ(unprotected_form(Op::ADD), Op::ADD);
  EXPECT_TRUE(is_protected(Op::RET));
  EXPECT_FALSE(is_protected(Op::JMP));
}

TEST(Layout, SlotGroupsPerConstruct) {
  EXPECT_EQ(slot_words_after(Op::BPEQ, 6), 6u);
  EXPECT_EQ(slot_words_after(Op::JMPP, 2), 2u);
  EXPECT_EQ(slot_words_after(Op::CALLP, 6), 6u);
  EXPECT_EQ(slot_words_after(Op::CALLRP, 6), 12u);
  EXPECT_EQ(slot_words_after(Op::RET, 6), 0u);
  EXPECT_EQ(slot_words_after(Op::ADD, 6), 0u);
  const auto g = slot_groups_after(Op::CALLRP, 3);
  ASSERT_EQ(g.size(), 2u);
  EXPECT_EQ(g[1].offset, 16);
  EXPECT_EQ(g[1].kind, SlotKind::IcallIn);
  EXPECT_EQ(layout_rules(1).size(), 8u);
}

TEST(Assembler, DiamondLayout) {
  const auto p = assemble(read_file(SCFP_PROGRAMS_DIR "/diamond.s"), {.slot_words = 6});
  // JMP carries no slot, BPLT carries one group of six
  EXPECT_EQ(p.slot_word_count(), 6u);
  EXPECT_EQ(p.words.size(), 9u + 6u);
  const auto c = p.symbols.at("C");
  const auto bplt = *p.index_of(p.symbols.at("B")) - 7;
  EXPECT_EQ(decode(p.words[bplt])->op, Op::BPLT);
  EXPECT_EQ(p.addr_of(bplt) + static_cast<std::uint32_t>(decode(p.words[bplt])->imm), c);
  for (unsigned j = 1; j <= 6; ++j) {
    EXPECT_EQ(p.kinds[bplt + j], WordKind::Slot);
    EXPECT_EQ(p.slots.at(static_cast<std::uint32_t>(bplt + j)).kind, SlotKind::BranchTaken);
  }
}

TEST(Assembler, IndirectSlotCounts) {
  const auto src = read_file(SCFP_PROGRAMS_DIR "/indirect.s");
  const auto p = assemble(src, {.slot_words = 1});
  // bplt, 2x callp, 2x bpeq, 2x callrp (two groups), 2x xret, D and E entries
  EXPECT_EQ(p.slot_word_count(), 1u + 2 + 2 + 4 + 2 + 2);
  EXPECT_EQ(p.targets.size(), 2u);
  const auto u = assemble(src, {.unprotected = true});
  EXPECT_EQ(u.slot_word_count(), 0u);
  for (auto w : u.words) EXPECT_FALSE(is_protected(decode(w)->op));
}

TEST(Assembler, FunctionEntrySlotsAtLabel) {
  const auto p = assemble(read_file(SCFP_PROGRAMS_DIR "/indirect.s"), {.slot_words = 2});
  const auto d = *p.index_of(p.symbols.at("D"));
  EXPECT_EQ(p.kinds[d], WordKind::Slot);
  EXPECT_EQ(p.slots.at(static_cast<std::uint32_t>(d)).kind, SlotKind::FuncEntry);
  EXPECT_EQ(p.kinds[d + 2], WordKind::Instr);
}

TEST(Assembler, DisassembleRoundTrip) {
  for (const char* f : {"/diamond.s", "/diamond_duplex.s", "/two_callers.s", "/indirect.s", "/interrupt.s", "/bench/looped.s"}) {
    for (unsigned k : {1u, 2u, 6u}) {
      const auto p = assemble(read_file(std::string(SCFP_PROGRAMS_DIR) + f), {.slot_words = k});
      const auto q = assemble(disassemble_program(p), {.slot_words = k});
      EXPECT_EQ(q.words, p.words) << f << " k=" << k;
      EXPECT_EQ(q.entry, p.entry) << f;
      EXPECT_EQ(q.handlers, p.handlers) << f;
      EXPECT_EQ(q.slots.size(), p.slots.size()) << f;
    }
  }
}

std::vector<AsmDiagnostic> diags(const std::string& src) {
  try {
    assemble(src);
  } catch (const AsmError& e) {
    return e.diagnostics;
  }
  return {};
}

bool mentions(const std::vector<AsmDiagnostic>& d, int line, const std::string& text) {
  for (const auto& x : d)
    if (x.line == line && x.message.find(text) != std::string::npos) return true;
  return false;
}

TEST(Assembler, Diagnostics) {
  EXPECT_TRUE(mentions(diags("  frob r1\n"), 1, "unknown mnemonic"));
  EXPECT_TRUE(mentions(diags("  halt\n  jmp nowhere\n"), 2, "undefined label"));
  EXPECT_TRUE(mentions(diags("a: halt\na: halt\n"), 2, "duplicate label"));
  EXPECT_TRUE(mentions(diags("  addi r1, r2, 99999\n"), 1, "immediate out of range"));
  EXPECT_TRUE(mentions(diags("  add r1, r2\n"), 1, "expects 3 operand"));
  EXPECT_TRUE(mentions(diags("  add r1, r2, r16\n"), 1, "expected register"));
  EXPECT_TRUE(mentions(diags("  .bogus\n"), 1, "unknown directive"));
  EXPECT_TRUE(mentions(diags(".targets s\n  halt\n"), 1, ".targets expects"));
  EXPECT_TRUE(mentions(diags(".data\n  add r1, r2, r3\n"), 2, "instruction in the data section"));
  EXPECT_TRUE(mentions(diags("  lw r1, r2\n"), 1, "imm(reg)"));
}

TEST(Assembler, ReportsEveryError) {
  const auto d = diags("  frob\n  halt\n  add r1\n");
  EXPECT_EQ(d.size(), 2u);
}

TEST(Assembler, EntryAndHandlers) {
  const auto p = assemble(".entry go\n.handler h\nh: iret\ngo: halt\n");
  EXPECT_EQ(p.entry, p.symbols.at("go"));
  ASSERT_EQ(p.handlers.size(), 1u);
  EXPECT_EQ(p.handlers[0], 0u);
  EXPECT_TRUE(mentions(diags(".handler nope\n  halt\n"), 1, "undefined label"));
}

TEST(Assembler, DataSection) {
  const auto p = assemble("  lw r1, v(r0)\n  halt\n.data\nv: .word 5, 6\n");
  EXPECT_EQ(p.symbols.at("v"), kDefaultDataBase);
  EXPECT_EQ(p.data, (std::vector<std::uint32_t>{5, 6}));
}

}  // namespace
