#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scfp::isa {

// Opcode byte = bits [31:24]. Exactly 64 of the 256 byte values decode.
enum class Op : std::uint8_t {
  NOP = 0x00,
  ADD, SUB, AND, OR, XOR, SLL, SRL, SRA, SLT, SLTU,
  ADDI, ANDI, ORI, XORI, SLTI, LUI,
  LW, SW,
  BEQ, BNE, BLT, BGE, JMP, CALL, CALLR, RETU,
  BPEQ, BPNE, BPLT, BPGE, JMPP, CALLP, CALLRP, RET, XRET,
  HALT, IRET,
  // 0x26..0x3F: reserved aliases of NOP
  kFirstAlias = 0x26,
  kLastAlias = 0x3F,
};

inline constexpr unsigned kValidOpcodes = 64;
inline constexpr unsigned kLinkReg = 14;
inline constexpr unsigned kStackReg = 13;

inline constexpr bool opcode_valid(std::uint8_t op) noexcept { return op <= static_cast<std::uint8_t>(Op::kLastAlias); }

enum class Format : std::uint8_t {
  None,      // NOP HALT IRET RET XRET RETU
  RegReg,    // rd, rs1, rs2
  RegImm,    // rd, rs1, imm16
  Upper,     // rd, imm16
  Load,      // rd, imm(rs1)
  Store,     // rs2, imm(rs1)
  Branch,    // rs1, rs2, off16
  Jump,      // off24
  Register,  // rs1
};

struct OpInfo {
  std::string_view mnemonic;
  Format format;
};

inline constexpr OpInfo op_info(Op op) {
  switch (op) {
    case Op::NOP: return {"NOP", Format::None};
    case Op::ADD: return {"ADD", Format::RegReg};
    case Op::SUB: return {"SUB", Format::RegReg};
    case Op::AND: return {"AND", Format::RegReg};
    case Op::OR: return {"OR", Format::RegReg};
    case Op::XOR: return {"XOR", Format::RegReg};
    case Op::SLL: return {"SLL", Format::RegReg};
    case Op::SRL: return {"SRL", Format::RegReg};
    case Op::SRA: return {"SRA", Format::RegReg};
    case Op::SLT: return {"SLT", Format::RegReg};
    case Op::SLTU: return {"SLTU", Format::RegReg};
    case Op::ADDI: return {"ADDI", Format::RegImm};
    case Op::ANDI: return {"ANDI", Format::RegImm};
    case Op::ORI: return {"ORI", Format::RegImm};
    case Op::XORI: return {"XORI", Format::RegImm};
    case Op::SLTI: return {"SLTI", Format::RegImm};
    case Op::LUI: return {"LUI", Format::Upper};
    case Op::LW: return {"LW", Format::Load};
    case Op::SW: return {"SW", Format::Store};
    case Op::BEQ: return {"BEQ", Format::Branch};
    case Op::BNE: return {"BNE", Format::Branch};
    case Op::BLT: return {"BLT", Format::Branch};
    case Op::BGE: return {"BGE", Format::Branch};
    case Op::JMP: return {"JMP", Format::Jump};
    case Op::CALL: return {"CALL", Format::Jump};
    case Op::CALLR: return {"CALLR", Format::Register};
    case Op::RETU: return {"RETU", Format::None};
    case Op::BPEQ: return {"BPEQ", Format::Branch};
    case Op::BPNE: return {"BPNE", Format::Branch};
    case Op::BPLT: return {"BPLT", Format::Branch};
    case Op::BPGE: return {"BPGE", Format::Branch};
    case Op::JMPP: return {"JMPP", Format::Jump};
    case Op::CALLP: return {"CALLP", Format::Jump};
    case Op::CALLRP: return {"CALLRP", Format::Register};
    case Op::RET: return {"RET", Format::None};
    case Op::XRET: return {"XRET", Format::None};
    case Op::HALT: return {"HALT", Format::None};
    case Op::IRET: return {"IRET", Format::None};
    default: return {"NOP", Format::None};  // reserved aliases
  }
}

inline std::optional<Op> op_from_mnemonic(std::string_view m) {
  for (unsigned v = 0; v <= static_cast<unsigned>(Op::IRET); ++v) {
    const auto op = static_cast<Op>(v);
    if (op_info(op).mnemonic == m) return op;
  }
  return std::nullopt;
}

inline constexpr bool is_protected(Op op) {
  switch (op) {
    case Op::BPEQ: case Op::BPNE: case Op::BPLT: case Op::BPGE:
    case Op::JMPP: case Op::CALLP: case Op::CALLRP: case Op::RET: case Op::XRET:
      return true;
    default:
      return false;
  }
}

inline constexpr bool is_cond_branch(Op op) {
  switch (op) {
    case Op::BEQ: case Op::BNE: case Op::BLT: case Op::BGE:
    case Op::BPEQ: case Op::BPNE: case Op::BPLT: case Op::BPGE:
      return true;
    default:
      return false;
  }
}

// Plain counterpart used for unprotected baseline builds.
inline constexpr Op unprotected_form(Op op) {
  switch (op) {
    case Op::BPEQ: return Op::BEQ;
    case Op::BPNE: return Op::BNE;
    case Op::BPLT: return Op::BLT;
    case Op::BPGE: return Op::BGE;
    case Op::JMPP: return Op::JMP;
    case Op::CALLP: return Op::CALL;
    case Op::CALLRP: return Op::CALLR;
    case Op::RET: case Op::XRET: return Op::RETU;
    default: return op;
  }
}

struct Instruction {
  Op op = Op::NOP;
  std::uint8_t alias = 0;  // raw opcode byte for reserved NOP aliases
  unsigned rd = 0, rs1 = 0, rs2 = 0;
  std::int32_t imm = 0;  // imm16 (sign- or zero-extended per op) or byte offset

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

inline constexpr std::int32_t sext(std::uint32_t v, unsigned bits) {
  const std::uint32_t m = 1u << (bits - 1);
  return static_cast<std::int32_t>((v ^ m) - m);
}

inline constexpr bool zero_extended_imm(Op op) { return op == Op::ANDI || op == Op::ORI || op == Op::XORI || op == Op::LUI; }

inline std::uint32_t encode(const Instruction& in) {
  const std::uint8_t opbyte = in.alias ? in.alias : static_cast<std::uint8_t>(in.op);
  std::uint32_t w = std::uint32_t{opbyte} << 24;
  const auto imm16 = static_cast<std::uint32_t>(in.imm) & 0xFFFF;
  switch (op_info(in.op).format) {
    case Format::None: break;
    case Format::RegReg: w |= in.rd << 20 | in.rs1 << 16 | in.rs2 << 12; break;
    case Format::RegImm: case Format::Load: w |= in.rd << 20 | in.rs1 << 16 | imm16; break;
    case Format::Upper: w |= in.rd << 20 | imm16; break;
    case Format::Store: w |= in.rs2 << 20 | in.rs1 << 16 | imm16; break;
    case Format::Branch: w |= in.rs1 << 20 | in.rs2 << 16 | imm16; break;
    case Format::Jump: w |= static_cast<std::uint32_t>(in.imm) & 0xFFFFFF; break;
    case Format::Register: w |= in.rs1 << 20; break;
  }
  return w;
}

// Total function: nullopt iff the opcode byte is outside the valid set.
// Unused operand bits are ignored, so validity depends on the opcode alone.
inline std::optional<Instruction> decode(std::uint32_t w) {
  const auto opbyte = static_cast<std::uint8_t>(w >> 24);
  if (!opcode_valid(opbyte)) return std::nullopt;
  Instruction in;
  if (opbyte >= static_cast<std::uint8_t>(Op::kFirstAlias)) {
    in.op = Op::NOP;
    in.alias = opbyte;
    return in;
  }
  in.op = static_cast<Op>(opbyte);
  const unsigned a = (w >> 20) & 0xF, b = (w >> 16) & 0xF, c = (w >> 12) & 0xF;
  const std::uint32_t imm16 = w & 0xFFFF;
  const std::int32_t imm = zero_extended_imm(in.op) ? static_cast<std::int32_t>(imm16) : sext(imm16, 16);
  switch (op_info(in.op).format) {
    case Format::None: break;
    case Format::RegReg: in.rd = a; in.rs1 = b; in.rs2 = c; break;
    case Format::RegImm: case Format::Load: in.rd = a; in.rs1 = b; in.imm = imm; break;
    case Format::Upper: in.rd = a; in.imm = imm; break;
    case Format::Store: in.rs2 = a; in.rs1 = b; in.imm = imm; break;
    case Format::Branch: in.rs1 = a; in.rs2 = b; in.imm = sext(imm16, 16); break;
    case Format::Jump: in.imm = sext(w & 0xFFFFFF, 24); break;
    case Format::Register: in.rs1 = a; break;
  }
  return in;
}

// Canonical re-encoding: decode(w) then encode drops ignored operand bits.
inline std::string to_text(const Instruction& in) {
  auto r = [](unsigned n) { return "r" + std::to_string(n); };
  auto rel = [](std::int32_t off) { return std::string("@") + (off >= 0 ? "+" : "") + std::to_string(off); };
  if (in.alias) return ".alias " + std::to_string(in.alias);
  std::string m(op_info(in.op).mnemonic);
  switch (op_info(in.op).format) {
    case Format::None: return m;
    case Format::RegReg: return m + " " + r(in.rd) + ", " + r(in.rs1) + ", " + r(in.rs2);
    case Format::RegImm: return m + " " + r(in.rd) + ", " + r(in.rs1) + ", " + std::to_string(in.imm);
    case Format::Upper: return m + " " + r(in.rd) + ", " + std::to_string(in.imm);
    case Format::Load: return m + " " + r(in.rd) + ", " + std::to_string(in.imm) + "(" + r(in.rs1) + ")";
    case Format::Store: return m + " " + r(in.rs2) + ", " + std::to_string(in.imm) + "(" + r(in.rs1) + ")";
    case Format::Branch: return m + " " + r(in.rs1) + ", " + r(in.rs2) + ", " + rel(in.imm);
    case Format::Jump: return m + " " + rel(in.imm);
    case Format::Register: return m + " " + r(in.rs1);
  }
  return m;
}

inline std::string disassemble(std::uint32_t w) {
  const auto in = decode(w);
  return in ? to_text(*in) : std::string("INVALID");
}

// ---- patch-slot layout ----

enum class SlotKind : std::uint8_t {
  BranchTaken,  // BPxx / JMPP
  CallReturn,   // CALLP return patch, absorbed by RET
  IcallOut,     // CALLRP outgoing site patch
  IcallIn,      // CALLRP incoming (return) site patch, absorbed by XRET
  FuncEntry,    // indirect-callable function entry patch
  FuncExit,     // XRET exit patch
  HandlerExit,  // IRET exit patch
  Entry,        // program entry (image header, not in code)
};

inline std::string_view slot_kind_name(SlotKind k) {
  switch (k) {
    case SlotKind::BranchTaken: return "BRANCH_TAKEN";
    case SlotKind::CallReturn: return "CALL_RETURN";
    case SlotKind::IcallOut: return "ICALL_OUT";
    case SlotKind::IcallIn: return "ICALL_IN";
    case SlotKind::FuncEntry: return "FUNC_ENTRY";
    case SlotKind::FuncExit: return "FUNC_EXIT";
    case SlotKind::HandlerExit: return "HANDLER_EXIT";
    case SlotKind::Entry: return "ENTRY";
  }
  return "?";
}

struct SlotGroup {
  std::int32_t offset;  // bytes from the instruction (FuncEntry: from the function label)
  SlotKind kind;
};

struct LayoutRule {
  std::string_view construct;
  std::vector<SlotGroup> groups;  // each group is k words
  std::string_view semantics;
};

// Slot groups that follow a protected instruction at A (k words each).
inline std::vector<SlotGroup> slot_groups_after(Op op, unsigned k) {
  const auto w = static_cast<std::int32_t>(4 * k);
  switch (op) {
    case Op::BPEQ: case Op::BPNE: case Op::BPLT: case Op::BPGE: case Op::JMPP:
      return {{4, SlotKind::BranchTaken}};
    case Op::CALLP: return {{4, SlotKind::CallReturn}};
    case Op::CALLRP: return {{4, SlotKind::IcallOut}, {4 + w, SlotKind::IcallIn}};
    case Op::XRET: return {{4, SlotKind::FuncExit}};
    case Op::IRET: return {{4, SlotKind::HandlerExit}};
    default: return {};
  }
}

inline unsigned slot_words_after(Op op, unsigned k) {
  return static_cast<unsigned>(slot_groups_after(op, k).size()) * k;
}

inline std::vector<LayoutRule> layout_rules(unsigned k) {
  const auto w = static_cast<std::int32_t>(4 * k);
  return {
      {"BPxx", {{4, SlotKind::BranchTaken}},
       "taken: absorb slots, PC := A + offset; not taken: PC := A + 4 + 4k, no absorb"},
      {"JMPP", {{4, SlotKind::BranchTaken}}, "absorb slots, PC := A + offset"},
      {"CALLP", {{4, SlotKind::CallReturn}}, "r14 := A + 4, PC := target, no absorb at call"},
      {"RET", {}, "absorb k words at r14, PC := r14 + 4k"},
      {"CALLRP", {{4, SlotKind::IcallOut}, {4 + w, SlotKind::IcallIn}},
       "absorb outgoing slots, r14 := A + 4 + 4k, absorb k FUNC_ENTRY words at target T, PC := T + 4k"},
      {"function entry (indirect target)", {{0, SlotKind::FuncEntry}}, "k words at the function label"},
      {"XRET", {{4, SlotKind::FuncExit}}, "absorb FUNC_EXIT slots, absorb k words at r14, PC := r14 + 4k"},
      {"IRET", {{4, SlotKind::HandlerExit}}, "absorb HANDLER_EXIT slots, z := z ^ e ^ z_entry, PC := saved PC"},
  };
}

}  // namespace scfp::isa
