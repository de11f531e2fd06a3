#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "scfp/isa.hpp"

namespace scfp::isa {

inline constexpr std::uint32_t kDefaultDataBase = 0x4000;

enum class WordKind : std::uint8_t { Instr, Slot, Data };

struct SlotInfo {
  SlotKind kind;
  std::uint32_t group_start;  // word index of the first word of this slot group
  std::uint32_t owner;        // word index of the consuming instruction (FuncEntry: first body word)
};

struct TargetSet {
  std::string label;  // CALLRP site label or function label
  std::uint32_t label_addr = 0;
  std::vector<std::string> functions;
  int line = 0;
};

struct AssembledProgram {
  std::uint32_t base = 0;
  std::vector<std::uint32_t> words;
  std::vector<WordKind> kinds;
  std::map<std::uint32_t, SlotInfo> slots;  // word index -> slot
  std::vector<int> lines;                   // source line per word
  std::map<std::string, std::uint32_t> symbols;
  std::set<std::string> globals;
  std::uint32_t entry = 0;
  std::vector<std::uint32_t> handlers;
  std::vector<TargetSet> targets;
  std::uint32_t data_base = kDefaultDataBase;
  std::vector<std::uint32_t> data;
  unsigned slot_words = 1;  // k
  bool protected_mode = true;

  std::uint32_t addr_of(std::size_t index) const { return base + 4 * static_cast<std::uint32_t>(index); }
  std::optional<std::size_t> index_of(std::uint32_t addr) const {
    if (addr < base || (addr - base) % 4 != 0) return std::nullopt;
    const std::size_t i = (addr - base) / 4;
    if (i >= words.size()) return std::nullopt;
    return i;
  }
  std::size_t slot_word_count() const { return slots.size(); }
  std::size_t code_bytes() const { return 4 * words.size(); }
};

struct AsmDiagnostic {
  int line;
  std::string message;
};

struct AsmError : std::runtime_error {
  explicit AsmError(std::vector<AsmDiagnostic> d) : std::runtime_error(render(d)), diagnostics(std::move(d)) {}
  std::vector<AsmDiagnostic> diagnostics;

  static std::string render(const std::vector<AsmDiagnostic>& d) {
    std::string s;
    for (const auto& x : d) s += "line " + std::to_string(x.line) + ": " + x.message + "\n";
    return s;
  }
};

struct AsmOptions {
  bool unprotected = false;
  unsigned slot_words = 1;  // k = ceil(patch bits / 32)
  std::uint32_t base = 0;
  std::uint32_t data_base = kDefaultDataBase;
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> split_operands(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
  return out;
}

inline bool is_ident(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_' || s[0] == '.')) return false;
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.'; });
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  if (s.empty()) return std::nullopt;
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size() || v > 0xFFFFFFFFull) return std::nullopt;
  return neg ? -static_cast<std::int64_t>(v) : static_cast<std::int64_t>(v);
}

inline std::optional<unsigned> parse_reg(std::string_view s) {
  const std::string u = upper(std::string(s));
  if (u == "SP") return kStackReg;
  if (u == "LR") return kLinkReg;
  if (u.size() < 2 || u[0] != 'R') return std::nullopt;
  auto v = parse_int(std::string_view(u).substr(1));
  if (!v || *v < 0 || *v > 15) return std::nullopt;
  return static_cast<unsigned>(*v);
}

struct Statement {
  int line = 0;
  enum class Kind { Instr, Word, Zero } kind = Kind::Instr;
  bool in_data = false;
  Op op = Op::NOP;
  std::uint8_t alias = 0;
  std::vector<std::string> operands;
  std::uint32_t addr = 0;
  std::uint32_t nwords = 0;
};

}  // namespace detail

inline AssembledProgram assemble(std::string_view source, const AsmOptions& opt = {}) {
  using namespace detail;
  std::vector<AsmDiagnostic> diags;
  auto fail = [&](int line, std::string msg) { diags.push_back({line, std::move(msg)}); };

  AssembledProgram prog;
  prog.base = opt.base;
  prog.data_base = opt.data_base;
  prog.slot_words = opt.slot_words;
  prog.protected_mode = !opt.unprotected;
  const unsigned k = opt.unprotected ? 0 : opt.slot_words;
  if (!opt.unprotected && opt.slot_words == 0) throw AsmError({{0, "slot word count k must be positive"}});

  // Split into lines once; pre-scan .targets so entry slots can be laid out in pass 1.
  std::vector<std::string> lines;
  {
    std::istringstream is{std::string(source)};
    std::string l;
    while (std::getline(is, l)) lines.push_back(l);
  }
  std::set<std::string> indirect_targets;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string l = lines[i].substr(0, lines[i].find(';'));
    l = trim(l);
    if (l.rfind(".targets", 0) != 0) continue;
    const std::string rest = trim(std::string_view(l).substr(8));
    const auto colon = rest.find(':');
    if (colon == std::string::npos) {
      fail(static_cast<int>(i + 1), ".targets expects 'label: f1, f2, ...'");
      continue;
    }
    TargetSet ts;
    ts.label = trim(std::string_view(rest).substr(0, colon));
    ts.line = static_cast<int>(i + 1);
    for (auto& f : split_operands(std::string_view(rest).substr(colon + 1))) {
      if (!is_ident(f)) fail(ts.line, "bad function name in .targets: '" + f + "'");
      else {
        ts.functions.push_back(f);
        indirect_targets.insert(f);
      }
    }
    if (ts.functions.empty()) fail(ts.line, ".targets needs at least one function");
    prog.targets.push_back(std::move(ts));
  }

  // ---- pass 1: addresses and labels ----
  std::vector<Statement> stmts;
  std::map<std::string, int> label_line;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entry_slot_groups;  // (slot start addr, body addr)
  std::optional<std::pair<std::string, int>> entry_label;
  std::vector<std::pair<std::string, int>> handler_labels;
  std::uint32_t pc = opt.base, dpc = opt.data_base;
  bool in_data = false;

  for (std::size_t li = 0; li < lines.size(); ++li) {
    const int ln = static_cast<int>(li + 1);
    std::string l = trim(lines[li].substr(0, lines[li].find(';')));
    // labels (possibly several) at the start of the line
    while (true) {
      const auto colon = l.find(':');
      if (colon == std::string::npos || l.rfind(".targets", 0) == 0) break;
      const std::string name = trim(std::string_view(l).substr(0, colon));
      if (!is_ident(name) || name[0] == '.') break;
      if (prog.symbols.count(name)) fail(ln, "duplicate label '" + name + "'");
      else if (in_data) {
        if (indirect_targets.count(name)) fail(ln, "indirect-call target '" + name + "' is in the data section");
        prog.symbols[name] = dpc;
      } else {
        if (indirect_targets.count(name) && k > 0) {
          entry_slot_groups.push_back({pc, pc + 4 * k});
          prog.symbols[name] = pc;
          pc += 4 * k;
        } else {
          prog.symbols[name] = pc;
        }
      }
      label_line[name] = ln;
      l = trim(std::string_view(l).substr(colon + 1));
    }
    if (l.empty()) continue;

    std::string head = l, rest;
    if (const auto sp = l.find_first_of(" \t"); sp != std::string::npos) {
      head = l.substr(0, sp);
      rest = trim(std::string_view(l).substr(sp));
    }
    const std::string uhead = upper(head);

    if (head[0] == '.') {
      if (uhead == ".TARGETS") continue;
      if (uhead == ".DATA") { in_data = true; continue; }
      if (uhead == ".TEXT") { in_data = false; continue; }
      if (uhead == ".GLOBAL") {
        for (auto& g : split_operands(rest)) prog.globals.insert(g);
        continue;
      }
      if (uhead == ".ENTRY") { entry_label = {{rest, ln}}; continue; }
      if (uhead == ".HANDLER") { handler_labels.push_back({rest, ln}); continue; }
      Statement st;
      st.line = ln;
      st.in_data = in_data;
      if (uhead == ".WORD") {
        st.kind = Statement::Kind::Word;
        st.operands = split_operands(rest);
        st.nwords = static_cast<std::uint32_t>(st.operands.size());
        if (st.nwords == 0) { fail(ln, ".word needs at least one value"); continue; }
      } else if (uhead == ".ZERO") {
        st.kind = Statement::Kind::Zero;
        const auto n = parse_int(rest);
        if (!n || *n < 0) { fail(ln, ".zero expects a non-negative byte count"); continue; }
        st.nwords = static_cast<std::uint32_t>((*n + 3) / 4);
      } else if (uhead == ".ALIAS") {
        const auto n = parse_int(rest);
        if (!n || *n < static_cast<int>(Op::kFirstAlias) || *n > static_cast<int>(Op::kLastAlias)) {
          fail(ln, ".alias expects a reserved opcode byte");
          continue;
        }
        st.kind = Statement::Kind::Instr;
        st.op = Op::NOP;
        st.alias = static_cast<std::uint8_t>(*n);
        st.nwords = 1;
      } else {
        fail(ln, "unknown directive '" + head + "'");
        continue;
      }
      st.addr = in_data ? dpc : pc;
      (in_data ? dpc : pc) += 4 * st.nwords;
      stmts.push_back(std::move(st));
      continue;
    }

    auto op = op_from_mnemonic(uhead);
    if (!op) {
      fail(ln, "unknown mnemonic '" + head + "'");
      continue;
    }
    if (in_data) {
      fail(ln, "instruction in the data section");
      continue;
    }
    Statement st;
    st.line = ln;
    st.kind = Statement::Kind::Instr;
    st.op = opt.unprotected ? unprotected_form(*op) : *op;
    st.operands = rest.empty() ? std::vector<std::string>{} : split_operands(rest);
    st.addr = pc;
    st.nwords = 1 + (opt.unprotected ? 0 : slot_words_after(st.op, k));
    pc += 4 * st.nwords;
    stmts.push_back(std::move(st));
  }

  if (pc > opt.data_base && opt.data_base > opt.base)
    fail(0, "code section overlaps the data section at " + std::to_string(opt.data_base));

  // ---- pass 2: encode ----
  const std::size_t nwords = (pc - opt.base) / 4;
  prog.words.assign(nwords, 0);
  prog.kinds.assign(nwords, WordKind::Data);
  prog.lines.assign(nwords, 0);
  prog.data.assign((dpc - opt.data_base) / 4, 0);

  for (auto [slot_addr, body] : entry_slot_groups) {
    const auto gi = (slot_addr - opt.base) / 4;
    for (unsigned j = 0; j < k; ++j) {
      prog.kinds[gi + j] = WordKind::Slot;
      prog.slots[gi + j] = {SlotKind::FuncEntry, gi, (body - opt.base) / 4};
    }
  }

  auto resolve = [&](const std::string& s, int ln) -> std::optional<std::int64_t> {
    if (auto v = parse_int(s)) return v;
    if (auto it = prog.symbols.find(s); it != prog.symbols.end()) return it->second;
    fail(ln, is_ident(s) ? "undefined label '" + s + "'" : "bad operand '" + s + "'");
    return std::nullopt;
  };

  for (const auto& st : stmts) {
    const int ln = st.line;
    if (st.kind != Statement::Kind::Instr) {
      for (std::uint32_t j = 0; j < st.nwords; ++j) {
        std::uint32_t v = 0;
        if (st.kind == Statement::Kind::Word) {
          auto r = resolve(st.operands[j], ln);
          if (!r) continue;
          if (*r < -2147483648LL || *r > 0xFFFFFFFFLL) { fail(ln, "word value out of range"); continue; }
          v = static_cast<std::uint32_t>(*r);
        }
        if (st.in_data) {
          prog.data[(st.addr - opt.data_base) / 4 + j] = v;
        } else {
          const auto wi = (st.addr - opt.base) / 4 + j;
          prog.words[wi] = v;
          prog.kinds[wi] = WordKind::Data;
          prog.lines[wi] = ln;
        }
      }
      continue;
    }

    Instruction in;
    in.op = st.op;
    in.alias = st.alias;
    const auto fmt = op_info(st.op).format;
    auto& ops = st.operands;
    auto need = [&](std::size_t n) {
      if (st.alias) return true;
      if (ops.size() != n) {
        fail(ln, std::string(op_info(st.op).mnemonic) + " expects " + std::to_string(n) + " operand(s), got " +
                     std::to_string(ops.size()));
        return false;
      }
      return true;
    };
    auto reg = [&](const std::string& s) -> unsigned {
      auto r = parse_reg(s);
      if (!r) {
        fail(ln, "expected register, got '" + s + "'");
        return 0;
      }
      return *r;
    };
    auto imm16 = [&](const std::string& s, bool zext) -> std::int32_t {
      auto v = resolve(s, ln);
      if (!v) return 0;
      const bool ok = zext ? (*v >= 0 && *v <= 0xFFFF) : (*v >= -32768 && *v <= 32767);
      if (!ok) fail(ln, "immediate out of range: " + s);
      return static_cast<std::int32_t>(*v);
    };
    auto target = [&](const std::string& s, unsigned bits) -> std::int32_t {
      std::int64_t off = 0;
      if (!s.empty() && s[0] == '@') {
        auto v = parse_int(std::string_view(s).substr(1));
        if (!v) { fail(ln, "bad relative target '" + s + "'"); return 0; }
        off = *v;
      } else {
        auto it = prog.symbols.find(s);
        if (it == prog.symbols.end()) { fail(ln, "undefined label '" + s + "'"); return 0; }
        off = static_cast<std::int64_t>(it->second) - static_cast<std::int64_t>(st.addr);
      }
      const std::int64_t lim = std::int64_t{1} << (bits - 1);
      if (off < -lim || off >= lim) fail(ln, "branch offset out of range: " + s);
      if (off % 4 != 0) fail(ln, "branch target not word aligned: " + s);
      return static_cast<std::int32_t>(off);
    };

    switch (fmt) {
      case Format::None: need(0); break;
      case Format::RegReg:
        if (need(3)) { in.rd = reg(ops[0]); in.rs1 = reg(ops[1]); in.rs2 = reg(ops[2]); }
        break;
      case Format::RegImm:
        if (need(3)) { in.rd = reg(ops[0]); in.rs1 = reg(ops[1]); in.imm = imm16(ops[2], zero_extended_imm(st.op)); }
        break;
      case Format::Upper:
        if (need(2)) { in.rd = reg(ops[0]); in.imm = imm16(ops[1], true); }
        break;
      case Format::Load: case Format::Store:
        if (need(2)) {
          const unsigned r0 = reg(ops[0]);
          const auto& mem = ops[1];
          const auto lp = mem.find('('), rp = mem.find(')');
          if (lp == std::string::npos || rp == std::string::npos || rp < lp) {
            fail(ln, "expected imm(reg) memory operand, got '" + mem + "'");
            break;
          }
          const std::string off = trim(std::string_view(mem).substr(0, lp));
          in.rs1 = reg(trim(std::string_view(mem).substr(lp + 1, rp - lp - 1)));
          in.imm = off.empty() ? 0 : imm16(off, false);
          if (fmt == Format::Load) in.rd = r0; else in.rs2 = r0;
        }
        break;
      case Format::Branch:
        if (need(3)) { in.rs1 = reg(ops[0]); in.rs2 = reg(ops[1]); in.imm = target(ops[2], 16); }
        break;
      case Format::Jump:
        if (need(1)) in.imm = target(ops[0], 24);
        break;
      case Format::Register:
        if (need(1)) in.rs1 = reg(ops[0]);
        break;
    }

    const auto wi = (st.addr - opt.base) / 4;
    prog.words[wi] = encode(in);
    prog.kinds[wi] = WordKind::Instr;
    prog.lines[wi] = ln;
    if (!opt.unprotected) {
      for (const auto& g : slot_groups_after(st.op, k)) {
        const auto gi = wi + static_cast<std::uint32_t>(g.offset / 4);
        for (unsigned j = 0; j < k; ++j) {
          prog.kinds[gi + j] = WordKind::Slot;
          prog.slots[gi + j] = {g.kind, gi, static_cast<std::uint32_t>(wi)};
          prog.lines[gi + j] = ln;
        }
      }
    }
  }

  auto label_addr = [&](const std::string& name, int ln) -> std::optional<std::uint32_t> {
    auto it = prog.symbols.find(name);
    if (it == prog.symbols.end()) {
      fail(ln, "undefined label '" + name + "'");
      return std::nullopt;
    }
    return it->second;
  };
  auto must_be_instr = [&](std::uint32_t addr, int ln, std::string_view what) {
    auto i = prog.index_of(addr);
    if (!i || prog.kinds[*i] != WordKind::Instr) fail(ln, std::string(what) + " does not label an instruction");
  };

  if (entry_label) {
    if (indirect_targets.count(entry_label->first) && k > 0) fail(entry_label->second, "entry label cannot be an indirect-call target");
    if (auto a = label_addr(entry_label->first, entry_label->second)) {
      prog.entry = *a;
      must_be_instr(*a, entry_label->second, ".entry");
    }
  } else {
    prog.entry = opt.base;
    for (std::size_t i = 0; i < prog.words.size(); ++i)
      if (prog.kinds[i] == WordKind::Instr) { prog.entry = prog.addr_of(i); break; }
  }
  for (auto& [name, ln] : handler_labels)
    if (auto a = label_addr(name, ln)) {
      prog.handlers.push_back(*a);
      must_be_instr(*a, ln, ".handler");
    }
  for (auto& ts : prog.targets) {
    if (auto a = label_addr(ts.label, ts.line)) ts.label_addr = *a;
    for (auto& f : ts.functions) label_addr(f, ts.line);
  }

  if (!diags.empty()) throw AsmError(std::move(diags));
  return prog;
}

// Renders a program back to source that reassembles (same options) to identical words.
inline std::string disassemble_program(const AssembledProgram& prog) {
  std::multimap<std::uint32_t, std::string> labels;
  for (auto& [name, addr] : prog.symbols) labels.emplace(addr, name);
  std::ostringstream os;
  for (const auto& ts : prog.targets) {
    os << ".targets " << ts.label << ": ";
    for (std::size_t i = 0; i < ts.functions.size(); ++i) os << (i ? ", " : "") << ts.functions[i];
    os << "\n";
  }
  auto label_for = [&](std::uint32_t addr) -> std::string {
    auto it = labels.find(addr);
    return it == labels.end() ? std::string() : it->second;
  };
  if (auto e = label_for(prog.entry); !e.empty()) os << ".entry " << e << "\n";
  else {
    os << ".entry __entry\n";
    labels.emplace(prog.entry, "__entry");
  }
  for (auto h : prog.handlers) {
    auto name = label_for(h);
    if (name.empty()) {
      name = "__handler_" + std::to_string(h);
      labels.emplace(h, name);
    }
    os << ".handler " << name << "\n";
  }
  for (std::size_t i = 0; i < prog.words.size(); ++i) {
    const auto addr = prog.addr_of(i);
    for (auto [it, end] = labels.equal_range(addr); it != end; ++it) os << it->second << ":\n";
    if (prog.kinds[i] == WordKind::Slot) continue;
    if (prog.kinds[i] == WordKind::Data) {
      os << "  .word " << prog.words[i] << "\n";
      continue;
    }
    os << "  " << disassemble(prog.words[i]) << "\n";
  }
  if (!prog.data.empty() || std::any_of(labels.begin(), labels.end(), [&](auto& p) { return p.first >= prog.data_base; })) {
    os << ".data\n";
    for (std::size_t i = 0; i < prog.data.size(); ++i) {
      const auto addr = prog.data_base + 4 * static_cast<std::uint32_t>(i);
      for (auto [it, end] = labels.equal_range(addr); it != end; ++it) os << it->second << ":\n";
      os << "  .word " << prog.data[i] << "\n";
    }
  }
  return os.str();
}

}  // namespace scfp::isa
