#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfp/assembler.hpp"
#include "scfp/isa.hpp"

namespace scfp::link {

using isa::AssembledProgram;
using isa::Op;

struct LinkError : std::runtime_error {
  explicit LinkError(std::vector<std::string> m) : std::runtime_error(join(m)), messages(std::move(m)) {}
  std::vector<std::string> messages;

  static std::string join(const std::vector<std::string>& m) {
    std::string s;
    for (const auto& x : m) s += x + "\n";
    return s;
  }
};

inline std::string hex_addr(std::uint32_t a) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%04x", a);
  return buf;
}

enum class EdgeKind : std::uint8_t { Fallthrough, TakenBranch, Jump, Call, Return, ICall, IReturn, HandlerExit };

inline const char* edge_kind_name(EdgeKind k) {
  switch (k) {
    case EdgeKind::Fallthrough: return "FALLTHROUGH";
    case EdgeKind::TakenBranch: return "TAKEN_BRANCH";
    case EdgeKind::Jump: return "JUMP";
    case EdgeKind::Call: return "CALL";
    case EdgeKind::Return: return "RETURN";
    case EdgeKind::ICall: return "ICALL";
    case EdgeKind::IReturn: return "IRETURN";
    case EdgeKind::HandlerExit: return "HANDLER_EXIT";
  }
  return "?";
}

struct Edge {
  std::uint32_t from;
  std::uint32_t to;
  EdgeKind kind;
  std::optional<std::uint32_t> slot;  // word index of the slot group carrying this edge's patch

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Function {
  std::string name;
  std::uint32_t entry;  // first body instruction (word index)
  std::uint32_t label;  // word index of the label (slot group start for indirect targets)
  bool indirect = false;
  std::vector<std::uint32_t> body;
  std::vector<std::uint32_t> call_sites;
  std::vector<std::uint32_t> exits;
};

struct BasicBlock {
  std::uint32_t first;
  std::uint32_t last;
};

struct BlockEdge {
  std::size_t from;
  std::size_t to;
  EdgeKind kind;
};

// Nodes are code word indices for instructions, then INTER (the constant
// intermediate state shared by indirect calls), then one exit node per handler.
struct ControlFlowGraph {
  std::uint32_t word_count = 0;
  unsigned k = 0;
  std::vector<std::optional<isa::Instruction>> instr;  // per word; empty for slots and data
  std::uint32_t inter_node = 0;
  std::vector<std::uint32_t> hexit_nodes;
  std::uint32_t entry_node = 0;
  std::vector<std::uint32_t> handler_nodes;
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> out, in;
  std::vector<Function> functions;
  std::vector<BasicBlock> blocks;

  std::uint32_t node_count() const { return static_cast<std::uint32_t>(out.size()); }
  bool is_virtual(std::uint32_t n) const { return n >= word_count; }
  bool is_instr(std::uint32_t n) const { return n < word_count && instr[n].has_value(); }
  std::size_t instruction_count() const {
    return static_cast<std::size_t>(std::count_if(instr.begin(), instr.end(), [](auto& i) { return i.has_value(); }));
  }

  std::vector<BlockEdge> block_edges() const {
    std::vector<std::size_t> block_of(word_count, SIZE_MAX);
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (auto i = blocks[b].first; i <= blocks[b].last; ++i) block_of[i] = b;
    std::vector<BlockEdge> r;
    for (const auto& e : edges) {
      if (is_virtual(e.from) || is_virtual(e.to)) continue;
      const auto bf = block_of[e.from], bt = block_of[e.to];
      if (blocks[bf].last != e.from || blocks[bt].first != e.to) continue;
      r.push_back({bf, bt, e.kind});
    }
    return r;
  }

  std::size_t block_in_degree(std::size_t b) const {
    std::size_t d = 0;
    for (auto& e : block_edges()) d += e.to == b;
    return d;
  }

  std::optional<std::size_t> block_at(std::uint32_t word) const {
    for (std::size_t b = 0; b < blocks.size(); ++b)
      if (blocks[b].first <= word && word <= blocks[b].last) return b;
    return std::nullopt;
  }
};

namespace detail {

inline bool ends_flow(Op op) {
  switch (op) {
    case Op::HALT: case Op::JMP: case Op::JMPP: case Op::RET: case Op::RETU: case Op::XRET: case Op::IRET:
      return true;
    default:
      return false;
  }
}

inline bool is_control(Op op) {
  return ends_flow(op) || isa::is_cond_branch(op) || op == Op::CALL || op == Op::CALLP || op == Op::CALLR ||
         op == Op::CALLRP;
}

}  // namespace detail

inline ControlFlowGraph build_cfg(const AssembledProgram& prog) {
  using isa::WordKind;
  ControlFlowGraph g;
  std::vector<std::string> errors;
  const auto n = static_cast<std::uint32_t>(prog.words.size());
  const unsigned k = prog.protected_mode ? prog.slot_words : 0;
  g.word_count = n;
  g.k = k;
  g.instr.resize(n);
  for (std::uint32_t i = 0; i < n; ++i)
    if (prog.kinds[i] == WordKind::Instr) g.instr[i] = isa::decode(prog.words[i]);
  g.inter_node = n;
  for (std::size_t h = 0; h < prog.handlers.size(); ++h) g.hexit_nodes.push_back(n + 1 + static_cast<std::uint32_t>(h));
  const std::uint32_t total = n + 1 + static_cast<std::uint32_t>(prog.handlers.size());
  g.out.resize(total);
  g.in.resize(total);

  auto addr = [&](std::uint32_t i) { return prog.addr_of(i); };
  auto target_index = [&](std::uint32_t from, std::int64_t taddr) -> std::optional<std::uint32_t> {
    const auto t = static_cast<std::uint32_t>(taddr);
    auto i = prog.index_of(t);
    if (!i) {
      errors.push_back("control flow leaves the code section at " + hex_addr(t) + " (from " + hex_addr(addr(from)) + ")");
      return std::nullopt;
    }
    if (prog.kinds[*i] == WordKind::Slot) {
      errors.push_back("control flow into patch slots at " + hex_addr(t) + " (from " + hex_addr(addr(from)) + ")");
      return std::nullopt;
    }
    if (prog.kinds[*i] != WordKind::Instr || !g.instr[*i]) {
      errors.push_back("control flow into data at " + hex_addr(t) + " (from " + hex_addr(addr(from)) + ")");
      return std::nullopt;
    }
    return static_cast<std::uint32_t>(*i);
  };

  // Intra-procedural successors; calls continue at their return site.
  auto local_succ = [&](std::uint32_t i, bool report) {
    std::vector<std::uint32_t> r;
    const auto& in = *g.instr[i];
    const std::int64_t a = addr(i);
    auto push = [&](std::int64_t t) {
      if (report) {
        if (auto x = target_index(i, t)) r.push_back(*x);
      } else if (auto x = prog.index_of(static_cast<std::uint32_t>(t)); x && g.instr[*x]) {
        r.push_back(static_cast<std::uint32_t>(*x));
      }
    };
    switch (in.op) {
      case Op::HALT: case Op::RET: case Op::RETU: case Op::XRET: case Op::IRET: break;
      case Op::JMP: case Op::JMPP: push(a + in.imm); break;
      case Op::BEQ: case Op::BNE: case Op::BLT: case Op::BGE: push(a + 4); push(a + in.imm); break;
      case Op::BPEQ: case Op::BPNE: case Op::BPLT: case Op::BPGE: push(a + 4 + 4 * k); push(a + in.imm); break;
      case Op::CALLP: push(a + 4 + 4 * k); break;
      case Op::CALLRP: push(a + 4 + 8 * k); break;
      default: push(a + 4); break;
    }
    return r;
  };

  auto dfs = [&](std::uint32_t start) {
    std::vector<std::uint32_t> body;
    std::set<std::uint32_t> seen{start};
    std::vector<std::uint32_t> stack{start};
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      body.push_back(i);
      for (auto s : local_succ(i, false))
        if (seen.insert(s).second) stack.push_back(s);
    }
    std::sort(body.begin(), body.end());
    return body;
  };

  // Label names by address, for diagnostics and function naming.
  std::map<std::uint32_t, std::string> name_at;
  for (auto& [name, a] : prog.symbols) name_at.emplace(a, name);
  auto name_of = [&](std::uint32_t idx) {
    auto it = name_at.find(addr(idx));
    return it == name_at.end() ? hex_addr(addr(idx)) : it->second;
  };

  // ---- functions ----
  std::map<std::uint32_t, std::size_t> func_by_entry;  // body entry -> function
  std::set<std::uint32_t> indirect_labels;
  for (const auto& ts : prog.targets)
    for (const auto& f : ts.functions) {
      auto it = prog.symbols.find(f);
      if (it == prog.symbols.end()) continue;
      auto li = prog.index_of(it->second);
      if (!li) {
        errors.push_back("indirect-call target '" + f + "' is outside the code section");
        continue;
      }
      const auto label = static_cast<std::uint32_t>(*li);
      if (!indirect_labels.insert(label).second) continue;
      auto entry = target_index(label, static_cast<std::int64_t>(it->second) + 4 * k);
      if (!entry) continue;
      Function fn;
      fn.name = f;
      fn.entry = *entry;
      fn.label = label;
      fn.indirect = true;
      func_by_entry[*entry] = g.functions.size();
      g.functions.push_back(std::move(fn));
    }
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!g.instr[i] || (g.instr[i]->op != Op::CALLP && g.instr[i]->op != Op::CALL)) continue;
    const auto t = static_cast<std::int64_t>(addr(i)) + g.instr[i]->imm;
    if (auto li = prog.index_of(static_cast<std::uint32_t>(t)); li && indirect_labels.count(static_cast<std::uint32_t>(*li)) && k > 0) {
      errors.push_back("direct call at " + hex_addr(addr(i)) + " to indirect-call target '" + name_of(static_cast<std::uint32_t>(*li)) +
                       "'; use CALLRP");
      continue;
    }
    auto e = target_index(i, t);
    if (!e) continue;
    if (!func_by_entry.count(*e)) {
      Function fn;
      fn.name = name_of(*e);
      fn.entry = *e;
      fn.label = *e;
      func_by_entry[*e] = g.functions.size();
      g.functions.push_back(std::move(fn));
    }
    g.functions[func_by_entry[*e]].call_sites.push_back(i);
  }
  for (auto& fn : g.functions) {
    fn.body = dfs(fn.entry);
    for (auto i : fn.body) {
      const Op op = g.instr[i]->op;
      if (op == Op::RET || op == Op::RETU || op == Op::XRET) fn.exits.push_back(i);
      if ((op == Op::RET || op == Op::RETU) && fn.indirect)
        errors.push_back("RET at " + hex_addr(addr(i)) + " in indirect-call target '" + fn.name + "'; use XRET");
      if (op == Op::XRET && !fn.indirect)
        errors.push_back("XRET at " + hex_addr(addr(i)) + " in directly called function '" + fn.name + "'; use RET");
    }
  }

  // ---- entry and handlers ----
  if (auto e = prog.index_of(prog.entry); e && g.instr[*e]) g.entry_node = static_cast<std::uint32_t>(*e);
  else errors.push_back("entry " + hex_addr(prog.entry) + " is not an instruction");
  std::vector<std::vector<std::uint32_t>> handler_bodies;
  for (auto v : prog.handlers) {
    auto h = prog.index_of(v);
    if (!h || !g.instr[*h]) {
      errors.push_back("handler " + hex_addr(v) + " is not an instruction");
      handler_bodies.emplace_back();
      g.handler_nodes.push_back(0);
      continue;
    }
    g.handler_nodes.push_back(static_cast<std::uint32_t>(*h));
    handler_bodies.push_back(dfs(static_cast<std::uint32_t>(*h)));
  }

  // ---- indirect call target sets ----
  std::map<std::uint32_t, std::set<std::size_t>> site_targets;  // CALLRP index -> functions
  for (const auto& ts : prog.targets) {
    auto li = prog.index_of(ts.label_addr);
    if (!li) continue;
    std::vector<std::uint32_t> sites;
    const auto l = static_cast<std::uint32_t>(*li);
    if (g.instr[l] && g.instr[l]->op == Op::CALLRP) {
      sites.push_back(l);
    } else {
      const Function* owner = nullptr;
      for (auto& fn : g.functions)
        if (fn.label == l || fn.entry == l) owner = &fn;
      std::vector<std::uint32_t> body;
      if (owner) body = owner->body;
      else if (l == g.entry_node) body = dfs(l);
      else {
        errors.push_back("line " + std::to_string(ts.line) + ": .targets label '" + ts.label +
                         "' is neither a CALLRP site nor a function");
        continue;
      }
      for (auto i : body)
        if (g.instr[i]->op == Op::CALLRP) sites.push_back(i);
    }
    for (auto s : sites)
      for (const auto& f : ts.functions)
        for (std::size_t fi = 0; fi < g.functions.size(); ++fi)
          if (g.functions[fi].indirect && g.functions[fi].name == f) site_targets[s].insert(fi);
  }
  for (auto& [s, fs] : site_targets)
    for (auto fi : fs) g.functions[fi].call_sites.push_back(s);

  // ---- edges ----
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::optional<std::uint32_t>>> seen_edges;
  auto add = [&](std::uint32_t from, std::uint32_t to, EdgeKind kind, std::optional<std::uint32_t> slot) {
    if (!seen_edges.insert({from, to, slot}).second) return;
    g.in[to].push_back(g.edges.size());
    g.out[from].push_back(g.edges.size());
    g.edges.push_back({from, to, kind, slot});
  };

  for (std::uint32_t i = 0; i < n; ++i) {
    if (!g.instr[i]) continue;
    const auto& in = *g.instr[i];
    const std::int64_t a = addr(i);
    auto to = [&](std::int64_t t) { return target_index(i, t); };
    switch (in.op) {
      case Op::HALT: break;
      case Op::BEQ: case Op::BNE: case Op::BLT: case Op::BGE:
        if (auto t = to(a + 4)) add(i, *t, EdgeKind::Fallthrough, std::nullopt);
        if (auto t = to(a + in.imm)) add(i, *t, EdgeKind::TakenBranch, std::nullopt);
        break;
      case Op::BPEQ: case Op::BPNE: case Op::BPLT: case Op::BPGE:
        if (auto t = to(a + 4 + 4 * k)) add(i, *t, EdgeKind::Fallthrough, std::nullopt);
        if (auto t = to(a + in.imm)) add(i, *t, EdgeKind::TakenBranch, i + 1);
        break;
      case Op::JMP:
        if (auto t = to(a + in.imm)) add(i, *t, EdgeKind::Jump, std::nullopt);
        break;
      case Op::JMPP:
        if (auto t = to(a + in.imm)) add(i, *t, EdgeKind::Jump, i + 1);
        break;
      case Op::CALL: case Op::CALLP: {
        auto li = prog.index_of(static_cast<std::uint32_t>(a + in.imm));
        if (li && indirect_labels.count(static_cast<std::uint32_t>(*li)) && k > 0) break;
        if (auto t = to(a + in.imm)) add(i, *t, EdgeKind::Call, std::nullopt);
        break;
      }
      case Op::RET: case Op::RETU: {
        bool owned = false;
        for (const auto& fn : g.functions) {
          if (fn.indirect || !std::binary_search(fn.body.begin(), fn.body.end(), i)) continue;
          owned = true;
          for (auto c : fn.call_sites) {
            const bool prot = g.instr[c]->op == Op::CALLP;
            if (prot != (in.op == Op::RET)) {
              errors.push_back(std::string(in.op == Op::RET ? "RET" : "RETU") + " at " + hex_addr(addr(i)) +
                               " returns to a " + (prot ? "CALLP" : "CALL") + " site at " + hex_addr(addr(c)));
              continue;
            }
            const std::int64_t site = static_cast<std::int64_t>(addr(c)) + 4 + (prot ? 4 * k : 0);
            if (auto t = to(site)) add(i, *t, EdgeKind::Return, prot ? std::optional<std::uint32_t>(c + 1) : std::nullopt);
          }
        }
        if (!owned) errors.push_back("return at " + hex_addr(addr(i)) + " is not inside any called function");
        break;
      }
      case Op::CALLR:
        if (prog.protected_mode) errors.push_back("CALLR at " + hex_addr(addr(i)) + " in a protected image; use CALLRP");
        break;
      case Op::CALLRP:
        if (!site_targets.count(i)) {
          errors.push_back("indirect call at " + hex_addr(addr(i)) + " has no .targets declaration");
          break;
        }
        add(i, g.inter_node, EdgeKind::ICall, i + 1);
        if (auto t = to(a + 4 + 8 * k)) add(g.inter_node, *t, EdgeKind::IReturn, i + 1 + k);
        break;
      case Op::XRET: {
        bool owned = false;
        for (const auto& fn : g.functions)
          owned |= fn.indirect && std::binary_search(fn.body.begin(), fn.body.end(), i);
        if (!owned) errors.push_back("XRET at " + hex_addr(addr(i)) + " is not inside an indirect-call target");
        add(i, g.inter_node, EdgeKind::IReturn, i + 1);
        break;
      }
      case Op::IRET: {
        bool owned = false;
        for (std::size_t h = 0; h < handler_bodies.size(); ++h)
          if (std::binary_search(handler_bodies[h].begin(), handler_bodies[h].end(), i)) {
            owned = true;
            add(i, g.hexit_nodes[h], EdgeKind::HandlerExit, i + 1);
          }
        if (!owned) errors.push_back("IRET at " + hex_addr(addr(i)) + " is not inside an interrupt handler");
        break;
      }
      default:
        if (auto t = to(a + 4)) add(i, *t, EdgeKind::Fallthrough, std::nullopt);
        break;
    }
  }
  for (const auto& fn : g.functions)
    if (fn.indirect) add(g.inter_node, fn.entry, EdgeKind::ICall, fn.label);

  if (!errors.empty()) throw LinkError(std::move(errors));

  // ---- basic blocks ----
  std::set<std::uint32_t> leaders{g.entry_node};
  for (auto h : g.handler_nodes) leaders.insert(h);
  for (const auto& fn : g.functions) leaders.insert(fn.entry);
  for (const auto& e : g.edges) {
    if (g.is_virtual(e.to)) continue;
    if (e.kind != EdgeKind::Fallthrough || (g.instr[e.from] && detail::is_control(g.instr[e.from]->op))) leaders.insert(e.to);
  }
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!g.instr[i]) continue;
    if (i == 0 || !g.instr[i - 1] || detail::is_control(g.instr[i - 1]->op)) leaders.insert(i);
  }
  for (std::uint32_t i = 0; i < n;) {
    if (!g.instr[i]) {
      ++i;
      continue;
    }
    BasicBlock b{i, i};
    while (!detail::is_control(g.instr[b.last]->op) && b.last + 1 < n && g.instr[b.last + 1] && !leaders.count(b.last + 1))
      ++b.last;
    g.blocks.push_back(b);
    i = b.last + 1;
  }
  return g;
}

}  // namespace scfp::link
