#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scfp/assembler.hpp"
#include "scfp/cfg.hpp"
#include "scfp/image.hpp"
#include "scfp/plan.hpp"
#include "scfp/sponge.hpp"

namespace scfp::link {

// Context tags for derived states. The 4-byte address follows the tag.
inline constexpr std::string_view kStartTag = "start";
inline constexpr std::string_view kEntryTag = "entry";
inline constexpr std::string_view kExitTag = "exit";
inline constexpr std::string_view kInterTag = "inter";
inline constexpr std::string_view kTerminalTag = "term";
inline constexpr std::string_view kRootTag = "root";

struct LinkOptions {
  Placement placement = Placement::Convention;
};

struct LinkResult {
  EncryptedImage image;
  ControlFlowGraph cfg;
  PatchPlan plan;
  // Per node: state entering (after any patch) and leaving the instruction.
  // APE keeps capacities (x bits); duplex keeps full states (b bits).
  std::vector<StateBits> state_in, state_out;
  std::map<std::uint32_t, StateBits> slot_values;  // slot group start -> patch

  std::size_t patch_count() const { return plan.patch_count(); }
};

// Writes a patch into k consecutive 32-bit words, low bits first.
inline void store_patch(std::vector<std::uint32_t>& code, std::uint32_t at, const StateBits& patch, unsigned k) {
  for (unsigned j = 0; j < k; ++j) {
    const unsigned off = 32 * j;
    const unsigned len = std::min(32u, patch.width() > off ? patch.width() - off : 0u);
    code[at + j] = len ? static_cast<std::uint32_t>(patch.get(off, len)) : 0;
  }
}

inline StateBits load_patch(const std::vector<std::uint32_t>& code, std::uint32_t at, unsigned bits) {
  StateBits s(bits);
  for (unsigned off = 0, j = 0; off < bits; off += 32, ++j) {
    const unsigned len = std::min(32u, bits - off);
    const std::uint32_t w = at + j < code.size() ? code[at + j] : 0;
    s.put(off, len, len == 32 ? w : w & ((1u << len) - 1));
  }
  return s;
}

// Image executing the same layout without the sponge stage.
inline EncryptedImage plain_image(const AssembledProgram& prog, const SpongeParams& p) {
  EncryptedImage img;
  img.mode = ImageMode::Plain;
  img.params = p;
  img.params.perm.key.reset();
  img.entry_addr = prog.entry;
  img.entry_patch = StateBits(p.width());
  img.code = prog.words;
  img.data_base = prog.data_base;
  for (auto w : prog.data)
    for (unsigned i = 0; i < 4; ++i) img.data.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
  for (auto h : prog.handlers) img.handlers.push_back({h, StateBits(p.width())});
  return img;
}

inline LinkResult encrypt_image(const AssembledProgram& prog, const ControlFlowGraph& g, PatchPlan plan,
                                const KeyMaterial& km, const SpongeParams& params_in) {
  require_valid(params_in);
  if (!prog.protected_mode) throw ConfigError("program was assembled unprotected");
  const SpongeParams p = bind_key(params_in, km);
  const unsigned k = p.slot_words();
  if (prog.slot_words != k)
    throw ConfigError("program assembled with k=" + std::to_string(prog.slot_words) + " slot words, parameters need k=" +
                      std::to_string(k));
  const bool ape = p.mode == SpongeMode::ApeLike;
  const unsigned sw = ape ? p.capacity_x : p.width();
  const std::uint32_t nodes = g.node_count();
  std::vector<std::string> errors;
  auto where = [&](std::uint32_t n) {
    if (n == g.inter_node) return std::string("INTER");
    if (g.is_virtual(n)) return "handler exit #" + std::to_string(n - g.inter_node - 1);
    return hex_addr(prog.addr_of(n));
  };
  auto view = [&](const SpongeState& s) { return ape ? s.capacity() : s.bits(); };
  auto derived = [&](std::string_view tag, std::uint32_t a) { return derive_initial_state(p, km, tag, a); };

  LinkResult res;
  res.cfg = g;
  res.state_in.assign(nodes, StateBits());
  res.state_out.assign(nodes, StateBits());
  std::vector<bool> known(nodes, false);
  res.image.mode = ape ? ImageMode::Ape : ImageMode::Duplex;
  res.image.params = params_in;
  res.image.params.perm.key.reset();
  res.image.nonce = km.nonce;
  res.image.entry_addr = prog.entry;
  res.image.code = prog.words;
  res.image.ext.assign(prog.words.size(), 0);
  res.image.data_base = prog.data_base;
  for (auto w : prog.data)
    for (unsigned i = 0; i < 4; ++i) res.image.data.push_back(static_cast<std::uint8_t>(w >> (8 * i)));

  const StateBits inter = view(derived(kInterTag, 0));
  res.state_in[g.inter_node] = res.state_out[g.inter_node] = inter;
  known[g.inter_node] = true;
  for (std::size_t h = 0; h < g.hexit_nodes.size(); ++h) {
    const auto e = view(derived(kExitTag, prog.handlers[h]));
    res.state_in[g.hexit_nodes[h]] = res.state_out[g.hexit_nodes[h]] = e;
    known[g.hexit_nodes[h]] = true;
  }

  auto plain_of = [&](std::uint32_t n) { return prog.words[n]; };
  std::vector<std::optional<std::size_t>> eq(nodes);  // APE: equality out-edge; duplex: equality in-edge
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (plan.patched[i]) continue;
    const auto& e = g.edges[i];
    const auto owner = ape ? e.from : e.to;
    if (g.is_virtual(e.from) || g.is_virtual(e.to)) {
      errors.push_back("edge " + where(e.from) + " -> " + where(e.to) + " through a fixed state must be patched");
      continue;
    }
    if (eq[owner]) {
      const auto& o = g.edges[*eq[owner]];
      errors.push_back("missing patch location at " + where(owner) + ": edges " + (ape ? "to " : "from ") + where(ape ? o.to : o.from) + " and " +
                       where(ape ? e.to : e.from) + " both need the same " + (ape ? "output" : "input") + " state");
      continue;
    }
    eq[owner] = i;
  }
  if (!errors.empty()) throw LinkError(errors);

  if (ape) {
    // Terminals whose patches share a slot must leave with the same capacity.
    detail::UnionFind uf(nodes);
    std::map<std::uint32_t, std::uint32_t> first_src;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      const auto& e = g.edges[i];
      if (!plan.patched[i] || !e.slot || g.is_virtual(e.from) || eq[e.from]) continue;
      auto [it, fresh] = first_src.emplace(*e.slot, e.from);
      if (!fresh) uf.unite(e.from, it->second);
    }
    std::map<std::size_t, StateBits> class_state;
    for (std::uint32_t n = 0; n < g.word_count; ++n) {
      if (!g.is_instr(n) || eq[n]) continue;
      const auto root = uf.find(n);
      if (!class_state.count(root)) class_state.emplace(root, view(derived(kTerminalTag, prog.addr_of(n))));
      res.state_out[n] = class_state.at(root);
    }
    for (std::uint32_t n0 = 0; n0 < g.word_count; ++n0) {
      if (!g.is_instr(n0) || known[n0]) continue;
      std::vector<std::uint32_t> chain{n0};
      std::vector<bool> on_chain(nodes, false);
      on_chain[n0] = true;
      bool cycle = false;
      while (eq[chain.back()]) {
        const auto nx = g.edges[*eq[chain.back()]].to;
        if (known[nx]) break;
        if (on_chain[nx]) {
          cycle = true;
          break;
        }
        on_chain[nx] = true;
        chain.push_back(nx);
      }
      if (cycle) throw LinkError({"missing patch location: control-flow cycle through " + where(chain.back()) +
                                  " has no patched edge"});
      for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        const auto n = *it;
        if (eq[n]) res.state_out[n] = res.state_in[g.edges[*eq[n]].to];
        const auto b = ape_encrypt_step_backward(p, plain_of(n), res.state_out[n]);
        res.image.code[n] = b.cipher.word;
        res.image.ext[n] = b.cipher.ext;
        res.state_in[n] = b.capacity_before;
        known[n] = true;
      }
    }
  } else {
    std::map<std::uint32_t, std::uint32_t> fixed_roots;
    fixed_roots[g.entry_node] = prog.entry;
    for (std::size_t h = 0; h < g.handler_nodes.size(); ++h) fixed_roots.emplace(g.handler_nodes[h], prog.handlers[h]);
    for (std::uint32_t n0 = 0; n0 < g.word_count; ++n0) {
      if (!g.is_instr(n0) || known[n0]) continue;
      std::vector<std::uint32_t> chain{n0};
      std::vector<bool> on_chain(nodes, false);
      on_chain[n0] = true;
      bool cycle = false;
      while (eq[chain.back()]) {
        const auto pv = g.edges[*eq[chain.back()]].from;
        if (known[pv]) break;
        if (on_chain[pv]) {
          cycle = true;
          break;
        }
        on_chain[pv] = true;
        chain.push_back(pv);
      }
      if (cycle) throw LinkError({"missing patch location: control-flow cycle through " + where(chain.back()) +
                                  " has no patched edge"});
      for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        const auto n = *it;
        if (eq[n]) {
          res.state_in[n] = res.state_out[g.edges[*eq[n]].from];
        } else if (auto fr = fixed_roots.find(n); fr != fixed_roots.end()) {
          res.state_in[n] = derived(n == g.entry_node ? kStartTag : kEntryTag, fr->second).bits();
        } else {
          res.state_in[n] = derived(kRootTag, prog.addr_of(n)).bits();
        }
        const auto r = duplex_encrypt_step(p, SpongeState(res.state_in[n], p.rate_r), plain_of(n));
        res.image.code[n] = r.cipher.word;
        res.image.ext[n] = r.cipher.ext;
        res.state_out[n] = r.state.bits();
        known[n] = true;
      }
    }
  }

  // Patch values, one per slot group; every edge sharing a slot must agree.
  std::map<std::uint32_t, std::size_t> slot_owner;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (!e.slot) {
      if (plan.patched[i])
        errors.push_back("missing patch location: edge " + where(e.from) + " -> " + where(e.to) + " has no slot");
      continue;
    }
    StateBits v = plan.patched[i] ? res.state_out[e.from] ^ res.state_in[e.to] : StateBits(sw);
    if (!plan.patched[i] && !(res.state_out[e.from] == res.state_in[e.to]))
      errors.push_back("equality edge " + where(e.from) + " -> " + where(e.to) + " does not hold");
    auto [it, fresh] = res.slot_values.emplace(*e.slot, v);
    if (fresh) {
      slot_owner[*e.slot] = i;
    } else if (!(it->second == v)) {
      const auto& o = g.edges[slot_owner[*e.slot]];
      errors.push_back("unpatchable divergence at " + where(e.to) + ": slot at " + hex_addr(prog.addr_of(*e.slot)) +
                       " must serve " + where(o.from) + " -> " + where(o.to) + " and " + where(e.from) + " -> " +
                       where(e.to) + " with different patch values");
    }
  }
  if (!errors.empty()) throw LinkError(errors);
  for (const auto& [idx, info] : prog.slots) {
    if (idx != info.group_start) continue;
    auto it = res.slot_values.find(idx);
    store_patch(res.image.code, idx, it == res.slot_values.end() ? StateBits(p.patch_bits()) : it->second, k);
  }

  auto entry_patch = [&](const SpongeState& s0, std::uint32_t node) {
    if (!ape) return s0.bits() ^ res.state_in[node];
    StateBits full(p.width());
    full.deposit(p.rate_r, s0.capacity() ^ res.state_in[node]);
    return full;
  };
  res.image.entry_patch = entry_patch(derived(kStartTag, prog.entry), g.entry_node);
  for (std::size_t h = 0; h < prog.handlers.size(); ++h)
    res.image.handlers.push_back(
        {prog.handlers[h], entry_patch(derived(kEntryTag, prog.handlers[h]), g.handler_nodes[h])});
  if (p.ext_bits() == 0) res.image.ext.clear();
  res.plan = std::move(plan);
  return res;
}

// Assembled program to image in one call.
inline LinkResult link(const AssembledProgram& prog, const KeyMaterial& km, const SpongeParams& p,
                       const LinkOptions& opt = {}) {
  auto g = build_cfg(prog);
  auto plan = place_patches(g, p.mode, opt.placement);
  return encrypt_image(prog, g, std::move(plan), km, p);
}

}  // namespace scfp::link
