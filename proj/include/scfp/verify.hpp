#pragma once

#include <cstdint>
#include <deque>
#include <set>
#include <string>
#include <vector>

#include "scfp/assembler.hpp"
#include "scfp/cfg.hpp"
#include "scfp/image.hpp"
#include "scfp/linker.hpp"
#include "scfp/sponge.hpp"

namespace scfp::link {

enum class FindingKind : std::uint8_t { DecryptMismatch, MergeDisagreement, HandlerExitMismatch };

struct Finding {
  std::uint32_t addr;
  FindingKind kind;
  std::string message;

  friend bool operator<(const Finding& a, const Finding& b) {
    return a.addr != b.addr ? a.addr < b.addr : a.kind < b.kind;
  }
};

struct VerifyReport {
  std::vector<Finding> findings;

  bool ok() const { return findings.empty(); }
  bool flags(std::uint32_t addr) const {
    for (const auto& f : findings)
      if (f.addr == addr) return true;
    return false;
  }
  bool flags(std::uint32_t addr, FindingKind k) const {
    for (const auto& f : findings)
      if (f.addr == addr && f.kind == k) return true;
    return false;
  }
};

// Walks every CFG edge forward from the entry and handler states, decrypting
// as the processor would. Uses only the image, the key and the plaintext
// program; never the linker's state assignment. At most four distinct states
// are followed per node.
inline VerifyReport verify_image(const EncryptedImage& img, const AssembledProgram& prog, const KeyMaterial& km) {
  VerifyReport rep;
  if (!img.protected_image()) return rep;
  const SpongeParams p = bind_key(img.params, km);
  const bool ape = p.mode == SpongeMode::ApeLike;
  const auto g = build_cfg(prog);
  std::set<Finding> found;
  auto flag = [&](std::uint32_t addr, FindingKind kind, std::string msg) { found.insert({addr, kind, std::move(msg)}); };

  auto view = [&](const SpongeState& s) { return ape ? s.capacity() : s.bits(); };
  auto start = [&](std::string_view tag, std::uint32_t addr, const StateBits& patch) {
    return view(apply_patch(derive_initial_state(p, km, tag, addr), PatchValue{PatchScope::FullState, patch}));
  };
  auto node_addr = [&](std::uint32_t n) { return g.is_virtual(n) ? 0xFFFFFFFFu : prog.addr_of(n); };

  std::vector<std::vector<StateBits>> seen(g.node_count());
  std::deque<std::pair<std::uint32_t, StateBits>> work;
  auto arrive = [&](std::uint32_t n, const StateBits& s) {
    auto& v = seen[n];
    for (const auto& x : v)
      if (x == s) return;
    if (!v.empty()) {
      if (g.is_virtual(n) && n == g.inter_node) flag(0xFFFFFFFFu, FindingKind::MergeDisagreement, "indirect-call intermediate state differs");
      else if (!g.is_virtual(n)) flag(node_addr(n), FindingKind::MergeDisagreement, "incoming states disagree at " + hex_addr(node_addr(n)));
    }
    if (v.size() >= 4) return;
    v.push_back(s);
    work.emplace_back(n, s);
  };

  arrive(g.entry_node, start("start", img.entry_addr, img.entry_patch));
  for (std::size_t h = 0; h < img.handlers.size() && h < g.handler_nodes.size(); ++h)
    arrive(g.handler_nodes[h], start("entry", img.handlers[h].vector, img.handlers[h].entry_patch));

  while (!work.empty()) {
    auto [n, s] = work.front();
    work.pop_front();
    StateBits out = s;
    if (!g.is_virtual(n)) {
      const Ciphertext c{img.code[n], n < img.ext.size() ? img.ext[n] : 0};
      DecryptResult d = ape ? ape_decrypt_step(p, s, c) : duplex_decrypt_step(p, SpongeState(s, p.rate_r), c);
      if (d.plain != prog.words[n] || !check_redundancy(d.redundancy))
        flag(prog.addr_of(n), FindingKind::DecryptMismatch, "ciphertext at " + hex_addr(prog.addr_of(n)) + " does not decrypt to the program");
      out = view(d.state);
    } else if (n != g.inter_node) {
      const std::size_t h = n - g.inter_node - 1;
      const auto e = view(derive_initial_state(p, km, "exit", img.handlers[h].vector));
      if (!(s == e)) {
        for (auto ei : g.in[n])
          flag(prog.addr_of(g.edges[ei].from), FindingKind::HandlerExitMismatch, "handler exit state differs from e");
      }
      continue;
    }
    for (auto ei : g.out[n]) {
      const auto& e = g.edges[ei];
      StateBits next = out;
      if (e.slot) next ^= load_patch(img.code, *e.slot, p.patch_bits());
      arrive(e.to, next);
    }
  }
  rep.findings.assign(found.begin(), found.end());
  return rep;
}

}  // namespace scfp::link
