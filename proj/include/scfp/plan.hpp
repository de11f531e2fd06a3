#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "scfp/cfg.hpp"
#include "scfp/sponge.hpp"

namespace scfp::link {

enum class Placement : std::uint8_t { Convention, SpanningTree };

inline const char* placement_name(Placement p) { return p == Placement::Convention ? "convention" : "spanning-tree"; }

// Per edge: patched (state difference carried by its slot) or an equality
// edge (source output state == target input state).
struct PatchPlan {
  Placement placement = Placement::Convention;
  std::vector<bool> patched;
  std::vector<std::string> diagnostics;

  std::size_t patch_count() const { return static_cast<std::size_t>(std::count(patched.begin(), patched.end(), true)); }
};

namespace detail {

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
  std::vector<std::size_t> parent;
};

inline std::map<std::uint32_t, std::size_t> slot_use(const ControlFlowGraph& g) {
  std::map<std::uint32_t, std::size_t> use;
  for (const auto& e : g.edges)
    if (e.slot) ++use[*e.slot];
  return use;
}

inline bool direct_edge(const ControlFlowGraph& g, const Edge& e) { return !g.is_virtual(e.from) && !g.is_virtual(e.to); }

}  // namespace detail

// Every slotted edge carries a patch, except where a zero patch already
// holds: APE needs patches only where control splits, duplex only where it merges.
inline PatchPlan place_patches_convention(const ControlFlowGraph& g, SpongeMode mode) {
  PatchPlan plan;
  plan.placement = Placement::Convention;
  plan.patched.assign(g.edges.size(), false);
  const auto use = detail::slot_use(g);
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (!e.slot) continue;
    const bool single = mode == SpongeMode::ApeLike ? g.out[e.from].size() == 1 : g.in[e.to].size() == 1;
    plan.patched[i] = !(single && detail::direct_edge(g, e) && use.at(*e.slot) == 1);
  }
  return plan;
}

// Patches on exactly the non-tree edges of a spanning forest of the direct
// (instruction-to-instruction) graph. Edges through INTER or handler exits keep
// the convention.
inline PatchPlan place_patches_spanning_tree(const ControlFlowGraph& g, SpongeMode mode) {
  PatchPlan plan;
  plan.placement = Placement::SpanningTree;
  plan.patched.assign(g.edges.size(), true);
  const auto use = detail::slot_use(g);
  detail::UnionFind uf(g.node_count());
  std::vector<bool> has_eq_out(g.node_count()), has_eq_in(g.node_count());

  std::vector<std::size_t> order;
  bool virtual_edges = false;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    if (detail::direct_edge(g, g.edges[i])) order.push_back(i);
    else virtual_edges = true;
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ea = g.edges[a];
    const auto& eb = g.edges[b];
    const bool fa = ea.kind == EdgeKind::Fallthrough, fb = eb.kind == EdgeKind::Fallthrough;
    if (fa != fb) return fa;
    return ea.from != eb.from ? ea.from < eb.from : ea.to < eb.to;
  });
  auto take = [&](std::size_t i) {
    const auto& e = g.edges[i];
    if (!uf.unite(e.from, e.to)) return;
    plan.patched[i] = false;
    has_eq_out[e.from] = true;
    has_eq_in[e.to] = true;
  };
  auto fits = [&](const Edge& e) {
    if (e.slot && use.at(*e.slot) > 1) return false;
    return mode == SpongeMode::ApeLike ? !has_eq_out[e.from] : !has_eq_in[e.to];
  };
  for (auto i : order)
    if (!g.edges[i].slot) take(i);
  for (auto i : order)
    if (g.edges[i].slot && fits(g.edges[i])) take(i);
  for (auto i : order) {
    const auto& e = g.edges[i];
    if (!e.slot || !plan.patched[i] || uf.find(e.from) == uf.find(e.to)) continue;
    // stays patched: an equality edge here would need two states at once
    plan.diagnostics.push_back("tree edge " + hex_addr(4 * e.from) + " -> " + hex_addr(4 * e.to) +
                               " conflicts with the sponge direction");
    uf.unite(e.from, e.to);
  }
  if (virtual_edges)
    plan.diagnostics.push_back("indirect-call and handler-exit edges use convention placement");
  return plan;
}

inline PatchPlan place_patches(const ControlFlowGraph& g, SpongeMode mode, Placement p) {
  return p == Placement::Convention ? place_patches_convention(g, mode) : place_patches_spanning_tree(g, mode);
}

// |E| - |V| + C over instruction nodes and direct edges.
inline std::size_t cycle_rank(const ControlFlowGraph& g) {
  detail::UnionFind uf(g.node_count());
  std::size_t v = 0, e = 0, c = 0;
  for (std::uint32_t i = 0; i < g.word_count; ++i) v += g.is_instr(i);
  for (const auto& x : g.edges)
    if (detail::direct_edge(g, x)) {
      ++e;
      uf.unite(x.from, x.to);
    }
  for (std::uint32_t i = 0; i < g.word_count; ++i) c += g.is_instr(i) && uf.find(i) == i;
  return e + c - v;
}

}  // namespace scfp::link
