#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "scfp/linker.hpp"
#include "scfp/presets.hpp"
#include "scfp/progen.hpp"
#include "scfp/verify.hpp"

using namespace scfp;
using namespace scfp::link;

namespace {

std::string read_program(const std::string& name) {
  std::ifstream f(std::string(SCFP_PROGRAMS_DIR) + "/" + name);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

KeyMaterial test_key() {
  KeyMaterial km;
  for (unsigned i = 0; i < 16; ++i) km.master_key[i] = static_cast<std::uint8_t>(0xA0 + i);
  km.nonce[0] = 1;
  return km;
}

// |E| - |V| + components, counted with a plain DFS over direct edges.
std::size_t independent_cycle_rank(const ControlFlowGraph& g) {
  std::vector<std::vector<std::uint32_t>> adj(g.word_count);
  std::size_t edges = 0, vertices = 0, components = 0;
  for (const auto& e : g.edges) {
    if (e.from >= g.word_count || e.to >= g.word_count) continue;
    adj[e.from].push_back(e.to);
    adj[e.to].push_back(e.from);
    ++edges;
  }
  std::vector<bool> seen(g.word_count);
  for (std::uint32_t v = 0; v < g.word_count; ++v) {
    if (!g.instr[v]) continue;
    ++vertices;
    if (seen[v]) continue;
    ++components;
    std::vector<std::uint32_t> stack{v};
    seen[v] = true;
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (auto w : adj[u])
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
    }
  }
  return edges + components - vertices;
}

TEST(Plan, DiamondOnePatchBothPlacements) {
  const auto prog = isa::assemble(read_program("diamond.s"), {.slot_words = 1});
  const auto g = build_cfg(prog);
  for (auto pl : {Placement::Convention, Placement::SpanningTree}) {
    const auto plan = place_patches(g, SpongeMode::ApeLike, pl);
    EXPECT_EQ(plan.patch_count(), 1u) << placement_name(pl);
    for (std::size_t i = 0; i < g.edges.size(); ++i) EXPECT_EQ(plan.patched[i], g.edges[i].kind == EdgeKind::TakenBranch);
  }
}

TEST(Plan, DiamondCapacitiesEnteringMergeAreEqual) {
  const auto prog = isa::assemble(read_program("diamond.s"), {.slot_words = 1});
  for (auto pl : {Placement::Convention, Placement::SpanningTree}) {
    const auto res = link::link(prog, test_key(), preset("MICRO"), {pl});
    const auto d = *prog.index_of(prog.symbols.at("D"));
    const auto c = *prog.index_of(prog.symbols.at("C"));
    const auto jmp = c - 1;
    EXPECT_EQ(res.state_out[c], res.state_in[d]);
    EXPECT_EQ(res.state_out[jmp], res.state_in[d]);
  }
}

TEST(Plan, DiamondNeedsJmppInDuplex) {
  const auto dp = with_mode(preset("MICRO"), SpongeMode::DuplexLike);
  EXPECT_THROW(link::link(isa::assemble(read_program("diamond.s"), {.slot_words = dp.slot_words()}), test_key(), dp), LinkError);
  const auto res = link::link(isa::assemble(read_program("diamond_duplex.s"), {.slot_words = dp.slot_words()}), test_key(), dp);
  EXPECT_GE(res.patch_count(), 1u);
}

TEST(Plan, TwoCallersCallsMergeAtCallee) {
  const auto p = preset("MICRO");
  const auto res = link::link(isa::assemble(read_program("two_callers.s"), {.slot_words = 1}), test_key(), p);
  EXPECT_EQ(res.patch_count(), 2u);
}

TEST(Plan, IndirectConventionPatchCount) {
  const auto prog = isa::assemble(read_program("indirect.s"), {.slot_words = 1});
  const auto res = link::link(prog, test_key(), preset("MICRO"));
  EXPECT_EQ(res.patch_count(), 11u);
  // every edge through INTER is patched
  for (std::size_t i = 0; i < res.cfg.edges.size(); ++i) {
    const auto& e = res.cfg.edges[i];
    if (e.from == res.cfg.inter_node || e.to == res.cfg.inter_node) {
      EXPECT_TRUE(res.plan.patched[i]);
    }
  }
}

TEST(Plan, CycleRankMatchesIndependentCount) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 60; ++t) {
    progen::GenOptions o;
    o.max_instructions = 200;
    const auto prog = isa::assemble(progen::generate_program(rng, o), {.slot_words = 1});
    const auto g = build_cfg(prog);
    EXPECT_EQ(cycle_rank(g), independent_cycle_rank(g));
  }
}

// A valid placement leaves a forest of equality edges, so the patch count on
// direct edges is at least the cycle rank. The spanning-tree placement meets
// the bound whenever it reports no direction conflict.
TEST(Plan, SpanningTreeMeetsCycleRank) {
  std::mt19937_64 rng(22);
  int exact = 0;
  for (int t = 0; t < 200; ++t) {
    const bool duplex = t % 2;
    progen::GenOptions o;
    o.max_instructions = 150;
    o.indirect_functions = 0;
    o.indirect_sites = 0;
    o.single_call_site = duplex;
    const auto prog = isa::assemble(progen::generate_program(rng, o), {.slot_words = 1});
    const auto g = build_cfg(prog);
    const auto mode = duplex ? SpongeMode::DuplexLike : SpongeMode::ApeLike;
    const auto tree = place_patches(g, mode, Placement::SpanningTree);
    const auto conv = place_patches(g, mode, Placement::Convention);
    const auto rank = independent_cycle_rank(g);
    EXPECT_GE(tree.patch_count(), rank);
    EXPECT_LE(tree.patch_count(), conv.patch_count());
    if (tree.diagnostics.empty()) {
      EXPECT_EQ(tree.patch_count(), rank);
      ++exact;
    }
  }
  EXPECT_GT(exact, 0);
}

TEST(Plan, BothPlacementsLinkAndAgreeOnPlaintext) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 40; ++t) {
    const bool duplex = t % 2;
    progen::GenOptions o;
    o.single_call_site = duplex;
    const auto p = with_mode(preset("MICRO"), duplex ? SpongeMode::DuplexLike : SpongeMode::ApeLike);
    const auto prog = isa::assemble(progen::generate_program(rng, o), {.slot_words = p.slot_words()});
    const auto a = link::link(prog, test_key(), p, {Placement::Convention});
    const auto b = link::link(prog, test_key(), p, {Placement::SpanningTree});
    EXPECT_LE(b.patch_count(), a.patch_count());
    EXPECT_TRUE(verify_image(a.image, prog, test_key()).ok());
    EXPECT_TRUE(verify_image(b.image, prog, test_key()).ok());
  }
}

}  // namespace
