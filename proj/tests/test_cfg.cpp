#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "scfp/cfg.hpp"

using namespace scfp;
using namespace scfp::link;

namespace {

std::string read_program(const std::string& name) {
  std::ifstream f(std::string(SCFP_PROGRAMS_DIR) + "/" + name);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ControlFlowGraph cfg_of(const std::string& src, unsigned k = 1) { return build_cfg(isa::assemble(src, {.slot_words = k})); }

std::size_t count_kind(const ControlFlowGraph& g, EdgeKind k) {
  return static_cast<std::size_t>(std::count_if(g.edges.begin(), g.edges.end(), [&](const Edge& e) { return e.kind == k; }));
}

bool has_edge(const ControlFlowGraph& g, std::uint32_t from, std::uint32_t to, EdgeKind k) {
  return std::any_of(g.edges.begin(), g.edges.end(), [&](const Edge& e) { return e.from == from && e.to == to && e.kind == k; });
}

std::string link_error(const std::string& src) {
  try {
    cfg_of(src);
  } catch (const LinkError& e) {
    return e.what();
  }
  return {};
}

TEST(Cfg, DiamondEdges) {
  const auto g = cfg_of(read_program("diamond.s"));
  EXPECT_EQ(g.instruction_count(), 9u);
  EXPECT_EQ(count_kind(g, EdgeKind::TakenBranch), 1u);
  EXPECT_EQ(count_kind(g, EdgeKind::Jump), 1u);
  // bplt at word 2, slot at 3, B at 4
  EXPECT_TRUE(has_edge(g, 2, 4, EdgeKind::Fallthrough));
  EXPECT_TRUE(has_edge(g, 2, 6, EdgeKind::TakenBranch));
  EXPECT_TRUE(has_edge(g, 5, 7, EdgeKind::Jump));
  EXPECT_TRUE(has_edge(g, 6, 7, EdgeKind::Fallthrough));
  for (const auto& e : g.edges)
    if (e.kind == EdgeKind::TakenBranch) {
      EXPECT_EQ(e.slot, 3u);
    } else {
      EXPECT_FALSE(e.slot);
    }
}

TEST(Cfg, SlotsAreNotNodes) {
  const auto g = cfg_of(read_program("diamond.s"), 6);
  EXPECT_FALSE(g.is_instr(3));
  EXPECT_TRUE(g.is_instr(9));
  for (const auto& e : g.edges) {
    EXPECT_TRUE(g.is_instr(e.from) || g.is_virtual(e.from));
    EXPECT_TRUE(g.is_instr(e.to) || g.is_virtual(e.to));
  }
}

TEST(Cfg, IndirectCallsGoThroughInter) {
  const auto g = cfg_of(read_program("indirect.s"));
  EXPECT_EQ(count_kind(g, EdgeKind::ICall), 4u);    // 2 sites in, 2 targets out
  EXPECT_EQ(count_kind(g, EdgeKind::IReturn), 4u);  // 2 xret in, 2 returns out
  EXPECT_EQ(count_kind(g, EdgeKind::Call), 2u);
  EXPECT_EQ(count_kind(g, EdgeKind::Return), 2u);
  std::size_t into = 0, from = 0;
  for (const auto& e : g.edges) {
    into += e.to == g.inter_node;
    from += e.from == g.inter_node;
    if (e.from == g.inter_node || e.to == g.inter_node) {
      EXPECT_TRUE(e.slot);
    }
  }
  EXPECT_EQ(into, 4u);
  EXPECT_EQ(from, 4u);
  const auto ind = std::count_if(g.functions.begin(), g.functions.end(), [](const Function& f) { return f.indirect; });
  EXPECT_EQ(ind, 2);
}

TEST(Cfg, HandlerGetsExitNode) {
  const auto g = cfg_of(read_program("interrupt.s"));
  ASSERT_EQ(g.handler_nodes.size(), 1u);
  ASSERT_EQ(g.hexit_nodes.size(), 1u);
  EXPECT_TRUE(g.is_virtual(g.hexit_nodes[0]));
  EXPECT_EQ(count_kind(g, EdgeKind::HandlerExit), 1u);
}

TEST(Cfg, BasicBlocks) {
  const auto g = cfg_of(read_program("diamond.s"));
  // {A..bplt} {B, jmp} {C} {D..halt}
  EXPECT_EQ(g.blocks.size(), 4u);
  EXPECT_EQ(g.block_edges().size(), 4u);
  EXPECT_EQ(g.block_in_degree(*g.block_at(7)), 2u);
}

TEST(Cfg, Errors) {
  EXPECT_NE(link_error("  jmpp out\n  halt\nout:\n").find("leaves the code section"), std::string::npos);
  EXPECT_NE(link_error("f: addi r1, r1, 1\n  xret\n").find("XRET"), std::string::npos);
  EXPECT_NE(link_error("  callp f\n  halt\nf: xret\n").find("use RET"), std::string::npos);
  EXPECT_NE(link_error("  iret\n").find("not inside an interrupt handler"), std::string::npos);
  EXPECT_NE(link_error("  callrp r1\n  halt\n").find("no .targets"), std::string::npos);
  EXPECT_NE(link_error(".targets s: f\ns: callrp r1\n  halt\nf: ret\n").find("use XRET"), std::string::npos);
  EXPECT_NE(link_error("  jmpp @+4\n  halt\n").find("patch slots"), std::string::npos);
}

TEST(Cfg, UnprotectedCallrRejectedWhenProtected) {
  EXPECT_NE(link_error(".targets s: f\ns: callr r1\n  halt\nf: xret\n").find("CALLR"), std::string::npos);
}

}  // namespace
