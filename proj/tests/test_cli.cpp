#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>
#include <vector>

#include "scfp/image.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kKey = "000102030405060708090a0b0c0d0e0f";
const std::string kProgs = SCFP_PROGRAMS_DIR;

struct Result {
  int code;
  std::string out;
};

Result cli(const std::string& args) {
  const std::string cmd = std::string(SCFP_CLI) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return {-1, {}};
  std::string out;
  std::array<char, 4096> buf;
  while (auto n = fread(buf.data(), 1, buf.size(), p)) out.append(buf.data(), n);
  const int st = pclose(p);
  return {WIFEXITED(st) ? WEXITSTATUS(st) : -1, out};
}

std::string field(const std::string& out, const std::string& key) {
  std::smatch m;
  if (std::regex_search(out, m, std::regex("(^|\\s)" + key + "=(\\S+)"))) return m[2];
  return {};
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("scfp_cli_" + std::to_string(::getpid()) + "_" +
                                       ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

TEST_F(Cli, DiamondMicroReportsOnePatch) {
  const auto r = cli("link " + kProgs + "/diamond.s --preset MICRO --key " + kKey + " -o " + path("f.scfp"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(field(r.out, "patches"), "1");
  EXPECT_EQ(field(r.out, "slot_words"), "1");
  EXPECT_EQ(field(r.out, "mode"), "ape");
}

TEST_F(Cli, AeeUsesSixWordSlots) {
  const auto r = cli("link " + kProgs + "/diamond.s --preset AEE --key " + kKey + " -o " + path("f.scfp"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(field(r.out, "slot_words"), "6");
  EXPECT_EQ(field(r.out, "patch_words"), "6");
  EXPECT_EQ(field(r.out, "baseline_code_bytes"), "36");
}

TEST_F(Cli, MissingNonceIsRandomAndEchoed) {
  const auto a = cli("link " + kProgs + "/diamond.s --key " + kKey + " -o " + path("a.scfp"));
  const auto b = cli("link " + kProgs + "/diamond.s --key " + kKey + " -o " + path("b.scfp"));
  ASSERT_EQ(a.code, 0) << a.out;
  const auto na = field(a.out, "nonce"), nb = field(b.out, "nonce");
  EXPECT_TRUE(std::regex_match(na, std::regex("[0-9a-f]{32}"))) << na;
  EXPECT_NE(na, nb);
  const auto c = cli("link " + kProgs + "/diamond.s --key " + kKey + " --nonce " + na + " -o " + path("c.scfp"));
  EXPECT_EQ(field(c.out, "nonce"), na);
  std::ifstream fa(path("a.scfp"), std::ios::binary), fc(path("c.scfp"), std::ios::binary);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(fa), {}), std::string(std::istreambuf_iterator<char>(fc), {}));
}

TEST_F(Cli, RunExitCodes) {
  ASSERT_EQ(cli("link " + kProgs + "/diamond.s --preset IE --key " + kKey + " -o " + path("f.scfp")).code, 0);
  const auto ok = cli("run " + path("f.scfp") + " --key " + kKey);
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_EQ(field(ok.out, "status"), "HALTED");
  const auto bad = cli("run " + path("f.scfp") + " --key ffff02030405060708090a0b0c0d0e0f");
  EXPECT_EQ(bad.code, 2) << bad.out;
  // flip a bit in the last code word (HALT)
  std::ifstream in(path("f.scfp"), std::ios::binary);
  auto img = scfp::parse_image(std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {}));
  in.close();
  img.code.back() ^= 0x10;
  const auto bytes = scfp::serialize(img);
  std::ofstream(path("f.scfp"), std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                        static_cast<std::streamsize>(bytes.size()));
  EXPECT_EQ(cli("run " + path("f.scfp") + " --key " + kKey).code, 2);
}

TEST_F(Cli, RunWithInterrupts) {
  ASSERT_EQ(cli("link " + kProgs + "/interrupt.s --key " + kKey + " -o " + path("i.scfp")).code, 0);
  const auto plain = cli("run " + path("i.scfp") + " --key " + kKey);
  const auto irq = cli("run " + path("i.scfp") + " --key " + kKey + " --irq " + kProgs + "/interrupt.irq --program " +
                       kProgs + "/interrupt.s --trace " + path("t.txt"));
  ASSERT_EQ(irq.code, 0) << irq.out;
  EXPECT_EQ(field(irq.out, "trace_digest"), field(plain.out, "trace_digest"));
  EXPECT_EQ(field(irq.out, "arch_digest"), field(plain.out, "arch_digest"));
  EXPECT_TRUE(fs::file_size(path("t.txt")) > 0);
  const auto nolabel = cli("run " + path("i.scfp") + " --key " + kKey + " --irq " + kProgs + "/interrupt.irq");
  EXPECT_EQ(nolabel.code, 1);
}

TEST_F(Cli, LinkErrorsExitOne) {
  const auto r = cli("link " + kProgs + "/two_callers.s --mode duplex --key " + kKey + " -o " + path("x.scfp"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("link error"), std::string::npos) << r.out;
}

TEST_F(Cli, AsmDiagnosticsNameFileAndLine) {
  std::ofstream(path("bad.s")) << "  halt\n  frob r1\n";
  const auto r = cli("asm " + path("bad.s"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("bad.s:2: error: unknown mnemonic"), std::string::npos) << r.out;
}

TEST_F(Cli, AsmThenLinkProgramFile) {
  const auto a = cli("asm " + kProgs + "/indirect.s --preset MICRO -o " + path("p.json") + " --listing");
  ASSERT_EQ(a.code, 0) << a.out;
  EXPECT_NE(a.out.find("CALLRP"), std::string::npos);
  const auto l = cli("link " + path("p.json") + " --preset MICRO --key " + kKey + " -o " + path("p.scfp"));
  ASSERT_EQ(l.code, 0) << l.out;
  EXPECT_EQ(field(l.out, "patches"), "11");
  EXPECT_EQ(field(l.out, "patch_words"), "13");
  EXPECT_EQ(cli("verify " + path("p.scfp") + " --program " + path("p.json") + " --key " + kKey).code, 0);
  EXPECT_EQ(cli("verify " + path("p.scfp") + " --program " + path("p.json") + " --key " + std::string(32, '1')).code, 2);
  // slot width mismatch
  EXPECT_EQ(cli("link " + path("p.json") + " --preset AEE --key " + kKey + " -o " + path("q.scfp")).code, 1);
  ASSERT_EQ(cli("asm " + kProgs + "/indirect.s --unprotected -o " + path("u.json")).code, 0);
  EXPECT_EQ(cli("link " + path("u.json") + " --key " + kKey + " -o " + path("u.scfp")).code, 1);
}

TEST_F(Cli, AttackRefusesAee) {
  for (const char* pre : {"AEE", "AEE_LIGHT"}) {
    const auto r = cli(std::string("attack --preset ") + pre + " --trials 10");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("refusing"), std::string::npos) << r.out;
  }
}

TEST_F(Cli, AttackRecord) {
  const auto r = cli("attack --preset MICRO --kind jump-tamper --trials 2000 --seed 5 --threads 2 --out " + path("rec.txt"));
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(field(r.out, "kind"), "jump-tamper");
  EXPECT_EQ(field(r.out, "trials"), "2000");
  EXPECT_EQ(field(r.out, "seed"), "5");
  std::ifstream rec(path("rec.txt"));
  std::string line;
  std::getline(rec, line);
  EXPECT_NE(line.find("within_3sigma="), std::string::npos);
  const auto again = cli("attack --preset MICRO --kind jump-tamper --trials 2000 --seed 5 --threads 1");
  EXPECT_EQ(field(again.out, "successes"), field(r.out, "successes"));
  EXPECT_EQ(cli("attack --preset MICRO --kind rowhammer").code, 1);
}

TEST_F(Cli, Bench) {
  const auto r = cli("bench " + kProgs + "/bench");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("average"), std::string::npos);
  EXPECT_NE(r.out.find("[looped]"), std::string::npos);
  EXPECT_NE(field(r.out, "runtime_overhead"), "");
}

TEST_F(Cli, Params) {
  const auto ok = cli("params --preset IE");
  EXPECT_EQ(ok.code, 0);
  EXPECT_EQ(field(ok.out, "valid"), "1");
  std::ofstream(path("p.cfg")) << "mode=ape\nperm=keccak-p50\nr=35\nx=15\nn=3\ns=8\n";
  const auto bad = cli("params --config " + path("p.cfg"));
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("capacity below 2s"), std::string::npos) << bad.out;
  EXPECT_NE(cli("params --list").out.find("MICRO_N0"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("link").code, 1);
  EXPECT_EQ(cli("link " + kProgs + "/diamond.s --preset NOPE --key " + kKey).code, 1);
  EXPECT_EQ(cli("run /nonexistent.scfp --key " + kKey).code, 1);
}

}  // namespace
