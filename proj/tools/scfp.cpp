// scfp: assemble, link, run, attack and benchmark sponge-protected programs.
// Exit codes: 0 ok, 1 usage or diagnostic, 2 security event (detected fault).

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "scfp/attacks.hpp"
#include "scfp/image.hpp"
#include "scfp/linker.hpp"
#include "scfp/metrics.hpp"
#include "scfp/presets.hpp"
#include "scfp/verify.hpp"
#include "scfp/vm.hpp"

namespace fs = std::filesystem;
using namespace scfp;

namespace {

constexpr int kOk = 0, kDiag = 1, kSecurity = 2;

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !out.write(data.data(), static_cast<std::streamsize>(data.size()))) throw Failure("cannot write " + path);
}

std::array<std::uint8_t, 16> parse_hex16(std::string s, const char* what) {
  if (!s.empty() && s[0] == '@') {
    s = read_text(s.substr(1));
    s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }), s.end());
  }
  if (s.rfind("0x", 0) == 0) s = s.substr(2);
  if (s.size() != 32) throw Failure(std::string(what) + " must be 32 hex digits (or @file)");
  std::array<std::uint8_t, 16> out{};
  for (std::size_t i = 0; i < 16; ++i) {
    unsigned v = 0;
    if (std::sscanf(s.substr(2 * i, 2).c_str(), "%2x", &v) != 1 || !std::isxdigit(static_cast<unsigned char>(s[2 * i])) ||
        !std::isxdigit(static_cast<unsigned char>(s[2 * i + 1])))
      throw Failure(std::string("bad hex digit in ") + what);
    out[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

std::string hex16(const std::array<std::uint8_t, 16>& v) {
  std::ostringstream os;
  for (auto b : v) os << std::hex << std::setw(2) << std::setfill('0') << unsigned{b};
  return os.str();
}

struct ParamChoice {
  std::string preset = "MICRO";
  std::string mode;
  std::string config;

  SpongeParams resolve() const {
    SpongeParams p;
    if (!config.empty()) {
      p = parse_config_text(read_text(config));
    } else {
      auto f = find_preset(preset);
      if (!f) throw Failure("unknown preset '" + preset + "'");
      p = *f;
    }
    if (mode == "ape") p = with_mode(p, SpongeMode::ApeLike);
    else if (mode == "duplex") p = with_mode(p, SpongeMode::DuplexLike);
    else if (!mode.empty()) throw Failure("mode must be ape or duplex");
    return p;
  }
  void add(CLI::App* c) {
    c->add_option("--preset", preset, "AEE, IE, AEE_LIGHT, MICRO or MICRO_N0")->capture_default_str();
    c->add_option("--mode", mode, "ape or duplex (default: the preset's mode)");
    c->add_option("--config", config, "parameter file in config text form (overrides --preset)");
  }
};

// A program file keeps the source and options; loading re-assembles and
// checks the words, so the file cannot drift from what it claims to hold.
nlohmann::json program_json(const isa::AssembledProgram& prog, const std::string& source, const isa::AsmOptions& o) {
  nlohmann::json j;
  j["format"] = "scfp-program";
  j["version"] = 1;
  j["protected"] = !o.unprotected;
  j["slot_words"] = o.slot_words;
  j["source"] = source;
  j["words"] = prog.words;
  j["entry"] = prog.entry;
  nlohmann::json syms = nlohmann::json::object();
  for (auto& [name, addr] : prog.symbols) syms[name] = addr;
  j["symbols"] = syms;
  return j;
}

struct LoadedProgram {
  std::string source;
  isa::AsmOptions options;
  isa::AssembledProgram prog;
};

// .s files are assembled with the given slot width; program files carry their own.
LoadedProgram load_program(const std::string& path, unsigned slot_words, bool unprotected = false) {
  LoadedProgram lp;
  const std::string text = read_text(path);
  if (fs::path(path).extension() == ".json") {
    auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "scfp-program") throw Failure(path + " is not a program file");
    lp.source = j.at("source").get<std::string>();
    lp.options.unprotected = !j.at("protected").get<bool>();
    lp.options.slot_words = j.at("slot_words").get<unsigned>();
    lp.prog = isa::assemble(lp.source, lp.options);
    if (lp.prog.words != j.at("words").get<std::vector<std::uint32_t>>()) throw Failure(path + ": words do not match the embedded source");
  } else {
    lp.source = text;
    lp.options.unprotected = unprotected;
    lp.options.slot_words = slot_words;
    lp.prog = isa::assemble(lp.source, lp.options);
  }
  return lp;
}

void print_asm_errors(const isa::AsmError& e, const std::string& path) {
  for (auto& d : e.diagnostics) std::cerr << path << ":" << d.line << ": error: " << d.message << "\n";
  if (e.diagnostics.empty()) std::cerr << path << ": error: " << e.what() << "\n";
}

// ---- asm ----
struct AsmCmd {
  std::string in, out;
  bool unprotected = false;
  ParamChoice params;
  bool listing = false;

  int operator()() {
    const auto p = params.resolve();
    isa::AsmOptions o;
    o.unprotected = unprotected;
    o.slot_words = p.slot_words();
    const std::string src = read_text(in);
    isa::AssembledProgram prog;
    try {
      prog = isa::assemble(src, o);
    } catch (const isa::AsmError& e) {
      print_asm_errors(e, in);
      return kDiag;
    }
    if (out.empty()) out = fs::path(in).replace_extension(unprotected ? ".plain.json" : ".prog.json").string();
    write_bytes(out, program_json(prog, src, o).dump(1) + "\n");
    std::cout << "program=" << out << " words=" << prog.words.size() << " slot_words=" << prog.slot_word_count()
              << " protected=" << (unprotected ? 0 : 1) << "\n";
    if (listing) std::cout << isa::disassemble_program(prog);
    return kOk;
  }
};

// ---- link ----
struct LinkCmd {
  std::string in, out, key, nonce, placement = "convention";
  ParamChoice params;

  int operator()() {
    const auto p = params.resolve();
    require_valid(p);
    if (key.empty()) throw Failure("--key is required");
    KeyMaterial km{parse_hex16(key, "key"), {}};
    if (nonce.empty()) {
      std::random_device rd;
      for (auto& b : km.nonce) b = static_cast<std::uint8_t>(rd());
    } else {
      km.nonce = parse_hex16(nonce, "nonce");
    }
    link::LinkOptions lo;
    if (placement == "spanning-tree") lo.placement = link::Placement::SpanningTree;
    else if (placement != "convention") throw Failure("placement must be convention or spanning-tree");

    LoadedProgram lp;
    try {
      lp = load_program(in, p.slot_words());
    } catch (const isa::AsmError& e) {
      print_asm_errors(e, in);
      return kDiag;
    }
    if (lp.options.unprotected) throw Failure(in + " is an unprotected build; link needs the protected layout");
    if (lp.options.slot_words != p.slot_words())
      throw Failure(in + " was assembled for " + std::to_string(lp.options.slot_words) + "-word slots but the parameters need " +
                    std::to_string(p.slot_words()));
    link::LinkResult r;
    try {
      r = link::link(lp.prog, km, p, lo);
    } catch (const link::LinkError& e) {
      for (auto& m : e.messages) std::cerr << in << ": link error: " << m << "\n";
      return kDiag;
    }
    for (auto& d : r.plan.diagnostics) std::cerr << in << ": note: " << d << "\n";
    if (out.empty()) out = fs::path(in).replace_extension(".scfp").string();
    const auto bytes = serialize(r.image);
    write_bytes(out, std::string(bytes.begin(), bytes.end()));

    isa::AsmOptions bo = lp.options;
    bo.unprotected = true;
    const auto base = isa::assemble(lp.source, bo);
    const double overhead = static_cast<double>(4 * lp.prog.slot_word_count()) / static_cast<double>(base.code_bytes());
    std::cout << "image=" << out << "\n"
              << "nonce=" << hex16(km.nonce) << "\n"
              << "mode=" << (p.mode == SpongeMode::ApeLike ? "ape" : "duplex") << "\n"
              << "placement=" << placement << "\n"
              << "slot_words=" << p.slot_words() << "\n"
              << "patches=" << r.patch_count() << "\n"
              << "patch_words=" << lp.prog.slot_word_count() << "\n"
              << "baseline_code_bytes=" << base.code_bytes() << "\n"
              << "code_size_overhead=" << overhead << "\n";
    return kOk;
  }
};

// ---- run ----
struct RunCmd {
  std::string image, key, irq, program, trace;
  std::uint64_t cycle_limit = 10'000'000;

  int operator()() {
    const auto bytes = read_text(image);
    EncryptedImage img = parse_image(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
    if (key.empty()) throw Failure("--key is required");
    const KeyMaterial km{parse_hex16(key, "key"), img.nonce};
    vm::RunOptions ro;
    ro.cycle_limit = cycle_limit;
    if (!irq.empty()) {
      std::optional<isa::AssembledProgram> prog;
      if (!program.empty()) prog = load_program(program, img.protected_image() ? img.params.slot_words() : 0,
                                                !img.protected_image()).prog;
      std::istringstream in(read_text(irq));
      std::string line;
      int ln = 0;
      while (std::getline(in, line)) {
        ++ln;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        std::istringstream ls(line);
        std::uint64_t cycle;
        std::string vec;
        if (!(ls >> cycle)) continue;
        if (!(ls >> vec)) throw Failure(irq + ":" + std::to_string(ln) + ": expected 'cycle vector_label'");
        std::uint32_t addr;
        if (prog && prog->symbols.count(vec)) addr = prog->symbols.at(vec);
        else if (std::isdigit(static_cast<unsigned char>(vec[0]))) addr = static_cast<std::uint32_t>(std::stoul(vec, nullptr, 0));
        else throw Failure(irq + ":" + std::to_string(ln) + ": unknown vector '" + vec + "' (pass --program for labels)");
        ro.schedule.push_back({cycle, addr});
      }
    }
    std::vector<vm::TraceEvent> events;
    if (!trace.empty()) ro.trace = &events;
    const auto o = vm::run(img, km, ro);
    if (!trace.empty()) {
      std::ofstream t(trace);
      vm::write_trace(t, events);
    }
    vm::write_outcome(std::cout, o);
    if (vm::detected(o.status)) return kSecurity;
    return o.status == vm::Status::Halted ? kOk : kDiag;
  }
};

// ---- verify ----
struct VerifyCmd {
  std::string image, program, key;

  int operator()() {
    const auto bytes = read_text(image);
    EncryptedImage img = parse_image(std::vector<std::uint8_t>(bytes.begin(), bytes.end()));
    if (key.empty()) throw Failure("--key is required");
    const KeyMaterial km{parse_hex16(key, "key"), img.nonce};
    const auto lp = load_program(program, img.params.slot_words());
    const auto rep = link::verify_image(img, lp.prog, km);
    for (auto& f : rep.findings) std::cout << "finding addr=" << link::hex_addr(f.addr) << " " << f.message << "\n";
    std::cout << "findings=" << rep.findings.size() << "\n";
    return rep.ok() ? kOk : kSecurity;
  }
};

// ---- attack ----
struct AttackCmd {
  std::string kind = "instruction-skip", program, guess = "random", out, key;
  std::uint64_t trials = 10000, seed = 1;
  unsigned threads = 0;
  bool follow = false;
  ParamChoice params;

  int operator()() {
    attacks::CampaignConfig c;
    auto k = attacks::kind_from_name(kind);
    if (!k) throw Failure("unknown campaign '" + kind + "'");
    c.kind = *k;
    c.params = params.resolve();
    if (params.config.empty() && (params.preset == "AEE" || params.preset == "AEE_LIGHT"))
      throw Failure("refusing a statistical campaign on " + params.preset + ": success probability 2^-" +
                    std::to_string(c.params.capacity_x) + " is not observable; use MICRO or IE");
    require_valid(c.params);
    c.trials = trials;
    c.seed = seed;
    c.threads = threads;
    c.follow_through = follow;
    if (!key.empty()) c.key = parse_hex16(key, "key");
    if (!program.empty()) c.program = read_text(program);
    if (guess == "correct") c.guess = attacks::PatchGuess::Correct;
    else if (guess == "zero") c.guess = attacks::PatchGuess::Zero;
    else if (guess != "random") throw Failure("guess must be random, correct or zero");
    if (trials < 1000) std::cerr << "note: fewer than 1000 trials; rates are not a statistical claim\n";

    const auto r = attacks::run_campaign(c);
    std::ostringstream rec;
    attacks::write_result(rec, r);
    std::cout << rec.str();
    if (!out.empty()) write_bytes(out, rec.str());

    const auto w = r.wilson();
    std::cout << "\n" << std::left << std::setw(18) << "campaign" << std::setw(10) << "trials" << std::setw(11) << "successes"
              << std::setw(13) << "rate" << std::setw(27) << "wilson95" << "expected\n";
    std::ostringstream wi, ex;
    wi << "[" << std::setprecision(4) << w.lo << ", " << w.hi << "]";
    if (r.expected) ex << std::setprecision(4) << *r.expected << (r.within_3sigma() ? " (within 3 sigma)" : " (outside 3 sigma)");
    else ex << "-";
    std::cout << std::setw(18) << kind << std::setw(10) << r.tally.trials << std::setw(11) << r.tally.successes << std::setw(13)
              << std::setprecision(5) << r.rate() << std::setw(27) << wi.str() << ex.str() << "\n";
    if (!r.tally.latency.empty()) {
      std::cout << "latency";
      for (auto& [l, n] : r.tally.latency) std::cout << " " << l << ":" << n;
      std::cout << "\n";
    }
    std::cout << "seed=" << seed << "\n";
    return kOk;
  }
};

// ---- bench ----
struct BenchCmd {
  std::string dir, key = std::string(32, '0'), nonce = std::string(32, '0');
  ParamChoice params;

  int operator()() {
    const auto p = params.resolve();
    require_valid(p);
    const KeyMaterial km{parse_hex16(key, "key"), parse_hex16(nonce, "nonce")};
    std::vector<fs::path> files;
    for (auto& e : fs::directory_iterator(dir))
      if (e.path().extension() == ".s") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Failure("no .s files in " + dir);

    struct Row {
      std::string name;
      OverheadReport r;
    };
    std::vector<Row> rows;
    std::vector<std::string> failed;
    for (auto& f : files) {
      try {
        const std::string src = read_text(f.string());
        isa::AsmOptions bo, po;
        bo.unprotected = true;
        po.slot_words = p.slot_words();
        const auto base = isa::assemble(src, bo);
        const auto prot = isa::assemble(src, po);
        const auto lr = link::link(prot, km, p);
        const auto brun = vm::run(link::plain_image(base, p), km);
        const auto prun = vm::run(lr.image, km);
        rows.push_back({f.stem().string(), overhead(base, prot, brun, prun)});
      } catch (const link::LinkError& e) {
        failed.push_back(f.filename().string() + ": " + e.messages.front());
      } catch (const isa::AsmError& e) {
        failed.push_back(f.filename().string() + ": " + (e.diagnostics.empty() ? e.what() : e.diagnostics.front().message));
      } catch (const std::exception& e) {
        failed.push_back(f.filename().string() + ": " + e.what());
      }
    }

    auto pct = [](double v) {
      std::ostringstream os;
      os << std::fixed << std::setprecision(2) << 100 * v << "%";
      return os.str();
    };
    std::cout << std::left << std::setw(16) << "benchmark" << std::right << std::setw(12) << "code bytes" << std::setw(12) << "code ovh"
              << std::setw(14) << "cycles" << std::setw(12) << "run ovh" << "\n";
    double sc = 0, sr = 0;
    for (auto& row : rows) {
      std::cout << std::left << std::setw(16) << row.name << std::right << std::setw(12) << row.r.baseline_code_bytes << std::setw(12)
                << pct(row.r.code_size_overhead) << std::setw(14) << row.r.baseline_cycles << std::setw(12) << pct(row.r.runtime_overhead)
                << "\n";
      sc += row.r.code_size_overhead;
      sr += row.r.runtime_overhead;
    }
    const double n = static_cast<double>(std::max<std::size_t>(1, rows.size()));
    std::cout << std::left << std::setw(16) << "average" << std::right << std::setw(12) << "" << std::setw(12) << pct(sc / n)
              << std::setw(14) << "" << std::setw(12) << pct(sr / n) << "\n\n";
    for (auto& row : rows) {
      std::cout << "[" << row.name << "]\n";
      write_report(std::cout, row.r);
    }
    std::cout << "[average]\ncode_size_overhead=" << sc / n << "\nruntime_overhead=" << sr / n << "\n";
    for (auto& f : failed) std::cerr << "bench failure: " << f << "\n";
    return failed.empty() ? kOk : kDiag;
  }
};

// ---- params ----
struct ParamsCmd {
  ParamChoice params;
  bool list = false;

  int operator()() {
    if (list) {
      for (auto& pr : presets()) {
        const auto d = validate_params(pr.params);
        std::cout << std::left << std::setw(10) << pr.name << " " << pr.params.perm.name() << " r=" << pr.params.rate_r
                  << " x=" << pr.params.capacity_x << " n=" << pr.params.redundancy_n << " s=" << pr.params.security_s
                  << " slot_words=" << pr.params.slot_words() << (d.empty() ? "" : " INVALID") << "  " << pr.note << "\n";
      }
      return kOk;
    }
    const auto p = params.resolve();
    std::cout << to_config_text(p);
    const auto d = validate_params(p);
    for (auto& x : d) std::cout << "violation " << x.rule << ": " << x.message << "\n";
    std::cout << "valid=" << (d.empty() ? 1 : 0) << "\n";
    return d.empty() ? kOk : kDiag;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sponge-based control-flow protection toolchain"};
  app.require_subcommand(1);

  AsmCmd asm_cmd;
  auto* a = app.add_subcommand("asm", "assemble a source file into a program file");
  a->add_option("input", asm_cmd.in, "assembly source")->required();
  a->add_option("-o,--output", asm_cmd.out, "program file (default: <input>.prog.json)");
  a->add_flag("--unprotected", asm_cmd.unprotected, "plain control flow, no patch slots (baseline build)");
  a->add_flag("--listing", asm_cmd.listing, "print the disassembly");
  asm_cmd.params.add(a);

  LinkCmd link_cmd;
  auto* l = app.add_subcommand("link", "encrypt a program and fill its patches");
  l->add_option("input", link_cmd.in, "program file or assembly source")->required();
  l->add_option("-o,--output", link_cmd.out, "image file (default: <input>.scfp)");
  l->add_option("--key", link_cmd.key, "128-bit master key, hex or @file");
  l->add_option("--nonce", link_cmd.nonce, "128-bit nonce, hex or @file (default: random, echoed)");
  l->add_option("--placement", link_cmd.placement, "convention or spanning-tree")->capture_default_str();
  link_cmd.params.add(l);

  RunCmd run_cmd;
  auto* r = app.add_subcommand("run", "execute an image");
  r->add_option("image", run_cmd.image, "image file")->required();
  r->add_option("--key", run_cmd.key, "128-bit master key, hex or @file");
  r->add_option("--irq", run_cmd.irq, "interrupt schedule: lines 'cycle vector_label'");
  r->add_option("--program", run_cmd.program, "program used to resolve vector labels");
  r->add_option("--trace", run_cmd.trace, "write the fetch trace here");
  r->add_option("--cycle-limit", run_cmd.cycle_limit)->capture_default_str();

  VerifyCmd verify_cmd;
  auto* v = app.add_subcommand("verify", "check an image against its program without running it");
  v->add_option("image", verify_cmd.image)->required();
  v->add_option("--program", verify_cmd.program)->required();
  v->add_option("--key", verify_cmd.key);

  AttackCmd attack_cmd;
  auto* at = app.add_subcommand("attack", "run a fault campaign");
  at->add_option("--kind", attack_cmd.kind,
                 "instruction-skip, patch-skip, bitflip, jump-tamper, wrong-key, wrong-nonce, interrupt-fault")
      ->capture_default_str();
  at->add_option("--trials", attack_cmd.trials)->capture_default_str();
  at->add_option("--seed", attack_cmd.seed)->capture_default_str();
  at->add_option("--threads", attack_cmd.threads, "0 = all cores");
  at->add_option("--program", attack_cmd.program, "assembly source (default: built-in program, or a fresh random program per skip trial)");
  at->add_option("--guess", attack_cmd.guess, "jump-tamper patch: random, correct or zero")->capture_default_str();
  at->add_flag("--follow-through", attack_cmd.follow, "jump-tamper: run each trial to the end");
  at->add_option("--key", attack_cmd.key, "device key, hex (default zero)");
  at->add_option("--out", attack_cmd.out, "write the key=value record here");
  attack_cmd.params.add(at);

  BenchCmd bench_cmd;
  auto* b = app.add_subcommand("bench", "overhead table for every .s file in a directory");
  b->add_option("dir", bench_cmd.dir)->required();
  b->add_option("--key", bench_cmd.key);
  b->add_option("--nonce", bench_cmd.nonce);
  bench_cmd.params.add(b);

  ParamsCmd params_cmd;
  auto* pc = app.add_subcommand("params", "show and validate parameters");
  pc->add_flag("--list", params_cmd.list, "list the presets");
  params_cmd.params.add(pc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kDiag;
  }

  try {
    if (*a) return asm_cmd();
    if (*l) return link_cmd();
    if (*r) return run_cmd();
    if (*v) return verify_cmd();
    if (*at) return attack_cmd();
    if (*b) return bench_cmd();
    if (*pc) return params_cmd();
  } catch (const isa::AsmError& e) {
    print_asm_errors(e, "input");
  } catch (const link::LinkError& e) {
    for (auto& m : e.messages) std::cerr << "link error: " << m << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kDiag;
}
