#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <functional>
#include <atomic>
#include <bit>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "scfp/assembler.hpp"
#include "scfp/cfg.hpp"
#include "scfp/linker.hpp"
#include "scfp/plan.hpp"
#include "scfp/progen.hpp"
#include "scfp/stats.hpp"
#include "scfp/vm.hpp"

namespace scfp::attacks {

enum class Kind : std::uint8_t { InstructionSkip, PatchWordSkip, BitFlip, JumpTamper, WrongKey, WrongNonce, InterruptFault };

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::InstructionSkip: return "instruction-skip";
    case Kind::PatchWordSkip: return "patch-skip";
    case Kind::BitFlip: return "bitflip";
    case Kind::JumpTamper: return "jump-tamper";
    case Kind::WrongKey: return "wrong-key";
    case Kind::WrongNonce: return "wrong-nonce";
    case Kind::InterruptFault: return "interrupt-fault";
  }
  return "?";
}

inline std::optional<Kind> kind_from_name(std::string_view s) {
  for (auto k : {Kind::InstructionSkip, Kind::PatchWordSkip, Kind::BitFlip, Kind::JumpTamper, Kind::WrongKey,
                 Kind::WrongNonce, Kind::InterruptFault})
    if (s == kind_name(k)) return k;
  return std::nullopt;
}

enum class PatchGuess : std::uint8_t { Random, Correct, Zero };

// Loop with a protected back edge, a protected jump over dead code and a
// straight-line tail.
inline constexpr std::string_view kDefaultProgram = R"(
    addi r1, r0, 0
    addi r2, r0, 6
    addi r3, r0, 0
loop:
    add r3, r3, r1
    xori r4, r3, 0x55
    add r5, r4, r4
    addi r1, r1, 1
    bplt r1, r2, loop
    jmpp tail
    addi r6, r0, 9
    addi r7, r0, 9
    addi r6, r6, 1
tail:
    or r8, r3, r4
    sub r9, r8, r1
    and r10, r9, r3
    sw r10, 0x4000(r0)
    addi r11, r10, 3
    halt
)";

// Main loop plus one handler that saves what it touches.
inline constexpr std::string_view kInterruptProgram = R"(
.handler isr
    addi r1, r0, 0
    addi r2, r0, 20
loop:
    add r3, r3, r1
    addi r1, r1, 1
    bplt r1, r2, loop
    sw r3, 0x4000(r0)
    halt
isr:
    sw r5, -16(sp)
    lw r5, 0x4004(r0)
    addi r5, r5, 1
    sw r5, 0x4004(r0)
    lw r5, -16(sp)
    iret
)";

struct CampaignConfig {
  Kind kind = Kind::InstructionSkip;
  std::uint64_t trials = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency
  SpongeParams params;
  Key128 key{};
  link::Placement placement = link::Placement::Convention;
  std::string program;  // empty: kDefaultProgram (kInterruptProgram for interrupt faults)
  PatchGuess guess = PatchGuess::Random;
  bool follow_through = false;  // jump tamper: run to the end after the 3-instruction check
};

struct Tally {
  std::uint64_t trials = 0;
  std::uint64_t successes = 0;
  std::uint64_t detected = 0;
  std::uint64_t halted = 0;
  std::uint64_t other = 0;
  std::uint64_t single_hits = 0;
  std::uint64_t delta_equal = 0;
  double avalanche_bits = 0;
  std::map<std::uint64_t, std::uint64_t> latency;
  std::map<std::uint64_t, std::uint64_t> prefix;

  void merge(const Tally& o) {
    trials += o.trials;
    successes += o.successes;
    detected += o.detected;
    halted += o.halted;
    other += o.other;
    single_hits += o.single_hits;
    delta_equal += o.delta_equal;
    avalanche_bits += o.avalanche_bits;
    for (auto& [k, v] : o.latency) latency[k] += v;
    for (auto& [k, v] : o.prefix) prefix[k] += v;
  }
  void status(const vm::Outcome& o) {
    if (vm::detected(o.status)) {
      ++detected;
    } else if (o.status == vm::Status::Halted) {
      ++halted;
    } else {
      ++other;
    }
  }
};

struct CampaignResult {
  Kind kind;
  std::uint64_t seed = 0;
  SpongeParams params;
  Tally tally;
  std::optional<double> expected;  // exact success probability when the model gives one

  double rate() const { return tally.trials ? static_cast<double>(tally.successes) / static_cast<double>(tally.trials) : 0; }
  stats::Interval wilson() const { return stats::wilson(tally.successes, tally.trials); }
  std::optional<stats::Interval> three_sigma() const {
    if (!expected || tally.trials == 0) return std::nullopt;
    return stats::binomial_3sigma(*expected, tally.trials);
  }
  bool within_3sigma() const {
    auto i = three_sigma();
    return i && i->contains(rate());
  }
  double mean_latency() const { return stats::mean_of(tally.latency); }
  double mean_avalanche() const {
    return tally.trials ? tally.avalanche_bits / static_cast<double>(tally.trials) : 0;
  }
};

inline void write_result(std::ostream& os, const CampaignResult& r) {
  const auto& t = r.tally;
  os << "kind=" << kind_name(r.kind) << " seed=" << r.seed << " trials=" << t.trials << " successes=" << t.successes
     << " rate=" << r.rate() << " wilson_lo=" << r.wilson().lo << " wilson_hi=" << r.wilson().hi;
  if (auto i = r.three_sigma())
    os << " expected=" << *r.expected << " sigma3_lo=" << i->lo << " sigma3_hi=" << i->hi
       << " within_3sigma=" << (r.within_3sigma() ? 1 : 0);
  os << " detected=" << t.detected << " halted=" << t.halted << " other=" << t.other;
  if (!t.latency.empty()) os << " mean_latency=" << r.mean_latency();
  if (r.kind == Kind::BitFlip) os << " delta_equal=" << t.delta_equal << " mean_avalanche_bits=" << r.mean_avalanche();
  if (r.kind == Kind::JumpTamper) os << " single_hits=" << t.single_hits;
  os << "\n";
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::mt19937_64 trial_rng(std::uint64_t seed, std::uint64_t trial) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ trial));
}

template <class Rng>
std::uint64_t pick(Rng& rng, std::uint64_t n) {
  return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng);
}

template <class Rng>
std::array<std::uint8_t, 16> random_nonce(Rng& rng) {
  std::array<std::uint8_t, 16> n{};
  for (auto& b : n) b = static_cast<std::uint8_t>(rng());
  return n;
}

// Runs trials across threads; each trial gets its own RNG, and tallies are
// merged by addition, so the result does not depend on scheduling.
template <class F>
Tally parallel_trials(std::uint64_t trials, std::uint64_t seed, unsigned threads, F&& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(1, trials)));
  std::atomic<std::uint64_t> next{0};
  std::vector<Tally> parts(threads);
  std::vector<std::thread> pool;
  std::mutex err_mu;
  std::exception_ptr err;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        constexpr std::uint64_t chunk = 64;
        for (;;) {
          const auto b = next.fetch_add(chunk);
          if (b >= trials) break;
          for (auto i = b; i < std::min(trials, b + chunk); ++i) {
            auto rng = trial_rng(seed, i);
            f(i, rng, parts[t]);
            ++parts[t].trials;
          }
        }
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!err) err = std::current_exception();
        next = trials;
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
  Tally total;
  for (auto& p : parts) total.merge(p);
  return total;
}

struct Prepared {
  isa::AssembledProgram prog;
  link::ControlFlowGraph cfg;
  link::PatchPlan plan;
  EncryptedImage plain;
  std::vector<vm::TraceEvent> genuine;  // plain run, main program only
  vm::Outcome genuine_outcome;
  std::uint64_t cycle_limit = 0;
};

inline Prepared prepare(const CampaignConfig& cfg, std::string_view source) {
  Prepared pr;
  isa::AsmOptions o;
  o.slot_words = cfg.params.slot_words();
  pr.prog = isa::assemble(source, o);
  pr.cfg = link::build_cfg(pr.prog);
  pr.plan = link::place_patches(pr.cfg, cfg.params.mode, cfg.placement);
  pr.plain = link::plain_image(pr.prog, cfg.params);
  vm::RunOptions ro;
  ro.trace = &pr.genuine;
  pr.genuine_outcome = vm::run(pr.plain, KeyMaterial{cfg.key, {}}, ro);
  if (pr.genuine_outcome.status != vm::Status::Halted) throw ConfigError("campaign program does not halt");
  pr.cycle_limit = 4 * pr.genuine_outcome.metrics.cycles + 1000;
  return pr;
}

inline KeyMaterial keys(const CampaignConfig& cfg, std::array<std::uint8_t, 16> nonce) { return {cfg.key, nonce}; }

inline std::optional<isa::Instruction> instr_at(const Prepared& pr, std::uint32_t pc) {
  auto i = pr.prog.index_of(pc);
  if (!i || pr.prog.kinds[*i] != isa::WordKind::Instr) return std::nullopt;
  return isa::decode(pr.prog.words[*i]);
}

inline bool plain_step(const isa::Instruction& in) {
  return !link::detail::is_control(in.op) && in.op != isa::Op::HALT;
}

// Skip: digests of the plain run with the same fault, per candidate step.
struct SkipCandidate {
  std::uint64_t step;
  vm::Outcome oracle;
};

inline vm::Outcome run_with_hook(const EncryptedImage& img, const KeyMaterial& km, std::uint64_t limit,
                                 const std::function<void(vm::Machine&)>& hook) {
  vm::Machine m(img, km);
  vm::RunOptions ro;
  ro.cycle_limit = limit;
  ro.before_step = hook;
  return vm::run(m, ro);
}

}  // namespace detail

// Skips one instruction (or the first word of one patch) without touching
// the sponge; success = the rest of the run matches the same fault applied
// to the plain layout.
inline CampaignResult campaign_instruction_skip(const CampaignConfig& cfg) {
  const bool patch_skip = cfg.kind == Kind::PatchWordSkip;
  const bool duplex = cfg.params.mode == SpongeMode::DuplexLike;
  const unsigned k = cfg.params.slot_words();

  // Steps of the genuine run where the fault applies.
  auto candidates = [&](const detail::Prepared& pr) {
    std::set<std::uint32_t> patched_slots;
    for (std::size_t i = 0; i < pr.cfg.edges.size(); ++i)
      if (pr.plan.patched[i] && pr.cfg.edges[i].slot) patched_slots.insert(*pr.cfg.edges[i].slot);
    std::vector<std::uint64_t> out;
    for (std::size_t s = 0; s + 1 < pr.genuine.size(); ++s) {
      const auto& ev = pr.genuine[s];
      auto in = detail::instr_at(pr, ev.pc);
      if (!in) continue;
      if (!patch_skip) {
        auto nx = pr.prog.index_of(ev.pc + 4);
        if (detail::plain_step(*in) && nx && pr.prog.kinds[*nx] == isa::WordKind::Instr) out.push_back(s);
        continue;
      }
      if (ev.patch_words == 0 || in->op == isa::Op::CALLRP || in->op == isa::Op::XRET) continue;
      const std::uint32_t slot_addr = in->op == isa::Op::RET ? pr.genuine[s + 1].pc - 4 * k : ev.pc + 4;
      auto si = pr.prog.index_of(slot_addr);
      if (si && patched_slots.count(static_cast<std::uint32_t>(*si))) out.push_back(s);
    }
    return out;
  };
  auto oracle = [&](const detail::Prepared& pr, std::uint64_t s) {
    if (patch_skip) return pr.genuine_outcome;
    return detail::run_with_hook(pr.plain, {cfg.key, {}}, pr.cycle_limit, [s, done = false](vm::Machine& m) mutable {
      if (!done && m.metrics().fetches == s) {
        m.skip_instruction();
        done = true;
      }
    });
  };

  // A fixed program gives fixed backward-step functions, so its success rate
  // is a property of that program. Without one, every trial draws a fresh
  // random program: a site's capacities take few values across nonces, so a
  // finite corpus would add its own spread on top of the binomial one.
  struct Draw {
    std::shared_ptr<const detail::Prepared> pr;
    detail::SkipCandidate cand;
  };
  std::shared_ptr<const detail::Prepared> fixed;
  std::vector<detail::SkipCandidate> fixed_cands;
  if (!cfg.program.empty()) {
    fixed = std::make_shared<const detail::Prepared>(detail::prepare(cfg, cfg.program));
    for (auto s : candidates(*fixed))
      if (auto o = oracle(*fixed, s); o.status == vm::Status::Halted) fixed_cands.push_back({s, o});
    if (fixed_cands.empty()) throw ConfigError("program has no candidate fault locations");
  }
  progen::GenOptions go;
  go.max_instructions = 48;
  go.single_call_site = duplex;
  auto draw = [&](std::mt19937_64& rng) -> Draw {
    if (fixed) return {fixed, fixed_cands[detail::pick(rng, fixed_cands.size())]};
    for (;;) {
      auto pr = std::make_shared<const detail::Prepared>(detail::prepare(cfg, progen::generate_program(rng, go)));
      auto cands = candidates(*pr);
      while (!cands.empty()) {
        const auto i = detail::pick(rng, cands.size());
        if (auto o = oracle(*pr, cands[i]); o.status == vm::Status::Halted) return {pr, {cands[i], o}};
        cands.erase(cands.begin() + static_cast<std::ptrdiff_t>(i));
      }
    }
  };

  CampaignResult res{cfg.kind, cfg.seed, cfg.params, {}, std::ldexp(1.0, -static_cast<int>(std::min(32u, cfg.params.patch_bits())))};
  if (!patch_skip) res.expected = std::ldexp(1.0, -static_cast<int>(duplex ? cfg.params.width() : cfg.params.capacity_x));
  if (fixed) res.expected.reset();
  res.tally = detail::parallel_trials(cfg.trials, cfg.seed, cfg.threads, [&](std::uint64_t, std::mt19937_64& rng, Tally& t) {
    const auto d = draw(rng);
    const auto& pr = *d.pr;
    const auto& c = d.cand;
    const KeyMaterial km = detail::keys(cfg, detail::random_nonce(rng));
    const auto lr = link::encrypt_image(pr.prog, pr.cfg, pr.plan, km, cfg.params);
    auto o = detail::run_with_hook(lr.image, km, pr.cycle_limit, [&, done = false](vm::Machine& m) mutable {
      if (done || m.metrics().fetches != c.step) return;
      done = true;
      if (patch_skip) m.arm_patch_word_skip();
      else m.skip_instruction();
    });
    t.status(o);
    if (o.status == vm::Status::Halted && o.trace_digest == c.oracle.trace_digest && o.arch_digest == c.oracle.arch_digest)
      ++t.successes;
  });
  return res;
}

// Flips one ciphertext bit of the instruction about to be fetched.
inline CampaignResult campaign_bitflip(const CampaignConfig& cfg) {
  const auto pr = detail::prepare(cfg, cfg.program.empty() ? kDefaultProgram : std::string_view(cfg.program));
  const bool duplex = cfg.params.mode == SpongeMode::DuplexLike;
  CampaignResult res{cfg.kind, cfg.seed, cfg.params, {}, std::nullopt};
  res.tally = detail::parallel_trials(cfg.trials, cfg.seed, cfg.threads, [&](std::uint64_t, std::mt19937_64& rng, Tally& t) {
    const std::uint64_t s = detail::pick(rng, pr.genuine.size());
    const unsigned bit = static_cast<unsigned>(detail::pick(rng, 32));
    const KeyMaterial km = detail::keys(cfg, detail::random_nonce(rng));
    const auto lr = link::encrypt_image(pr.prog, pr.cfg, pr.plan, km, cfg.params);
    std::vector<vm::TraceEvent> trace;
    vm::Machine m(lr.image, km);
    vm::RunOptions ro;
    ro.cycle_limit = pr.cycle_limit;
    ro.trace = &trace;
    ro.before_step = [&, done = false](vm::Machine& mm) mutable {
      if (!done && mm.metrics().fetches == s) {
        mm.flip_code_bit(mm.pc(), bit);
        done = true;
      }
    };
    const auto o = vm::run(m, ro);
    t.status(o);
    if (trace.size() > s) {
      const std::uint32_t delta = trace[s].word ^ pr.genuine[s].word;
      if (duplex && delta == (1u << bit)) ++t.delta_equal;
      t.avalanche_bits += std::popcount(delta);
    }
    if (o.detection_fetch) ++t.latency[*o.detection_fetch - s];
    if (o.status == vm::Status::Halted && o.trace_digest == pr.genuine_outcome.trace_digest &&
        o.arch_digest == pr.genuine_outcome.arch_digest)
      ++t.successes;
  });
  return res;
}

// Redirects a taken protected branch to another instruction with a chosen
// patch; success = the target's first three instructions decrypt genuinely.
inline CampaignResult campaign_jump_tamper(const CampaignConfig& cfg) {
  const auto pr = detail::prepare(cfg, cfg.program.empty() ? kDefaultProgram : std::string_view(cfg.program));
  std::mt19937_64 setup(detail::splitmix64(cfg.seed));
  const KeyMaterial km = detail::keys(cfg, detail::random_nonce(setup));
  const auto lr = link::encrypt_image(pr.prog, pr.cfg, pr.plan, km, cfg.params);
  const unsigned k = cfg.params.slot_words();

  struct Site {
    vm::Machine snapshot;
    std::uint32_t branch;  // word index
    std::uint32_t genuine_target;
  };
  std::vector<Site> sites;
  for (std::size_t s = 0; s + 1 < pr.genuine.size(); ++s) {
    auto in = detail::instr_at(pr, pr.genuine[s].pc);
    if (!in) continue;
    const bool taken_bp = isa::is_protected(in->op) && isa::is_cond_branch(in->op) && pr.genuine[s + 1].pc != pr.genuine[s].pc + 4 + 4 * k;
    if (!taken_bp && in->op != isa::Op::JMPP) continue;
    vm::Machine m(lr.image, km);
    while (m.metrics().fetches < s && m.status() == vm::Status::Running) m.step();
    sites.push_back({m, static_cast<std::uint32_t>(*pr.prog.index_of(pr.genuine[s].pc)), pr.genuine[s + 1].pc});
  }
  std::vector<std::uint32_t> targets;
  for (std::uint32_t i = 0; i + 2 < pr.prog.words.size(); ++i) {
    bool ok = true;
    for (std::uint32_t j = 0; j < 3; ++j) ok &= pr.cfg.is_instr(i + j);
    if (!ok) continue;
    ok &= detail::plain_step(*pr.cfg.instr[i]) && detail::plain_step(*pr.cfg.instr[i + 1]);
    if (ok) targets.push_back(i);
  }
  if (sites.empty() || targets.size() < 2) throw ConfigError("program has no tamperable branch or redirect target");

  CampaignResult res{cfg.kind, cfg.seed, cfg.params, {}, std::nullopt};
  if (cfg.guess == PatchGuess::Random) res.expected = std::ldexp(1.0, -static_cast<int>(cfg.params.patch_bits()));
  if (cfg.guess == PatchGuess::Correct) res.expected = 1.0;
  res.tally = detail::parallel_trials(cfg.trials, cfg.seed, cfg.threads, [&](std::uint64_t, std::mt19937_64& rng, Tally& t) {
    const auto& site = sites[detail::pick(rng, sites.size())];
    std::uint32_t tgt;
    do tgt = targets[detail::pick(rng, targets.size())];
    while (pr.prog.addr_of(tgt) == site.genuine_target);
    StateBits guess(cfg.params.patch_bits());
    if (cfg.guess == PatchGuess::Random) guess = StateBits::random(cfg.params.patch_bits(), rng);
    else if (cfg.guess == PatchGuess::Correct) guess = lr.state_out[site.branch] ^ lr.state_in[tgt];
    vm::Machine m = site.snapshot;
    std::vector<vm::TraceEvent> trace;
    m.set_trace(&trace);
    m.set_cycle_limit(pr.cycle_limit);
    m.arm_jump_tamper(pr.prog.addr_of(tgt), guess);
    for (int i = 0; i < 4 && m.status() == vm::Status::Running; ++i) m.step();
    bool genuine = trace.size() == 4;
    for (std::uint32_t j = 0; genuine && j < 3; ++j)
      genuine = trace[1 + j].valid && trace[1 + j].pc == pr.prog.addr_of(tgt + j) && trace[1 + j].word == pr.prog.words[tgt + j];
    if (trace.size() >= 2 && trace[1].valid && trace[1].word == pr.prog.words[tgt]) ++t.single_hits;
    if (genuine) ++t.successes;
    m.set_trace(nullptr);
    if (cfg.follow_through) vm::run(m, {pr.cycle_limit, {}, {}, nullptr});
    t.status(m.outcome());
  });
  return res;
}

// Runs a fixed image under a perturbed key (or image nonce) and records how
// many leading fetches still match the genuine run.
inline CampaignResult campaign_wrong_key(const CampaignConfig& cfg) {
  const auto pr = detail::prepare(cfg, cfg.program.empty() ? kDefaultProgram : std::string_view(cfg.program));
  std::mt19937_64 setup(detail::splitmix64(cfg.seed));
  const KeyMaterial km = detail::keys(cfg, detail::random_nonce(setup));
  const auto lr = link::encrypt_image(pr.prog, pr.cfg, pr.plan, km, cfg.params);
  // Successes are state collisions of the perturbed derivation; with 128
  // possible flips there is no binomial model.
  CampaignResult res{cfg.kind, cfg.seed, cfg.params, {}, std::nullopt};
  res.tally = detail::parallel_trials(cfg.trials, cfg.seed, cfg.threads, [&](std::uint64_t, std::mt19937_64& rng, Tally& t) {
    KeyMaterial bad = km;
    EncryptedImage img = lr.image;
    const auto bit = detail::pick(rng, 128);
    if (cfg.kind == Kind::WrongNonce) img.nonce[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    else bad.master_key[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    std::vector<vm::TraceEvent> trace;
    vm::RunOptions ro;
    ro.cycle_limit = pr.cycle_limit;
    ro.trace = &trace;
    const auto o = vm::run(img, bad, ro);
    t.status(o);
    std::uint64_t n = 0;
    while (n < trace.size() && n < pr.genuine.size() && trace[n].valid && trace[n].pc == pr.genuine[n].pc &&
           trace[n].word == pr.genuine[n].word)
      ++n;
    ++t.prefix[n];
    if (n > 2) ++t.successes;
  });
  return res;
}

// Flips one bit of a handler instruction, interrupts at a random cycle;
// success = the run is detected.
inline CampaignResult campaign_interrupt_fault(const CampaignConfig& cfg) {
  const auto pr = detail::prepare(cfg, cfg.program.empty() ? kInterruptProgram : std::string_view(cfg.program));
  if (pr.prog.handlers.empty()) throw ConfigError("interrupt campaign needs a program with a handler");
  std::vector<std::uint32_t> handler_words;
  {
    std::set<std::uint32_t> seen{pr.cfg.handler_nodes[0]};
    std::vector<std::uint32_t> stack{pr.cfg.handler_nodes[0]};
    while (!stack.empty()) {
      const auto n = stack.back();
      stack.pop_back();
      handler_words.push_back(n);
      for (auto ei : pr.cfg.out[n]) {
        const auto to = pr.cfg.edges[ei].to;
        if (!pr.cfg.is_virtual(to) && seen.insert(to).second) stack.push_back(to);
      }
    }
  }
  const std::uint32_t vector = pr.prog.handlers[0];
  const auto main_cycles = pr.genuine_outcome.metrics.cycles;
  CampaignResult res{cfg.kind, cfg.seed, cfg.params, {}, std::nullopt};
  res.tally = detail::parallel_trials(cfg.trials, cfg.seed, cfg.threads, [&](std::uint64_t, std::mt19937_64& rng, Tally& t) {
    const KeyMaterial km = detail::keys(cfg, detail::random_nonce(rng));
    auto lr = link::encrypt_image(pr.prog, pr.cfg, pr.plan, km, cfg.params);
    const auto w = handler_words[detail::pick(rng, handler_words.size())];
    lr.image.code[w] ^= 1u << detail::pick(rng, 32);
    vm::RunOptions ro;
    ro.cycle_limit = pr.cycle_limit + 1000;
    ro.schedule.push_back({1 + detail::pick(rng, main_cycles - 1), vector});
    const auto o = vm::run(lr.image, km, ro);
    t.status(o);
    if (vm::detected(o.status)) ++t.successes;
  });
  return res;
}

inline CampaignResult run_campaign(const CampaignConfig& cfg) {
  switch (cfg.kind) {
    case Kind::InstructionSkip: case Kind::PatchWordSkip: return campaign_instruction_skip(cfg);
    case Kind::BitFlip: return campaign_bitflip(cfg);
    case Kind::JumpTamper: return campaign_jump_tamper(cfg);
    case Kind::WrongKey: case Kind::WrongNonce: return campaign_wrong_key(cfg);
    case Kind::InterruptFault: return campaign_interrupt_fault(cfg);
  }
  throw ConfigError("unknown campaign");
}

}  // namespace scfp::attacks
