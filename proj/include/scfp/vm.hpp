#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "scfp/image.hpp"
#include "scfp/isa.hpp"
#include "scfp/sponge.hpp"

namespace scfp::vm {

using isa::Op;

inline constexpr std::uint32_t kMemoryBytes = 0x10000;

enum class Status : std::uint8_t { Running, Halted, InvalidInstr, RedundancyFail, CycleLimit };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::Running: return "RUNNING";
    case Status::Halted: return "HALTED";
    case Status::InvalidInstr: return "INVALID_INSTR";
    case Status::RedundancyFail: return "REDUNDANCY_FAIL";
    case Status::CycleLimit: return "CYCLE_LIMIT";
  }
  return "?";
}

inline bool detected(Status s) { return s == Status::InvalidInstr || s == Status::RedundancyFail; }

struct Metrics {
  std::uint64_t instructions = 0;  // decoded and executed
  std::uint64_t fetches = 0;       // instruction fetches, including the detecting one
  std::uint64_t patch_words_fetched = 0;
  std::uint64_t cycles = 0;
  std::uint64_t taken_branches = 0;  // taken conditional branches and jumps
  std::uint64_t calls = 0;
};

struct TraceEvent {
  std::uint64_t cycle;
  std::uint32_t pc;
  std::uint32_t word;  // decrypted plaintext
  bool valid;
  unsigned patch_words;
  bool in_handler;
};

inline void write_trace(std::ostream& os, const std::vector<TraceEvent>& t) {
  for (const auto& e : t) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%llu 0x%04x 0x%08x %d %u\n", static_cast<unsigned long long>(e.cycle), e.pc, e.word,
                  e.valid ? 1 : 0, e.patch_words);
    os << buf;
  }
}

struct Outcome {
  Status status = Status::Running;
  std::optional<std::uint64_t> detection_cycle;
  std::optional<std::uint64_t> detection_fetch;
  std::uint64_t trace_digest = 0;  // main-program (pc, plaintext) sequence
  std::uint64_t arch_digest = 0;   // registers and the main-program store sequence
  Metrics metrics;
};

inline void write_outcome(std::ostream& os, const Outcome& o) {
  os << "status=" << status_name(o.status) << "\n";
  if (o.detection_cycle) os << "detection_cycle=" << *o.detection_cycle << "\n";
  os << "instructions=" << o.metrics.instructions << "\n";
  os << "patch_words_fetched=" << o.metrics.patch_words_fetched << "\n";
  os << "cycles=" << o.metrics.cycles << "\n";
  os << "taken_branches=" << o.metrics.taken_branches << "\n";
  os << "calls=" << o.metrics.calls << "\n";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(o.trace_digest));
  os << "trace_digest=" << buf << "\n";
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(o.arch_digest));
  os << "arch_digest=" << buf << "\n";
}

namespace detail {
inline void fnv(std::uint64_t& h, std::uint32_t v) {
  for (unsigned i = 0; i < 4; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= 0x100000001b3ull;
  }
}
inline constexpr std::uint64_t kFnvBasis = 0xcbf29ce484222325ull;
}  // namespace detail

struct SavedContext {
  std::uint32_t pc;
  SpongeState sponge;
  std::size_t handler;
};

class Machine {
public:
  // The device supplies the key; the nonce comes from the image header.
  Machine(const EncryptedImage& img, const KeyMaterial& km)
      : img_(img), p_(bind_key(img.params, km)), km_{km.master_key, img.nonce} {
    mem_.assign(kMemoryBytes, 0);
    if (4 * img.code.size() > kMemoryBytes) throw ConfigError("code section exceeds memory");
    for (std::size_t i = 0; i < img.code.size(); ++i) store32(static_cast<std::uint32_t>(4 * i), img.code[i]);
    if (!img.data.empty() && (img.data_base < 4 * img.code.size() || img.data_base + img.data.size() > kMemoryBytes))
      throw ConfigError("data section overlaps code or exceeds memory");
    std::copy(img.data.begin(), img.data.end(), mem_.begin() + img.data_base);
    code_end_ = static_cast<std::uint32_t>(4 * img.code.size());
    k_ = p_.slot_words();
    regs_.fill(0);
    regs_[isa::kStackReg] = kMemoryBytes - 4;
    pc_ = img.entry_addr;
    if (protected_()) {
      require_valid(p_);
      sponge_ = apply_patch(derive_initial_state(p_, km_, "start", img.entry_addr),
                            PatchValue{PatchScope::FullState, img.entry_patch});
    } else {
      sponge_ = SpongeState::zero(p_);
    }
  }

  bool protected_() const { return img_.protected_image(); }
  Status status() const { return status_; }
  std::uint32_t pc() const { return pc_; }
  std::uint32_t reg(unsigned r) const { return regs_.at(r); }
  const Metrics& metrics() const { return m_; }
  bool in_handler() const { return ctx_.has_value(); }
  unsigned slot_words() const { return k_; }
  const SpongeParams& params() const { return p_; }
  std::uint32_t load32(std::uint32_t a) const {
    a &= kMemoryBytes - 4;
    return std::uint32_t{mem_[a]} | std::uint32_t{mem_[a + 1]} << 8 | std::uint32_t{mem_[a + 2]} << 16 |
           std::uint32_t{mem_[a + 3]} << 24;
  }

  // ---- harness hooks (not reachable from simulated software) ----
  const SpongeState& sponge() const { return sponge_; }
  void set_sponge(const SpongeState& s) { sponge_ = s; }
  void set_pc(std::uint32_t pc) { pc_ = pc & (kMemoryBytes - 4); }
  void flip_code_bit(std::uint32_t addr, unsigned bit) {
    addr &= kMemoryBytes - 4;
    store32(addr, load32(addr) ^ (1u << (bit % 32)));
  }
  void flip_ext_bit(std::uint32_t addr, unsigned bit) {
    const auto i = (addr & (kMemoryBytes - 4)) / 4;
    if (i < img_.ext.size() && p_.ext_bits()) img_.ext[i] ^= 1u << (bit % p_.ext_bits());
  }
  // Advance past the instruction at pc without fetching or decrypting it.
  void skip_instruction() {
    pc_ = (pc_ + 4) & (kMemoryBytes - 4);
    ++m_.cycles;
  }
  // The next absorbed slot group loses its first word.
  void arm_patch_word_skip() { skip_patch_word_ = true; }
  // The next patch-absorbing branch goes to target with this patch instead of its slot.
  void arm_jump_tamper(std::uint32_t target, StateBits patch) { tamper_ = Tamper{target, std::move(patch)}; }
  void set_trace(std::vector<TraceEvent>* sink) { trace_ = sink; }
  void set_cycle_limit(std::uint64_t n) { limit_ = n; }

  void interrupt_enter(std::uint32_t vector) {
    if (status_ != Status::Running) return;
    if (ctx_) throw std::logic_error("nested interrupt rejected: context bank occupied");
    std::size_t h = 0;
    while (h < img_.handlers.size() && img_.handlers[h].vector != vector) ++h;
    if (h == img_.handlers.size()) throw std::invalid_argument("no handler registered for vector " + std::to_string(vector));
    ctx_ = SavedContext{pc_, sponge_, h};
    if (protected_())
      sponge_ = apply_patch(derive_initial_state(p_, km_, "entry", vector),
                            PatchValue{PatchScope::FullState, img_.handlers[h].entry_patch});
    pc_ = vector;
  }

  void step() {
    if (status_ != Status::Running) return;
    if (m_.cycles >= limit_) {
      status_ = Status::CycleLimit;
      return;
    }
    const std::uint32_t a = pc_;
    handler_step_ = ctx_.has_value();
    const std::uint32_t cword = load32(a);
    const std::uint32_t ext = a < code_end_ && !img_.ext.empty() ? img_.ext[a / 4] : 0;
    ++m_.cycles;
    ++m_.fetches;
    std::uint32_t plain = cword, red = 0;
    if (protected_()) {
      if (p_.mode == SpongeMode::ApeLike) {
        auto r = ape_decrypt_step(p_, sponge_.capacity(), {cword, ext});
        plain = r.plain;
        red = r.redundancy;
        sponge_ = r.state;
      } else {
        auto r = duplex_decrypt_step(p_, sponge_, {cword, ext});
        plain = r.plain;
        red = r.redundancy;
        sponge_ = r.state;
      }
    }
    patch_words_step_ = 0;
    if (!check_redundancy(red)) {
      record(a, plain, false);
      detect(Status::RedundancyFail);
      return;
    }
    const auto in = isa::decode(plain);
    if (!in || (in->op == Op::IRET && !ctx_)) {
      record(a, plain, false);
      detect(Status::InvalidInstr);
      return;
    }
    execute(a, *in);
    ++m_.instructions;
    m_.cycles += patch_words_step_;
    record(a, plain, true);
    regs_[0] = 0;
  }

  Outcome outcome() const {
    Outcome o;
    o.status = status_;
    o.detection_cycle = detection_cycle_;
    o.detection_fetch = detection_fetch_;
    o.trace_digest = trace_digest_;
    o.arch_digest = arch_digest();
    o.metrics = m_;
    return o;
  }

  std::uint64_t arch_digest() const {
    std::uint64_t h = detail::kFnvBasis;
    for (unsigned r = 0; r < 16; ++r) detail::fnv(h, regs_[r]);
    detail::fnv(h, static_cast<std::uint32_t>(store_digest_));
    detail::fnv(h, static_cast<std::uint32_t>(store_digest_ >> 32));
    return h;
  }

private:
  struct Tamper {
    std::uint32_t target;
    StateBits patch;
  };

  void store32(std::uint32_t a, std::uint32_t v) {
    a &= kMemoryBytes - 4;
    for (unsigned i = 0; i < 4; ++i) mem_[a + i] = static_cast<std::uint8_t>(v >> (8 * i));
  }

  void detect(Status s) {
    status_ = s;
    detection_cycle_ = m_.cycles;
    detection_fetch_ = m_.fetches;
  }

  void record(std::uint32_t pc, std::uint32_t plain, bool valid) {
    if (!handler_step_) {
      detail::fnv(trace_digest_, pc);
      detail::fnv(trace_digest_, plain);
    }
    if (trace_) trace_->push_back({m_.cycles, pc, plain, valid, patch_words_step_, handler_step_});
  }

  // XOR the k-word slot group at addr into the state (capacity for APE).
  void absorb(std::uint32_t addr) {
    m_.patch_words_fetched += k_;
    patch_words_step_ += k_;
    if (!protected_()) return;
    const unsigned bits = p_.patch_bits();
    StateBits patch(bits);
    for (unsigned j = 0, off = 0; off < bits; ++j, off += 32) {
      if (j == 0 && skip_patch_word_) {
        skip_patch_word_ = false;
        continue;
      }
      const unsigned len = std::min(32u, bits - off);
      const std::uint32_t w = load32(addr + 4 * j);
      patch.put(off, len, len == 32 ? w : w & ((1u << len) - 1));
    }
    sponge_ = apply_patch(sponge_, PatchValue{scope_for(p_.mode), patch});
  }

  // Protected transfer: absorb the slot at A+4 then go to target, unless tampered.
  void patched_jump(std::uint32_t slot, std::uint32_t target) {
    if (tamper_) {
      m_.patch_words_fetched += k_;
      patch_words_step_ += k_;
      if (protected_()) sponge_ = apply_patch(sponge_, PatchValue{scope_for(p_.mode), tamper_->patch});
      pc_ = tamper_->target & (kMemoryBytes - 4);
      tamper_.reset();
      return;
    }
    absorb(slot);
    pc_ = target;
  }

  void execute(std::uint32_t a, const isa::Instruction& in) {
    auto& R = regs_;
    const std::uint32_t x = R[in.rs1], y = R[in.rs2];
    const std::uint32_t mask = kMemoryBytes - 4;
    const std::uint32_t next = (a + 4) & mask;
    const std::uint32_t rel = static_cast<std::uint32_t>(static_cast<std::int64_t>(a) + in.imm) & mask;
    const std::uint32_t w = 4 * k_;
    auto cond = [&](Op op) {
      switch (op) {
        case Op::BEQ: case Op::BPEQ: return x == y;
        case Op::BNE: case Op::BPNE: return x != y;
        case Op::BLT: case Op::BPLT: return static_cast<std::int32_t>(x) < static_cast<std::int32_t>(y);
        default: return static_cast<std::int32_t>(x) >= static_cast<std::int32_t>(y);
      }
    };
    pc_ = next;
    switch (in.op) {
      case Op::NOP: break;
      case Op::ADD: R[in.rd] = x + y; break;
      case Op::SUB: R[in.rd] = x - y; break;
      case Op::AND: R[in.rd] = x & y; break;
      case Op::OR: R[in.rd] = x | y; break;
      case Op::XOR: R[in.rd] = x ^ y; break;
      case Op::SLL: R[in.rd] = x << (y & 31); break;
      case Op::SRL: R[in.rd] = x >> (y & 31); break;
      case Op::SRA: R[in.rd] = static_cast<std::uint32_t>(static_cast<std::int32_t>(x) >> (y & 31)); break;
      case Op::SLT: R[in.rd] = static_cast<std::int32_t>(x) < static_cast<std::int32_t>(y); break;
      case Op::SLTU: R[in.rd] = x < y; break;
      case Op::ADDI: R[in.rd] = x + static_cast<std::uint32_t>(in.imm); break;
      case Op::ANDI: R[in.rd] = x & static_cast<std::uint32_t>(in.imm); break;
      case Op::ORI: R[in.rd] = x | static_cast<std::uint32_t>(in.imm); break;
      case Op::XORI: R[in.rd] = x ^ static_cast<std::uint32_t>(in.imm); break;
      case Op::SLTI: R[in.rd] = static_cast<std::int32_t>(x) < in.imm; break;
      case Op::LUI: R[in.rd] = static_cast<std::uint32_t>(in.imm) << 16; break;
      case Op::LW: R[in.rd] = load32(x + static_cast<std::uint32_t>(in.imm)); break;
      case Op::SW: {
        const std::uint32_t ea = (x + static_cast<std::uint32_t>(in.imm)) & mask;
        store32(ea, y);
        if (!ctx_) {
          detail::fnv(store_digest_, ea);
          detail::fnv(store_digest_, y);
        }
        break;
      }
      case Op::BEQ: case Op::BNE: case Op::BLT: case Op::BGE:
        if (cond(in.op)) {
          pc_ = rel;
          ++m_.taken_branches;
        }
        break;
      case Op::JMP: pc_ = rel; ++m_.taken_branches; break;
      case Op::CALL: R[isa::kLinkReg] = next; pc_ = rel; ++m_.calls; break;
      case Op::CALLR: R[isa::kLinkReg] = next; pc_ = x & mask; ++m_.calls; break;
      case Op::RETU: pc_ = R[isa::kLinkReg] & mask; break;
      case Op::BPEQ: case Op::BPNE: case Op::BPLT: case Op::BPGE:
        if (cond(in.op)) {
          ++m_.taken_branches;
          patched_jump(next, rel);
        } else {
          pc_ = (next + w) & mask;
        }
        break;
      case Op::JMPP: ++m_.taken_branches; patched_jump(next, rel); break;
      case Op::CALLP: R[isa::kLinkReg] = next; pc_ = rel; ++m_.calls; break;
      case Op::RET: {
        const std::uint32_t ra = R[isa::kLinkReg] & mask;
        absorb(ra);
        pc_ = (ra + w) & mask;
        break;
      }
      case Op::CALLRP: {
        const std::uint32_t t = x & mask;
        ++m_.calls;
        absorb(next);
        R[isa::kLinkReg] = (next + w) & mask;
        absorb(t);
        pc_ = (t + w) & mask;
        break;
      }
      case Op::XRET: {
        absorb(next);
        const std::uint32_t ra = R[isa::kLinkReg] & mask;
        absorb(ra);
        pc_ = (ra + w) & mask;
        break;
      }
      case Op::HALT: pc_ = a; status_ = Status::Halted; break;
      case Op::IRET: {
        absorb(next);
        const auto& ctx = *ctx_;
        if (protected_()) {
          const auto e = derive_initial_state(p_, km_, "exit", img_.handlers[ctx.handler].vector);
          sponge_ = combine_interrupt_exit(sponge_, e, ctx.sponge);
        } else {
          sponge_ = ctx.sponge;
        }
        pc_ = ctx.pc;
        ctx_.reset();
        break;
      }
      default: break;
    }
  }

  EncryptedImage img_;
  SpongeParams p_;
  KeyMaterial km_;
  std::vector<std::uint8_t> mem_;
  std::uint32_t code_end_ = 0;
  unsigned k_ = 1;
  std::array<std::uint32_t, 16> regs_{};
  std::uint32_t pc_ = 0;
  SpongeState sponge_;
  std::optional<SavedContext> ctx_;
  Status status_ = Status::Running;
  Metrics m_;
  std::optional<std::uint64_t> detection_cycle_, detection_fetch_;
  std::uint64_t trace_digest_ = detail::kFnvBasis;
  std::uint64_t store_digest_ = detail::kFnvBasis;
  unsigned patch_words_step_ = 0;
  bool handler_step_ = false;
  bool skip_patch_word_ = false;
  std::optional<Tamper> tamper_;
  std::vector<TraceEvent>* trace_ = nullptr;
  std::uint64_t limit_ = 10'000'000;
};

struct InterruptEvent {
  std::uint64_t cycle;
  std::uint32_t vector;
};

struct RunOptions {
  std::uint64_t cycle_limit = 10'000'000;
  std::vector<InterruptEvent> schedule;
  std::function<void(Machine&)> before_step;
  std::vector<TraceEvent>* trace = nullptr;
};

// Interrupts fire at the first boundary at or after their cycle with the bank free.
inline Outcome run(Machine& m, const RunOptions& opt = {}) {
  for (std::size_t i = 1; i < opt.schedule.size(); ++i)
    if (opt.schedule[i].cycle <= opt.schedule[i - 1].cycle) throw std::invalid_argument("interrupt schedule not strictly increasing");
  m.set_cycle_limit(opt.cycle_limit);
  if (opt.trace) m.set_trace(opt.trace);
  std::size_t next = 0;
  while (m.status() == Status::Running) {
    if (next < opt.schedule.size() && m.metrics().cycles >= opt.schedule[next].cycle && !m.in_handler()) {
      m.interrupt_enter(opt.schedule[next].vector);
      ++next;
    }
    if (opt.before_step) opt.before_step(m);
    m.step();
  }
  m.set_trace(nullptr);
  return m.outcome();
}

inline Outcome run(const EncryptedImage& img, const KeyMaterial& km, const RunOptions& opt = {}) {
  Machine m(img, km);
  return run(m, opt);
}

}  // namespace scfp::vm
