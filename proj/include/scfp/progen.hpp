#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace scfp::progen {

// r1..r8 data, r9 scratch, r10/r11 loop counters, r12 indirect target.
struct GenOptions {
  unsigned max_instructions = 120;
  unsigned max_loop_iters = 4;
  unsigned direct_functions = 2;
  unsigned indirect_functions = 3;
  unsigned indirect_sites = 2;
  unsigned min_targets = 2;
  unsigned max_targets = 3;
  // Each direct function gets exactly one call site (needed by duplex
  // layouts, where a function entry cannot merge two unpatched edges).
  bool single_call_site = false;
};

namespace detail {

template <class Rng>
class Generator {
public:
  Generator(Rng& rng, const GenOptions& o) : rng_(rng), o_(o) {}

  std::string run() {
    const unsigned nd = o_.direct_functions, ni = o_.indirect_functions;
    for (unsigned i = 0; i < nd; ++i) direct_.push_back("fd" + std::to_string(i));
    for (unsigned i = 0; i < ni; ++i) indirect_.push_back("fi" + std::to_string(i));
    sites_left_ = ni >= std::max(2u, o_.min_targets) ? o_.indirect_sites : 0;
    sites_total_ = sites_left_;

    const unsigned fn_budget = 3 + o_.max_instructions / 24;
    const unsigned reserve = (nd + ni) * (fn_budget + 2) + 8;
    // random lead-in so function addresses (and the words loading them) vary
    const unsigned lead = pick(32);
    budget_ = o_.max_instructions > reserve + lead + 12 ? o_.max_instructions - reserve : 20 + lead;

    for (unsigned r = 1; r <= 8; ++r) emit("addi r" + std::to_string(r) + ", r0, " + std::to_string(imm(-50, 50)));
    straight(lead);
    body(0, true);
    // Calls not placed at random are placed here so every function is reachable.
    for (unsigned i = 0; i < nd; ++i)
      if (!called_[i]) call_direct(i);
    while (sites_left_ || (sites_total_ && covered_.size() < indirect_.size())) indirect_call();
    // scattered result addresses keep these words from repeating across programs
    for (unsigned r = 1; r <= 8; ++r) emit("sw r" + std::to_string(r) + ", " + std::to_string(0x4440 + 4 * pick(512)) + "(r0)");
    emit("halt");

    for (auto& f : direct_) function(f, "ret", fn_budget);
    for (auto& f : indirect_) function(f, "xret", fn_budget);

    std::ostringstream os;
    for (auto& t : targets_) os << t << "\n";
    for (auto& l : lines_) os << l << "\n";
    return os.str();
  }

private:
  Rng& rng_;
  GenOptions o_;
  std::vector<std::string> lines_, targets_, direct_, indirect_;
  std::vector<bool> called_ = std::vector<bool>(64, false);
  unsigned sites_left_ = 0;
  unsigned sites_total_ = 0;
  std::set<std::string> covered_;
  unsigned budget_ = 0;
  unsigned used_ = 0;
  unsigned labels_ = 0;

  int imm(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  unsigned pick(unsigned n) { return static_cast<unsigned>(imm(0, static_cast<int>(n) - 1)); }
  std::string reg() { return "r" + std::to_string(1 + pick(8)); }
  std::string label(const char* stem) { return stem + std::to_string(labels_++); }
  void emit(const std::string& s) {
    lines_.push_back("    " + s);
    ++used_;
  }
  void place(const std::string& l) { lines_.push_back(l + ":"); }
  bool room(unsigned n) const { return used_ + n <= budget_; }

  void alu() {
    static const char* rr[] = {"add", "sub", "and", "or", "xor", "sll", "srl", "sra", "slt", "sltu"};
    static const char* ri[] = {"addi", "andi", "ori", "xori", "slti"};
    switch (pick(4)) {
      case 0: emit(std::string(rr[pick(10)]) + " " + reg() + ", " + reg() + ", " + reg()); break;
      case 1: emit(std::string(ri[pick(5)]) + " " + reg() + ", " + reg() + ", " + std::to_string(imm(0, 255))); break;
      case 2: emit("sw " + reg() + ", " + std::to_string(0x4040 + 4 * pick(256)) + "(r0)"); break;
      default: emit("lw " + reg() + ", " + std::to_string(0x4040 + 4 * pick(256)) + "(r0)"); break;
    }
  }

  std::string cond_branch(const std::string& target) {
    static const char* bp[] = {"bpeq", "bpne", "bplt", "bpge"};
    return std::string(bp[pick(4)]) + " " + reg() + ", " + reg() + ", " + target;
  }

  void straight(unsigned n) {
    for (unsigned i = 0; i < n; ++i) alu();
  }

  void if_else(unsigned depth, bool in_function) {
    const auto els = label("else"), end = label("end");
    emit(cond_branch(els));
    block(depth + 1, in_function);
    emit("jmpp " + end);
    place(els);
    block(depth + 1, in_function);
    place(end);
  }

  void if_then() {
    const auto skip = label("skip");
    emit(cond_branch(skip));
    straight(1 + pick(3));
    place(skip);
    alu();
  }

  void loop(unsigned depth) {
    const std::string ctr = depth == 0 ? "r10" : "r11";
    const auto head = label("loop");
    const unsigned step = 1 + pick(64);
    emit("addi " + ctr + ", r0, " + std::to_string(step * (1 + pick(o_.max_loop_iters))));
    place(head);
    body(depth + 1, false);
    emit("addi " + ctr + ", " + ctr + ", -" + std::to_string(step));
    emit("bpne " + ctr + ", r0, " + head);
  }

  void call_direct(unsigned i) {
    called_[i] = true;
    emit("callp " + direct_[i]);
    alu();
  }

  void indirect_call() {
    if (sites_left_) --sites_left_;
    const unsigned nt = std::min<unsigned>(static_cast<unsigned>(indirect_.size()), o_.min_targets + pick(o_.max_targets - o_.min_targets + 1));
    std::vector<std::string> fresh, seen;
    for (auto& f : indirect_) (covered_.count(f) ? seen : fresh).push_back(f);
    std::shuffle(fresh.begin(), fresh.end(), rng_);
    std::shuffle(seen.begin(), seen.end(), rng_);
    std::vector<std::string> pool = fresh;
    pool.insert(pool.end(), seen.begin(), seen.end());
    pool.resize(nt);
    covered_.insert(pool.begin(), pool.end());
    const auto site = label("site");
    std::string t = ".targets " + site + ": ";
    for (unsigned j = 0; j < nt; ++j) t += (j ? ", " : "") + pool[j];
    targets_.push_back(t);
    // Choose among the targets with data-dependent tests on r9.
    emit("addi r12, r0, " + pool[0]);
    for (unsigned j = 1; j < nt; ++j) {
      const auto keep = label("keep");
      emit("andi r9, " + reg() + ", " + std::to_string(1 + pick(255)));
      emit("bpeq r9, r0, " + keep);
      emit("addi r12, r0, " + pool[j]);
      place(keep);
    }
    place(site);
    emit("callrp r12");
    alu();
  }

  void block(unsigned depth, bool in_function) {
    straight(1 + pick(2));
    if (depth < 3 && pick(3) == 0) in_function ? if_then() : if_else(depth, in_function);
  }

  void body(unsigned depth, bool top) {
    const unsigned items = top ? 1000 : 1 + pick(3);
    for (unsigned i = 0; i < items && room(8); ++i) {
      switch (pick(top ? 6 : 5)) {
        case 0: case 1: straight(1 + pick(3)); break;
        case 2: if (depth < 3) if_else(depth, false); else if_then(); break;
        case 3: if (depth < 2 && room(16)) loop(depth); else alu(); break;
        case 4: {
          const unsigned nd = static_cast<unsigned>(direct_.size());
          if (nd && (!o_.single_call_site || std::find(called_.begin(), called_.begin() + nd, false) != called_.begin() + nd)) {
            unsigned i = pick(nd);
            if (o_.single_call_site)
              while (called_[i]) i = (i + 1) % nd;
            call_direct(i);
          } else if (sites_left_) {
            indirect_call();
          } else {
            alu();
          }
          break;
        }
        default: if (sites_left_) indirect_call(); else if_then(); break;
      }
    }
  }

  void function(const std::string& name, const char* ret, unsigned n) {
    place(name);
    straight(1 + pick(n));
    if (pick(2) == 0) {
      if_then();
    }
    emit(ret);
  }
};

}  // namespace detail

// Random halting program in assembler syntax: nested bounded loops,
// if/else diamonds, direct calls to leaf functions and indirect calls with
// data-dependent target choice.
template <class Rng>
std::string generate_program(Rng& rng, const GenOptions& o = {}) {
  return detail::Generator<Rng>(rng, o).run();
}

}  // namespace scfp::progen
