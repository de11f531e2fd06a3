#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>

#include "scfp/assembler.hpp"
#include "scfp/vm.hpp"

namespace scfp {

struct OverheadReport {
  std::uint64_t baseline_code_bytes = 0;
  std::uint64_t protected_code_bytes = 0;
  std::uint64_t patch_words = 0;  // slot words inserted by the protected layout
  double code_size_overhead = 0;
  std::uint64_t baseline_cycles = 0;
  std::uint64_t protected_cycles = 0;
  double runtime_overhead = 0;
  std::uint64_t taken_branches = 0;
  std::uint64_t calls = 0;
  std::uint64_t patch_words_fetched = 0;
};

inline std::size_t instruction_words(const isa::AssembledProgram& p) {
  std::size_t n = 0;
  for (auto k : p.kinds) n += k == isa::WordKind::Instr;
  return n;
}

// Baseline = the unprotected build of the same source.
inline OverheadReport overhead(const isa::AssembledProgram& baseline, const isa::AssembledProgram& prot,
                               const vm::Outcome& base_run, const vm::Outcome& prot_run) {
  if (baseline.protected_mode || !prot.protected_mode)
    throw std::invalid_argument("overhead needs an unprotected baseline and a protected build");
  if (instruction_words(baseline) != instruction_words(prot) || baseline.data != prot.data)
    throw std::invalid_argument("baseline and protected builds come from different programs");
  if (prot.code_bytes() != baseline.code_bytes() + 4 * prot.slot_word_count())
    throw std::logic_error("protected layout size is not baseline plus slot words");
  if (base_run.status != vm::Status::Halted || prot_run.status != vm::Status::Halted)
    throw std::invalid_argument("both runs must halt");
  if (base_run.metrics.instructions != prot_run.metrics.instructions)
    throw std::invalid_argument("runs executed different instruction counts");
  OverheadReport r;
  r.baseline_code_bytes = baseline.code_bytes();
  r.protected_code_bytes = prot.code_bytes();
  r.patch_words = prot.slot_word_count();
  r.code_size_overhead = static_cast<double>(4 * r.patch_words) / static_cast<double>(r.baseline_code_bytes);
  r.baseline_cycles = base_run.metrics.cycles;
  r.protected_cycles = prot_run.metrics.cycles;
  r.runtime_overhead = (static_cast<double>(r.protected_cycles) - static_cast<double>(r.baseline_cycles)) /
                       static_cast<double>(r.baseline_cycles);
  r.taken_branches = prot_run.metrics.taken_branches;
  r.calls = prot_run.metrics.calls;
  r.patch_words_fetched = prot_run.metrics.patch_words_fetched;
  return r;
}

inline void write_report(std::ostream& os, const OverheadReport& r) {
  os << "baseline_code_bytes=" << r.baseline_code_bytes << "\n"
     << "protected_code_bytes=" << r.protected_code_bytes << "\n"
     << "patch_words=" << r.patch_words << "\n"
     << "code_size_overhead=" << r.code_size_overhead << "\n"
     << "baseline_cycles=" << r.baseline_cycles << "\n"
     << "protected_cycles=" << r.protected_cycles << "\n"
     << "runtime_overhead=" << r.runtime_overhead << "\n"
     << "taken_branches=" << r.taken_branches << "\n"
     << "calls=" << r.calls << "\n"
     << "patch_words_fetched=" << r.patch_words_fetched << "\n";
}

}  // namespace scfp
