#ifndef TZC_TUNER_HPP
#define TZC_TUNER_HPP

#include <iosfwd>
#include <optional>

#include "tzc/rewriter.hpp"
#include "tzc/vm.hpp"

namespace tzc {

struct CpuLimits {
  int64_t parallel_bound = 3000;  // fused parallel extent must stay below
  int64_t unroll_bound = 8;       // unroll factor must stay below
};

struct GpuLimits {
  int64_t p_max = 2;
  std::vector<int64_t> split_factors = {64};  // candidate reduction splits
  bool allow_fuse = true;
};

// Ordered candidate sketches. The head is the default-first pick: for CPU,
// the pair with the largest in-bound fused parallel extent combined with
// the largest in-bound unroll factor; for GPU, (p=2, split_k=64 when it
// divides, fusion when the spatial product is small). The rest follow
// best-first by the same measures, then lexicographic position.
std::vector<CpuSketch> enumerate_cpu_space(const TensorizedOp& t,
                                           const CpuLimits& limits = {});
std::vector<GpuSketch> enumerate_gpu_space(const TensorizedOp& t,
                                           const GpuLimits& limits = {});

enum class Target : uint8_t { Cpu, Gpu };

struct TuneOptions {
  Target target = Target::Cpu;
  int budget = 16;          // max candidates evaluated
  uint64_t seed = 0;        // probe input seed
  bool allow_pad = true;
  CpuLimits cpu_limits{};
  GpuLimits gpu_limits{};
  CostModel cost_model{};
  // Candidates are proven equivalent on the probe input when the op's MAC
  // volume is within this bound; above it the check would dwarf the sweep,
  // so soundness rests on the schedule-preservation property suite (the
  // transforms involved are identical). Raise or force for small ops.
  int64_t verify_limit = 1 << 22;
  bool force_verify = false;
  std::ostream* log = nullptr;  // tuning log: one "candidate ..." line each
};

struct Candidate {
  int id = -1;
  LoopMapping mapping;
  std::string sketch;  // rendered sketch parameters
  Schedule schedule;
  CostReport cost;
  CostKey key{};
  bool verified = false;
};

struct TuneResult {
  Candidate best;
  std::vector<Candidate> evaluated;
};

// Full search: match + enumerate mappings (NoFeasibleMapping when empty),
// sketch space per mapping (sketch-major within the mapping order), each
// candidate lowered, injected, optionally VM-verified, measured, and ranked
// by cost_key. Deterministic for fixed options.
TuneResult tune(const ComputeOp& op, const Intrinsic& intr,
                const TuneOptions& opts = {});

}  // namespace tzc

#endif  // TZC_TUNER_HPP
