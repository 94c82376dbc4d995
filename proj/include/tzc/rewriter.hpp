#ifndef TZC_REWRITER_HPP
#define TZC_REWRITER_HPP

#include <optional>
#include <string>
#include <vector>

#include "tzc/inspector.hpp"
#include "tzc/tensor_ir.hpp"

namespace tzc {

// One schedule transform. A Schedule is an ordered list applied to the op's
// loop nest at lowering time. Axis naming: Split(x, f) yields "x.o"/"x.i",
// Fuse(a, b) yields "a.b.fused", SplitReduction(k, s) yields segment "k.s"
// and inner "k.r".
struct Transform {
  enum class Kind : uint8_t {
    Pad,            // a = loop, factor = multiple (must precede the rest)
    Split,          // a = axis, factor
    Reorder,        // names = full permutation of current axes
    Fuse,           // a = outer axis, b = inner axis (adjacent, same kind)
    Parallel,       // a = data-parallel axis
    Unroll,         // a = axis
    SplitReduction, // a = reduction axis, factor = segment count
    Pragma,         // names = innermost axes to tensorize, instruction order
  };
  Kind kind;
  std::string a, b;
  std::vector<std::string> names;
  int64_t factor = 0;

  static std::string kind_name(Kind k);
};
using Schedule = std::vector<Transform>;

std::string print_schedule(const Schedule& s);          // one transform per line
Schedule parse_schedule(const std::string& text);       // inverse of the above
Schedule load_schedule(const std::string& path);

// ---- padding --------------------------------------------------------------

// Raises `loop`'s extent to the next multiple of `multiple`, growing every
// tensor dimension the loop indexes (zero extension; buffers are embedded /
// sliced by the pipeline helpers in vm.hpp). Padding a reduction loop
// requires the reduction term to be a multiply chain touching the loop, so
// the extra iterations contribute exact zeros; otherwise PadUnsupported.
ComputeOp pad_to_multiple(const ComputeOp& op, const std::string& loop,
                          int64_t multiple);

// ---- tensorize tiling -------------------------------------------------------

// Op tiled for one instruction: mapped loops split by the instruction
// extents, inner pieces reordered innermost in instruction loop order and
// tagged as the tensorize pragma nest.
struct TensorizedOp {
  ComputeOp op;          // possibly padded
  ComputeOp original;    // pre-padding op (equal to `op` when no padding)
  LoopMapping mapping;
  Schedule schedule;     // pads + splits + reorder + pragma
  std::vector<std::string> outer_dp;   // axes above the pragma, in order
  std::vector<std::string> outer_red;
  std::vector<std::string> pragma_axes;
};

// Throws DivisibilityError when an op extent is not a multiple of its
// instruction extent and allow_pad is false.
TensorizedOp tile_and_reorder(const ComputeOp& op, const Intrinsic& intr,
                              const LoopMapping& mapping, bool allow_pad = false);

// ---- lowering ---------------------------------------------------------------

struct LowerOptions {
  // Expand Unrolled loops into literal copies (debug cross-check; the
  // default keeps them as annotations honored by the cost model).
  bool literal_unroll = false;
};

// Applies the schedule and emits the imperative nest: an initialization
// nest for reduction ops with a declared init (accumulate-form ops are
// seeded from their input image instead), the main nest with a single
// innermost scalar store, and for SplitReduction a zero-initialized partial
// buffer plus a second reduction nest. Throws ScheduleError on invalid
// transform sequences.
TensorIR lower(const ComputeOp& op, const Schedule& schedule,
               const LowerOptions& opts = {});

// Replaces the pragma nest with one intrinsic call: rebinds the instruction
// value against the lowered store, derives each register's vector operand
// from its bound access via the declared operand rules (vectorize -> ramp,
// broadcast -> lane replication, unroll_concat -> shifted concat), and
// scatters the result through the store's address pattern. Throws
// InjectError when extents or access patterns cannot be expressed.
TensorIR inject_intrinsic(const TensorIR& ir, const Intrinsic& intr,
                          const LoopMapping& mapping);

// ---- hardware sketches ------------------------------------------------------

// Two breaking points over the outer data-parallel axes: everything before
// the first is fused and parallelized, loops between the two stay serial,
// and everything after the second is reordered innermost (just above the
// pragma nest, below the reduction loops) and unrolled. A breaking point is
// (axis level, tiling factor): the cut falls inside axis `level` after an
// outer piece of extent[level]/factor.
struct CpuSketch {
  int l1 = 0;
  int64_t f1 = 1;
  int l2 = 0;
  int64_t f2 = 1;
  std::string to_string() const;
};

// Square p x p output window unrolled above the pragma nest; optional
// fusion of the innermost adjacent equal-extent spatial pair; optional
// reduction split into `split_k` parallel partial accumulators with a
// second reduction nest.
struct GpuSketch {
  int64_t p = 1;
  bool fuse_hw = false;
  int64_t split_k = 1;
  std::string to_string() const;
};

// Extends t.schedule with the sketch's transforms; throws ScheduleError on
// out-of-range breaking points, non-dividing factors, or windows larger
// than the loops they tile.
Schedule apply_cpu_sketch(const TensorizedOp& t, const CpuSketch& sketch);
Schedule apply_gpu_sketch(const TensorizedOp& t, const GpuSketch& sketch);

// Properties of a sketch used for space ordering and the tuner contract.
int64_t cpu_fused_parallel_extent(const TensorizedOp& t, const CpuSketch& s);
int64_t cpu_unroll_factor(const TensorizedOp& t, const CpuSketch& s);

}  // namespace tzc

#endif  // TZC_REWRITER_HPP
