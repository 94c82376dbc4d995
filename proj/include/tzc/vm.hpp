#ifndef TZC_VM_HPP
#define TZC_VM_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "tzc/intrinsics.hpp"
#include "tzc/tensor_ir.hpp"

namespace tzc {

// Dense host tensor. Integer elements live as canonical int64 values
// (wrapped to their declared width); float elements as doubles that are
// exactly representable in the declared format (fp16 values round-trip
// through binary16 round-to-nearest-even after every operation).
struct TensorValue {
  DType dtype;
  std::vector<int64_t> shape;
  std::vector<int64_t> idata;
  std::vector<double> fdata;

  static TensorValue zeros(DType t, std::vector<int64_t> shape);
  int64_t size() const;
  bool is_float() const { return dtype.is_float(); }

  int64_t iat(int64_t flat) const { return idata[flat]; }
  double fat(int64_t flat) const { return fdata[flat]; }
};

using Inputs = std::map<std::string, TensorValue>;

// Seeded uniform random fill: integers cover the full dtype range; floats
// draw from [0, 1) (quantized to the format) so accumulation tests are not
// dominated by cancellation.
TensorValue random_tensor(const TensorDecl& decl, uint64_t seed);
Inputs random_inputs(const ComputeOp& op, uint64_t seed);

// ---- interpreters ---------------------------------------------------------

// Evaluates the declared formula directly: per output element, the init
// value (the accumulate-form ops' externally seeded image, the declared
// init addend, or zero) plus the reduction term summed with reduction loops
// iterated in ascending order. Integer arithmetic wraps two's-complement at
// the node dtype; fp16/fp32 round after every operation. Throws
// MissingInput / ShapeError on bad inputs.
TensorValue eval_reference(const ComputeOp& op, const Inputs& inputs);

// Executes a lowered statement tree. Inputs seed their buffers, temporaries
// start zeroed, the output starts zeroed unless the IR is accumulate form
// (then its initial image must be supplied under the output's name).
// Intrinsic calls materialize their vector operands lane by lane, run the
// intrinsic's semantics through eval_reference on those register images and
// scatter the result through the destination pattern.
TensorValue eval_tir(const TensorIR& ir, const Inputs& inputs);

// ---- cost accounting --------------------------------------------------------

struct CostReport {
  int64_t scalar_mac_count = 0;  // executed scalar stores weighted by Mul count
  int64_t load_count = 0;        // scalar loads + gathered vector lanes
  int64_t store_count = 0;       // scalar stores + scattered vector lanes
  std::map<std::string, int64_t> intrinsic_calls;
  int64_t intrinsic_call_count = 0;
  int64_t parallel_credit = 1;   // max parallel loop extent
  int64_t unroll_depth = 1;      // product of unrolled loop extents

  std::string to_string() const;
};

// Runs eval_tir while tallying the counters (output discarded).
CostReport measure(const TensorIR& ir, const Inputs& inputs);

// Computes the identical report analytically from loop extents; every
// counter is data-independent, so this matches measure() exactly (covered
// by tests) at negligible cost. The tuner uses it for desk-scale sweeps
// over workloads too large to interpret.
CostReport measure_static(const TensorIR& ir);

// Lexicographic ranking: total compute issues (intrinsic calls + residual
// scalar MACs), then parallelism credit clamped to the core count (more is
// better), then distance from the preferred unroll depth.
struct CostModel {
  int64_t cores = 24;
  int64_t unroll_target = 4;
};
using CostKey = std::tuple<int64_t, int64_t, int64_t>;
CostKey cost_key(const CostReport& r, const CostModel& m = {});
std::string cost_key_to_string(const CostKey& k);

// ---- comparison helpers -----------------------------------------------------

struct Deviation {
  double max_rel = 0.0;   // max |a-b| / max(|ref|, 1)
  int64_t mismatches = 0; // elements violating the tolerance
  bool bitexact = true;
};
Deviation compare(const TensorValue& ref, const TensorValue& got, double rtol);

// Zero-extends `v` into `shape` (each dim >= v's) at offset zero and slices
// the leading region back out; used around padded pipelines.
TensorValue embed(const TensorValue& v, const std::vector<int64_t>& shape);
TensorValue slice(const TensorValue& v, const std::vector<int64_t>& shape);

// ---- tensor container i/o ---------------------------------------------------

// Binary container: magic "TNSR", version u8, dtype code u8, rank u8,
// little-endian u64 extents, raw little-endian elements (fp16 as bit
// patterns, integers two's-complement at declared width).
void write_tensor(std::ostream& os, const TensorValue& v);
TensorValue read_tensor(std::istream& is);
void save_tensor(const std::string& path, const TensorValue& v);
TensorValue load_tensor(const std::string& path);
std::string tensor_to_text(const TensorValue& v, int64_t max_elems = 64);

}  // namespace tzc

#endif  // TZC_VM_HPP
