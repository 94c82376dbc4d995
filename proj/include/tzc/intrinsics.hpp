#ifndef TZC_INTRINSICS_HPP
#define TZC_INTRINSICS_HPP

#include <string>
#include <vector>

#include "tzc/compute_op.hpp"

namespace tzc {

// How one register operand of an instruction is assembled from the op-side
// memory access it was bound to. Rules are listed minor axis first: the
// first rule fills adjacent register lanes, each later rule wraps a new
// major axis around everything built so far.
struct OperandRule {
  enum class Kind : uint8_t { Vectorize, Broadcast, UnrollConcat, Passthrough };
  Kind kind = Kind::Passthrough;
  std::string loop;   // instruction loop the axis follows (empty: passthrough)
  int64_t count = 0;  // lanes / replication / part count == loop extent

  static std::string kind_name(Kind k);
};

// A tensorized instruction: scalar semantics as a small ComputeOp plus the
// register layout rules codegen needs. `requires_inplace_acc` is derived
// from the semantics being accumulate-form ("+="): such instructions add
// into the existing accumulator register and can only replace ops that are
// themselves accumulate-form.
struct Intrinsic {
  std::string name;
  ComputeOp semantics;  // type-resolved
  std::vector<std::pair<std::string, std::vector<OperandRule>>> operand_rules;
  std::string target_mnemonic;
  bool requires_inplace_acc = false;

  const std::vector<OperandRule>* rules_for(const std::string& tensor) const;
  // Input tensor acting as the accumulator: for accumulate-form semantics
  // the output itself; otherwise the input whose load indices equal the
  // store indices (e.g. the arbitrary-initial-value register of a fused
  // multiply-add instruction). Empty when the semantics has neither.
  std::string accumulator() const;
};

// Checks naming, rule/loop consistency, rule counts against loop extents,
// and that every input tensor carries exactly one rule list. Throws
// RuleError / ValidationError / TypeError.
void validate_intrinsic(const Intrinsic& intr);

// Built-in instruction descriptions; throws UnknownIntrinsic for other
// names. Available: vdot_16x4 (16-lane x 4-deep u8*i8->i32 dot product with
// explicit accumulator register), vdot_4x4 (4-lane variant), wmma_16x16x16
// (16x16x16 fp16->fp32 matrix multiply-accumulate, in-place accumulator).
const Intrinsic& builtin(const std::string& name);
std::vector<std::string> builtin_names();

// Loads a ".intr" description: a semantics block in the surface DSL
// followed by one `rule <tensor>: <kind>(<loop>)...` line per input tensor
// and a `mnemonic "<string>"` line. Rule kinds: vectorize, broadcast,
// unroll_concat, passthrough (no loop argument).
Intrinsic parse_intrinsic(const std::string& text, const std::string& name);
Intrinsic load_intrinsic(const std::string& path);

// Resolves `--intrinsic` style references: builtin name or path to a .intr
// file (recognized by the extension or an existing file).
Intrinsic resolve_intrinsic(const std::string& ref);

std::string print_intrinsic(const Intrinsic& intr);

}  // namespace tzc

#endif  // TZC_INTRINSICS_HPP
