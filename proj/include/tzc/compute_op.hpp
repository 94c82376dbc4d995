#ifndef TZC_COMPUTE_OP_HPP
#define TZC_COMPUTE_OP_HPP

#include <string>
#include <vector>

#include "tzc/expr.hpp"

namespace tzc {

enum class LoopKind : uint8_t { DataParallel, Reduction };

struct LoopVar {
  std::string name;
  int64_t extent = 0;  // canonical range [0, extent), step 1
  LoopKind kind = LoopKind::DataParallel;
};

enum class Role : uint8_t { Input, Output };

struct TensorDecl {
  std::string name;
  std::vector<int64_t> shape;
  DType dtype;  // scalar
  Role role = Role::Input;

  int64_t size() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }
};

// Single-statement tensor program: declarations plus one store. `update`
// marks accumulate form ("+="); its value expr then contains a load of the
// output at the store indices as one top-level addend.
struct ComputeOp {
  std::vector<TensorDecl> tensors;
  std::vector<LoopVar> loops;
  std::string out;                 // store target (the unique output tensor)
  std::vector<ExprPtr> indices;    // affine store indices
  ExprPtr value;                   // stored value
  bool update = false;

  const TensorDecl* find_tensor(const std::string& name) const;
  const LoopVar* find_loop(const std::string& name) const;
  const TensorDecl& output() const;
  std::vector<LoopVar> loops_of_kind(LoopKind k) const;
};

// Checks every structural invariant (unique names, declared references,
// affine indices, exactly one output, reduction vars used, update form
// canonical, positive extents). Throws ValidationError with the first
// violation; check order is deterministic.
void validate(const ComputeOp& op);

// Returns a copy with every Expr node's dtype resolved bottom-up. Explicit
// casts only: Add/Mul operands must agree exactly, the stored value must
// match the output dtype, load indices must be integer. Idempotent.
// Throws TypeError.
ComputeOp infer_types(const ComputeOp& op);

// Reduction decomposition used by both the interpreter and the lowering:
// value == init + sum over reduction iterations of `term`. For update form
// the output load is the (implicit, externally seeded) init. When the op
// has no reduction loops both members are null and the value stores as-is.
struct ReduceForm {
  ExprPtr init;  // null for update form (seeded) and for pure sums (zero)
  ExprPtr term;  // null when the op has no reduction loops
};
ReduceForm reduce_form(const ComputeOp& op);

// Structural equality of whole ops (used by round-trip tests).
bool op_equal(const ComputeOp& a, const ComputeOp& b,
              bool compare_dtype = true);

// Renders the op in the surface grammar; parse(print(op)) reproduces the
// op structurally.
std::string print_compute(const ComputeOp& op);

}  // namespace tzc

#endif  // TZC_COMPUTE_OP_HPP
