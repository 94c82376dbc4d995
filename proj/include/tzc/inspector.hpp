#ifndef TZC_INSPECTOR_HPP
#define TZC_INSPECTOR_HPP

#include <map>
#include <string>
#include <vector>

#include "tzc/compute_op.hpp"
#include "tzc/intrinsics.hpp"

namespace tzc {

// Correspondence between instruction registers and op-side data sources,
// built while matching the two value-expression trees. A register (input
// tensor of the instruction semantics) binds at most one op-side leaf; the
// op leaf may be a load or a constant. `pairs` keeps every matched
// (instruction leaf, op leaf) for the access-pattern feasibility check,
// including the implicit output/store pair.
struct BindMap {
  std::map<std::string, ExprPtr> reg_to_op;            // register -> op leaf
  std::vector<std::pair<ExprPtr, ExprPtr>> pairs;      // (instr leaf, op leaf)
};

struct MatchResult {
  bool ok = false;
  BindMap bind;
  std::string reason;  // set when !ok: first structural mismatch
};

// Strict tree isomorphism between the instruction's stored value and the
// op's stored value: dtypes must agree at every node, Add only matches Add
// and Mul only Mul with lhs/lhs and rhs/rhs recursion (no commutative
// retry), casts match casts with the same target, loads bind registers,
// constants must be equal on both sides. Pure function of the two trees.
MatchResult inspect_compute(const ExprPtr& instr_value, const ExprPtr& op_value);

// Whole-op matching: inspect_compute on the value trees plus the
// accumulate-form gate (an in-place-accumulator instruction only matches an
// accumulate-form op whose output load binds the instruction's accumulator)
// plus the store-target pair.
MatchResult match_operation(const ComputeOp& op, const Intrinsic& intr);

// One way of laying instruction loops onto op loops.
struct LoopMapping {
  // op loop -> instruction loop, listed in instruction loop order.
  std::vector<std::pair<std::string, std::string>> f;
  bool needs_padding = false;  // some op extent is not a multiple
  // instruction loops the op access does not vary along, per register.
  std::map<std::string, std::vector<std::string>> broadcast_axes;

  std::string instr_loop_of(const std::string& op_loop) const;
  std::string op_loop_of(const std::string& instr_loop) const;
  std::string to_string() const;  // "{y->i, k->j}"
};

// Access-pattern feasibility for a candidate assignment: for every bound
// (op access u, instruction access v) pair — constants skipped — each
// mapped op loop appearing in u must map to an instruction loop appearing
// in v. Instruction loops of v untouched by u become broadcast axes.
bool check_feasible(const ComputeOp& op, const Intrinsic& intr,
                    const BindMap& bind,
                    const std::vector<std::pair<std::string, std::string>>& f,
                    std::map<std::string, std::vector<std::string>>* broadcast_out = nullptr);

// Enumerates every feasible mapping: kind-respecting injective assignments
// of op loops to instruction loops filtered by check_feasible. Candidates
// are tried innermost op loop first, so the deterministic list head is the
// greedy pick. Extent divisibility is not a filter; non-multiples are
// flagged needs_padding.
std::vector<LoopMapping> enumerate_mappings(const ComputeOp& op,
                                            const Intrinsic& intr,
                                            const BindMap& bind);

// Convenience: match + enumerate in one step.
struct InspectionReport {
  MatchResult match;
  std::vector<LoopMapping> mappings;
};
InspectionReport inspect(const ComputeOp& op, const Intrinsic& intr);

}  // namespace tzc

#endif  // TZC_INSPECTOR_HPP
