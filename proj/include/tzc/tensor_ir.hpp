#ifndef TZC_TENSOR_IR_HPP
#define TZC_TENSOR_IR_HPP

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tzc/intrinsics.hpp"

namespace tzc {

enum class LoopAnn : uint8_t { Serial, Parallel, Unrolled, Tensorize };

std::string loop_ann_name(LoopAnn a);

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

// Imperative statement tree produced by lowering. Loops are canonical
// ([0, extent), step 1); Tensorize-annotated loops form the pragma nest a
// later injection pass replaces with a single intrinsic call.
struct Stmt {
  enum class Kind : uint8_t { For, Store, Intrinsic, Seq };

  Kind kind;

  // For
  std::string var;
  int64_t extent = 0;
  LoopAnn ann = LoopAnn::Serial;
  StmtPtr body;

  // Store (scalar element store) / Intrinsic destination
  std::string tensor;
  std::vector<ExprPtr> indices;  // Store: scalar index per dim
  ExprPtr value;                 // Store: scalar value

  // Intrinsic: `tensor` is the destination buffer, dst_index the vector
  // address pattern its lanes scatter to, args one gathered vector value
  // per input tensor of the intrinsic's semantics (declaration order).
  std::string intrinsic;
  ExprPtr dst_index;
  std::vector<ExprPtr> args;

  // Seq
  std::vector<StmtPtr> stmts;
};

StmtPtr make_for(std::string var, int64_t extent, StmtPtr body,
                 LoopAnn ann = LoopAnn::Serial);
StmtPtr make_store(std::string tensor, std::vector<ExprPtr> indices,
                   ExprPtr value);
StmtPtr make_intrinsic(std::string name, std::string dst_tensor,
                       ExprPtr dst_index, std::vector<ExprPtr> args);
StmtPtr make_seq(std::vector<StmtPtr> stmts);

struct TensorIR {
  std::vector<TensorDecl> tensors;  // op tensors plus lowering temporaries
  std::vector<std::string> temps;   // names of non-declared scratch buffers
  std::string output;
  bool seed_output = false;  // accumulate form: initial image arrives as input
  StmtPtr root;

  // Definitions of the instructions referenced by Intrinsic statements, so
  // the tree stays executable without an external registry.
  std::vector<Intrinsic> intrinsics;

  const TensorDecl* find_tensor(const std::string& name) const;
  const Intrinsic* find_intrinsic(const std::string& name) const;
};

// Deterministic text rendering used for golden snapshots and CLI output.
std::string print_tensor_ir(const TensorIR& ir);

// Statement-tree traversal helpers.
void visit_stmts(const StmtPtr& s, const std::function<void(const Stmt&)>& f);
int count_stmts(const StmtPtr& s, Stmt::Kind kind);

}  // namespace tzc

#endif  // TZC_TENSOR_IR_HPP
