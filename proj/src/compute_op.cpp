#include "tzc/compute_op.hpp"

#include <algorithm>
#include <set>

#include "tzc/errors.hpp"

namespace tzc {

const TensorDecl* ComputeOp::find_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const LoopVar* ComputeOp::find_loop(const std::string& name) const {
  for (const auto& l : loops)
    if (l.name == name) return &l;
  return nullptr;
}

const TensorDecl& ComputeOp::output() const {
  for (const auto& t : tensors)
    if (t.role == Role::Output) return t;
  throw ValidationError("compute op has no output tensor");
}

std::vector<LoopVar> ComputeOp::loops_of_kind(LoopKind k) const {
  std::vector<LoopVar> out;
  for (const auto& l : loops)
    if (l.kind == k) out.push_back(l);
  return out;
}

namespace {

// True when `e` is a load of `tensor` at exactly the given indices.
bool is_load_of(const ExprPtr& e, const std::string& tensor,
                const std::vector<ExprPtr>& indices) {
  if (e->kind != Expr::Kind::Load || e->name != tensor) return false;
  if (e->args.size() != indices.size()) return false;
  for (size_t i = 0; i < indices.size(); ++i)
    if (!expr_equal(e->args[i], indices[i], /*compare_dtype=*/false))
      return false;
  return true;
}

void check_expr(const ComputeOp& op, const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::Var: {
      if (!op.find_loop(e->name))
        throw ValidationError("reference to undeclared loop '" + e->name + "'");
      return;
    }
    case Expr::Kind::Load: {
      const TensorDecl* t = op.find_tensor(e->name);
      if (!t)
        throw ValidationError("load from undeclared tensor '" + e->name + "'");
      if (e->args.size() != t->shape.size())
        throw ValidationError("tensor '" + e->name + "' has rank " +
                              std::to_string(t->shape.size()) + " but is indexed with " +
                              std::to_string(e->args.size()) + " subscripts");
      for (const auto& idx : e->args) {
        check_expr(op, idx);
        if (!linearize(idx))
          throw ValidationError("non-affine index expression '" +
                                expr_to_string(idx) + "' on tensor '" + e->name + "'");
      }
      return;
    }
    case Expr::Kind::Ramp:
    case Expr::Kind::Broadcast:
    case Expr::Kind::Concat:
    case Expr::Kind::FloorDiv:
    case Expr::Kind::FloorMod:
      throw ValidationError("vector/lowered expression node in surface op");
    default:
      for (const auto& a : e->args) check_expr(op, a);
      return;
  }
}

}  // namespace

void validate(const ComputeOp& op) {
  // Unique, non-empty names; no aliasing between declared buffers.
  std::set<std::string> names;
  for (const auto& t : op.tensors) {
    if (t.name.empty()) throw ValidationError("tensor with empty name");
    if (!names.insert(t.name).second)
      throw ValidationError("duplicate declaration of '" + t.name + "'");
    if (t.shape.empty())
      throw ValidationError("tensor '" + t.name + "' has empty shape");
    for (int64_t d : t.shape)
      if (d <= 0)
        throw ValidationError("tensor '" + t.name + "' has non-positive extent");
    if (!t.dtype.defined() || !t.dtype.is_scalar())
      throw ValidationError("tensor '" + t.name + "' needs a scalar dtype");
  }
  for (const auto& l : op.loops) {
    if (l.name.empty()) throw ValidationError("loop with empty name");
    if (!names.insert(l.name).second)
      throw ValidationError("duplicate declaration of '" + l.name + "'");
    if (l.extent <= 0)
      throw ValidationError("loop '" + l.name + "' has non-positive extent");
  }

  int outputs = 0;
  for (const auto& t : op.tensors)
    if (t.role == Role::Output) ++outputs;
  if (outputs != 1)
    throw ValidationError("expected exactly one output tensor, found " +
                          std::to_string(outputs));

  const TensorDecl* out = op.find_tensor(op.out);
  if (!out || out->role != Role::Output)
    throw ValidationError("store target '" + op.out + "' is not the output tensor");
  if (op.indices.size() != out->shape.size())
    throw ValidationError("store index count does not match output rank");

  if (!op.value) throw ValidationError("missing stored value");

  // Store indices: affine over data-parallel loops only.
  for (const auto& idx : op.indices) {
    check_expr(op, idx);
    if (!linearize(idx))
      throw ValidationError("non-affine store index '" + expr_to_string(idx) + "'");
    std::vector<std::string> vars;
    collect_vars(idx, &vars);
    for (const auto& v : vars) {
      const LoopVar* l = op.find_loop(v);
      if (l && l->kind == LoopKind::Reduction)
        throw ValidationError("reduction loop '" + v + "' used in store index");
    }
  }

  check_expr(op, op.value);

  // Every reduction loop must feed at least one load in the value.
  std::vector<const Expr*> loads;
  {
    std::vector<ExprPtr> stack{op.value};
    while (!stack.empty()) {
      ExprPtr e = stack.back();
      stack.pop_back();
      if (e->kind == Expr::Kind::Load) loads.push_back(e.get());
      for (const auto& a : e->args) stack.push_back(a);
    }
  }
  for (const auto& l : op.loops) {
    if (l.kind != LoopKind::Reduction) continue;
    bool used = false;
    for (const Expr* ld : loads) {
      for (const auto& idx : ld->args)
        if (contains_var(idx, l.name)) used = true;
    }
    if (!used)
      throw ValidationError("reduction loop '" + l.name +
                            "' does not appear in any load");
  }

  // Accumulate form must carry the output load as a top-level addend so the
  // decomposition into init + summed term is unambiguous.
  if (op.update) {
    bool canonical = op.value->kind == Expr::Kind::Add &&
                     (is_load_of(op.value->args[0], op.out, op.indices) ||
                      is_load_of(op.value->args[1], op.out, op.indices));
    if (!canonical)
      throw ValidationError(
          "accumulate-form value must be 'output-load + term' at the top level");
  } else {
    // The output may not be read in non-update form (no hidden recurrence).
    for (const Expr* ld : loads)
      if (ld->name == op.out)
        throw ValidationError("output '" + op.out +
                              "' read without accumulate form");
  }
}

namespace {

ExprPtr infer_expr(const ComputeOp& op, const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::IntImm:
    case Expr::Kind::FloatImm:
      return e;  // literals carry their dtype from construction
    case Expr::Kind::Var: {
      auto out = std::make_shared<Expr>(*e);
      out->dtype = kI32;
      return out;
    }
    case Expr::Kind::Load: {
      const TensorDecl* t = op.find_tensor(e->name);
      internal_check(t != nullptr, "infer on unvalidated op");
      auto out = std::make_shared<Expr>(*e);
      for (auto& idx : out->args) {
        idx = infer_expr(op, idx);
        if (!idx->dtype.is_int())
          throw TypeError("non-integer index on tensor '" + e->name + "'");
      }
      out->dtype = t->dtype;
      return out;
    }
    case Expr::Kind::Cast: {
      auto out = std::make_shared<Expr>(*e);
      out->args[0] = infer_expr(op, e->args[0]);
      if (!out->dtype.defined())
        throw TypeError("cast without target dtype");
      return out;
    }
    case Expr::Kind::Add:
    case Expr::Kind::Mul: {
      auto out = std::make_shared<Expr>(*e);
      out->args[0] = infer_expr(op, e->args[0]);
      out->args[1] = infer_expr(op, e->args[1]);
      DType lt = out->args[0]->dtype;
      DType rt = out->args[1]->dtype;
      if (lt != rt)
        throw TypeError(std::string(e->kind == Expr::Kind::Add ? "add" : "mul") +
                        " operands disagree: " + dtype_name(lt) + " vs " +
                        dtype_name(rt) + " in '" + expr_to_string(e) +
                        "' (insert explicit casts)");
      out->dtype = lt;
      return out;
    }
    default:
      throw TypeError("unexpected node in surface expression");
  }
}

}  // namespace

ComputeOp infer_types(const ComputeOp& op) {
  ComputeOp out = op;
  for (auto& idx : out.indices) idx = infer_expr(op, idx);
  out.value = infer_expr(op, out.value);
  DType want = op.output().dtype;
  if (out.value->dtype != want)
    throw TypeError("stored value is " + dtype_name(out.value->dtype) +
                    " but output '" + op.out + "' is " + dtype_name(want) +
                    " (no implicit conversion)");
  return out;
}

ReduceForm reduce_form(const ComputeOp& op) {
  ReduceForm rf;
  bool has_reduction = false;
  for (const auto& l : op.loops)
    if (l.kind == LoopKind::Reduction) has_reduction = true;

  auto mentions_reduction = [&](const ExprPtr& e) {
    for (const auto& l : op.loops)
      if (l.kind == LoopKind::Reduction && contains_var(e, l.name)) return true;
    return false;
  };

  if (op.update) {
    // value == load(out) + term (validated); seeded init, keep the term.
    const ExprPtr& lhs = op.value->args[0];
    const ExprPtr& rhs = op.value->args[1];
    bool lhs_is_acc = lhs->kind == Expr::Kind::Load && lhs->name == op.out;
    rf.term = lhs_is_acc ? rhs : lhs;
    rf.init = nullptr;
    if (!has_reduction) rf.term = nullptr;  // plain elementwise accumulate
    return rf;
  }
  if (!has_reduction) return rf;  // store as-is

  // Peel one reduction-free top-level addend as the init when unambiguous.
  if (op.value->kind == Expr::Kind::Add) {
    bool l_red = mentions_reduction(op.value->args[0]);
    bool r_red = mentions_reduction(op.value->args[1]);
    if (l_red != r_red) {
      rf.init = l_red ? op.value->args[1] : op.value->args[0];
      rf.term = l_red ? op.value->args[0] : op.value->args[1];
      return rf;
    }
  }
  rf.init = nullptr;  // implicit zero
  rf.term = op.value;
  return rf;
}

bool op_equal(const ComputeOp& a, const ComputeOp& b, bool compare_dtype) {
  if (a.tensors.size() != b.tensors.size() || a.loops.size() != b.loops.size())
    return false;
  for (size_t i = 0; i < a.tensors.size(); ++i) {
    const auto& x = a.tensors[i];
    const auto& y = b.tensors[i];
    if (x.name != y.name || x.shape != y.shape || x.dtype != y.dtype ||
        x.role != y.role)
      return false;
  }
  for (size_t i = 0; i < a.loops.size(); ++i) {
    const auto& x = a.loops[i];
    const auto& y = b.loops[i];
    if (x.name != y.name || x.extent != y.extent || x.kind != y.kind)
      return false;
  }
  if (a.out != b.out || a.update != b.update) return false;
  if (a.indices.size() != b.indices.size()) return false;
  for (size_t i = 0; i < a.indices.size(); ++i)
    if (!expr_equal(a.indices[i], b.indices[i], compare_dtype)) return false;
  return expr_equal(a.value, b.value, compare_dtype);
}

std::string print_compute(const ComputeOp& op) {
  std::string s;
  for (const auto& t : op.tensors) {
    s += "tensor " + t.name + " : " + dtype_name(t.dtype) + " [";
    for (size_t i = 0; i < t.shape.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(t.shape[i]);
    }
    s += t.role == Role::Output ? "] output\n" : "] input\n";
  }
  for (const auto& l : op.loops) {
    s += "loop " + l.name + " : " +
         (l.kind == LoopKind::DataParallel ? "dp " : "red ") +
         std::to_string(l.extent) + "\n";
  }
  s += op.out + "[";
  for (size_t i = 0; i < op.indices.size(); ++i) {
    if (i) s += ", ";
    s += expr_to_string(op.indices[i]);
  }
  s += "]";
  if (op.update) {
    // Strip the canonical accumulator addend back off for "+=".
    const ExprPtr& lhs = op.value->args[0];
    const ExprPtr& rhs = op.value->args[1];
    bool lhs_is_acc = lhs->kind == Expr::Kind::Load && lhs->name == op.out;
    s += " += " + expr_to_string(lhs_is_acc ? rhs : lhs);
  } else {
    s += " = " + expr_to_string(op.value);
  }
  s += "\n";
  return s;
}

}  // namespace tzc
