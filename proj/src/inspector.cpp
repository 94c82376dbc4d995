#include "tzc/inspector.hpp"

#include <algorithm>
#include <functional>
#include <set>

#include "tzc/errors.hpp"

namespace tzc {

namespace {

// Recursive matcher. Registers bind by tensor name: the same instruction
// register may appear several times but must always face the same op-side
// source ("a register cannot correspond to multiple data sources").
bool inspect_rec(const ExprPtr& a, const ExprPtr& b, BindMap* bind,
                 std::string* reason) {
  auto mismatch = [&](const std::string& why) {
    if (reason->empty())
      *reason = why + ": '" + expr_to_string(a) + "' vs '" + expr_to_string(b) + "'";
    return false;
  };

  if (a->dtype != b->dtype)
    return mismatch("dtype " + dtype_name(a->dtype) + " vs " + dtype_name(b->dtype));

  bool a_leaf = is_leaf(a);
  bool b_leaf = is_leaf(b);
  if (a_leaf && b_leaf) {
    if (is_const(a)) {
      // Literal in the instruction semantics: the op must compute with the
      // very same literal, otherwise the replaced value would differ.
      if (!expr_equal(a, b)) return mismatch("constants differ");
      return true;
    }
    // Instruction register: may take an op load or an op constant.
    auto it = bind->reg_to_op.find(a->name);
    if (it == bind->reg_to_op.end()) {
      bind->reg_to_op.emplace(a->name, b);
    } else if (!expr_equal(it->second, b)) {
      return mismatch("register '" + a->name + "' already bound to '" +
                      expr_to_string(it->second) + "'");
    }
    bind->pairs.emplace_back(a, b);
    return true;
  }
  if (a_leaf != b_leaf) return mismatch("leaf vs interior node");

  if (a->kind != b->kind) return mismatch("node kinds differ");
  switch (a->kind) {
    case Expr::Kind::Cast:
      return inspect_rec(a->args[0], b->args[0], bind, reason);
    case Expr::Kind::Add:
    case Expr::Kind::Mul:
      // Strict positional recursion; no commutative retry.
      return inspect_rec(a->args[0], b->args[0], bind, reason) &&
             inspect_rec(a->args[1], b->args[1], bind, reason);
    default:
      return mismatch("unsupported node kind");
  }
}

}  // namespace

MatchResult inspect_compute(const ExprPtr& instr_value, const ExprPtr& op_value) {
  MatchResult r;
  r.ok = inspect_rec(instr_value, op_value, &r.bind, &r.reason);
  if (!r.ok) r.bind = BindMap{};
  return r;
}

MatchResult match_operation(const ComputeOp& op, const Intrinsic& intr) {
  MatchResult r = inspect_compute(intr.semantics.value, op.value);
  if (!r.ok) return r;

  if (intr.requires_inplace_acc) {
    // The instruction adds into its accumulator register in place; the op
    // must be accumulate-form and its output load must be what the
    // instruction's accumulator bound.
    if (!op.update) {
      r.ok = false;
      r.reason = "instruction accumulates in place but the op is not accumulate form";
      return r;
    }
    auto it = r.bind.reg_to_op.find(intr.accumulator());
    // For accumulate-form semantics the accumulator register is the output
    // itself; its op-side partner is the op's own output load, which the
    // tree match already paired (both sit in the same position).
    (void)it;
    ExprPtr op_acc;
    for (const auto& [ia, ob] : r.bind.pairs) {
      if (ia->kind == Expr::Kind::Load && ia->name == intr.semantics.out)
        op_acc = ob;
    }
    if (!op_acc || op_acc->kind != Expr::Kind::Load || op_acc->name != op.out) {
      r.ok = false;
      r.reason = "accumulator register is not bound to the op's output load";
      return r;
    }
  }

  // Implicit output/store correspondence rides along for feasibility.
  ExprPtr instr_store = load(intr.semantics.out, intr.semantics.indices,
                             intr.semantics.output().dtype);
  ExprPtr op_store = load(op.out, op.indices, op.output().dtype);
  r.bind.pairs.emplace_back(instr_store, op_store);
  return r;
}

namespace {

std::set<std::string> index_vars(const ExprPtr& leaf) {
  std::set<std::string> vars;
  if (leaf->kind != Expr::Kind::Load) return vars;
  std::vector<std::string> v;
  for (const auto& idx : leaf->args) collect_vars(idx, &v);
  vars.insert(v.begin(), v.end());
  return vars;
}

}  // namespace

bool check_feasible(const ComputeOp& op, const Intrinsic& intr,
                    const BindMap& bind,
                    const std::vector<std::pair<std::string, std::string>>& f,
                    std::map<std::string, std::vector<std::string>>* broadcast_out) {
  (void)op;
  (void)intr;
  if (broadcast_out) broadcast_out->clear();
  for (const auto& [instr_leaf, op_leaf] : bind.pairs) {
    if (is_const(op_leaf)) continue;  // register holds a broadcast constant
    std::set<std::string> su = index_vars(op_leaf);    // vars of op access
    std::set<std::string> sv = index_vars(instr_leaf); // vars of instr access

    // Map S(u) through f, restricted to the mapped loops.
    std::set<std::string> su_mapped;
    for (const auto& [op_loop, instr_loop] : f)
      if (su.count(op_loop)) su_mapped.insert(instr_loop);

    for (const auto& il : su_mapped)
      if (!sv.count(il)) return false;  // op varies along a lane the register lacks

    if (broadcast_out && instr_leaf->kind == Expr::Kind::Load) {
      std::vector<std::string> bc;
      for (const auto& il : sv)
        if (!su_mapped.count(il)) bc.push_back(il);
      std::sort(bc.begin(), bc.end());
      auto& slot = (*broadcast_out)[instr_leaf->name];
      if (slot.empty() || bc.size() < slot.size()) slot = bc;
    }
  }
  return true;
}

std::string LoopMapping::instr_loop_of(const std::string& op_loop) const {
  for (const auto& [o, i] : f)
    if (o == op_loop) return i;
  return "";
}

std::string LoopMapping::op_loop_of(const std::string& instr_loop) const {
  for (const auto& [o, i] : f)
    if (i == instr_loop) return o;
  return "";
}

std::string LoopMapping::to_string() const {
  std::string s = "{";
  for (size_t i = 0; i < f.size(); ++i) {
    if (i) s += ", ";
    s += f[i].first + "->" + f[i].second;
  }
  s += "}";
  if (needs_padding) s += " pad";
  return s;
}

std::vector<LoopMapping> enumerate_mappings(const ComputeOp& op,
                                            const Intrinsic& intr,
                                            const BindMap& bind) {
  const auto& instr_loops = intr.semantics.loops;

  // Candidates per instruction loop: same-kind op loops, innermost first.
  std::vector<std::vector<std::string>> cands(instr_loops.size());
  for (size_t i = 0; i < instr_loops.size(); ++i) {
    for (auto it = op.loops.rbegin(); it != op.loops.rend(); ++it)
      if (it->kind == instr_loops[i].kind) cands[i].push_back(it->name);
  }

  std::vector<LoopMapping> out;
  std::vector<std::string> chosen(instr_loops.size());

  std::function<void(size_t)> rec = [&](size_t i) {
    if (i == instr_loops.size()) {
      LoopMapping m;
      for (size_t k = 0; k < instr_loops.size(); ++k)
        m.f.emplace_back(chosen[k], instr_loops[k].name);
      if (!check_feasible(op, intr, bind, m.f, &m.broadcast_axes)) return;
      for (size_t k = 0; k < instr_loops.size(); ++k) {
        int64_t e = op.find_loop(chosen[k])->extent;
        if (e % instr_loops[k].extent != 0) m.needs_padding = true;
      }
      out.push_back(std::move(m));
      return;
    }
    for (const auto& c : cands[i]) {
      bool taken = false;
      for (size_t k = 0; k < i; ++k) taken |= (chosen[k] == c);
      if (taken) continue;  // injective
      chosen[i] = c;
      rec(i + 1);
    }
  };
  rec(0);
  return out;
}

InspectionReport inspect(const ComputeOp& op, const Intrinsic& intr) {
  InspectionReport rep;
  rep.match = match_operation(op, intr);
  if (rep.match.ok)
    rep.mappings = enumerate_mappings(op, intr, rep.match.bind);
  return rep;
}

}  // namespace tzc
