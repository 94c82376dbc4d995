#include "tzc/vm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>

#include "tzc/errors.hpp"

namespace tzc {

// ===== TensorValue ===========================================================

TensorValue TensorValue::zeros(DType t, std::vector<int64_t> shape) {
  TensorValue v;
  v.dtype = t.scalar();
  v.shape = std::move(shape);
  if (v.is_float())
    v.fdata.assign(v.size(), 0.0);
  else
    v.idata.assign(v.size(), 0);
  return v;
}

int64_t TensorValue::size() const {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

// ===== random fill ===========================================================

TensorValue random_tensor(const TensorDecl& decl, uint64_t seed) {
  TensorValue v = TensorValue::zeros(decl.dtype, decl.shape);
  std::mt19937_64 rng(seed);
  if (v.is_float()) {
    for (auto& x : v.fdata) {
      double d = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
      x = decl.dtype.bits == 16 ? round_f16(d) : round_f32(d);
    }
  } else {
    // Full value range of the declared width (distribution arithmetic kept
    // explicit so streams are identical across standard libraries).
    uint64_t span = decl.dtype.bits >= 64 ? 0 : (uint64_t(1) << decl.dtype.bits);
    int64_t lo = decl.dtype.is_signed()
                     ? -(int64_t(1) << (decl.dtype.bits - 1))
                     : 0;
    for (auto& x : v.idata)
      x = lo + static_cast<int64_t>(span ? rng() % span : rng());
  }
  return v;
}

Inputs random_inputs(const ComputeOp& op, uint64_t seed) {
  Inputs in;
  uint64_t k = 0;
  for (const auto& td : op.tensors) {
    bool needed = td.role == Role::Input || (td.name == op.out && op.update);
    if (needed) in.emplace(td.name, random_tensor(td, seed + k));
    ++k;
  }
  return in;
}

// ===== expression evaluation =================================================

namespace {

struct Scalar {
  int64_t i = 0;
  double f = 0.0;
};

int64_t float_to_int(double f) {
  if (std::isnan(f)) return 0;
  if (f >= 0x1.0p63) return std::numeric_limits<int64_t>::max();
  if (f <= -0x1.0p63) return std::numeric_limits<int64_t>::min();
  return static_cast<int64_t>(std::trunc(f));
}

double round_float(double x, const DType& t) {
  return t.bits == 16 ? round_f16(x) : round_f32(x);
}

// Walks statement trees and expressions against named buffers. The same
// engine backs the reference interpreter, the lowered-tree interpreter and
// the dynamic cost tally (counter pointers may be null).
class Evaluator {
 public:
  explicit Evaluator(std::map<std::string, TensorValue>* bufs,
                     const TensorIR* ir = nullptr, CostReport* cost = nullptr)
      : bufs_(bufs), ir_(ir), cost_(cost) {}

  int64_t var_slot(const std::string& name) {
    auto it = slot_by_name_.find(name);
    if (it != slot_by_name_.end()) return it->second;
    int64_t s = static_cast<int64_t>(env_.size());
    slot_by_name_.emplace(name, s);
    env_.push_back(0);
    return s;
  }
  void set_var(int64_t slot, int64_t v) { env_[slot] = v; }

  TensorValue& buffer(const std::string& name) {
    auto it = bufs_->find(name);
    if (it == bufs_->end()) throw MissingInput("no buffer named '" + name + "'");
    return it->second;
  }

  Scalar eval(const ExprPtr& e) {
    switch (e->kind) {
      case Expr::Kind::IntImm:
        return {wrap_int(e->ival, e->dtype), 0.0};
      case Expr::Kind::FloatImm:
        return {0, round_float(e->fval, e->dtype)};
      case Expr::Kind::Var: {
        auto it = node_slot_.find(e.get());
        int64_t s = it != node_slot_.end()
                        ? it->second
                        : node_slot_.emplace(e.get(), var_slot(e->name))
                              .first->second;
        return {env_[s], 0.0};
      }
      case Expr::Kind::Load: {
        TensorValue& b = node_buffer(e);
        int64_t flat = flat_of(e, b);
        if (cost_) ++cost_->load_count;
        return b.is_float() ? Scalar{0, b.fdata[flat]}
                            : Scalar{b.idata[flat], 0.0};
      }
      case Expr::Kind::Cast: {
        Scalar s = eval(e->args[0]);
        const DType& from = e->args[0]->dtype;
        if (e->dtype.is_float())
          return {0, round_float(from.is_float() ? s.f
                                                 : static_cast<double>(s.i),
                                 e->dtype)};
        return {wrap_int(from.is_float() ? float_to_int(s.f) : s.i, e->dtype),
                0.0};
      }
      case Expr::Kind::Add: {
        Scalar a = eval(e->args[0]), b = eval(e->args[1]);
        if (e->dtype.is_float()) return {0, round_float(a.f + b.f, e->dtype)};
        return {wrap_int(static_cast<int64_t>(static_cast<uint64_t>(a.i) +
                                              static_cast<uint64_t>(b.i)),
                         e->dtype),
                0.0};
      }
      case Expr::Kind::Mul: {
        Scalar a = eval(e->args[0]), b = eval(e->args[1]);
        // Multiplies that only compute addresses are bookkeeping, not work:
        // the MAC counter tracks value arithmetic alone.
        if (cost_ && addr_depth_ == 0) ++cost_->scalar_mac_count;
        if (e->dtype.is_float()) return {0, round_float(a.f * b.f, e->dtype)};
        return {wrap_int(static_cast<int64_t>(static_cast<uint64_t>(a.i) *
                                              static_cast<uint64_t>(b.i)),
                         e->dtype),
                0.0};
      }
      case Expr::Kind::FloorDiv: {
        int64_t a = eval(e->args[0]).i, b = eval(e->args[1]).i;
        internal_check(b != 0, "division by zero");
        int64_t q = a / b, r = a % b;
        if (r != 0 && (r < 0) != (b < 0)) --q;
        return {wrap_int(q, e->dtype), 0.0};
      }
      case Expr::Kind::FloorMod: {
        int64_t a = eval(e->args[0]).i, b = eval(e->args[1]).i;
        internal_check(b != 0, "modulo by zero");
        int64_t r = a % b;
        if (r != 0 && (r < 0) != (b < 0)) r += b;
        return {wrap_int(r, e->dtype), 0.0};
      }
      default:
        throw InternalError("vector node in scalar context");
    }
  }

  // Marks an expression evaluation as address arithmetic for the duration of
  // a scope, so Mul nodes inside it are excluded from the MAC tally.
  struct AddrScope {
    explicit AddrScope(Evaluator* e) : ev(e) { ++ev->addr_depth_; }
    ~AddrScope() { --ev->addr_depth_; }
    Evaluator* ev;
  };

  // Integer lanes of a vector (or scalar) address expression. Each scalar
  // sub-expression is evaluated exactly once.
  void eval_lanes(const ExprPtr& e, std::vector<int64_t>* out) {
    AddrScope in_addr(this);
    switch (e->kind) {
      case Expr::Kind::Ramp: {
        std::vector<int64_t> base;
        eval_lanes(e->args[0], &base);
        out->reserve(out->size() + base.size() * e->lanes_arg);
        for (int64_t b : base)
          for (int64_t k = 0; k < e->lanes_arg; ++k)
            out->push_back(b + e->ival * k);
        return;
      }
      case Expr::Kind::Broadcast: {
        std::vector<int64_t> child;
        eval_lanes(e->args[0], &child);
        out->reserve(out->size() + child.size() * e->lanes_arg);
        for (int64_t k = 0; k < e->lanes_arg; ++k)
          out->insert(out->end(), child.begin(), child.end());
        return;
      }
      case Expr::Kind::Concat:
        for (const auto& p : e->args) eval_lanes(p, out);
        return;
      default:
        out->push_back(eval(e).i);
        return;
    }
  }

  // Gathers the register image of one intrinsic operand.
  TensorValue gather(const ExprPtr& arg, const TensorDecl& reg) {
    TensorValue v = TensorValue::zeros(reg.dtype, reg.shape);
    if (arg->kind == Expr::Kind::Load) {
      TensorValue& b = buffer(arg->name);
      internal_check(arg->args.size() == 1, "vector load takes one index");
      std::vector<int64_t> addr;
      eval_lanes(arg->args[0], &addr);
      internal_check(static_cast<int64_t>(addr.size()) == reg.size(),
                     "gather lane count mismatch");
      for (size_t k = 0; k < addr.size(); ++k) {
        bounds_check(b, addr[k], arg->name);
        if (v.is_float())
          v.fdata[k] = b.fdata[addr[k]];
        else
          v.idata[k] = b.idata[addr[k]];
      }
      if (cost_) cost_->load_count += static_cast<int64_t>(addr.size());
      return v;
    }
    if (arg->kind == Expr::Kind::Broadcast && is_const(arg->args[0])) {
      Scalar s = eval(arg->args[0]);
      for (int64_t k = 0; k < reg.size(); ++k) {
        if (v.is_float())
          v.fdata[k] = s.f;
        else
          v.idata[k] = s.i;
      }
      return v;
    }
    throw InternalError("unsupported intrinsic operand form");
  }

  void exec(const StmtPtr& s);

  const std::unordered_map<std::string, int64_t>& unrolled() const {
    return unrolled_;
  }

 private:
  TensorValue& node_buffer(const ExprPtr& e) {
    auto it = node_buf_.find(e.get());
    if (it != node_buf_.end()) return *it->second;
    TensorValue* b = &buffer(e->name);
    node_buf_.emplace(e.get(), b);
    return *b;
  }

  static void bounds_check(const TensorValue& b, int64_t flat,
                           const std::string& name) {
    if (flat < 0 || flat >= b.size())
      throw ShapeError("access to '" + name + "' out of bounds: " +
                       std::to_string(flat) + " not in [0, " +
                       std::to_string(b.size()) + ")");
  }

  int64_t flat_of(const ExprPtr& e, const TensorValue& b) {
    internal_check(e->args.size() == b.shape.size(),
                   "rank mismatch on access to '" + e->name + "'");
    AddrScope in_addr(this);
    int64_t flat = 0;
    for (size_t d = 0; d < e->args.size(); ++d)
      flat = flat * b.shape[d] + eval(e->args[d]).i;
    bounds_check(b, flat, e->name);
    return flat;
  }

  std::map<std::string, TensorValue>* bufs_;
  const TensorIR* ir_;
  CostReport* cost_;
  int addr_depth_ = 0;
  std::vector<int64_t> env_;
  std::unordered_map<std::string, int64_t> slot_by_name_;
  std::unordered_map<const Expr*, int64_t> node_slot_;
  std::unordered_map<const Expr*, TensorValue*> node_buf_;
  std::unordered_map<std::string, int64_t> unrolled_;  // loop var -> extent
};

const Intrinsic& resolve_called(const TensorIR* ir, const std::string& name) {
  if (ir) {
    const Intrinsic* found = ir->find_intrinsic(name);
    if (found) return *found;
  }
  return builtin(name);
}

void Evaluator::exec(const StmtPtr& s) {
  switch (s->kind) {
    case Stmt::Kind::For: {
      if (cost_) {
        if (s->ann == LoopAnn::Parallel)
          cost_->parallel_credit = std::max(cost_->parallel_credit, s->extent);
        if (s->ann == LoopAnn::Unrolled) unrolled_[s->var] = s->extent;
      }
      int64_t slot = var_slot(s->var);
      for (int64_t v = 0; v < s->extent; ++v) {
        set_var(slot, v);
        exec(s->body);
      }
      return;
    }
    case Stmt::Kind::Store: {
      TensorValue& buf = buffer(s->tensor);
      internal_check(s->indices.size() == buf.shape.size(),
                     "store rank mismatch on '" + s->tensor + "'");
      int64_t flat = 0;
      {
        AddrScope in_addr(this);
        for (size_t d = 0; d < s->indices.size(); ++d)
          flat = flat * buf.shape[d] + eval(s->indices[d]).i;
      }
      bounds_check(buf, flat, s->tensor);
      Scalar v = eval(s->value);
      if (buf.is_float())
        buf.fdata[flat] = v.f;
      else
        buf.idata[flat] = v.i;
      if (cost_) ++cost_->store_count;
      return;
    }
    case Stmt::Kind::Intrinsic: {
      const Intrinsic& intr = resolve_called(ir_, s->intrinsic);
      const ComputeOp& sem = intr.semantics;

      std::vector<int64_t> dst_addr;
      eval_lanes(s->dst_index, &dst_addr);
      TensorValue& dst = buffer(s->tensor);
      internal_check(static_cast<int64_t>(dst_addr.size()) ==
                         sem.output().size(),
                     "scatter lane count mismatch");
      for (int64_t a : dst_addr) bounds_check(dst, a, s->tensor);

      Inputs regs;
      size_t ai = 0;
      for (const auto& td : sem.tensors) {
        if (td.role != Role::Input) continue;
        internal_check(ai < s->args.size(), "intrinsic call missing operands");
        regs.emplace(td.name, gather(s->args[ai++], td));
      }
      if (sem.update) {
        // In-place accumulator: seed the output register from the
        // destination lanes.
        TensorValue seed = TensorValue::zeros(sem.output().dtype,
                                              sem.output().shape);
        for (size_t k = 0; k < dst_addr.size(); ++k) {
          if (seed.is_float())
            seed.fdata[k] = dst.fdata[dst_addr[k]];
          else
            seed.idata[k] = dst.idata[dst_addr[k]];
        }
        if (cost_) cost_->load_count += static_cast<int64_t>(dst_addr.size());
        regs.emplace(sem.out, std::move(seed));
      }

      TensorValue result = eval_reference(sem, regs);
      for (size_t k = 0; k < dst_addr.size(); ++k) {
        if (dst.is_float())
          dst.fdata[dst_addr[k]] = result.fdata[k];
        else
          dst.idata[dst_addr[k]] = result.idata[k];
      }
      if (cost_) {
        cost_->store_count += static_cast<int64_t>(dst_addr.size());
        ++cost_->intrinsic_calls[s->intrinsic];
        ++cost_->intrinsic_call_count;
      }
      return;
    }
    case Stmt::Kind::Seq:
      for (const auto& p : s->stmts) exec(p);
      return;
  }
  throw InternalError("unhandled statement kind");
}

}  // namespace

// ===== interpreters ==========================================================

namespace {

void check_input_shape(const TensorDecl& td, const TensorValue& v) {
  if (v.dtype != td.dtype.scalar() || v.shape != td.shape) {
    std::string want = dtype_name(td.dtype) + "[";
    for (size_t i = 0; i < td.shape.size(); ++i)
      want += (i ? "," : "") + std::to_string(td.shape[i]);
    throw ShapeError("input '" + td.name + "' does not match its declaration " +
                     want + "]");
  }
}

std::map<std::string, TensorValue> bind_buffers(
    const std::vector<TensorDecl>& tensors, const std::vector<std::string>& temps,
    const std::string& output, bool seed_output, const Inputs& inputs) {
  std::map<std::string, TensorValue> bufs;
  for (const auto& td : tensors) {
    bool is_temp =
        std::find(temps.begin(), temps.end(), td.name) != temps.end();
    bool is_out = td.name == output;
    auto it = inputs.find(td.name);
    if (is_temp) {
      bufs.emplace(td.name, TensorValue::zeros(td.dtype, td.shape));
    } else if (is_out) {
      if (seed_output && it != inputs.end()) {
        check_input_shape(td, it->second);
        bufs.emplace(td.name, it->second);
      } else {
        bufs.emplace(td.name, TensorValue::zeros(td.dtype, td.shape));
      }
    } else {
      if (it == inputs.end())
        throw MissingInput("missing input tensor '" + td.name + "'");
      check_input_shape(td, it->second);
      bufs.emplace(td.name, it->second);
    }
  }
  return bufs;
}

}  // namespace

TensorValue eval_reference(const ComputeOp& op, const Inputs& inputs) {
  auto bufs = bind_buffers(op.tensors, {}, op.out, op.update, inputs);
  Evaluator ev(&bufs);

  auto dps = op.loops_of_kind(LoopKind::DataParallel);
  auto reds = op.loops_of_kind(LoopKind::Reduction);
  ReduceForm rf = reduce_form(op);
  TensorValue& out = bufs.find(op.out)->second;
  DType out_dt = op.output().dtype;

  std::vector<int64_t> dp_slot, red_slot;
  for (const auto& l : dps) dp_slot.push_back(ev.var_slot(l.name));
  for (const auto& l : reds) red_slot.push_back(ev.var_slot(l.name));

  std::vector<int64_t> dp(dps.size(), 0), red;
  for (;;) {
    for (size_t i = 0; i < dp.size(); ++i) ev.set_var(dp_slot[i], dp[i]);

    int64_t flat = 0;
    for (size_t d = 0; d < op.indices.size(); ++d)
      flat = flat * out.shape[d] + ev.eval(op.indices[d]).i;
    internal_check(flat >= 0 && flat < out.size(), "store out of bounds");

    if (!rf.term) {
      // No reduction: store the (possibly accumulate-form) value directly.
      Scalar v = ev.eval(op.value);
      if (out.is_float())
        out.fdata[flat] = v.f;
      else
        out.idata[flat] = v.i;
    } else {
      Scalar acc;
      if (op.update) {
        acc = out.is_float() ? Scalar{0, out.fdata[flat]}
                             : Scalar{out.idata[flat], 0.0};
      } else if (rf.init) {
        acc = ev.eval(rf.init);
      }
      red.assign(reds.size(), 0);
      for (;;) {
        for (size_t i = 0; i < red.size(); ++i) ev.set_var(red_slot[i], red[i]);
        Scalar t = ev.eval(rf.term);
        if (out_dt.is_float())
          acc.f = round_float(acc.f + t.f, out_dt);
        else
          acc.i = wrap_int(static_cast<int64_t>(static_cast<uint64_t>(acc.i) +
                                                static_cast<uint64_t>(t.i)),
                           out_dt);
        size_t k = red.size();
        while (k > 0 && ++red[k - 1] == reds[k - 1].extent) red[--k] = 0;
        if (k == 0) break;
      }
      if (out.is_float())
        out.fdata[flat] = acc.f;
      else
        out.idata[flat] = acc.i;
    }

    if (dp.empty()) break;
    size_t k = dp.size();
    while (k > 0 && ++dp[k - 1] == dps[k - 1].extent) dp[--k] = 0;
    if (k == 0) break;
  }
  return out;
}

TensorValue eval_tir(const TensorIR& ir, const Inputs& inputs) {
  auto bufs =
      bind_buffers(ir.tensors, ir.temps, ir.output, ir.seed_output, inputs);
  Evaluator ev(&bufs, &ir);
  ev.exec(ir.root);
  return bufs.find(ir.output)->second;
}

// ===== cost accounting =======================================================

std::string CostReport::to_string() const {
  std::string s = "macs=" + std::to_string(scalar_mac_count) +
                  " loads=" + std::to_string(load_count) +
                  " stores=" + std::to_string(store_count) + " calls=" +
                  std::to_string(intrinsic_call_count);
  for (const auto& [n, c] : intrinsic_calls)
    s += " " + n + "=" + std::to_string(c);
  s += " parallel=" + std::to_string(parallel_credit) +
       " unroll=" + std::to_string(unroll_depth);
  return s;
}

CostReport measure(const TensorIR& ir, const Inputs& inputs) {
  auto bufs =
      bind_buffers(ir.tensors, ir.temps, ir.output, ir.seed_output, inputs);
  CostReport cost;
  Evaluator ev(&bufs, &ir, &cost);
  ev.exec(ir.root);
  for (const auto& kv : ev.unrolled()) cost.unroll_depth *= kv.second;
  return cost;
}

namespace {

// Static expression weights; these mirror exactly what the evaluator tallies
// when it walks the same expression once. Multiplies inside address
// computations (load/store indices, vector lane addresses) are not MACs.
void expr_weights(const ExprPtr& e, bool addr, int64_t* muls, int64_t* loads) {
  switch (e->kind) {
    case Expr::Kind::Mul:
      if (!addr) ++*muls;
      break;
    case Expr::Kind::Load:
      *loads += lanes_of(e);
      for (const auto& a : e->args) expr_weights(a, true, muls, loads);
      return;
    default:
      break;
  }
  for (const auto& a : e->args) expr_weights(a, addr, muls, loads);
}

void static_walk(const TensorIR& ir, const StmtPtr& s, int64_t mult,
                 CostReport* cost,
                 std::map<std::string, int64_t>* unrolled) {
  switch (s->kind) {
    case Stmt::Kind::For:
      if (s->ann == LoopAnn::Parallel)
        cost->parallel_credit = std::max(cost->parallel_credit, s->extent);
      if (s->ann == LoopAnn::Unrolled) (*unrolled)[s->var] = s->extent;
      static_walk(ir, s->body, mult * s->extent, cost, unrolled);
      return;
    case Stmt::Kind::Store: {
      int64_t muls = 0, loads = 0;
      for (const auto& i : s->indices) expr_weights(i, true, &muls, &loads);
      expr_weights(s->value, false, &muls, &loads);
      cost->scalar_mac_count += mult * muls;
      cost->load_count += mult * loads;
      cost->store_count += mult;
      return;
    }
    case Stmt::Kind::Intrinsic: {
      const Intrinsic& intr = resolve_called(&ir, s->intrinsic);
      int64_t muls = 0, loads = 0;
      expr_weights(s->dst_index, true, &muls, &loads);
      for (const auto& a : s->args) expr_weights(a, true, &muls, &loads);
      if (intr.semantics.update) loads += intr.semantics.output().size();
      cost->scalar_mac_count += mult * muls;
      cost->load_count += mult * loads;
      cost->store_count += mult * intr.semantics.output().size();
      cost->intrinsic_calls[s->intrinsic] += mult;
      cost->intrinsic_call_count += mult;
      return;
    }
    case Stmt::Kind::Seq:
      for (const auto& p : s->stmts) static_walk(ir, p, mult, cost, unrolled);
      return;
  }
  throw InternalError("unhandled statement kind");
}

}  // namespace

CostReport measure_static(const TensorIR& ir) {
  CostReport cost;
  std::map<std::string, int64_t> unrolled;
  static_walk(ir, ir.root, 1, &cost, &unrolled);
  for (const auto& kv : unrolled) cost.unroll_depth *= kv.second;
  return cost;
}

CostKey cost_key(const CostReport& r, const CostModel& m) {
  int64_t issues = r.intrinsic_call_count + r.scalar_mac_count;
  int64_t credit = std::min(r.parallel_credit, m.cores);
  int64_t unroll_dist = std::llabs(r.unroll_depth - m.unroll_target);
  return {issues, -credit, unroll_dist};
}

std::string cost_key_to_string(const CostKey& k) {
  return "(" + std::to_string(std::get<0>(k)) + ", " +
         std::to_string(std::get<1>(k)) + ", " +
         std::to_string(std::get<2>(k)) + ")";
}

// ===== comparison ============================================================

Deviation compare(const TensorValue& ref, const TensorValue& got, double rtol) {
  if (ref.dtype != got.dtype || ref.shape != got.shape)
    throw ShapeError("compared tensors differ in dtype or shape");
  Deviation d;
  for (int64_t k = 0; k < ref.size(); ++k) {
    double a = ref.is_float() ? ref.fdata[k] : static_cast<double>(ref.idata[k]);
    double b = got.is_float() ? got.fdata[k] : static_cast<double>(got.idata[k]);
    if (a != b) d.bitexact = false;
    double rel = std::abs(a - b) / std::max(std::abs(a), 1.0);
    d.max_rel = std::max(d.max_rel, rel);
    if (rel > rtol) ++d.mismatches;
  }
  return d;
}

// ===== embedding / slicing ===================================================

namespace {

void copy_region(const TensorValue& src, TensorValue* dst,
                 const std::vector<int64_t>& region) {
  std::vector<int64_t> idx(region.size(), 0);
  if (region.empty() || src.size() == 0 || dst->size() == 0) return;
  for (;;) {
    int64_t sf = 0, df = 0;
    for (size_t d = 0; d < idx.size(); ++d) {
      sf = sf * src.shape[d] + idx[d];
      df = df * dst->shape[d] + idx[d];
    }
    if (src.is_float())
      dst->fdata[df] = src.fdata[sf];
    else
      dst->idata[df] = src.idata[sf];
    size_t k = idx.size();
    while (k > 0 && ++idx[k - 1] == region[k - 1]) idx[--k] = 0;
    if (k == 0) break;
  }
}

}  // namespace

TensorValue embed(const TensorValue& v, const std::vector<int64_t>& shape) {
  if (shape.size() != v.shape.size())
    throw ShapeError("embed: rank mismatch");
  for (size_t d = 0; d < shape.size(); ++d)
    if (shape[d] < v.shape[d]) throw ShapeError("embed: target dim too small");
  TensorValue r = TensorValue::zeros(v.dtype, shape);
  copy_region(v, &r, v.shape);
  return r;
}

TensorValue slice(const TensorValue& v, const std::vector<int64_t>& shape) {
  if (shape.size() != v.shape.size())
    throw ShapeError("slice: rank mismatch");
  for (size_t d = 0; d < shape.size(); ++d)
    if (shape[d] > v.shape[d]) throw ShapeError("slice: target dim too large");
  TensorValue r = TensorValue::zeros(v.dtype, shape);
  copy_region(v, &r, shape);
  return r;
}

// ===== container i/o =========================================================

namespace {

constexpr char kMagic[4] = {'T', 'N', 'S', 'R'};
constexpr uint8_t kVersion = 1;

uint8_t dtype_code(const DType& t) {
  if (t == kU8) return 0;
  if (t == kI8) return 1;
  if (t == kU16) return 2;
  if (t == kI16) return 3;
  if (t == kU32) return 4;
  if (t == kI32) return 5;
  if (t == kF16) return 6;
  if (t == kF32) return 7;
  throw IoError("tensor container does not support dtype " + dtype_name(t));
}

DType dtype_from_code(uint8_t c) {
  switch (c) {
    case 0: return kU8;
    case 1: return kI8;
    case 2: return kU16;
    case 3: return kI16;
    case 4: return kU32;
    case 5: return kI32;
    case 6: return kF16;
    case 7: return kF32;
  }
  throw IoError("unknown dtype code " + std::to_string(c));
}

void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw IoError("truncated tensor container");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_bits(std::ostream& os, uint64_t v, int bytes) {
  char b[8];
  for (int i = 0; i < bytes; ++i)
    b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, bytes);
}

uint64_t get_bits(std::istream& is, int bytes) {
  unsigned char b[8] = {0};
  is.read(reinterpret_cast<char*>(b), bytes);
  if (!is) throw IoError("truncated tensor container");
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_tensor(std::ostream& os, const TensorValue& v) {
  os.write(kMagic, 4);
  os.put(static_cast<char>(kVersion));
  os.put(static_cast<char>(dtype_code(v.dtype)));
  os.put(static_cast<char>(v.shape.size()));
  for (int64_t d : v.shape) put_u64(os, static_cast<uint64_t>(d));
  int bytes = v.dtype.bits / 8;
  if (v.dtype == kF16) {
    for (double x : v.fdata) put_bits(os, f64_to_f16_bits(x), 2);
  } else if (v.dtype == kF32) {
    for (double x : v.fdata) {
      float f = static_cast<float>(x);
      uint32_t u;
      std::memcpy(&u, &f, 4);
      put_bits(os, u, 4);
    }
  } else {
    for (int64_t x : v.idata)
      put_bits(os, static_cast<uint64_t>(wrap_int(x, v.dtype)), bytes);
  }
  if (!os) throw IoError("failed to write tensor container");
}

TensorValue read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw IoError("not a tensor container (bad magic)");
  int version = is.get();
  if (version != kVersion)
    throw IoError("unsupported tensor container version " +
                  std::to_string(version));
  DType t = dtype_from_code(static_cast<uint8_t>(is.get()));
  int rank = is.get();
  if (rank < 0 || !is) throw IoError("truncated tensor container");
  std::vector<int64_t> shape;
  for (int d = 0; d < rank; ++d)
    shape.push_back(static_cast<int64_t>(get_u64(is)));
  TensorValue v = TensorValue::zeros(t, shape);
  int bytes = t.bits / 8;
  if (t == kF16) {
    for (auto& x : v.fdata)
      x = f16_bits_to_f64(static_cast<uint16_t>(get_bits(is, 2)));
  } else if (t == kF32) {
    for (auto& x : v.fdata) {
      uint32_t u = static_cast<uint32_t>(get_bits(is, 4));
      float f;
      std::memcpy(&f, &u, 4);
      x = static_cast<double>(f);
    }
  } else {
    for (auto& x : v.idata) {
      uint64_t raw = get_bits(is, bytes);
      x = wrap_int(static_cast<int64_t>(raw), t);
    }
  }
  return v;
}

void save_tensor(const std::string& path, const TensorValue& v) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "' for writing");
  write_tensor(f, v);
}

TensorValue load_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open '" + path + "'");
  return read_tensor(f);
}

std::string tensor_to_text(const TensorValue& v, int64_t max_elems) {
  std::ostringstream os;
  os << dtype_name(v.dtype) << " [";
  for (size_t d = 0; d < v.shape.size(); ++d)
    os << (d ? ", " : "") << v.shape[d];
  os << "] =";
  os << std::setprecision(9);
  int64_t n = std::min<int64_t>(v.size(), max_elems);
  for (int64_t k = 0; k < n; ++k) {
    if (v.is_float())
      os << " " << v.fdata[k];
    else
      os << " " << v.idata[k];
  }
  if (n < v.size()) os << " ... (" << v.size() << " total)";
  return os.str();
}

}  // namespace tzc
