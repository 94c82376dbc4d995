#include "tzc/rewriter.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "tzc/errors.hpp"

namespace tzc {

// ===== schedule text =========================================================

std::string Transform::kind_name(Kind k) {
  switch (k) {
    case Kind::Pad: return "pad";
    case Kind::Split: return "split";
    case Kind::Reorder: return "reorder";
    case Kind::Fuse: return "fuse";
    case Kind::Parallel: return "parallel";
    case Kind::Unroll: return "unroll";
    case Kind::SplitReduction: return "split_reduction";
    case Kind::Pragma: return "pragma";
  }
  throw InternalError("unhandled transform kind");
}

std::string print_schedule(const Schedule& s) {
  std::string out;
  for (const auto& t : s) {
    out += Transform::kind_name(t.kind);
    switch (t.kind) {
      case Transform::Kind::Pad:
      case Transform::Kind::Split:
      case Transform::Kind::SplitReduction:
        out += " " + t.a + " " + std::to_string(t.factor);
        break;
      case Transform::Kind::Fuse:
        out += " " + t.a + " " + t.b;
        break;
      case Transform::Kind::Parallel:
      case Transform::Kind::Unroll:
        out += " " + t.a;
        break;
      case Transform::Kind::Reorder:
      case Transform::Kind::Pragma:
        for (const auto& n : t.names) out += " " + n;
        break;
    }
    out += "\n";
  }
  return out;
}

namespace {

int64_t parse_int_token(const std::string& tok, int line) {
  try {
    size_t pos = 0;
    int64_t v = std::stoll(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw SyntaxError("schedule line " + std::to_string(line) +
                      ": expected an integer, got '" + tok + "'");
  }
}

}  // namespace

Schedule parse_schedule(const std::string& text) {
  Schedule sched;
  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    if (auto h = raw.find('#'); h != std::string::npos) raw.resize(h);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;

    auto need = [&](size_t n) {
      if (tok.size() != n + 1)
        throw SyntaxError("schedule line " + std::to_string(lineno) + ": '" +
                          tok[0] + "' takes " + std::to_string(n) +
                          " argument(s)");
    };
    Transform t;
    if (tok[0] == "pad" || tok[0] == "split" || tok[0] == "split_reduction") {
      need(2);
      t.kind = tok[0] == "pad"     ? Transform::Kind::Pad
               : tok[0] == "split" ? Transform::Kind::Split
                                   : Transform::Kind::SplitReduction;
      t.a = tok[1];
      t.factor = parse_int_token(tok[2], lineno);
    } else if (tok[0] == "fuse") {
      need(2);
      t.kind = Transform::Kind::Fuse;
      t.a = tok[1];
      t.b = tok[2];
    } else if (tok[0] == "parallel" || tok[0] == "unroll") {
      need(1);
      t.kind = tok[0] == "parallel" ? Transform::Kind::Parallel
                                    : Transform::Kind::Unroll;
      t.a = tok[1];
    } else if (tok[0] == "reorder" || tok[0] == "pragma") {
      if (tok.size() < 2)
        throw SyntaxError("schedule line " + std::to_string(lineno) + ": '" +
                          tok[0] + "' needs at least one axis");
      t.kind = tok[0] == "reorder" ? Transform::Kind::Reorder
                                   : Transform::Kind::Pragma;
      t.names.assign(tok.begin() + 1, tok.end());
    } else {
      throw SyntaxError("schedule line " + std::to_string(lineno) +
                        ": unknown transform '" + tok[0] + "'");
    }
    sched.push_back(std::move(t));
  }
  return sched;
}

Schedule load_schedule(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open schedule file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_schedule(ss.str());
}

// ===== padding ===============================================================

namespace {

ExprPtr typed_zero(DType t) {
  return t.is_float() ? float_imm(0.0, t) : int_imm(0, t);
}

ExprPtr strip_casts(ExprPtr e) {
  while (e->kind == Expr::Kind::Cast) e = e->args[0];
  return e;
}

// Multiplicative factors of a reduction term, descending through Mul and
// Cast nodes only.
void mul_factors(const ExprPtr& e, std::vector<ExprPtr>* out) {
  ExprPtr s = strip_casts(e);
  if (s->kind == Expr::Kind::Mul) {
    mul_factors(s->args[0], out);
    mul_factors(s->args[1], out);
  } else {
    out->push_back(s);
  }
}

void collect_loads(const ExprPtr& e, std::vector<ExprPtr>* out) {
  if (e->kind == Expr::Kind::Load) out->push_back(e);
  for (const auto& a : e->args) collect_loads(a, out);
}

}  // namespace

ComputeOp pad_to_multiple(const ComputeOp& op, const std::string& loop,
                          int64_t multiple) {
  const LoopVar* lv = op.find_loop(loop);
  if (!lv) throw ScheduleError("pad: unknown loop '" + loop + "'");
  if (multiple < 1) throw ScheduleError("pad: multiple must be positive");
  int64_t old_extent = lv->extent;
  int64_t new_extent = (old_extent + multiple - 1) / multiple * multiple;
  if (new_extent == old_extent) return op;

  if (lv->kind == LoopKind::Reduction) {
    // The extra iterations must contribute exact zeros. That holds when the
    // reduction term has a multiplicative factor loading a zero-extended
    // buffer at an index that provably lands in the extension for every
    // padded iteration: min index = coeff*old_extent + constant (all other
    // loops at zero) already past the original dimension extent.
    ReduceForm rf = reduce_form(op);
    internal_check(rf.term != nullptr, "reduction loop without a term");
    std::vector<ExprPtr> factors;
    mul_factors(rf.term, &factors);
    bool guaranteed_zero = false;
    for (const auto& f : factors) {
      if (f->kind != Expr::Kind::Load) continue;
      const TensorDecl* td = op.find_tensor(f->name);
      if (!td || td->name == op.out) continue;
      for (size_t d = 0; d < f->args.size(); ++d) {
        auto af = linearize(f->args[d]);
        if (!af || !af->coeff.count(loop)) continue;
        bool nonneg = af->constant >= 0;
        for (const auto& [v, c] : af->coeff) nonneg &= c >= 0;
        if (!nonneg) continue;
        if (af->coeff[loop] * old_extent + af->constant >= td->shape[d])
          guaranteed_zero = true;
      }
    }
    if (!guaranteed_zero)
      throw PadUnsupported(
          "cannot pad reduction loop '" + loop +
          "': no term factor is guaranteed to read zero padding");
  }

  ComputeOp r = op;
  for (auto& l : r.loops)
    if (l.name == loop) l.extent = new_extent;

  // Grow every tensor dimension the loop indexes so all accesses stay in
  // bounds; the growth region is zero-filled by the embedding step.
  std::vector<ExprPtr> loads;
  collect_loads(r.value, &loads);
  loads.push_back(load(r.out, r.indices));
  for (const auto& acc : loads) {
    auto td = std::find_if(r.tensors.begin(), r.tensors.end(),
                           [&](const TensorDecl& t) { return t.name == acc->name; });
    internal_check(td != r.tensors.end(), "load of undeclared tensor");
    for (size_t d = 0; d < acc->args.size(); ++d) {
      if (!contains_var(acc->args[d], loop)) continue;
      auto af = linearize(acc->args[d]);
      if (!af)
        throw PadUnsupported("cannot pad loop '" + loop +
                             "' through a non-affine index");
      if (af->constant < 0)
        throw PadUnsupported("cannot pad loop '" + loop +
                             "' through a negative index offset");
      int64_t max_idx = af->constant;
      for (const auto& [v, c] : af->coeff) {
        if (c < 0)
          throw PadUnsupported("cannot pad loop '" + loop +
                               "' through a negative-stride index");
        const LoopVar* vl = r.find_loop(v);
        internal_check(vl != nullptr, "index uses unknown loop");
        max_idx += c * (vl->extent - 1);
      }
      td->shape[d] = std::max(td->shape[d], max_idx + 1);
    }
  }
  return r;
}

// ===== tensorize tiling ======================================================

TensorizedOp tile_and_reorder(const ComputeOp& op, const Intrinsic& intr,
                              const LoopMapping& mapping, bool allow_pad) {
  TensorizedOp t;
  t.original = op;
  t.mapping = mapping;

  ComputeOp cur = op;
  Schedule sched;
  for (const auto& [op_loop, instr_loop] : mapping.f) {
    const LoopVar* il = intr.semantics.find_loop(instr_loop);
    const LoopVar* ol = cur.find_loop(op_loop);
    internal_check(il && ol, "mapping names an unknown loop");
    if (ol->extent % il->extent != 0) {
      if (!allow_pad)
        throw DivisibilityError(
            "extent " + std::to_string(ol->extent) + " of loop '" + op_loop +
            "' is not a multiple of instruction extent " +
            std::to_string(il->extent) + " (pad to proceed)");
      Transform p;
      p.kind = Transform::Kind::Pad;
      p.a = op_loop;
      p.factor = il->extent;
      sched.push_back(p);
      cur = pad_to_multiple(cur, op_loop, il->extent);
    }
  }

  for (const auto& [op_loop, instr_loop] : mapping.f) {
    Transform s;
    s.kind = Transform::Kind::Split;
    s.a = op_loop;
    s.factor = intr.semantics.find_loop(instr_loop)->extent;
    sched.push_back(s);
  }

  for (const auto& l : cur.loops) {
    bool mapped = !mapping.instr_loop_of(l.name).empty();
    std::string n = mapped ? l.name + ".o" : l.name;
    (l.kind == LoopKind::DataParallel ? t.outer_dp : t.outer_red).push_back(n);
  }
  for (const auto& [op_loop, instr_loop] : mapping.f)
    t.pragma_axes.push_back(op_loop + ".i");

  Transform ro;
  ro.kind = Transform::Kind::Reorder;
  ro.names = t.outer_dp;
  ro.names.insert(ro.names.end(), t.outer_red.begin(), t.outer_red.end());
  ro.names.insert(ro.names.end(), t.pragma_axes.begin(), t.pragma_axes.end());
  sched.push_back(ro);

  Transform pg;
  pg.kind = Transform::Kind::Pragma;
  pg.names = t.pragma_axes;
  sched.push_back(pg);

  t.op = std::move(cur);
  t.schedule = std::move(sched);
  return t;
}

// ===== lowering ==============================================================

namespace {

struct Axis {
  std::string name;
  int64_t extent = 0;
  LoopKind kind = LoopKind::DataParallel;
  LoopAnn ann = LoopAnn::Serial;
};

struct SplitRedInfo {
  std::string seg, inner;
  int64_t count = 0;
};

struct LowerState {
  std::vector<Axis> axes;
  std::map<std::string, ExprPtr> subst;  // original loop var -> axis expr
  std::vector<std::string> pragma;
  std::optional<SplitRedInfo> sred;

  int find(const std::string& name) const {
    for (size_t i = 0; i < axes.size(); ++i)
      if (axes[i].name == name) return static_cast<int>(i);
    return -1;
  }
  int need(const std::string& name, const char* what) const {
    int i = find(name);
    if (i < 0)
      throw ScheduleError(std::string(what) + ": unknown axis '" + name + "'");
    return i;
  }
  void forbid(const std::string& name, const char* what) const {
    if (find(name) >= 0)
      throw ScheduleError(std::string(what) + ": axis name '" + name +
                          "' already exists");
  }
  void substitute_all(const std::map<std::string, ExprPtr>& m) {
    for (auto& [k, v] : subst) v = substitute(v, m);
  }
};

void apply_transform(LowerState& st, const Transform& t) {
  switch (t.kind) {
    case Transform::Kind::Pad:
      throw ScheduleError("pad transforms must come first in a schedule");

    case Transform::Kind::Split: {
      int j = st.need(t.a, "split");
      Axis ax = st.axes[j];
      if (t.factor < 1 || ax.extent % t.factor != 0)
        throw ScheduleError("split: factor " + std::to_string(t.factor) +
                            " does not divide extent " +
                            std::to_string(ax.extent) + " of axis '" + t.a +
                            "'");
      std::string no = t.a + ".o", ni = t.a + ".i";
      st.forbid(no, "split");
      st.forbid(ni, "split");
      st.axes[j] = {no, ax.extent / t.factor, ax.kind, LoopAnn::Serial};
      st.axes.insert(st.axes.begin() + j + 1,
                     {ni, t.factor, ax.kind, LoopAnn::Serial});
      st.substitute_all(
          {{t.a, add(mul(var(no), int_imm(t.factor)), var(ni))}});
      break;
    }

    case Transform::Kind::Fuse: {
      int j = st.need(t.a, "fuse");
      int k = st.need(t.b, "fuse");
      if (k != j + 1)
        throw ScheduleError("fuse: '" + t.b + "' must sit directly inside '" +
                            t.a + "'");
      if (st.axes[j].kind != st.axes[k].kind)
        throw ScheduleError("fuse: axes '" + t.a + "' and '" + t.b +
                            "' have different kinds");
      std::string n = t.a + "." + t.b + ".fused";
      st.forbid(n, "fuse");
      int64_t eb = st.axes[k].extent;
      Axis fused{n, st.axes[j].extent * eb, st.axes[j].kind, LoopAnn::Serial};
      st.axes[j] = fused;
      st.axes.erase(st.axes.begin() + k);
      st.substitute_all({{t.a, floordiv(var(n), int_imm(eb))},
                         {t.b, floormod(var(n), int_imm(eb))}});
      break;
    }

    case Transform::Kind::Reorder: {
      if (t.names.size() != st.axes.size())
        throw ScheduleError("reorder: needs all " +
                            std::to_string(st.axes.size()) + " axes");
      std::vector<Axis> next;
      std::set<std::string> seen;
      for (const auto& n : t.names) {
        if (!seen.insert(n).second)
          throw ScheduleError("reorder: duplicate axis '" + n + "'");
        next.push_back(st.axes[st.need(n, "reorder")]);
      }
      st.axes = std::move(next);
      break;
    }

    case Transform::Kind::Parallel: {
      Axis& ax = st.axes[st.need(t.a, "parallel")];
      if (ax.kind != LoopKind::DataParallel)
        throw ScheduleError("parallel: axis '" + t.a + "' is not data-parallel");
      if (ax.ann != LoopAnn::Serial)
        throw ScheduleError("parallel: axis '" + t.a + "' is already annotated");
      ax.ann = LoopAnn::Parallel;
      break;
    }

    case Transform::Kind::Unroll: {
      Axis& ax = st.axes[st.need(t.a, "unroll")];
      if (ax.ann != LoopAnn::Serial)
        throw ScheduleError("unroll: axis '" + t.a + "' is already annotated");
      ax.ann = LoopAnn::Unrolled;
      break;
    }

    case Transform::Kind::SplitReduction: {
      if (st.sred)
        throw ScheduleError("split_reduction: at most one per schedule");
      int j = st.need(t.a, "split_reduction");
      Axis ax = st.axes[j];
      if (ax.kind != LoopKind::Reduction)
        throw ScheduleError("split_reduction: axis '" + t.a +
                            "' is not a reduction axis");
      if (t.factor < 2 || ax.extent % t.factor != 0)
        throw ScheduleError("split_reduction: factor " +
                            std::to_string(t.factor) +
                            " does not divide extent " +
                            std::to_string(ax.extent) + " of axis '" + t.a +
                            "'");
      std::string seg = t.a + ".s", inner = t.a + ".r";
      st.forbid(seg, "split_reduction");
      st.forbid(inner, "split_reduction");
      int64_t chunk = ax.extent / t.factor;
      // The segment axis indexes independent partial sums, so it is
      // data-parallel from here on.
      st.axes[j] = {seg, t.factor, LoopKind::DataParallel, LoopAnn::Serial};
      st.axes.insert(st.axes.begin() + j + 1,
                     {inner, chunk, LoopKind::Reduction, LoopAnn::Serial});
      st.substitute_all({{t.a, add(mul(var(seg), int_imm(chunk)), var(inner))}});
      st.sred = SplitRedInfo{seg, inner, t.factor};
      break;
    }

    case Transform::Kind::Pragma: {
      if (!st.pragma.empty())
        throw ScheduleError("pragma: at most one per schedule");
      if (t.names.empty()) throw ScheduleError("pragma: needs axes");
      if (t.names.size() > st.axes.size())
        throw ScheduleError("pragma: more axes than the nest has");
      size_t base = st.axes.size() - t.names.size();
      for (size_t i = 0; i < t.names.size(); ++i) {
        if (st.axes[base + i].name != t.names[i])
          throw ScheduleError(
              "pragma: axes must be the innermost loops in the given order");
        if (st.axes[base + i].ann != LoopAnn::Serial)
          throw ScheduleError("pragma: axis '" + t.names[i] +
                              "' is already annotated");
        st.axes[base + i].ann = LoopAnn::Tensorize;
      }
      st.pragma = t.names;
      break;
    }
  }
}

StmtPtr stmt_substitute(const StmtPtr& s,
                        const std::map<std::string, ExprPtr>& m) {
  switch (s->kind) {
    case Stmt::Kind::For:
      return make_for(s->var, s->extent, stmt_substitute(s->body, m), s->ann);
    case Stmt::Kind::Store: {
      std::vector<ExprPtr> idx;
      for (const auto& e : s->indices) idx.push_back(substitute(e, m));
      return make_store(s->tensor, std::move(idx), substitute(s->value, m));
    }
    case Stmt::Kind::Intrinsic: {
      std::vector<ExprPtr> args;
      for (const auto& e : s->args) args.push_back(substitute(e, m));
      return make_intrinsic(s->intrinsic, s->tensor,
                            substitute(s->dst_index, m), std::move(args));
    }
    case Stmt::Kind::Seq: {
      std::vector<StmtPtr> parts;
      for (const auto& p : s->stmts) parts.push_back(stmt_substitute(p, m));
      return make_seq(std::move(parts));
    }
  }
  throw InternalError("unhandled statement kind");
}

std::string fresh_name(const std::string& base,
                       const std::set<std::string>& used) {
  std::string n = base;
  while (used.count(n)) n += "_";
  return n;
}

}  // namespace

TensorIR lower(const ComputeOp& op, const Schedule& schedule,
               const LowerOptions& opts) {
  // Leading pads reshape the op itself; everything after works on axes.
  ComputeOp cur = op;
  size_t i = 0;
  while (i < schedule.size() && schedule[i].kind == Transform::Kind::Pad) {
    cur = pad_to_multiple(cur, schedule[i].a, schedule[i].factor);
    ++i;
  }

  LowerState st;
  for (const auto& l : cur.loops) {
    st.axes.push_back({l.name, l.extent, l.kind, LoopAnn::Serial});
    st.subst[l.name] = var(l.name);
  }
  for (; i < schedule.size(); ++i) apply_transform(st, schedule[i]);

  if (!st.pragma.empty()) {
    // Later transforms may have displaced the tensorized loops; they must
    // still be the innermost nest, in the declared order.
    size_t base = st.axes.size() - st.pragma.size();
    for (size_t k = 0; k < st.pragma.size(); ++k)
      if (st.axes[base + k].name != st.pragma[k] ||
          st.axes[base + k].ann != LoopAnn::Tensorize)
        throw ScheduleError("pragma axes must remain the innermost loops");
  }

  ReduceForm rf = reduce_form(cur);
  bool has_red = !cur.loops_of_kind(LoopKind::Reduction).empty() || st.sred;
  DType out_dt = cur.output().dtype;

  TensorIR ir;
  ir.tensors = cur.tensors;
  ir.output = cur.out;
  ir.seed_output = cur.update;

  std::vector<ExprPtr> sidx;
  for (const auto& e : cur.indices) sidx.push_back(substitute(e, st.subst));

  // Main nest store.
  StmtPtr inner;
  if (st.sred) {
    internal_check(rf.term != nullptr, "reduction split without a term");
    std::string pname = cur.out + ".partial";
    for (const auto& td : ir.tensors)
      if (td.name == pname)
        throw ScheduleError("split_reduction: buffer name '" + pname +
                            "' is taken");
    TensorDecl pd;
    pd.name = pname;
    pd.shape.push_back(st.sred->count);
    for (int64_t d : cur.output().shape) pd.shape.push_back(d);
    pd.dtype = out_dt;
    pd.role = Role::Input;
    ir.tensors.push_back(pd);
    ir.temps.push_back(pname);

    std::vector<ExprPtr> pidx;
    pidx.push_back(var(st.sred->seg));
    for (const auto& e : sidx) pidx.push_back(e);
    ExprPtr term = substitute(rf.term, st.subst);
    inner = make_store(pname, pidx,
                       add(load(pname, pidx, out_dt), term));
  } else if (has_red) {
    ExprPtr term = substitute(rf.term, st.subst);
    inner = make_store(cur.out, sidx, add(load(cur.out, sidx, out_dt), term));
  } else {
    inner = make_store(cur.out, sidx, substitute(cur.value, st.subst));
  }

  for (auto it = st.axes.rbegin(); it != st.axes.rend(); ++it) {
    if (opts.literal_unroll && it->ann == LoopAnn::Unrolled) {
      std::vector<StmtPtr> copies;
      for (int64_t v = 0; v < it->extent; ++v)
        copies.push_back(stmt_substitute(inner, {{it->name, int_imm(v)}}));
      inner = make_seq(std::move(copies));
    } else {
      inner = make_for(it->name, it->extent, inner, it->ann);
    }
  }
  StmtPtr main_nest = inner;

  std::vector<StmtPtr> parts;

  // Output initialization for declared-init reductions (accumulate-form ops
  // are seeded from their input image instead).
  if (has_red && !cur.update) {
    ExprPtr iv = rf.init ? rf.init : typed_zero(out_dt);
    StmtPtr s = make_store(cur.out, cur.indices, iv);
    auto dps = cur.loops_of_kind(LoopKind::DataParallel);
    for (auto it = dps.rbegin(); it != dps.rend(); ++it)
      s = make_for(it->name, it->extent, s);
    parts.push_back(s);
  }

  if (st.sred) {
    const TensorDecl& pd = ir.tensors.back();
    std::set<std::string> used;
    for (const auto& a : st.axes) used.insert(a.name);
    for (const auto& l : cur.loops) used.insert(l.name);
    for (const auto& td : ir.tensors) used.insert(td.name);

    std::vector<std::string> zv;
    for (size_t d = 0; d < cur.output().shape.size(); ++d) {
      std::string n = fresh_name("z" + std::to_string(d), used);
      used.insert(n);
      zv.push_back(n);
    }
    std::vector<ExprPtr> zidx;
    for (const auto& n : zv) zidx.push_back(var(n));
    std::vector<ExprPtr> pzidx;
    pzidx.push_back(var(st.sred->seg));
    for (const auto& e : zidx) pzidx.push_back(e);

    // Zero the partial buffer.
    StmtPtr z = make_store(pd.name, pzidx, typed_zero(out_dt));
    for (size_t d = zv.size(); d-- > 0;)
      z = make_for(zv[d], cur.output().shape[d], z);
    z = make_for(st.sred->seg, st.sred->count, z);
    parts.push_back(z);

    parts.push_back(main_nest);

    // Second reduction: fold the partials into the output.
    StmtPtr fold = make_store(
        cur.out, zidx,
        add(load(cur.out, zidx, out_dt), load(pd.name, pzidx, out_dt)));
    fold = make_for(st.sred->seg, st.sred->count, fold);
    for (size_t d = zv.size(); d-- > 0;)
      fold = make_for(zv[d], cur.output().shape[d], fold);
    parts.push_back(fold);
  } else {
    parts.push_back(main_nest);
  }

  ir.root = make_seq(std::move(parts));
  return ir;
}

// ===== intrinsic injection ===================================================

namespace {

struct PragmaChain {
  std::vector<const Stmt*> fors;  // outermost first
  const Stmt* store = nullptr;
};

void find_pragma_roots(const StmtPtr& s, std::vector<const Stmt*>* out) {
  if (!s) return;
  if (s->kind == Stmt::Kind::For) {
    if (s->ann == LoopAnn::Tensorize) {
      out->push_back(s.get());
      return;
    }
    find_pragma_roots(s->body, out);
  } else if (s->kind == Stmt::Kind::Seq) {
    for (const auto& p : s->stmts) find_pragma_roots(p, out);
  }
}

PragmaChain find_pragma_chain(const TensorIR& ir) {
  std::vector<const Stmt*> roots;
  find_pragma_roots(ir.root, &roots);
  if (roots.empty())
    throw InjectError("no tensorize pragma nest in the lowered tree");
  if (roots.size() > 1)
    throw InjectError("more than one tensorize pragma nest");

  PragmaChain c;
  const Stmt* s = roots[0];
  while (s->kind == Stmt::Kind::For) {
    if (s->ann != LoopAnn::Tensorize)
      throw InjectError("non-pragma loop inside the tensorize nest");
    c.fors.push_back(s);
    s = s->body.get();
  }
  if (s->kind != Stmt::Kind::Store)
    throw InjectError("tensorize pragma nest must wrap a single scalar store");
  c.store = s;
  return c;
}

// Row-major flat address of a multi-dimensional access.
ExprPtr flat_index(const TensorDecl& d, const std::vector<ExprPtr>& idx) {
  internal_check(idx.size() == d.shape.size(), "rank mismatch in flatten");
  std::vector<int64_t> stride(d.shape.size(), 1);
  for (size_t k = d.shape.size(); k-- > 1;)
    stride[k - 1] = stride[k] * d.shape[k];
  ExprPtr acc;
  for (size_t k = 0; k < idx.size(); ++k) {
    ExprPtr term =
        stride[k] == 1 ? idx[k] : mul(idx[k], int_imm(stride[k]));
    acc = acc ? add(acc, term) : term;
  }
  return acc ? acc : int_imm(0);
}

ExprPtr shift_expr(const ExprPtr& e, int64_t delta) {
  if (delta == 0) return e;
  switch (e->kind) {
    case Expr::Kind::IntImm:
      return int_imm(e->ival + delta, e->dtype);
    case Expr::Kind::Ramp:
      return ramp(shift_expr(e->args[0], delta), e->ival, e->lanes_arg);
    case Expr::Kind::Broadcast:
      return broadcast(shift_expr(e->args[0], delta), e->lanes_arg);
    case Expr::Kind::Concat: {
      std::vector<ExprPtr> parts;
      for (const auto& p : e->args) parts.push_back(shift_expr(p, delta));
      return concat(std::move(parts));
    }
    default:
      return add(e, int_imm(delta));
  }
}

// Assembles a vector address from a scalar base and per-axis strides by
// walking the operand rules minor axis first.
ExprPtr build_vector_address(const ExprPtr& base,
                             const std::map<std::string, int64_t>& coeff,
                             const std::vector<OperandRule>& rules,
                             const std::map<std::string, std::string>& axis_of,
                             const std::string& what) {
  ExprPtr v = base;
  for (const auto& r : rules) {
    int64_t c = 0;
    if (r.kind != OperandRule::Kind::Passthrough) {
      auto ax = axis_of.find(r.loop);
      internal_check(ax != axis_of.end(), "rule names unknown loop");
      auto it = coeff.find(ax->second);
      if (it != coeff.end()) c = it->second;
    }
    switch (r.kind) {
      case OperandRule::Kind::Vectorize:
        v = ramp(v, c, r.count);
        break;
      case OperandRule::Kind::Broadcast:
        if (c != 0)
          throw InjectError(what + ": access varies along loop '" + r.loop +
                            "' but the rule replicates lanes there");
        v = broadcast(v, r.count);
        break;
      case OperandRule::Kind::UnrollConcat: {
        std::vector<ExprPtr> parts;
        for (int64_t k = 0; k < r.count; ++k)
          parts.push_back(shift_expr(v, c * k));
        v = concat(std::move(parts));
        break;
      }
      case OperandRule::Kind::Passthrough:
        break;
    }
  }
  return v;
}

StmtPtr replace_stmt(const StmtPtr& s, const Stmt* target, const StmtPtr& repl) {
  if (s.get() == target) return repl;
  switch (s->kind) {
    case Stmt::Kind::For: {
      StmtPtr b = replace_stmt(s->body, target, repl);
      return b == s->body ? s : make_for(s->var, s->extent, b, s->ann);
    }
    case Stmt::Kind::Seq: {
      std::vector<StmtPtr> parts;
      bool changed = false;
      for (const auto& p : s->stmts) {
        parts.push_back(replace_stmt(p, target, repl));
        changed |= parts.back() != p;
      }
      return changed ? make_seq(std::move(parts)) : s;
    }
    default:
      return s;
  }
}

}  // namespace

TensorIR inject_intrinsic(const TensorIR& ir, const Intrinsic& intr,
                          const LoopMapping& mapping) {
  const ComputeOp& sem = intr.semantics;
  PragmaChain chain = find_pragma_chain(ir);
  if (chain.fors.size() != sem.loops.size())
    throw InjectError("pragma nest has " + std::to_string(chain.fors.size()) +
                      " loops but the instruction has " +
                      std::to_string(sem.loops.size()));
  if (!mapping.f.empty() && mapping.f.size() != sem.loops.size())
    throw InjectError("mapping covers " + std::to_string(mapping.f.size()) +
                      " of " + std::to_string(sem.loops.size()) +
                      " instruction loops");

  std::map<std::string, std::string> axis_of;  // instr loop -> pragma axis
  std::vector<std::string> pragma_axes;
  for (size_t k = 0; k < chain.fors.size(); ++k) {
    const Stmt* f = chain.fors[k];
    const LoopVar& il = sem.loops[k];
    if (f->extent != il.extent)
      throw InjectError("pragma loop '" + f->var + "' has extent " +
                        std::to_string(f->extent) +
                        " but instruction loop '" + il.name + "' has " +
                        std::to_string(il.extent));
    if (il.kind != LoopKind::DataParallel &&
        il.kind != LoopKind::Reduction)
      throw InternalError("unhandled loop kind");
    axis_of[il.name] = f->var;
    pragma_axes.push_back(f->var);
  }

  const Stmt& store = *chain.store;
  MatchResult m = inspect_compute(sem.value, store.value);
  if (!m.ok)
    throw InjectError("pragma body does not match the instruction: " +
                      m.reason);

  // The accumulator operand must read exactly what the store writes, so the
  // replaced call performs the same read-modify-write.
  std::string acc = intr.accumulator();
  if (!acc.empty()) {
    ExprPtr acc_src;
    for (const auto& [ia, ob] : m.bind.pairs)
      if (ia->kind == Expr::Kind::Load && ia->name == acc) acc_src = ob;
    bool aliases = acc_src && acc_src->kind == Expr::Kind::Load &&
                   acc_src->name == store.tensor &&
                   acc_src->args.size() == store.indices.size();
    if (aliases)
      for (size_t d = 0; d < store.indices.size(); ++d)
        aliases &= expr_equal(acc_src->args[d], store.indices[d],
                              /*compare_dtype=*/false);
    if (!aliases)
      throw InjectError(
          "accumulator operand must read the store destination");
  }

  // Gather one vector operand per instruction input register.
  std::vector<ExprPtr> args;
  for (const auto& td : sem.tensors) {
    if (td.role != Role::Input) continue;
    auto bound = m.bind.reg_to_op.find(td.name);
    if (bound == m.bind.reg_to_op.end())
      throw InjectError("register '" + td.name + "' is not bound by the match");
    const ExprPtr& leaf = bound->second;
    int64_t regsize = td.size();
    if (is_const(leaf)) {
      args.push_back(broadcast(leaf, regsize));
      continue;
    }
    const std::vector<OperandRule>* rules = intr.rules_for(td.name);
    internal_check(rules != nullptr, "input register without operand rules");
    const TensorDecl* opd = ir.find_tensor(leaf->name);
    if (!opd)
      throw InjectError("operand tensor '" + leaf->name + "' is not declared");
    auto ls = split_linear(flat_index(*opd, leaf->args), pragma_axes);
    if (!ls)
      throw InjectError("access of '" + leaf->name +
                        "' is not linear in the pragma loops");
    ExprPtr addr = build_vector_address(ls->residual, ls->coeff, *rules,
                                        axis_of, "operand '" + td.name + "'");
    if (lanes_of(addr) != regsize)
      throw InjectError("operand '" + td.name + "' assembles " +
                        std::to_string(lanes_of(addr)) + " lanes, register holds " +
                        std::to_string(regsize));
    args.push_back(load(leaf->name, {addr},
                        opd->dtype.with_lanes(static_cast<int>(regsize))));
  }

  // Destination scatter pattern: the instruction's own store layout (minor
  // axis = last store dimension) applied to the op-side store address.
  const TensorDecl* dst_decl = ir.find_tensor(store.tensor);
  internal_check(dst_decl != nullptr, "store into undeclared tensor");
  auto ds = split_linear(flat_index(*dst_decl, store.indices), pragma_axes);
  if (!ds)
    throw InjectError("store address is not linear in the pragma loops");

  std::vector<OperandRule> store_rules;
  for (size_t d = sem.indices.size(); d-- > 0;) {
    const ExprPtr& ie = sem.indices[d];
    if (ie->kind != Expr::Kind::Var)
      throw InjectError("instruction store index must be a plain loop variable");
    const LoopVar* il = sem.find_loop(ie->name);
    internal_check(il != nullptr, "store index of unknown loop");
    auto cit = ds->coeff.find(axis_of.at(ie->name));
    if (cit == ds->coeff.end() || cit->second == 0)
      throw InjectError("store addresses collide along instruction loop '" +
                        ie->name + "'");
    OperandRule r;
    r.kind = store_rules.empty() ? OperandRule::Kind::Vectorize
                                 : OperandRule::Kind::UnrollConcat;
    r.loop = ie->name;
    r.count = il->extent;
    store_rules.push_back(r);
  }
  ExprPtr dst = build_vector_address(ds->residual, ds->coeff, store_rules,
                                     axis_of, "store");
  if (lanes_of(dst) != sem.output().size())
    throw InjectError("store pattern covers " +
                      std::to_string(lanes_of(dst)) +
                      " lanes but the output register holds " +
                      std::to_string(sem.output().size()));

  StmtPtr call = make_intrinsic(intr.name, store.tensor, dst, std::move(args));
  TensorIR out = ir;
  out.root = replace_stmt(ir.root, chain.fors[0], call);
  bool known = false;
  for (const auto& used : out.intrinsics) known |= used.name == intr.name;
  if (!known) out.intrinsics.push_back(intr);
  return out;
}

// ===== hardware sketches =====================================================

std::string CpuSketch::to_string() const {
  return "bp1=(" + std::to_string(l1) + "," + std::to_string(f1) + "),bp2=(" +
         std::to_string(l2) + "," + std::to_string(f2) + ")";
}

std::string GpuSketch::to_string() const {
  return "p=" + std::to_string(p) + ",fuse_hw=" + std::to_string(fuse_hw) +
         ",split_k=" + std::to_string(split_k);
}

namespace {

int64_t axis_extent(const TensorizedOp& t, const std::string& name) {
  for (const auto& tf : t.schedule)
    if (tf.kind == Transform::Kind::Split && tf.a + ".o" == name)
      return t.op.find_loop(tf.a)->extent / tf.factor;
  const LoopVar* lv = t.op.find_loop(name);
  internal_check(lv != nullptr, "sketch names unknown axis '" + name + "'");
  return lv->extent;
}

using NamedAxes = std::vector<std::pair<std::string, int64_t>>;

NamedAxes dp_axes(const TensorizedOp& t) {
  NamedAxes out;
  for (const auto& n : t.outer_dp) out.emplace_back(n, axis_extent(t, n));
  return out;
}

NamedAxes red_axes(const TensorizedOp& t) {
  NamedAxes out;
  for (const auto& n : t.outer_red) out.emplace_back(n, axis_extent(t, n));
  return out;
}

struct CpuCuts {
  NamedAxes prefix, middle, suffix;
  Schedule splits;
};

// Performs one cut at (level, factor): splits the axis when the boundary
// falls strictly inside it and returns the index where the "after" part of
// the list begins.
size_t apply_cut(NamedAxes& work, size_t level, int64_t factor,
                 Schedule* splits) {
  auto& [name, extent] = work[level];
  if (factor < 1 || extent % factor != 0)
    throw ScheduleError("breaking point factor " + std::to_string(factor) +
                        " does not divide extent " + std::to_string(extent) +
                        " of axis '" + name + "'");
  if (factor == 1) return level + 1;
  if (factor == extent) return level;
  Transform s;
  s.kind = Transform::Kind::Split;
  s.a = name;
  s.factor = factor;
  splits->push_back(s);
  std::string base = name;
  int64_t e = extent;
  work[level] = {base + ".o", e / factor};
  work.insert(work.begin() + level + 1, {base + ".i", factor});
  return level + 1;
}

CpuCuts cpu_cuts(const TensorizedOp& t, const CpuSketch& s) {
  NamedAxes work = dp_axes(t);
  if (work.empty()) throw ScheduleError("no data-parallel axes to cut");
  auto in_range = [&](int l) { return l >= 0 && l < static_cast<int>(work.size()); };
  if (!in_range(s.l1) || !in_range(s.l2))
    throw ScheduleError("breaking point level out of range");
  if (s.l1 > s.l2 || (s.l1 == s.l2 && (s.f2 == 0 || s.f1 % s.f2 != 0)))
    throw ScheduleError("breaking points out of order");

  CpuCuts c;
  // The inner cut first: when both land in the same axis, the outer cut
  // then subdivides the outer part by the factor ratio.
  size_t b2 = apply_cut(work, s.l2, s.f2, &c.splits);
  bool split2 = c.splits.size() == 1;
  int64_t f1 = (s.l1 == s.l2 && split2) ? s.f1 / s.f2 : s.f1;
  size_t b1 = apply_cut(work, s.l1, f1, &c.splits);
  if (c.splits.size() > (split2 ? 1u : 0u)) ++b2;  // the new .i shifted it
  if (b1 > b2) throw ScheduleError("breaking points out of order");

  c.prefix.assign(work.begin(), work.begin() + b1);
  c.middle.assign(work.begin() + b1, work.begin() + b2);
  c.suffix.assign(work.begin() + b2, work.end());
  return c;
}

}  // namespace

Schedule apply_cpu_sketch(const TensorizedOp& t, const CpuSketch& s) {
  CpuCuts c = cpu_cuts(t, s);
  Schedule sched = t.schedule;
  for (const auto& sp : c.splits) sched.push_back(sp);

  // Fold the prefix into one parallel loop.
  std::string par;
  if (!c.prefix.empty()) {
    par = c.prefix[0].first;
    for (size_t k = 1; k < c.prefix.size(); ++k) {
      Transform f;
      f.kind = Transform::Kind::Fuse;
      f.a = par;
      f.b = c.prefix[k].first;
      sched.push_back(f);
      par += "." + c.prefix[k].first + ".fused";
    }
  }

  Transform ro;
  ro.kind = Transform::Kind::Reorder;
  if (!par.empty()) ro.names.push_back(par);
  for (const auto& [n, e] : c.middle) ro.names.push_back(n);
  for (const auto& n : t.outer_red) ro.names.push_back(n);
  for (const auto& [n, e] : c.suffix) ro.names.push_back(n);
  for (const auto& n : t.pragma_axes) ro.names.push_back(n);
  sched.push_back(ro);

  if (!par.empty()) {
    Transform p;
    p.kind = Transform::Kind::Parallel;
    p.a = par;
    sched.push_back(p);
  }
  for (const auto& [n, e] : c.suffix) {
    Transform u;
    u.kind = Transform::Kind::Unroll;
    u.a = n;
    sched.push_back(u);
  }
  return sched;
}

int64_t cpu_fused_parallel_extent(const TensorizedOp& t, const CpuSketch& s) {
  CpuCuts c = cpu_cuts(t, s);
  int64_t e = 1;
  for (const auto& [n, x] : c.prefix) e *= x;
  return e;
}

int64_t cpu_unroll_factor(const TensorizedOp& t, const CpuSketch& s) {
  CpuCuts c = cpu_cuts(t, s);
  int64_t e = 1;
  for (const auto& [n, x] : c.suffix) e *= x;
  return e;
}

Schedule apply_gpu_sketch(const TensorizedOp& t, const GpuSketch& s) {
  Schedule sched = t.schedule;
  NamedAxes dp = dp_axes(t);
  NamedAxes red = red_axes(t);
  std::vector<std::string> window;  // unrolled p x p axes, outer first

  if (s.p > 1) {
    // The two innermost data-parallel axes the window divides evenly.
    std::vector<size_t> idx;
    for (size_t k = dp.size(); k-- > 0;) {
      if (dp[k].second > 1 && dp[k].second % s.p == 0) idx.push_back(k);
      if (idx.size() == 2) break;
    }
    if (idx.size() < 2)
      throw ScheduleError("output window " + std::to_string(s.p) + "x" +
                          std::to_string(s.p) + " does not fit the loop nest");
    std::sort(idx.begin(), idx.end());
    for (size_t k : idx) {
      Transform sp;
      sp.kind = Transform::Kind::Split;
      sp.a = dp[k].first;
      sp.factor = s.p;
      sched.push_back(sp);
      window.push_back(dp[k].first + ".i");
      dp[k] = {dp[k].first + ".o", dp[k].second / s.p};
    }
  }

  std::string seg;
  if (s.split_k > 1) {
    if (red.empty())
      throw ScheduleError("split_k needs a reduction axis");
    size_t best = 0;
    for (size_t k = 1; k < red.size(); ++k)
      if (red[k].second > red[best].second) best = k;
    if (red[best].second % s.split_k != 0)
      throw ScheduleError("split_k " + std::to_string(s.split_k) +
                          " does not divide reduction extent " +
                          std::to_string(red[best].second));
    Transform sr;
    sr.kind = Transform::Kind::SplitReduction;
    sr.a = red[best].first;
    sr.factor = s.split_k;
    sched.push_back(sr);
    seg = red[best].first + ".s";
    red[best] = {red[best].first + ".r", red[best].second / s.split_k};
  }

  // Order: parallel block axes, segment axis, serial reductions, the
  // unrolled window, then the pragma nest.
  Transform ro;
  ro.kind = Transform::Kind::Reorder;
  for (const auto& [n, e] : dp) ro.names.push_back(n);
  if (!seg.empty()) ro.names.push_back(seg);
  for (const auto& [n, e] : red) ro.names.push_back(n);
  for (const auto& n : window) ro.names.push_back(n);
  for (const auto& n : t.pragma_axes) ro.names.push_back(n);
  sched.push_back(ro);

  std::vector<std::string> par;
  for (const auto& [n, e] : dp) par.push_back(n);
  if (s.fuse_hw) {
    // Fuse the innermost adjacent equal-extent pair of block axes.
    int hit = -1;
    for (size_t k = dp.size(); k-- > 1;)
      if (dp[k - 1].second == dp[k].second && dp[k].second > 1) {
        hit = static_cast<int>(k - 1);
        break;
      }
    if (hit < 0)
      throw ScheduleError("no adjacent equal-extent pair to fuse");
    Transform f;
    f.kind = Transform::Kind::Fuse;
    f.a = dp[hit].first;
    f.b = dp[hit + 1].first;
    sched.push_back(f);
    std::string fused = f.a + "." + f.b + ".fused";
    par.erase(par.begin() + hit, par.begin() + hit + 2);
    par.insert(par.begin() + hit, fused);
  }
  if (!seg.empty()) par.push_back(seg);

  for (const auto& n : par) {
    Transform p;
    p.kind = Transform::Kind::Parallel;
    p.a = n;
    sched.push_back(p);
  }
  for (const auto& n : window) {
    Transform u;
    u.kind = Transform::Kind::Unroll;
    u.a = n;
    sched.push_back(u);
  }
  return sched;
}

}  // namespace tzc
