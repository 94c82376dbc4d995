#include "tzc/expr.hpp"

#include <cmath>
#include <cstdio>
#include <utility>

#include "tzc/errors.hpp"

namespace tzc {

namespace {

std::shared_ptr<Expr> node(Expr::Kind k) {
  auto e = std::make_shared<Expr>();
  e->kind = k;
  return e;
}

}  // namespace

ExprPtr int_imm(int64_t v, DType t) {
  auto e = node(Expr::Kind::IntImm);
  e->ival = v;
  e->dtype = t;
  return e;
}

ExprPtr float_imm(double v, DType t) {
  auto e = node(Expr::Kind::FloatImm);
  e->fval = v;
  e->dtype = t;
  return e;
}

ExprPtr var(const std::string& name) {
  auto e = node(Expr::Kind::Var);
  e->name = name;
  e->dtype = kI32;
  return e;
}

ExprPtr load(const std::string& tensor, std::vector<ExprPtr> indices, DType t) {
  auto e = node(Expr::Kind::Load);
  e->name = tensor;
  e->args = std::move(indices);
  e->dtype = t;
  return e;
}

ExprPtr cast(DType t, ExprPtr src) {
  auto e = node(Expr::Kind::Cast);
  e->args = {std::move(src)};
  e->dtype = t;
  return e;
}

ExprPtr add(ExprPtr a, ExprPtr b) {
  auto e = node(Expr::Kind::Add);
  e->dtype = a->dtype;
  e->args = {std::move(a), std::move(b)};
  return e;
}

ExprPtr mul(ExprPtr a, ExprPtr b) {
  auto e = node(Expr::Kind::Mul);
  e->dtype = a->dtype;
  e->args = {std::move(a), std::move(b)};
  return e;
}

ExprPtr floordiv(ExprPtr a, ExprPtr b) {
  auto e = node(Expr::Kind::FloorDiv);
  e->dtype = a->dtype;
  e->args = {std::move(a), std::move(b)};
  return e;
}

ExprPtr floormod(ExprPtr a, ExprPtr b) {
  auto e = node(Expr::Kind::FloorMod);
  e->dtype = a->dtype;
  e->args = {std::move(a), std::move(b)};
  return e;
}

ExprPtr ramp(ExprPtr base, int64_t stride, int64_t lanes) {
  internal_check(lanes >= 1, "ramp lanes must be positive");
  auto e = node(Expr::Kind::Ramp);
  e->dtype = base->dtype.with_lanes(
      static_cast<int>(lanes_of(base) * lanes));
  e->ival = stride;
  e->lanes_arg = lanes;
  e->args = {std::move(base)};
  return e;
}

ExprPtr broadcast(ExprPtr value, int64_t lanes) {
  internal_check(lanes >= 1, "broadcast lanes must be positive");
  auto e = node(Expr::Kind::Broadcast);
  e->dtype = value->dtype.with_lanes(
      static_cast<int>(lanes_of(value) * lanes));
  e->lanes_arg = lanes;
  e->args = {std::move(value)};
  return e;
}

ExprPtr concat(std::vector<ExprPtr> parts) {
  internal_check(!parts.empty(), "concat needs at least one part");
  auto e = node(Expr::Kind::Concat);
  int64_t lanes = 0;
  for (const auto& p : parts) lanes += lanes_of(p);
  e->dtype = parts[0]->dtype.with_lanes(static_cast<int>(lanes));
  e->args = std::move(parts);
  return e;
}

int64_t lanes_of(const ExprPtr& e) { return e->dtype.defined() ? e->dtype.lanes : 1; }

bool expr_equal(const ExprPtr& a, const ExprPtr& b, bool compare_dtype) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  if (compare_dtype && a->dtype != b->dtype) return false;
  switch (a->kind) {
    case Expr::Kind::IntImm:
      return a->ival == b->ival && a->dtype == b->dtype;
    case Expr::Kind::FloatImm:
      return a->fval == b->fval && a->dtype == b->dtype;
    case Expr::Kind::Var:
      return a->name == b->name;
    default:
      break;
  }
  if (a->name != b->name || a->ival != b->ival || a->lanes_arg != b->lanes_arg)
    return false;
  if (a->args.size() != b->args.size()) return false;
  for (size_t i = 0; i < a->args.size(); ++i)
    if (!expr_equal(a->args[i], b->args[i], compare_dtype)) return false;
  return true;
}

ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ExprPtr>& subst) {
  if (e->kind == Expr::Kind::Var) {
    auto it = subst.find(e->name);
    return it != subst.end() ? it->second : e;
  }
  if (e->args.empty()) return e;
  bool changed = false;
  std::vector<ExprPtr> args;
  args.reserve(e->args.size());
  for (const auto& a : e->args) {
    args.push_back(substitute(a, subst));
    changed |= (args.back() != a);
  }
  if (!changed) return e;
  auto out = std::make_shared<Expr>(*e);
  out->args = std::move(args);
  return out;
}

void collect_vars(const ExprPtr& e, std::vector<std::string>* out) {
  if (e->kind == Expr::Kind::Var) {
    out->push_back(e->name);
    return;
  }
  for (const auto& a : e->args) collect_vars(a, out);
}

bool contains_var(const ExprPtr& e, const std::string& name) {
  if (e->kind == Expr::Kind::Var) return e->name == name;
  for (const auto& a : e->args)
    if (contains_var(a, name)) return true;
  return false;
}

std::optional<AffineForm> linearize(const ExprPtr& e) {
  AffineForm f;
  switch (e->kind) {
    case Expr::Kind::IntImm:
      f.constant = e->ival;
      return f;
    case Expr::Kind::Var:
      f.coeff[e->name] = 1;
      return f;
    case Expr::Kind::Add: {
      auto l = linearize(e->args[0]);
      auto r = linearize(e->args[1]);
      if (!l || !r) return std::nullopt;
      f = *l;
      f.constant += r->constant;
      for (const auto& [v, c] : r->coeff) {
        f.coeff[v] += c;
        if (f.coeff[v] == 0) f.coeff.erase(v);
      }
      return f;
    }
    case Expr::Kind::Mul: {
      auto l = linearize(e->args[0]);
      auto r = linearize(e->args[1]);
      if (!l || !r) return std::nullopt;
      // one side must be a pure constant
      if (!l->coeff.empty() && !r->coeff.empty()) return std::nullopt;
      const AffineForm& vars = l->coeff.empty() ? *r : *l;
      int64_t scale = l->coeff.empty() ? l->constant : r->constant;
      f.constant = vars.constant * scale;
      if (scale != 0)
        for (const auto& [v, c] : vars.coeff) f.coeff[v] = c * scale;
      return f;
    }
    default:
      return std::nullopt;  // casts, loads, floats, div/mod: not affine
  }
}

namespace {

// Recursive worker for split_linear: returns (residual, coeffs) or fails.
bool split_linear_rec(const ExprPtr& e, const std::vector<std::string>& vars,
                      ExprPtr* residual, std::map<std::string, int64_t>* coeff,
                      int64_t scale) {
  auto is_target = [&](const std::string& n) {
    for (const auto& v : vars)
      if (v == n) return true;
    return false;
  };
  switch (e->kind) {
    case Expr::Kind::Var:
      if (is_target(e->name)) {
        (*coeff)[e->name] += scale;
        return true;
      }
      break;
    case Expr::Kind::Add:
      return split_linear_rec(e->args[0], vars, residual, coeff, scale) &&
             split_linear_rec(e->args[1], vars, residual, coeff, scale);
    case Expr::Kind::Mul: {
      auto l = linearize(e->args[0]);
      auto r = linearize(e->args[1]);
      bool l_const = l && l->coeff.empty();
      bool r_const = r && r->coeff.empty();
      if (l_const || r_const) {
        int64_t k = l_const ? l->constant : r->constant;
        const ExprPtr& other = l_const ? e->args[1] : e->args[0];
        return split_linear_rec(other, vars, residual, coeff, scale * k);
      }
      break;  // variable*variable: fall through to residual handling
    }
    default:
      break;
  }
  // Whole subtree goes to the residual — provided it avoids the target vars.
  for (const auto& v : vars)
    if (contains_var(e, v)) return false;
  ExprPtr scaled = (scale == 1) ? e : mul(int_imm(scale), e);
  *residual = (*residual) ? add(*residual, scaled) : scaled;
  return true;
}

}  // namespace

std::optional<LinearSplit> split_linear(const ExprPtr& e,
                                        const std::vector<std::string>& vars) {
  LinearSplit out;
  out.residual = nullptr;
  if (!split_linear_rec(e, vars, &out.residual, &out.coeff, 1))
    return std::nullopt;
  if (!out.residual) out.residual = int_imm(0);
  return out;
}

namespace {

int precedence(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::Add:
      return 1;
    case Expr::Kind::Mul:
    case Expr::Kind::FloorDiv:
    case Expr::Kind::FloorMod:
      return 2;
    default:
      return 3;
  }
}

void print_expr(const ExprPtr& e, int parent_prec, std::string* out);

void print_binary(const ExprPtr& e, const char* op, int prec, int parent_prec,
                  std::string* out) {
  bool parens = prec < parent_prec;
  if (parens) *out += "(";
  print_expr(e->args[0], prec, out);
  *out += op;
  // Right operand needs a tighter context so "a - (b + c)" style trees
  // would re-parse correctly; with only +,* this keeps left association.
  print_expr(e->args[1], prec + 1, out);
  if (parens) *out += ")";
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  std::string s(buf);
  // Ensure it re-lexes as a float literal.
  if (s.find_first_of(".eE") == std::string::npos &&
      s.find_first_of("nN") == std::string::npos)
    s += ".0";
  return s;
}

void print_expr(const ExprPtr& e, int parent_prec, std::string* out) {
  switch (e->kind) {
    case Expr::Kind::IntImm:
      *out += std::to_string(e->ival);
      break;
    case Expr::Kind::FloatImm:
      *out += format_double(e->fval);
      break;
    case Expr::Kind::Var:
      *out += e->name;
      break;
    case Expr::Kind::Load: {
      *out += e->name;
      *out += "[";
      for (size_t i = 0; i < e->args.size(); ++i) {
        if (i) *out += ", ";
        print_expr(e->args[i], 0, out);
      }
      *out += "]";
      break;
    }
    case Expr::Kind::Cast:
      *out += "cast<" + dtype_name(e->dtype.scalar()) + ">(";
      print_expr(e->args[0], 0, out);
      *out += ")";
      break;
    case Expr::Kind::Add:
      print_binary(e, " + ", 1, parent_prec, out);
      break;
    case Expr::Kind::Mul:
      print_binary(e, " * ", 2, parent_prec, out);
      break;
    case Expr::Kind::FloorDiv:
      print_binary(e, " / ", 2, parent_prec, out);
      break;
    case Expr::Kind::FloorMod:
      print_binary(e, " % ", 2, parent_prec, out);
      break;
    case Expr::Kind::Ramp: {
      *out += "ramp(";
      print_expr(e->args[0], 0, out);
      *out += ", " + std::to_string(e->ival) + ", " +
              std::to_string(e->lanes_arg) + ")";
      break;
    }
    case Expr::Kind::Broadcast: {
      *out += "broadcast(";
      print_expr(e->args[0], 0, out);
      *out += ", " + std::to_string(e->lanes_arg) + ")";
      break;
    }
    case Expr::Kind::Concat: {
      *out += "concat(";
      for (size_t i = 0; i < e->args.size(); ++i) {
        if (i) *out += ", ";
        print_expr(e->args[i], 0, out);
      }
      *out += ")";
      break;
    }
  }
}

}  // namespace

std::string expr_to_string(const ExprPtr& e) {
  std::string out;
  print_expr(e, 0, &out);
  return out;
}

}  // namespace tzc
