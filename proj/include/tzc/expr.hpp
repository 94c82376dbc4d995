#ifndef TZC_EXPR_HPP
#define TZC_EXPR_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tzc/dtype.hpp"

namespace tzc {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// One immutable node kind covers both the surface DSL (consts, loop vars,
// loads, casts, add/mul) and lowered-IR extensions (ramp/broadcast/concat
// vector operands, floordiv/floormod introduced by loop fusion). Nodes are
// shared freely; nothing mutates them after construction.
struct Expr {
  enum class Kind : uint8_t {
    IntImm,     // ival
    FloatImm,   // fval
    Var,        // name (loop variable reference)
    Load,       // name = tensor, args = index exprs (1 vector index if lanes>1)
    Cast,       // args = {src}, dtype = target
    Add,        // args = {lhs, rhs}
    Mul,        // args = {lhs, rhs}
    FloorDiv,   // args = {lhs, rhs}; lowered IR only
    FloorMod,   // args = {lhs, rhs}; lowered IR only
    Ramp,       // args = {base}; ival = stride, lanes_arg = lane count
    Broadcast,  // args = {value}; lanes_arg = replication count
    Concat,     // args = parts
  };

  Kind kind;
  DType dtype;  // may be undefined until infer_types runs
  int64_t ival = 0;
  double fval = 0.0;
  std::string name;
  std::vector<ExprPtr> args;
  int64_t lanes_arg = 0;
};

// ---- constructors -------------------------------------------------------

ExprPtr int_imm(int64_t v, DType t = kI32);
ExprPtr float_imm(double v, DType t = kF32);
ExprPtr var(const std::string& name);
ExprPtr load(const std::string& tensor, std::vector<ExprPtr> indices,
             DType t = DType());
ExprPtr cast(DType t, ExprPtr src);
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr floordiv(ExprPtr a, ExprPtr b);
ExprPtr floormod(ExprPtr a, ExprPtr b);
// Appends `lanes` new minor lanes per existing lane: result lane (b*lanes+k)
// addresses base[b] + stride*k. With a scalar base this is the usual ramp.
ExprPtr ramp(ExprPtr base, int64_t stride, int64_t lanes);
// Repeats the whole child vector `lanes` times (new major axis).
ExprPtr broadcast(ExprPtr value, int64_t lanes);
ExprPtr concat(std::vector<ExprPtr> parts);

inline bool is_const(const ExprPtr& e) {
  return e->kind == Expr::Kind::IntImm || e->kind == Expr::Kind::FloatImm;
}
inline bool is_leaf(const ExprPtr& e) {
  return is_const(e) || e->kind == Expr::Kind::Load;
}

int64_t lanes_of(const ExprPtr& e);

// ---- structural utilities -----------------------------------------------

// Deep structural equality. When compare_dtype is false, node dtypes are
// ignored (useful before type inference has run).
bool expr_equal(const ExprPtr& a, const ExprPtr& b, bool compare_dtype = true);

// Replaces every Var whose name has an entry in `subst`.
ExprPtr substitute(const ExprPtr& e,
                   const std::map<std::string, ExprPtr>& subst);

// Collects names of all Vars appearing anywhere in the expression,
// including inside load indices.
void collect_vars(const ExprPtr& e, std::vector<std::string>* out);

bool contains_var(const ExprPtr& e, const std::string& name);

// Affine view of an index expression: sum(coeff[v] * v) + constant.
// Linearization fails (nullopt) on anything non-affine: products of two
// variable terms, casts, loads, floats, div/mod.
struct AffineForm {
  std::map<std::string, int64_t> coeff;
  int64_t constant = 0;
};
std::optional<AffineForm> linearize(const ExprPtr& e);

// Splits `e` (already substituted into schedule axes) into
// `residual + sum(coeff[v] * v)` over the given vars. The residual keeps
// arbitrary sub-expressions (e.g. floordiv of outer axes) but must not
// mention any of `vars`. Returns nullopt when a var occurs non-linearly.
struct LinearSplit {
  ExprPtr residual;  // never null; IntImm 0 when nothing remains
  std::map<std::string, int64_t> coeff;
};
std::optional<LinearSplit> split_linear(const ExprPtr& e,
                                        const std::vector<std::string>& vars);

// Precedence-aware single-line rendering, grammar-compatible for scalar
// surface exprs; vector nodes print as ramp(...)/broadcast(...)/concat(...).
std::string expr_to_string(const ExprPtr& e);

}  // namespace tzc

#endif  // TZC_EXPR_HPP
