#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "tzc/expr.hpp"

using namespace tzc;

TEST_CASE("constructors set kinds and dtypes") {
  auto i = int_imm(7);
  CHECK(i->kind == Expr::Kind::IntImm);
  CHECK(i->ival == 7);
  CHECK(i->dtype == kI32);

  auto f = float_imm(1.5);
  CHECK(f->kind == Expr::Kind::FloatImm);
  CHECK(f->fval == 1.5);
  CHECK(f->dtype == kF32);

  auto x = var("x");
  CHECK(x->kind == Expr::Kind::Var);
  CHECK(x->name == "x");

  auto ld = load("A", {x, int_imm(0)}, kU8);
  CHECK(ld->kind == Expr::Kind::Load);
  CHECK(ld->name == "A");
  CHECK(ld->args.size() == 2);
  CHECK(ld->dtype == kU8);

  auto c = cast(kI32, ld);
  CHECK(c->kind == Expr::Kind::Cast);
  CHECK(c->dtype == kI32);

  auto s = add(c, int_imm(1));
  CHECK(s->kind == Expr::Kind::Add);
  auto m = mul(s, int_imm(2));
  CHECK(m->kind == Expr::Kind::Mul);
}

TEST_CASE("vector nodes and lanes_of") {
  auto base = var("x");
  auto r = ramp(base, 1, 16);
  CHECK(r->kind == Expr::Kind::Ramp);
  CHECK(r->ival == 1);
  CHECK(r->lanes_arg == 16);
  CHECK(lanes_of(r) == 16);

  // broadcast repeats the whole child vector.
  auto b = broadcast(ramp(base, 1, 4), 16);
  CHECK(lanes_of(b) == 64);

  // concat is major concatenation of parts.
  auto c = concat({ramp(base, 1, 4), ramp(var("y"), 1, 4)});
  CHECK(lanes_of(c) == 8);

  // ramp appends minor lanes per base lane.
  auto nested = ramp(ramp(base, 16, 2), 1, 4);
  CHECK(lanes_of(nested) == 8);

  CHECK(lanes_of(var("k")) == 1);
  CHECK(lanes_of(int_imm(3)) == 1);
}

TEST_CASE("expr_equal is deep structural equality") {
  auto e1 = add(mul(var("x"), int_imm(4)), var("j"));
  auto e2 = add(mul(var("x"), int_imm(4)), var("j"));
  auto e3 = add(mul(var("x"), int_imm(5)), var("j"));
  auto e4 = add(var("j"), mul(var("x"), int_imm(4)));  // operand order matters
  CHECK(expr_equal(e1, e2));
  CHECK(!expr_equal(e1, e3));
  CHECK(!expr_equal(e1, e4));

  auto lu8 = load("A", {var("i")}, kU8);
  auto li8 = load("A", {var("i")}, kI8);
  CHECK(!expr_equal(lu8, li8));
  CHECK(expr_equal(lu8, li8, /*compare_dtype=*/false));

  auto lb = load("B", {var("i")}, kU8);
  CHECK(!expr_equal(lu8, lb));  // tensor name participates even without dtype
  CHECK(!expr_equal(lu8, lb, false));
}

TEST_CASE("substitute replaces vars by map") {
  std::map<std::string, ExprPtr> sub{
      {"x", add(var("xo"), var("xi"))},
  };
  auto e = add(mul(var("x"), int_imm(3)), var("y"));
  auto out = substitute(e, sub);
  CHECK(expr_to_string(out) == "(xo + xi) * 3 + y");
  // untouched expression shares no substitution
  CHECK(expr_to_string(substitute(var("y"), sub)) == "y");
  // load indices are substituted too
  auto ld = load("A", {var("x"), var("y")}, kU8);
  CHECK(expr_to_string(substitute(ld, sub)) == "A[xo + xi, y]");
}

TEST_CASE("collect_vars and contains_var") {
  auto e = add(mul(var("x"), int_imm(4)), load("A", {var("k")}, kU8));
  std::vector<std::string> vs;
  collect_vars(e, &vs);
  CHECK(std::find(vs.begin(), vs.end(), "x") != vs.end());
  CHECK(std::find(vs.begin(), vs.end(), "k") != vs.end());
  CHECK(contains_var(e, "x"));
  CHECK(contains_var(e, "k"));
  CHECK(!contains_var(e, "z"));
}

TEST_CASE("linearize affine forms") {
  // 4*x + y + 3
  auto e = add(add(mul(int_imm(4), var("x")), var("y")), int_imm(3));
  auto af = linearize(e);
  REQUIRE(af.has_value());
  CHECK(af->coeff.at("x") == 4);
  CHECK(af->coeff.at("y") == 1);
  CHECK(af->constant == 3);

  // coefficient on either side of the multiply
  auto af2 = linearize(mul(var("x"), int_imm(7)));
  REQUIRE(af2.has_value());
  CHECK(af2->coeff.at("x") == 7);

  // repeated var accumulates
  auto af3 = linearize(add(var("x"), mul(var("x"), int_imm(2))));
  REQUIRE(af3.has_value());
  CHECK(af3->coeff.at("x") == 3);

  // distributes over products of affine * constant only
  CHECK(!linearize(mul(var("x"), var("y"))).has_value());
  CHECK(!linearize(cast(kI32, var("x"))).has_value());
  CHECK(!linearize(load("A", {var("x")}, kU8)).has_value());
  CHECK(!linearize(float_imm(1.0)).has_value());
  CHECK(!linearize(floordiv(var("x"), int_imm(2))).has_value());

  auto af4 = linearize(int_imm(11));
  REQUIRE(af4.has_value());
  CHECK(af4->coeff.empty());
  CHECK(af4->constant == 11);
}

TEST_CASE("split_linear isolates chosen vars") {
  // e = 16*xo + 4*ko + ki   with vars = {ki}
  auto e = add(add(mul(int_imm(16), var("xo")), mul(int_imm(4), var("ko"))),
               var("ki"));
  auto sp = split_linear(e, {"ki"});
  REQUIRE(sp.has_value());
  CHECK(sp->coeff.size() == 1);
  CHECK(sp->coeff.at("ki") == 1);
  CHECK(expr_to_string(sp->residual) == "16 * xo + 4 * ko");
  CHECK(!contains_var(sp->residual, "ki"));

  // both vars extracted, residual becomes the zero immediate
  auto sp2 = split_linear(add(mul(int_imm(4), var("a")), var("b")),
                          {"a", "b"});
  REQUIRE(sp2.has_value());
  CHECK(sp2->coeff.at("a") == 4);
  CHECK(sp2->coeff.at("b") == 1);
  CHECK(sp2->residual->kind == Expr::Kind::IntImm);
  CHECK(sp2->residual->ival == 0);

  // a var that does not appear gets no coefficient entry
  auto sp3 = split_linear(var("x"), {"q"});
  REQUIRE(sp3.has_value());
  CHECK(sp3->coeff.empty());
  CHECK(expr_to_string(sp3->residual) == "x");

  // residual may contain non-affine parts as long as the vars are linear
  auto sp4 = split_linear(add(floordiv(var("xo"), int_imm(2)), var("ki")),
                          {"ki"});
  REQUIRE(sp4.has_value());
  CHECK(sp4->coeff.at("ki") == 1);

  // non-linear occurrence of a requested var fails
  CHECK(!split_linear(mul(var("ki"), var("ki")), {"ki"}).has_value());
  CHECK(!split_linear(floordiv(var("ki"), int_imm(2)), {"ki"}).has_value());
}

TEST_CASE("expr_to_string precedence and vector forms") {
  CHECK(expr_to_string(add(var("x"), mul(var("y"), var("z")))) ==
        "x + y * z");
  CHECK(expr_to_string(mul(add(var("x"), var("y")), var("z"))) ==
        "(x + y) * z");
  CHECK(expr_to_string(cast(kI32, load("A", {var("i"), var("j")}, kU8))) ==
        "cast<i32>(A[i, j])");
  CHECK(expr_to_string(ramp(int_imm(0), 1, 4)) == "ramp(0, 1, 4)");
  CHECK(expr_to_string(broadcast(ramp(var("b"), 1, 4), 16)) ==
        "broadcast(ramp(b, 1, 4), 16)");
  CHECK(expr_to_string(concat({ramp(int_imm(0), 1, 2), ramp(int_imm(8), 1, 2)})) ==
        "concat(ramp(0, 1, 2), ramp(8, 1, 2))");
  CHECK(expr_to_string(floordiv(var("x"), int_imm(4))) == "x / 4");
  CHECK(expr_to_string(floormod(var("x"), int_imm(4))) == "x % 4");
}
