#include <string>

#include "doctest.h"
#include "tzc/compute_op.hpp"
#include "tzc/errors.hpp"
#include "tzc/parser.hpp"

using namespace tzc;

namespace {

const char* kMatmul = R"(tensor A : u8 [16, 16] input
tensor B : i8 [16, 16] input
tensor C : i32 [16, 16] output
loop x : dp 16
loop y : dp 16
loop k : red 16
C[x, y] += cast<i32>(A[x, k]) * cast<i32>(B[y, k])
)";

}  // namespace

TEST_CASE("parse a complete accumulate-form program") {
  ComputeOp op = parse_compute(kMatmul);
  CHECK(op.tensors.size() == 3);
  CHECK(op.loops.size() == 3);
  CHECK(op.out == "C");
  CHECK(op.update);
  CHECK(op.indices.size() == 2);
  CHECK(op.tensors[0].name == "A");
  CHECK(op.tensors[0].dtype == kU8);
  CHECK(op.tensors[0].role == Role::Input);
  CHECK(op.tensors[2].role == Role::Output);
  CHECK(op.loops[2].kind == LoopKind::Reduction);
  CHECK(op.loops[2].extent == 16);
  // "+=" materializes the output load as the left addend.
  REQUIRE(op.value->kind == Expr::Kind::Add);
  CHECK(op.value->args[0]->kind == Expr::Kind::Load);
  CHECK(op.value->args[0]->name == "C");
  validate(op);
}

TEST_CASE("print/parse round trip is structural identity") {
  ComputeOp op = infer_types(parse_compute(kMatmul));
  std::string printed = print_compute(op);
  ComputeOp again = infer_types(parse_compute(printed));
  CHECK(op_equal(op, again));
  CHECK(print_compute(again) == printed);
}

TEST_CASE("comments and blank lines are skipped") {
  ComputeOp op = parse_compute(
      "# leading comment\n"
      "tensor A : i32 [4] input\n"
      "\n"
      "tensor B : i32 [4] output  # trailing comment\n"
      "loop i : dp 4\n"
      "B[i] = A[i] * 2\n");
  CHECK(op.tensors.size() == 2);
  CHECK(!op.update);
  validate(op);
}

TEST_CASE("literals type as i32 / fp32") {
  ComputeOp op = parse_compute(
      "tensor A : i32 [4] input\n"
      "tensor B : i32 [4] output\n"
      "loop i : dp 4\n"
      "B[i] = A[i] * 3\n");
  op = infer_types(op);
  // find the literal inside the product
  REQUIRE(op.value->kind == Expr::Kind::Mul);
  CHECK(op.value->args[1]->kind == Expr::Kind::IntImm);
  CHECK(op.value->args[1]->dtype == kI32);

  ComputeOp fop = infer_types(parse_compute(
      "tensor A : fp32 [4] input\n"
      "tensor B : fp32 [4] output\n"
      "loop i : dp 4\n"
      "B[i] = A[i] * 2.5\n"));
  REQUIRE(fop.value->kind == Expr::Kind::Mul);
  CHECK(fop.value->args[1]->kind == Expr::Kind::FloatImm);
  CHECK(fop.value->args[1]->dtype == kF32);
}

TEST_CASE("operator precedence and parentheses") {
  ComputeOp op = parse_compute(
      "tensor A : i32 [8] input\n"
      "tensor B : i32 [8] output\n"
      "loop i : dp 8\n"
      "B[i] = A[i] * 2 + A[i] * 3\n");
  REQUIRE(op.value->kind == Expr::Kind::Add);
  CHECK(op.value->args[0]->kind == Expr::Kind::Mul);
  CHECK(op.value->args[1]->kind == Expr::Kind::Mul);

  ComputeOp op2 = parse_compute(
      "tensor A : i32 [8] input\n"
      "tensor B : i32 [8] output\n"
      "loop i : dp 8\n"
      "B[i] = (A[i] + 1) * 2\n");
  REQUIRE(op2.value->kind == Expr::Kind::Mul);
  CHECK(op2.value->args[0]->kind == Expr::Kind::Add);
}

TEST_CASE("syntax errors carry line positions") {
  // missing colon in tensor decl
  CHECK_THROWS_AS(parse_compute("tensor A u8 [4] input\n"), SyntaxError);
  // bad loop kind
  CHECK_THROWS_AS(parse_compute("tensor A : u8 [4] input\n"
                                "tensor B : u8 [4] output\n"
                                "loop i : par 4\n"
                                "B[i] = A[i]\n"),
                  SyntaxError);
  // dangling expression garbage
  CHECK_THROWS_AS(parse_compute("tensor A : u8 [4] input\n"
                                "tensor B : u8 [4] output\n"
                                "loop i : dp 4\n"
                                "B[i] = A[i] +\n"),
                  SyntaxError);
  // unknown dtype
  CHECK_THROWS_AS(parse_compute("tensor A : f64 [4] input\n"), SyntaxError);
  // missing store line entirely
  CHECK_THROWS_AS(parse_compute("tensor A : u8 [4] input\n"
                                "tensor B : u8 [4] output\n"
                                "loop i : dp 4\n"),
                  SyntaxError);
}

TEST_CASE("validation rejects structural violations") {
  // reference to an undeclared tensor
  CHECK_THROWS_AS(validate(parse_compute("tensor A : u8 [4] input\n"
                                         "tensor B : u8 [4] output\n"
                                         "loop i : dp 4\n"
                                         "B[i] = Q[i]\n")),
                  ValidationError);
  // undeclared loop var in an index
  CHECK_THROWS_AS(validate(parse_compute("tensor A : u8 [4] input\n"
                                         "tensor B : u8 [4] output\n"
                                         "loop i : dp 4\n"
                                         "B[i] = A[j]\n")),
                  ValidationError);
  // two outputs
  CHECK_THROWS_AS(validate(parse_compute("tensor A : u8 [4] output\n"
                                         "tensor B : u8 [4] output\n"
                                         "loop i : dp 4\n"
                                         "B[i] = A[i]\n")),
                  ValidationError);
  // duplicate names
  CHECK_THROWS_AS(validate(parse_compute("tensor A : u8 [4] input\n"
                                         "tensor A : u8 [4] output\n"
                                         "loop i : dp 4\n"
                                         "A[i] = A[i]\n")),
                  ValidationError);
  // reduction var never used
  CHECK_THROWS_AS(validate(parse_compute("tensor A : i32 [4] input\n"
                                         "tensor B : i32 [4] output\n"
                                         "loop i : dp 4\n"
                                         "loop r : red 3\n"
                                         "B[i] = A[i]\n")),
                  ValidationError);
  // non-affine store index
  CHECK_THROWS_AS(validate(parse_compute("tensor A : i32 [4, 4] input\n"
                                         "tensor B : i32 [4, 4] output\n"
                                         "loop i : dp 4\n"
                                         "loop j : dp 4\n"
                                         "B[i * j, j] = A[i, j]\n")),
                  ValidationError);
}

TEST_CASE("type inference enforces explicit casts") {
  // u8 times i8 without casts must fail
  CHECK_THROWS_AS(infer_types(parse_compute("tensor A : u8 [4] input\n"
                                            "tensor B : i8 [4] input\n"
                                            "tensor C : i32 [4] output\n"
                                            "loop i : dp 4\n"
                                            "C[i] = A[i] * B[i]\n")),
                  TypeError);
  // stored value narrower than output must fail
  CHECK_THROWS_AS(infer_types(parse_compute("tensor A : u8 [4] input\n"
                                            "tensor C : i32 [4] output\n"
                                            "loop i : dp 4\n"
                                            "C[i] = A[i]\n")),
                  TypeError);
  // a float literal in an index is rejected as non-affine before any
  // dtype reasoning runs
  CHECK_THROWS_AS(infer_types(parse_compute("tensor A : fp32 [4] input\n"
                                            "tensor C : fp32 [4] output\n"
                                            "loop i : dp 4\n"
                                            "C[i] = A[i * 1.0]\n")),
                  ValidationError);
  // the canonical matmul body resolves and is idempotent
  ComputeOp op = infer_types(parse_compute(kMatmul));
  ComputeOp twice = infer_types(op);
  CHECK(op_equal(op, twice));
  CHECK(op.value->dtype == kI32);
}

TEST_CASE("reduce_form decomposition") {
  ComputeOp op = infer_types(parse_compute(kMatmul));
  ReduceForm rf = reduce_form(op);
  CHECK(rf.init == nullptr);  // update form: seeded externally
  REQUIRE(rf.term != nullptr);
  CHECK(rf.term->kind == Expr::Kind::Mul);

  // explicit init: C[i] = 0 + sum(...) style with "=" and const addend
  ComputeOp op2 = infer_types(parse_compute(
      "tensor A : i32 [4, 3] input\n"
      "tensor C : i32 [4] output\n"
      "loop i : dp 4\n"
      "loop r : red 3\n"
      "C[i] = 7 + A[i, r] * 2\n"));
  ReduceForm rf2 = reduce_form(op2);
  REQUIRE(rf2.init != nullptr);
  CHECK(rf2.init->ival == 7);
  REQUIRE(rf2.term != nullptr);

  // no reduction loops: both null
  ComputeOp op3 = infer_types(parse_compute(
      "tensor A : i32 [4] input\n"
      "tensor C : i32 [4] output\n"
      "loop i : dp 4\n"
      "C[i] = A[i] * 2\n"));
  ReduceForm rf3 = reduce_form(op3);
  CHECK(rf3.init == nullptr);
  CHECK(rf3.term == nullptr);
}

TEST_CASE("strided and offset accesses parse") {
  ComputeOp op = infer_types(parse_compute(
      "tensor A : i32 [9] input\n"
      "tensor B : i32 [4] output\n"
      "loop i : dp 4\n"
      "loop r : red 3\n"
      "B[i] += A[i * 2 + r]\n"));
  validate(op);
  std::string printed = print_compute(op);
  CHECK(op_equal(infer_types(parse_compute(printed)), op));
}
