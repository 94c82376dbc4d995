#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "tzc/errors.hpp"
#include "tzc/inspector.hpp"
#include "tzc/parser.hpp"
#include "tzc/rewriter.hpp"
#include "tzc/tuner.hpp"
#include "tzc/vm.hpp"
#include "tzc/workloads.hpp"

using namespace tzc;

namespace {

ComputeOp op_from(const std::string& text) {
  return infer_types(parse_compute(text));
}

TensorizedOp tensorized_matmul(int64_t m, int64_t n, int64_t k) {
  ComputeOp op = op_from(matmul_tdsl(m, n, k));
  InspectionReport rep = inspect(op, builtin("vdot_16x4"));
  REQUIRE(rep.match.ok);
  REQUIRE(!rep.mappings.empty());
  return tile_and_reorder(op, builtin("vdot_16x4"), rep.mappings[0]);
}

}  // namespace

TEST_CASE("cpu space: bounds, ordering, and the default head") {
  TensorizedOp t = tensorized_matmul(16, 16, 16);
  auto space = enumerate_cpu_space(t);
  REQUIRE(!space.empty());

  CpuLimits lim;
  int64_t prev_fused = -1, prev_unroll = -1;
  bool first = true;
  for (const auto& s : space) {
    int64_t fe = cpu_fused_parallel_extent(t, s);
    int64_t uf = cpu_unroll_factor(t, s);
    CHECK(fe < lim.parallel_bound);
    CHECK(uf < lim.unroll_bound);
    if (!first) {
      // best-first: fused desc, then unroll desc
      CHECK((fe < prev_fused ||
             (fe == prev_fused && uf <= prev_unroll)));
    }
    prev_fused = fe;
    prev_unroll = uf;
    first = false;
  }
  // deterministic head: everything fused and parallel, no unroll available
  CHECK(space[0].to_string() == "bp1=(0,1),bp2=(0,1)");
  CHECK(cpu_fused_parallel_extent(t, space[0]) == 16);

  // no duplicate sketches
  std::vector<std::string> keys;
  for (const auto& s : space) keys.push_back(s.to_string());
  std::vector<std::string> uniq = keys;
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  CHECK(uniq.size() == keys.size());
}

TEST_CASE("cpu space respects custom strict bounds") {
  TensorizedOp t = tensorized_matmul(64, 64, 16);
  // outer_dp = [x(64), y.o(4)]
  CpuLimits lim;
  lim.parallel_bound = 32;
  lim.unroll_bound = 5;
  auto space = enumerate_cpu_space(t, lim);
  REQUIRE(!space.empty());
  for (const auto& s : space) {
    CHECK(cpu_fused_parallel_extent(t, s) < 32);
    CHECK(cpu_unroll_factor(t, s) < 5);
  }
  // the head still maximizes within bounds
  int64_t best_fe = cpu_fused_parallel_extent(t, space[0]);
  for (const auto& s : space)
    CHECK(cpu_fused_parallel_extent(t, s) <= best_fe);
}

TEST_CASE("gpu space: default head and validity") {
  ComputeOp op = op_from(conv2d_tdsl({"g", 64, 10, 64, 3, 1}, 16, 4));
  const Intrinsic& v = builtin("vdot_16x4");
  InspectionReport rep = inspect(op, v);
  TensorizedOp t = tile_and_reorder(op, v, rep.mappings[0]);

  auto space = enumerate_gpu_space(t);
  REQUIRE(!space.empty());
  // default: widest window, no fitting 64-way split, small leftover -> fuse
  CHECK(space[0].p == 2);
  CHECK(space[0].fuse_hw);
  CHECK(space[0].split_k == 1);
  // every candidate actually applies
  for (const auto& s : space) {
    CAPTURE(s.to_string());
    CHECK_NOTHROW(apply_gpu_sketch(t, s));
  }
  // p never exceeds the cap
  GpuLimits lim;
  for (const auto& s : space) CHECK(s.p <= lim.p_max);

  // a fitting split factor enters the space
  GpuLimits lim2;
  lim2.split_factors = {4};
  auto space2 = enumerate_gpu_space(t, lim2);
  CHECK(space2[0].split_k == 4);  // co has extent 16: 4 divides
  bool has_unsplit = false;
  for (const auto& s : space2) has_unsplit |= s.split_k == 1;
  CHECK(has_unsplit);
}

TEST_CASE("tune finds the minimum-cost candidate and verifies it") {
  ComputeOp op = op_from(matmul_tdsl(16, 16, 16));
  TuneOptions opts;
  opts.budget = 64;
  std::ostringstream log;
  opts.log = &log;
  TuneResult r = tune(op, builtin("vdot_16x4"), opts);
  REQUIRE(!r.evaluated.empty());
  for (const auto& c : r.evaluated) {
    CHECK(c.verified);  // 16^3 is far under the verification volume limit
    CHECK(c.key >= r.best.key);
  }
  // earliest among ties wins
  for (const auto& c : r.evaluated) {
    if (c.key == r.best.key) {
      CHECK(c.id >= r.best.id);
    }
  }
  CHECK(r.best.cost.intrinsic_call_count == 64);
  CHECK(r.best.cost.scalar_mac_count == 0);

  // log format: one line per candidate
  std::string line;
  std::istringstream in(log.str());
  int lines = 0;
  while (std::getline(in, line)) {
    CAPTURE(line);
    CHECK(line.rfind("candidate ", 0) == 0);
    CHECK(line.find(" mapping={") != std::string::npos);
    CHECK(line.find(" sketch=") != std::string::npos);
    CHECK(line.find(" cost=(") != std::string::npos);
    ++lines;
  }
  CHECK(lines == static_cast<int>(r.evaluated.size()));
  CHECK(log.str().rfind("candidate 0 mapping={y->i, k->j} "
                        "sketch=bp1=(0,1),bp2=(0,1) cost=(64, -16, 3)",
                        0) == 0);

  // determinism
  TuneOptions opts2;
  opts2.budget = 64;
  TuneResult r2 = tune(op, builtin("vdot_16x4"), opts2);
  CHECK(r2.best.id == r.best.id);
  CHECK(r2.best.sketch == r.best.sketch);
  CHECK(r2.evaluated.size() == r.evaluated.size());
}

TEST_CASE("tuned wide matmul has no residual scalar work") {
  ComputeOp op = op_from(matmul_tdsl(16, 16, 64));
  TuneOptions opts;
  opts.budget = 32;
  TuneResult r = tune(op, builtin("vdot_16x4"), opts);
  CHECK(r.best.cost.scalar_mac_count == 0);
  CHECK(r.best.cost.intrinsic_call_count == 16 * 16 * 64 / 64);
}

TEST_CASE("budget caps the number of evaluated candidates") {
  ComputeOp op = op_from(matmul_tdsl(32, 32, 32));
  TuneOptions opts;
  opts.budget = 3;
  TuneResult r = tune(op, builtin("vdot_16x4"), opts);
  CHECK(r.evaluated.size() == 3);

  opts.budget = 0;
  CHECK_THROWS_AS(tune(op, builtin("vdot_16x4"), opts), ValidationError);
  opts.budget = -4;
  CHECK_THROWS_AS(tune(op, builtin("vdot_16x4"), opts), ValidationError);
}

TEST_CASE("tune pads non-multiples when allowed") {
  ComputeOp op = op_from(
      "tensor A : u8 [8, 6] input\n"
      "tensor B : i8 [8, 6] input\n"
      "tensor C : i32 [8, 8] output\n"
      "loop x : dp 8\n"
      "loop y : dp 8\n"
      "loop k : red 6\n"
      "C[x, y] += cast<i32>(A[x, k]) * cast<i32>(B[y, k])\n");
  TuneOptions opts;
  opts.budget = 16;
  TuneResult r = tune(op, builtin("vdot_16x4"), opts);
  REQUIRE(!r.evaluated.empty());
  CHECK(r.best.verified);  // verification slices back to the 8x8 output

  TuneOptions nopad;
  nopad.budget = 16;
  nopad.allow_pad = false;
  CHECK_THROWS_AS(tune(op, builtin("vdot_16x4"), nopad), NoFeasibleMapping);
}

TEST_CASE("tune rejects unmatchable ops") {
  // eltwise: no multiply-accumulate structure
  ComputeOp op = op_from(
      "tensor A : i32 [64] input\n"
      "tensor B : i32 [64] output\n"
      "loop i : dp 64\n"
      "B[i] = A[i] * 2\n");
  TuneOptions opts;
  CHECK_THROWS_AS(tune(op, builtin("vdot_16x4"), opts), NoFeasibleMapping);

  // fp32 arithmetic against the integer instruction
  ComputeOp fop = op_from(
      "tensor A : fp32 [16, 16] input\n"
      "tensor B : fp32 [16, 16] input\n"
      "tensor C : fp32 [16, 16] output\n"
      "loop x : dp 16\n"
      "loop y : dp 16\n"
      "loop k : red 16\n"
      "C[x, y] += A[x, k] * B[y, k]\n");
  CHECK_THROWS_AS(tune(fop, builtin("vdot_16x4"), opts), NoFeasibleMapping);
}

TEST_CASE("gpu target tunes conv candidates") {
  ComputeOp op = op_from(conv2d_tdsl({"g", 32, 6, 32, 3, 1}, 16, 4));
  TuneOptions opts;
  opts.target = Target::Gpu;
  opts.budget = 8;
  TuneResult r = tune(op, builtin("vdot_16x4"), opts);
  REQUIRE(!r.evaluated.empty());
  for (const auto& c : r.evaluated) {
    CHECK(c.sketch.rfind("p=", 0) == 0);
    CHECK(c.verified);
  }
  CHECK(r.best.cost.intrinsic_call_count > 0);
  CHECK(r.best.cost.scalar_mac_count == 0);
}

TEST_CASE("tune with an explicit force_verify re-checks large shapes") {
  ComputeOp op = op_from(matmul_tdsl(16, 16, 16));
  TuneOptions opts;
  opts.budget = 2;
  opts.verify_limit = 0;  // pretend everything is too big
  TuneResult r = tune(op, builtin("vdot_16x4"), opts);
  for (const auto& c : r.evaluated) CHECK(!c.verified);

  opts.force_verify = true;
  TuneResult rv = tune(op, builtin("vdot_16x4"), opts);
  for (const auto& c : rv.evaluated) CHECK(c.verified);
}
