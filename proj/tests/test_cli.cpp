#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "tzc/cli.hpp"
#include "tzc/rewriter.hpp"
#include "tzc/vm.hpp"
#include "tzc/workloads.hpp"

using namespace tzc;
namespace fs = std::filesystem;

namespace {

struct TmpDir {
  fs::path path;
  TmpDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("tzc_cli_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TmpDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    fs::path p = path / name;
    std::ofstream f(p);
    f << content;
    return p.string();
  }
  std::string at(const std::string& name) const {
    return (path / name).string();
  }
};

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kMatmul = R"(tensor A : u8 [16, 16] input
tensor B : i8 [16, 16] input
tensor C : i32 [16, 16] output
loop x : dp 16
loop y : dp 16
loop k : red 16
C[x, y] += cast<i32>(A[x, k]) * cast<i32>(B[y, k])
)";

const char* kRagged = R"(tensor A : u8 [8, 6] input
tensor B : i8 [8, 6] input
tensor C : i32 [8, 8] output
loop x : dp 8
loop y : dp 8
loop k : red 6
C[x, y] += cast<i32>(A[x, k]) * cast<i32>(B[y, k])
)";

const char* kEltwise = R"(tensor A : i32 [64] input
tensor B : i32 [64] output
loop i : dp 64
B[i] = A[i] * 2
)";

}  // namespace

TEST_CASE("help and usage errors") {
  CliRun h = cli({"--help"});
  CHECK(h.code == 0);
  CHECK(h.out.find("Usage") != std::string::npos);
  CHECK(h.out.find("inspect") != std::string::npos);

  CHECK(cli({}).code == 2);                       // a subcommand is required
  CHECK(cli({"frobnicate"}).code == 2);           // unknown subcommand
  CHECK(cli({"inspect"}).code == 2);              // missing op path
  CliRun braw = cli({"inspect", "/no/such/file.tdsl"});
  CHECK(braw.code == 2);                          // IoError
  CHECK(braw.err.find("error") != std::string::npos);
}

TEST_CASE("inspect text and structured output") {
  TmpDir d;
  std::string op = d.file("mm.tdsl", kMatmul);

  CliRun r = cli({"inspect", op});
  CHECK(r.code == 0);
  CHECK(r.out.find("match: yes") != std::string::npos);
  CHECK(r.out.find("mapping 0: {y->i, k->j}") != std::string::npos);
  CHECK(r.out.find("mapping 1: {x->i, k->j}") != std::string::npos);

  CliRun js = cli({"inspect", op, "--format", "structured"});
  CHECK(js.code == 0);
  auto j = nlohmann::json::parse(js.out);
  CHECK(j["match"] == true);
  CHECK(j["mappings"].size() == 2);
  CHECK(j["mappings"][0]["assignment"] == "{y->i, k->j}");
  CHECK(j["mappings"][0]["needs_padding"] == false);
  CHECK(j["registers"].contains("a"));

  std::string el = d.file("el.tdsl", kEltwise);
  CliRun neg = cli({"inspect", el});
  CHECK(neg.code == 1);
  CHECK(neg.out.find("match: no") != std::string::npos);

  CliRun badfmt = cli({"inspect", op, "--format", "yaml"});
  CHECK(badfmt.code == 2);
}

TEST_CASE("tensorize emits IR and schedules") {
  TmpDir d;
  std::string op = d.file("mm.tdsl", kMatmul);
  std::string sched = d.at("mm.sched");

  CliRun r = cli({"tensorize", op, "--schedule-out", sched});
  CHECK(r.code == 0);
  CHECK(r.out.find("mapping: {y->i, k->j}") != std::string::npos);
  CHECK(r.out.find("vdot_16x4(dst = C[ramp(") != std::string::npos);
  CHECK(r.out.find("broadcast(ramp(") != std::string::npos);
  CHECK(r.out.find("concat(ramp(") != std::string::npos);

  Schedule s = load_schedule(sched);
  REQUIRE(!s.empty());
  CHECK(s.back().kind == Transform::Kind::Pragma);

  // mapping 1 ({x->i, k->j}) passes the access condition but the data
  // operand then varies along the broadcast lane: rejected at injection
  CliRun r1 = cli({"tensorize", op, "--mapping", "1"});
  CHECK(r1.code == 1);
  CHECK(r1.err.find("InjectError") != std::string::npos);

  CliRun r0 = cli({"tensorize", op, "--mapping", "0"});
  CHECK(r0.code == 0);
  CHECK(r0.out.find("mapping: {y->i, k->j}") != std::string::npos);

  CliRun sk = cli({"tensorize", op, "--target", "cpu", "--sketch", "0,2,0,2"});
  CHECK(sk.code == 0);
  CHECK(sk.out.find("parallel") != std::string::npos);
  CHECK(sk.out.find("unroll") != std::string::npos);

  CliRun js = cli({"tensorize", op, "--format", "structured"});
  CHECK(js.code == 0);
  auto j = nlohmann::json::parse(js.out);
  CHECK(j["intrinsic_calls"] == 64);
  CHECK(j["ir"].get<std::string>().find("vdot_16x4") != std::string::npos);

  CHECK(cli({"tensorize", op, "--mapping", "7"}).code == 2);
  CHECK(cli({"tensorize", op, "--target", "cpu", "--sketch", "zzz"}).code == 2);
  CHECK(cli({"tensorize", op, "--intrinsic", "no_such"}).code == 2);
}

TEST_CASE("tensorize divisibility and padding") {
  TmpDir d;
  std::string op = d.file("rag.tdsl", kRagged);
  CliRun bare = cli({"tensorize", op});
  CHECK(bare.code == 1);  // DivisibilityError
  CliRun padded = cli({"tensorize", op, "--pad"});
  CHECK(padded.code == 0);
  CHECK(padded.out.find("pad ") != std::string::npos);
}

TEST_CASE("verify differential-tests the pipeline") {
  TmpDir d;
  std::string op = d.file("mm.tdsl", kMatmul);
  CliRun r = cli({"verify", op, "--trials", "3"});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("bitexact: yes") != std::string::npos);

  CliRun js = cli({"verify", op, "--trials", "2", "--format", "structured"});
  CHECK(js.code == 0);
  auto j = nlohmann::json::parse(js.out);
  CHECK(j["pass"] == true);
  CHECK(j["trials"] == 2);
  CHECK(j["mismatches"] == 0);

  // float outputs demand an explicit tolerance
  std::string fop = d.file("fmm.tdsl", matmul_tdsl(16, 16, 16, fp16_profile()));
  CliRun noto = cli({"verify", fop, "--intrinsic", "wmma_16x16x16",
                     "--trials", "2"});
  CHECK(noto.code == 2);
  CHECK(noto.err.find("rtol") != std::string::npos);
  CliRun tol = cli({"verify", fop, "--intrinsic", "wmma_16x16x16", "--trials",
                    "2", "--rtol", "1e-3"});
  CHECK(tol.code == 0);
  CHECK(tol.out.find("PASS") != std::string::npos);

  // padding path
  std::string rag = d.file("rag.tdsl", kRagged);
  CHECK(cli({"verify", rag, "--trials", "2"}).code == 1);
  CHECK(cli({"verify", rag, "--trials", "2", "--pad"}).code == 0);
}

TEST_CASE("tune logs candidates and reports the best") {
  TmpDir d;
  std::string op = d.file("mm.tdsl", kMatmul);
  std::string sched = d.at("best.sched");

  CliRun r = cli({"tune", op, "--budget", "1", "--schedule-out", sched});
  CHECK(r.code == 0);
  std::istringstream lines(r.out);
  std::string l1, l2, extra;
  REQUIRE(std::getline(lines, l1));
  REQUIRE(std::getline(lines, l2));
  CHECK(!std::getline(lines, extra));  // budget 1: one candidate + best
  CHECK(l1.rfind("candidate 0 ", 0) == 0);
  CHECK(l2.rfind("best: candidate 0 ", 0) == 0);
  Schedule s = load_schedule(sched);
  CHECK(!s.empty());

  CliRun js = cli({"tune", op, "--budget", "4", "--format", "structured"});
  CHECK(js.code == 0);
  auto j = nlohmann::json::parse(js.out);
  CHECK(j["candidates"].size() == 4);
  CHECK(j["best"]["verified"] == true);

  CHECK(cli({"tune", op, "--budget", "0"}).code == 2);
  std::string el = d.file("el.tdsl", kEltwise);
  CHECK(cli({"tune", el}).code == 1);  // no feasible mapping
  CHECK(cli({"tune"}).code == 2);      // neither op nor bank
}

TEST_CASE("tune sweeps a workload bank") {
  CliRun one = cli({"tune", "--bank", "table1", "--workload", "conv05",
                    "--budget", "2"});
  CHECK(one.code == 0);
  CHECK(one.out.find("conv05 best mapping=") != std::string::npos);

  CliRun js = cli({"tune", "--bank", "table1", "--workload", "conv03",
                   "--budget", "2", "--format", "structured"});
  CHECK(js.code == 0);
  auto j = nlohmann::json::parse(js.out);
  REQUIRE(j.size() == 1);
  CHECK(j[0]["workload"] == "conv03");
  // production-size layers sit above the probe-verification volume limit
  CHECK(j[0]["verified"] == false);

  CHECK(cli({"tune", "--bank", "table1", "--workload", "zzz"}).code == 2);
  CHECK(cli({"tune", "--bank", "cifar"}).code == 2);
}

TEST_CASE("run executes programs with file inputs and outputs") {
  TmpDir d;
  std::string op = d.file("mm.tdsl", kMatmul);
  std::string outpath = d.at("c.tnsr");

  CliRun r = cli({"run", op, "--output", outpath, "--seed", "9"});
  CHECK(r.code == 0);
  CHECK(r.out.find("i32") != std::string::npos);
  TensorValue saved = load_tensor(outpath);
  CHECK(saved.shape == std::vector<int64_t>{16, 16});

  // determinism: same seed, same saved bytes
  std::string outpath2 = d.at("c2.tnsr");
  cli({"run", op, "--output", outpath2, "--seed", "9"});
  CHECK(load_tensor(outpath2).idata == saved.idata);

  // explicit input files: zero inputs give a zero output
  TensorValue za = TensorValue::zeros(kU8, {16, 16});
  TensorValue zb = TensorValue::zeros(kI8, {16, 16});
  TensorValue zc = TensorValue::zeros(kI32, {16, 16});
  save_tensor(d.at("a.tnsr"), za);
  save_tensor(d.at("b.tnsr"), zb);
  save_tensor(d.at("c0.tnsr"), zc);
  std::string zpath = d.at("z.tnsr");
  CliRun rz = cli({"run", op, "--input", "A=" + d.at("a.tnsr"), "--input",
                   "B=" + d.at("b.tnsr"), "--input", "C=" + d.at("c0.tnsr"),
                   "--output", zpath});
  CHECK(rz.code == 0);
  TensorValue z = load_tensor(zpath);
  for (int64_t v : z.idata) CHECK(v == 0);

  // tensorized execution matches the plain one for the same seed
  std::string tpath = d.at("t.tnsr");
  CliRun rt = cli({"run", op, "--tensorized", "--output", tpath, "--seed",
                   "9", "--cost"});
  CHECK(rt.code == 0);
  CHECK(rt.out.find("vdot_16x4=64") != std::string::npos);
  CHECK(load_tensor(tpath).idata == saved.idata);

  // scheduled execution stays equivalent
  std::string sched = d.file("s.sched", "split x 4\nreorder x.o y x.i k\n");
  std::string spath = d.at("s.tnsr");
  CliRun rs = cli({"run", op, "--schedule", sched, "--output", spath,
                   "--seed", "9"});
  CHECK(rs.code == 0);
  CHECK(load_tensor(spath).idata == saved.idata);

  CHECK(cli({"run", op, "--input", "nope"}).code == 2);
  CHECK(cli({"run", op, "--schedule", d.at("missing.sched")}).code == 2);
}
