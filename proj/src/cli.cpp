#include "tzc/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "tzc/errors.hpp"
#include "tzc/inspector.hpp"
#include "tzc/intrinsics.hpp"
#include "tzc/parser.hpp"
#include "tzc/rewriter.hpp"
#include "tzc/tuner.hpp"
#include "tzc/vm.hpp"
#include "tzc/workloads.hpp"

namespace tzc {

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

ComputeOp load_op(const std::string& path) {
  return infer_types(parse_compute(read_file(path)));
}

// Exit-code contract: 0 success, 1 domain failures (no mapping, failed
// equivalence, impossible padding/injection), 2 usage and parse errors.
int exit_code_for(const Error& e) {
  const std::string& k = e.kind();
  if (k == "NoFeasibleMapping" || k == "DivisibilityError" ||
      k == "PadUnsupported" || k == "InjectError")
    return 1;
  return 2;
}

struct CommonArgs {
  std::string op_path;
  std::string intrinsic = "vdot_16x4";
  int mapping = 0;
  bool pad = false;
  std::string format = "text";
  uint64_t seed = 0;
};

struct Pipeline {
  ComputeOp op;          // typed source op
  Intrinsic intr;
  LoopMapping mapping;
  TensorizedOp tiled;
  Schedule schedule;
  TensorIR ir;           // lowered + intrinsic injected
};

// Builds op -> tile -> (optional sketch) -> lower -> inject. `sketch_target`
// empty means the bare tensorized nest.
Pipeline build_pipeline(const ComputeOp& op, const Intrinsic& intr,
                        int mapping_idx, bool pad,
                        const std::string& sketch_target,
                        const std::string& sketch_params) {
  Pipeline p;
  p.op = op;
  p.intr = intr;
  InspectionReport rep = inspect(op, intr);
  if (!rep.match.ok)
    throw NoFeasibleMapping("'" + intr.name +
                            "' does not match the operation: " +
                            rep.match.reason);
  if (rep.mappings.empty())
    throw NoFeasibleMapping("no feasible loop mapping for '" + intr.name +
                            "'");
  if (mapping_idx < 0 || mapping_idx >= static_cast<int>(rep.mappings.size()))
    throw ValidationError("mapping index " + std::to_string(mapping_idx) +
                          " out of range (found " +
                          std::to_string(rep.mappings.size()) + " mappings)");
  p.mapping = rep.mappings[mapping_idx];
  p.tiled = tile_and_reorder(op, intr, p.mapping, pad);
  p.schedule = p.tiled.schedule;

  if (sketch_target == "cpu") {
    CpuSketch s;
    if (sketch_params.empty() || sketch_params == "default") {
      auto space = enumerate_cpu_space(p.tiled);
      if (space.empty()) throw ScheduleError("empty sketch space");
      s = space.front();
    } else {
      int64_t v[4];
      char comma;
      std::istringstream is(sketch_params);
      if (!(is >> v[0] >> comma >> v[1] >> comma >> v[2] >> comma >> v[3]))
        throw ValidationError("expected --sketch l1,f1,l2,f2");
      s = {static_cast<int>(v[0]), v[1], static_cast<int>(v[2]), v[3]};
    }
    p.schedule = apply_cpu_sketch(p.tiled, s);
  } else if (sketch_target == "gpu") {
    GpuSketch s;
    if (sketch_params.empty() || sketch_params == "default") {
      auto space = enumerate_gpu_space(p.tiled);
      if (space.empty()) throw ScheduleError("empty sketch space");
      s = space.front();
    } else {
      int64_t v[3];
      char comma;
      std::istringstream is(sketch_params);
      if (!(is >> v[0] >> comma >> v[1] >> comma >> v[2]))
        throw ValidationError("expected --sketch p,fuse,split_k");
      s = {v[0], v[1] != 0, v[2]};
    }
    p.schedule = apply_gpu_sketch(p.tiled, s);
  } else if (!sketch_target.empty()) {
    throw ValidationError("unknown sketch target '" + sketch_target + "'");
  }

  p.ir = inject_intrinsic(lower(p.tiled.op, p.schedule), intr, p.mapping);
  return p;
}

Inputs pad_inputs(const Inputs& in, const ComputeOp& padded_op) {
  Inputs out;
  for (const auto& [name, v] : in) {
    const TensorDecl* td = padded_op.find_tensor(name);
    internal_check(td != nullptr, "input '" + name + "' has no declaration");
    out.emplace(name, embed(v, td->shape));
  }
  return out;
}

// ---- inspect ----------------------------------------------------------------

int cmd_inspect(const CommonArgs& a, std::ostream& out) {
  ComputeOp op = load_op(a.op_path);
  Intrinsic intr = resolve_intrinsic(a.intrinsic);
  InspectionReport rep = inspect(op, intr);

  if (a.format == "structured") {
    json j;
    j["match"] = rep.match.ok;
    if (!rep.match.ok) j["reason"] = rep.match.reason;
    json regs = json::object();
    for (const auto& [reg, leaf] : rep.match.bind.reg_to_op)
      regs[reg] = expr_to_string(leaf);
    j["registers"] = regs;
    j["mappings"] = json::array();
    for (const auto& m : rep.mappings) {
      json jm;
      jm["assignment"] = m.to_string();
      jm["needs_padding"] = m.needs_padding;
      json b = json::object();
      for (const auto& [reg, axes] : m.broadcast_axes)
        if (!axes.empty()) b[reg] = axes;
      jm["broadcast"] = b;
      j["mappings"].push_back(jm);
    }
    out << j.dump(2) << "\n";
    return rep.match.ok && !rep.mappings.empty() ? 0 : 1;
  }

  if (!rep.match.ok) {
    out << "match: no\nreason: " << rep.match.reason << "\n";
    return 1;
  }
  out << "match: yes\n";
  for (const auto& [reg, leaf] : rep.match.bind.reg_to_op)
    out << "  register " << reg << " <- " << expr_to_string(leaf) << "\n";
  out << "mappings: " << rep.mappings.size() << "\n";
  for (size_t k = 0; k < rep.mappings.size(); ++k) {
    const auto& m = rep.mappings[k];
    out << "  mapping " << k << ": " << m.to_string() << "\n";
    for (const auto& [reg, axes] : m.broadcast_axes) {
      if (axes.empty()) continue;
      out << "    broadcast " << reg << ":";
      for (const auto& ax : axes) out << " " << ax;
      out << "\n";
    }
  }
  if (rep.mappings.empty()) {
    out << "no feasible mapping\n";
    return 1;
  }
  return 0;
}

// ---- tensorize ----------------------------------------------------------------

int cmd_tensorize(const CommonArgs& a, const std::string& target,
                  const std::string& sketch, const std::string& schedule_out,
                  std::ostream& out) {
  ComputeOp op = load_op(a.op_path);
  Intrinsic intr = resolve_intrinsic(a.intrinsic);
  Pipeline p = build_pipeline(op, intr, a.mapping, a.pad, target, sketch);

  if (!schedule_out.empty()) {
    std::ofstream f(schedule_out);
    if (!f) throw IoError("cannot open '" + schedule_out + "' for writing");
    f << print_schedule(p.schedule);
  }

  if (a.format == "structured") {
    json j;
    j["mapping"] = p.mapping.to_string();
    j["schedule"] = print_schedule(p.schedule);
    j["ir"] = print_tensor_ir(p.ir);
    j["intrinsic_calls"] = measure_static(p.ir).intrinsic_call_count;
    out << j.dump(2) << "\n";
    return 0;
  }
  out << "mapping: " << p.mapping.to_string() << "\n";
  out << "schedule:\n" << print_schedule(p.schedule);
  out << print_tensor_ir(p.ir);
  return 0;
}

// ---- verify -------------------------------------------------------------------

int cmd_verify(const CommonArgs& a, int trials, double rtol, bool rtol_set,
               std::ostream& out) {
  ComputeOp op = load_op(a.op_path);
  Intrinsic intr = resolve_intrinsic(a.intrinsic);
  if (op.output().dtype.is_float() && !rtol_set)
    throw ValidationError(
        "floating-point outputs accumulate in a different order once "
        "tensorized; pass an explicit --rtol");
  Pipeline p = build_pipeline(op, intr, a.mapping, a.pad, "", "");

  double max_rel = 0.0;
  int64_t mismatches = 0;
  bool bitexact = true;
  std::string first;
  for (int t = 0; t < trials; ++t) {
    Inputs in = random_inputs(op, a.seed + static_cast<uint64_t>(t));
    TensorValue ref = eval_reference(op, in);
    TensorValue got =
        slice(eval_tir(p.ir, pad_inputs(in, p.tiled.op)), ref.shape);
    Deviation d = compare(ref, got, rtol);
    max_rel = std::max(max_rel, d.max_rel);
    mismatches += d.mismatches;
    bitexact = bitexact && d.bitexact;
    if (d.mismatches > 0 && first.empty()) {
      for (int64_t k = 0; k < ref.size(); ++k) {
        double rv = ref.is_float() ? ref.fat(k) : double(ref.iat(k));
        double gv = got.is_float() ? got.fat(k) : double(got.iat(k));
        if (std::abs(rv - gv) / std::max(std::abs(rv), 1.0) > rtol) {
          std::ostringstream ss;
          ss << "trial " << t << " flat index " << k << ": reference " << rv
             << " vs tensorized " << gv;
          first = ss.str();
          break;
        }
      }
    }
  }
  bool pass = mismatches == 0;

  if (a.format == "structured") {
    json j;
    j["trials"] = trials;
    j["max_rel"] = max_rel;
    j["mismatches"] = mismatches;
    j["bitexact"] = bitexact;
    j["pass"] = pass;
    if (!first.empty()) j["first_mismatch"] = first;
    out << j.dump(2) << "\n";
    return pass ? 0 : 1;
  }
  out << "trials: " << trials << "\n";
  out << "max rel deviation: " << max_rel << "\n";
  out << "bitexact: " << (bitexact ? "yes" : "no") << "\n";
  if (!first.empty()) out << "first mismatch: " << first << "\n";
  out << (pass ? "PASS" : "FAIL") << "\n";
  return pass ? 0 : 1;
}

// ---- tune ---------------------------------------------------------------------

json candidate_json(const Candidate& c) {
  json j;
  j["id"] = c.id;
  j["mapping"] = c.mapping.to_string();
  j["sketch"] = c.sketch;
  j["cost"] = cost_key_to_string(c.key);
  j["verified"] = c.verified;
  return j;
}

int tune_one(const ComputeOp& op, const Intrinsic& intr, TuneOptions opts,
             const std::string& schedule_out, const std::string& fmt,
             std::ostream& out) {
  std::ostringstream log;
  opts.log = &log;
  TuneResult r = tune(op, intr, opts);

  if (!schedule_out.empty()) {
    std::ofstream f(schedule_out);
    if (!f) throw IoError("cannot open '" + schedule_out + "' for writing");
    f << print_schedule(r.best.schedule);
  }

  if (fmt == "structured") {
    json j;
    j["candidates"] = json::array();
    for (const auto& c : r.evaluated) j["candidates"].push_back(candidate_json(c));
    j["best"] = candidate_json(r.best);
    out << j.dump(2) << "\n";
    return 0;
  }
  out << log.str();
  out << "best: candidate " << r.best.id << " mapping="
      << r.best.mapping.to_string() << " sketch=" << r.best.sketch
      << " cost=" << cost_key_to_string(r.best.key) << "\n";
  return 0;
}

int cmd_tune(const CommonArgs& a, const std::string& bank,
             const std::string& workload, const std::string& target,
             int budget, bool force_verify, const std::string& schedule_out,
             std::ostream& out) {
  Intrinsic intr = resolve_intrinsic(a.intrinsic);
  TuneOptions opts;
  opts.target = target == "gpu" ? Target::Gpu : Target::Cpu;
  opts.budget = budget;
  opts.seed = a.seed;
  opts.allow_pad = true;
  opts.force_verify = force_verify;

  if (bank.empty()) {
    ComputeOp op = load_op(a.op_path);
    return tune_one(op, intr, opts, schedule_out, a.format, out);
  }

  // Bank sweep: one row per workload.
  std::vector<BankEntry> entries = bank_by_name(bank);
  if (!workload.empty()) {
    std::vector<BankEntry> filtered;
    for (auto& e : entries)
      if (e.shape.name == workload) filtered.push_back(std::move(e));
    if (filtered.empty())
      throw ValidationError("no workload named '" + workload + "' in bank '" +
                            bank + "'");
    entries = std::move(filtered);
  }

  json rows = json::array();
  for (const auto& e : entries) {
    ComputeOp op = infer_types(parse_compute(e.tdsl));
    std::ostringstream log;
    TuneOptions o = opts;
    o.log = &log;
    TuneResult r = tune(op, intr, o);
    if (a.format == "structured") {
      json row = candidate_json(r.best);
      row["workload"] = e.shape.name;
      row["evaluated"] = r.evaluated.size();
      rows.push_back(row);
    } else {
      out << e.shape.name << " best mapping=" << r.best.mapping.to_string()
          << " sketch=" << r.best.sketch
          << " cost=" << cost_key_to_string(r.best.key) << " evaluated="
          << r.evaluated.size() << "\n";
    }
  }
  if (a.format == "structured") out << rows.dump(2) << "\n";
  return 0;
}

// ---- run ----------------------------------------------------------------------

int cmd_run(const CommonArgs& a, const std::string& schedule_path,
            const std::vector<std::string>& input_specs,
            const std::string& output_path, bool tensorized, bool show_cost,
            std::ostream& out) {
  ComputeOp op = load_op(a.op_path);

  TensorIR ir;
  ComputeOp exec_op = op;  // op whose declarations size the buffers
  bool padded = false;
  if (tensorized) {
    Intrinsic intr = resolve_intrinsic(a.intrinsic);
    Pipeline p = build_pipeline(op, intr, a.mapping, a.pad, "", "");
    ir = p.ir;
    exec_op = p.tiled.op;
    padded = true;
  } else if (!schedule_path.empty()) {
    ir = lower(op, load_schedule(schedule_path));
  } else {
    ir = lower(op, {});
  }

  Inputs in;
  for (const auto& spec : input_specs) {
    auto eq = spec.find('=');
    if (eq == std::string::npos)
      throw ValidationError("--input expects name=path, got '" + spec + "'");
    in.emplace(spec.substr(0, eq), load_tensor(spec.substr(eq + 1)));
  }
  // Any tensor not supplied gets a seeded random image.
  uint64_t k = 0;
  for (const auto& td : op.tensors) {
    bool needed = td.role == Role::Input || (td.name == op.out && op.update);
    if (needed && in.find(td.name) == in.end())
      in.emplace(td.name, random_tensor(td, a.seed + k));
    ++k;
  }

  Inputs exec_in = padded ? pad_inputs(in, exec_op) : in;
  TensorValue result = eval_tir(ir, exec_in);
  if (padded) result = slice(result, op.output().shape);

  if (!output_path.empty()) save_tensor(output_path, result);

  if (a.format == "structured") {
    json j;
    j["output"] = tensor_to_text(result);
    if (show_cost) j["cost"] = measure(ir, exec_in).to_string();
    if (!output_path.empty()) j["saved"] = output_path;
    out << j.dump(2) << "\n";
    return 0;
  }
  out << tensor_to_text(result) << "\n";
  if (show_cost) out << "cost: " << measure(ir, exec_in).to_string() << "\n";
  if (!output_path.empty()) out << "saved: " << output_path << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"loop-nest tensorizing compiler", "tzc"};
  app.require_subcommand(1);

  CommonArgs a;
  auto add_common = [&](CLI::App* sub, bool needs_op) {
    if (needs_op)
      sub->add_option("op", a.op_path, "path to a .tdsl program")->required();
    sub->add_option("--intrinsic", a.intrinsic,
                    "builtin name or .intr file (default vdot_16x4)");
    sub->add_option("--format", a.format, "text|structured")
        ->check(CLI::IsMember({"text", "structured"}));
    sub->add_option("--seed", a.seed, "probe input seed");
  };

  auto* ins = app.add_subcommand("inspect", "list feasible loop mappings");
  add_common(ins, true);

  auto* ten = app.add_subcommand("tensorize", "emit the rewritten loop nest");
  add_common(ten, true);
  std::string target, sketch, schedule_out;
  ten->add_option("--mapping", a.mapping, "mapping index (default 0)");
  ten->add_flag("--pad", a.pad, "zero-pad non-dividing extents");
  ten->add_option("--target", target, "apply a hardware sketch: cpu|gpu")
      ->check(CLI::IsMember({"cpu", "gpu"}));
  ten->add_option("--sketch", sketch,
                  "sketch parameters (cpu: l1,f1,l2,f2; gpu: p,fuse,split_k; "
                  "default: space head)");
  ten->add_option("--schedule-out", schedule_out, "write the schedule here");

  auto* ver = app.add_subcommand("verify",
                                 "differential-test tensorized vs reference");
  add_common(ver, true);
  int trials = 50;
  double rtol = 0.0;
  ver->add_option("--mapping", a.mapping, "mapping index (default 0)");
  ver->add_flag("--pad", a.pad, "zero-pad non-dividing extents");
  ver->add_option("--trials", trials, "random input trials (default 50)");
  auto* rtol_opt =
      ver->add_option("--rtol", rtol, "relative tolerance (default exact)");

  auto* tun = app.add_subcommand("tune", "search mapping x sketch candidates");
  add_common(tun, false);
  std::string bank, workload, tune_target = "cpu", tune_schedule_out;
  int budget = 16;
  bool force_verify = false;
  tun->add_option("op", a.op_path, "path to a .tdsl program");
  tun->add_option("--bank", bank, "sweep a workload bank: table1|resnet18-3d");
  tun->add_option("--workload", workload, "restrict the bank to one workload");
  tun->add_option("--target", tune_target, "cpu|gpu (default cpu)")
      ->check(CLI::IsMember({"cpu", "gpu"}));
  tun->add_option("--budget", budget, "max candidates (default 16)");
  tun->add_flag("--force-verify", force_verify,
                "interpret every candidate regardless of size");
  tun->add_option("--schedule-out", tune_schedule_out,
                  "write the best schedule here");

  auto* run = app.add_subcommand("run", "execute a program on the VM");
  add_common(run, true);
  std::string schedule_path, output_path;
  std::vector<std::string> input_specs;
  bool tensorized = false, show_cost = false;
  run->add_option("--schedule", schedule_path, "schedule file to apply");
  run->add_option("--input", input_specs, "name=path tensor container");
  run->add_option("--output", output_path, "write the result here");
  run->add_flag("--tensorized", tensorized,
                "tensorize with --intrinsic/--mapping before running");
  run->add_option("--mapping", a.mapping, "mapping index (default 0)");
  run->add_flag("--pad", a.pad, "zero-pad non-dividing extents");
  run->add_flag("--cost", show_cost, "print the execution cost report");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (app.got_subcommand(ins)) return cmd_inspect(a, out);
    if (app.got_subcommand(ten))
      return cmd_tensorize(a, target, sketch, schedule_out, out);
    if (app.got_subcommand(ver))
      return cmd_verify(a, trials, rtol, rtol_opt->count() > 0, out);
    if (app.got_subcommand(tun)) {
      if (bank.empty() && a.op_path.empty())
        throw ValidationError("tune needs an op file or --bank");
      return cmd_tune(a, bank, workload, tune_target, budget, force_verify,
                      tune_schedule_out, out);
    }
    if (app.got_subcommand(run))
      return cmd_run(a, schedule_path, input_specs, output_path, tensorized,
                     show_cost, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace tzc
