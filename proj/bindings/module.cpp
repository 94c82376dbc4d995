#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tzc/errors.hpp"
#include "tzc/inspector.hpp"
#include "tzc/intrinsics.hpp"
#include "tzc/parser.hpp"
#include "tzc/rewriter.hpp"
#include "tzc/tuner.hpp"
#include "tzc/vm.hpp"
#include "tzc/workloads.hpp"

namespace py = pybind11;
using namespace tzc;

namespace {

TensorValue array_to_tensor(const TensorDecl& decl, const py::array& arr) {
  TensorValue v = TensorValue::zeros(decl.dtype, decl.shape);
  if (decl.dtype.is_float()) {
    auto a = py::array_t<double, py::array::c_style | py::array::forcecast>(arr);
    if (a.size() != v.size())
      throw ShapeError("array for '" + decl.name + "' has wrong element count");
    const double* p = a.data();
    for (int64_t k = 0; k < v.size(); ++k)
      v.fdata[k] = decl.dtype.bits == 16 ? round_f16(p[k]) : round_f32(p[k]);
  } else {
    auto a =
        py::array_t<int64_t, py::array::c_style | py::array::forcecast>(arr);
    if (a.size() != v.size())
      throw ShapeError("array for '" + decl.name + "' has wrong element count");
    const int64_t* p = a.data();
    for (int64_t k = 0; k < v.size(); ++k) v.idata[k] = wrap_int(p[k], decl.dtype);
  }
  return v;
}

py::array tensor_to_array(const TensorValue& v) {
  std::vector<py::ssize_t> shape(v.shape.begin(), v.shape.end());
  if (v.is_float()) {
    py::array_t<double> a(shape);
    std::copy(v.fdata.begin(), v.fdata.end(), a.mutable_data());
    return a;
  }
  py::array_t<int64_t> a(shape);
  std::copy(v.idata.begin(), v.idata.end(), a.mutable_data());
  return a;
}

Inputs gather_inputs(const ComputeOp& op, const py::dict& given,
                     uint64_t seed) {
  Inputs in = random_inputs(op, seed);
  for (const auto& item : given) {
    std::string name = py::cast<std::string>(item.first);
    const TensorDecl* td = op.find_tensor(name);
    if (!td) throw MissingInput("no tensor named '" + name + "'");
    in[name] = array_to_tensor(*td, py::cast<py::array>(item.second));
  }
  return in;
}

py::dict mapping_dict(const LoopMapping& m) {
  py::dict d;
  d["assignment"] = m.to_string();
  d["needs_padding"] = m.needs_padding;
  py::dict b;
  for (const auto& [reg, axes] : m.broadcast_axes)
    if (!axes.empty()) b[py::str(reg)] = axes;
  d["broadcast"] = b;
  return d;
}

}  // namespace

PYBIND11_MODULE(_tzc, m) {
  m.doc() = "loop-nest tensorizing compiler";

  py::class_<ComputeOp>(m, "ComputeOp")
      .def("__repr__", [](const ComputeOp& op) { return print_compute(op); })
      .def_property_readonly("update", [](const ComputeOp& op) { return op.update; })
      .def_property_readonly("out", [](const ComputeOp& op) { return op.out; });

  py::class_<Intrinsic>(m, "Intrinsic")
      .def("__repr__", [](const Intrinsic& i) { return print_intrinsic(i); })
      .def_property_readonly("name",
                             [](const Intrinsic& i) { return i.name; });

  m.def("parse_compute",
        [](const std::string& text) { return infer_types(parse_compute(text)); },
        py::arg("text"),
        "Parse and type-resolve a loop-nest DSL program.");

  m.def("builtin_names", &builtin_names);
  m.def("intrinsic", &resolve_intrinsic, py::arg("ref"),
        "Builtin instruction name or path to a .intr file.");

  m.def("matmul_tdsl",
        [](int64_t mm, int64_t n, int64_t k, bool fp16) {
          return matmul_tdsl(mm, n, k, fp16 ? fp16_profile() : int8_profile());
        },
        py::arg("m"), py::arg("n"), py::arg("k"), py::arg("fp16") = false);
  m.def("conv2d_tdsl",
        [](int64_t in_c, int64_t in_hw, int64_t out_c, int64_t kernel,
           int64_t stride, int64_t lane_block, int64_t red_block) {
          ConvShape c{"conv", in_c, in_hw, out_c, kernel, stride};
          return conv2d_tdsl(c, lane_block, red_block);
        },
        py::arg("in_c"), py::arg("in_hw"), py::arg("out_c"), py::arg("kernel"),
        py::arg("stride") = 1, py::arg("lane_block") = 16,
        py::arg("red_block") = 4);
  m.def("conv3d_tdsl",
        [](int64_t in_c, int64_t in_hw, int64_t out_c, int64_t kernel,
           int64_t stride, int64_t lane_block, int64_t red_block) {
          ConvShape c{"conv", in_c, in_hw, out_c, kernel, stride};
          return conv3d_tdsl(c, lane_block, red_block);
        },
        py::arg("in_c"), py::arg("in_hw"), py::arg("out_c"), py::arg("kernel"),
        py::arg("stride") = 1, py::arg("lane_block") = 16,
        py::arg("red_block") = 4);

  m.def("inspect",
        [](const ComputeOp& op, const Intrinsic& intr) {
          InspectionReport rep = inspect(op, intr);
          py::dict d;
          d["match"] = rep.match.ok;
          if (!rep.match.ok) d["reason"] = rep.match.reason;
          py::list maps;
          for (const auto& mp : rep.mappings) maps.append(mapping_dict(mp));
          d["mappings"] = maps;
          return d;
        },
        py::arg("op"), py::arg("intrinsic"));

  m.def("tensorize",
        [](const ComputeOp& op, const Intrinsic& intr, int mapping, bool pad) {
          InspectionReport rep = inspect(op, intr);
          if (!rep.match.ok)
            throw NoFeasibleMapping("no match: " + rep.match.reason);
          if (mapping < 0 || mapping >= static_cast<int>(rep.mappings.size()))
            throw ValidationError("mapping index out of range");
          TensorizedOp t = tile_and_reorder(op, intr, rep.mappings[mapping], pad);
          TensorIR ir =
              inject_intrinsic(lower(t.op, t.schedule), intr, t.mapping);
          py::dict d;
          d["ir"] = print_tensor_ir(ir);
          d["schedule"] = print_schedule(t.schedule);
          d["mapping"] = t.mapping.to_string();
          return d;
        },
        py::arg("op"), py::arg("intrinsic"), py::arg("mapping") = 0,
        py::arg("pad") = false);

  m.def("eval_reference",
        [](const ComputeOp& op, const py::dict& inputs, uint64_t seed) {
          return tensor_to_array(
              eval_reference(op, gather_inputs(op, inputs, seed)));
        },
        py::arg("op"), py::arg("inputs") = py::dict(), py::arg("seed") = 0,
        "Run the declared formula; unsupplied tensors get seeded random "
        "images.");

  m.def("verify",
        [](const ComputeOp& op, const Intrinsic& intr, int mapping, bool pad,
           int trials, uint64_t seed, double rtol) {
          InspectionReport rep = inspect(op, intr);
          if (!rep.match.ok)
            throw NoFeasibleMapping("no match: " + rep.match.reason);
          if (mapping < 0 || mapping >= static_cast<int>(rep.mappings.size()))
            throw ValidationError("mapping index out of range");
          TensorizedOp t = tile_and_reorder(op, intr, rep.mappings[mapping], pad);
          TensorIR ir =
              inject_intrinsic(lower(t.op, t.schedule), intr, t.mapping);
          double max_rel = 0.0;
          int64_t mismatches = 0;
          for (int k = 0; k < trials; ++k) {
            Inputs in = random_inputs(op, seed + static_cast<uint64_t>(k));
            TensorValue ref = eval_reference(op, in);
            Inputs padded;
            for (const auto& [name, v] : in)
              padded.emplace(name, embed(v, t.op.find_tensor(name)->shape));
            TensorValue got = slice(eval_tir(ir, padded), ref.shape);
            Deviation dev = compare(ref, got, rtol);
            max_rel = std::max(max_rel, dev.max_rel);
            mismatches += dev.mismatches;
          }
          py::dict d;
          d["pass"] = mismatches == 0;
          d["max_rel"] = max_rel;
          d["trials"] = trials;
          return d;
        },
        py::arg("op"), py::arg("intrinsic"), py::arg("mapping") = 0,
        py::arg("pad") = false, py::arg("trials") = 10, py::arg("seed") = 0,
        py::arg("rtol") = 0.0);

  m.def("tune",
        [](const ComputeOp& op, const Intrinsic& intr, const std::string& target,
           int budget, uint64_t seed) {
          TuneOptions opts;
          opts.target = target == "gpu" ? Target::Gpu : Target::Cpu;
          opts.budget = budget;
          opts.seed = seed;
          std::ostringstream log;
          opts.log = &log;
          TuneResult r = tune(op, intr, opts);
          py::dict best;
          best["id"] = r.best.id;
          best["mapping"] = r.best.mapping.to_string();
          best["sketch"] = r.best.sketch;
          best["cost"] = cost_key_to_string(r.best.key);
          best["schedule"] = print_schedule(r.best.schedule);
          py::dict d;
          d["best"] = best;
          d["evaluated"] = static_cast<int>(r.evaluated.size());
          d["log"] = log.str();
          return d;
        },
        py::arg("op"), py::arg("intrinsic"), py::arg("target") = "cpu",
        py::arg("budget") = 16, py::arg("seed") = 0);
}
