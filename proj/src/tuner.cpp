#include "tzc/tuner.hpp"

#include <algorithm>
#include <ostream>

#include "tzc/errors.hpp"

namespace tzc {

namespace {

// Extent of a sketch axis; ".o" pieces of the tensorize splits resolve
// through the recorded schedule.
int64_t outer_extent(const TensorizedOp& t, const std::string& name) {
  for (const auto& tf : t.schedule)
    if (tf.kind == Transform::Kind::Split && tf.a + ".o" == name)
      return t.op.find_loop(tf.a)->extent / tf.factor;
  const LoopVar* lv = t.op.find_loop(name);
  internal_check(lv != nullptr, "sketch names unknown axis '" + name + "'");
  return lv->extent;
}

std::vector<int64_t> divisors(int64_t e) {
  std::vector<int64_t> d;
  for (int64_t f = 1; f <= e; ++f)
    if (e % f == 0) d.push_back(f);
  return d;
}

}  // namespace

std::vector<CpuSketch> enumerate_cpu_space(const TensorizedOp& t,
                                           const CpuLimits& limits) {
  std::vector<int64_t> ext;
  for (const auto& n : t.outer_dp) ext.push_back(outer_extent(t, n));
  std::vector<CpuSketch> out;
  if (ext.empty()) return out;
  int n = static_cast<int>(ext.size());

  // Canonical cut positions: (level, factor) with the boundary falling
  // after an outer piece of extent/factor. factor == extent duplicates the
  // previous level's factor-1 cut, so it is only kept at level 0.
  std::vector<std::pair<int, int64_t>> cuts;
  for (int l = 0; l < n; ++l)
    for (int64_t f : divisors(ext[l])) {
      if (l > 0 && f == ext[l] && f > 1) continue;
      cuts.emplace_back(l, f);
    }

  std::vector<int64_t> head(n + 1, 1);  // head[k] = product of ext[0..k)
  for (int k = 0; k < n; ++k) head[k + 1] = head[k] * ext[k];
  auto fused_of = [&](const std::pair<int, int64_t>& c) {
    return head[c.first] * (ext[c.first] / c.second);
  };
  auto unroll_of = [&](const std::pair<int, int64_t>& c) {
    return c.second * (head[n] / head[c.first + 1]);
  };

  struct Item {
    CpuSketch s;
    int64_t fused, unroll;
    size_t pos;
  };
  std::vector<Item> items;
  size_t pos = 0;
  for (const auto& c1 : cuts)
    for (const auto& c2 : cuts) {
      ++pos;
      bool ordered = c1.first < c2.first ||
                     (c1.first == c2.first && c1.second % c2.second == 0);
      if (!ordered) continue;
      int64_t fe = fused_of(c1), uf = unroll_of(c2);
      if (fe >= limits.parallel_bound || uf >= limits.unroll_bound) continue;
      items.push_back({CpuSketch{c1.first, c1.second, c2.first, c2.second},
                       fe, uf, pos});
    }

  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) {
    if (a.fused != b.fused) return a.fused > b.fused;
    if (a.unroll != b.unroll) return a.unroll > b.unroll;
    return a.pos < b.pos;
  });
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(it.s);
  return out;
}

namespace {

// Outer data-parallel extents after a p x p window split (mirrors the
// sketch application); false when no two axes qualify.
bool window_axes(const TensorizedOp& t, int64_t p,
                 std::vector<int64_t>* out) {
  std::vector<int64_t> dp;
  for (const auto& n : t.outer_dp) dp.push_back(outer_extent(t, n));
  if (p > 1) {
    std::vector<size_t> idx;
    for (size_t k = dp.size(); k-- > 0;) {
      if (dp[k] > 1 && dp[k] % p == 0) idx.push_back(k);
      if (idx.size() == 2) break;
    }
    if (idx.size() < 2) return false;
    for (size_t k : idx) dp[k] /= p;
  }
  *out = dp;
  return true;
}

}  // namespace

std::vector<GpuSketch> enumerate_gpu_space(const TensorizedOp& t,
                                           const GpuLimits& limits) {
  auto fits = [&](const GpuSketch& s) {
    try {
      apply_gpu_sketch(t, s);
      return true;
    } catch (const ScheduleError&) {
      return false;
    }
  };

  // Default-first pick: the largest fitting window, the first fitting
  // reduction split, fusion when the block grid it joins is small.
  GpuSketch def;
  for (int64_t p = limits.p_max; p >= 2; --p)
    if (fits({p, false, 1})) {
      def.p = p;
      break;
    }
  for (int64_t f : limits.split_factors)
    if (f > 1 && fits({def.p, false, f})) {
      def.split_k = f;
      break;
    }
  if (limits.allow_fuse) {
    std::vector<int64_t> dp;
    if (window_axes(t, def.p, &dp)) {
      for (size_t k = dp.size(); k-- > 1;)
        if (dp[k - 1] == dp[k] && dp[k] > 1) {
          def.fuse_hw = dp[k] * dp[k] < 256;
          break;
        }
    }
  }
  if (def.fuse_hw && !fits(def)) def.fuse_hw = false;

  std::vector<GpuSketch> out;
  auto same = [](const GpuSketch& a, const GpuSketch& b) {
    return a.p == b.p && a.fuse_hw == b.fuse_hw && a.split_k == b.split_k;
  };
  if (fits(def)) out.push_back(def);

  std::vector<int64_t> ps;
  for (int64_t p = limits.p_max; p >= 2; --p) ps.push_back(p);
  ps.push_back(1);
  std::vector<int64_t> splits = limits.split_factors;
  splits.push_back(1);
  std::vector<int> fuses =
      limits.allow_fuse ? std::vector<int>{1, 0} : std::vector<int>{0};

  for (int64_t p : ps)
    for (int64_t sk : splits)
      for (int fu : fuses) {
        GpuSketch s{p, fu != 0, sk};
        bool dup = false;
        for (const auto& seen : out) dup |= same(seen, s);
        if (!dup && fits(s)) out.push_back(s);
      }
  return out;
}

TuneResult tune(const ComputeOp& op, const Intrinsic& intr,
                const TuneOptions& opts) {
  if (opts.budget <= 0) throw ValidationError("tuning budget must be positive");
  InspectionReport rep = inspect(op, intr);
  if (!rep.match.ok)
    throw NoFeasibleMapping("'" + intr.name +
                            "' does not match the operation: " +
                            rep.match.reason);
  if (rep.mappings.empty())
    throw NoFeasibleMapping("no feasible loop mapping for '" + intr.name + "'");

  TuneResult res;
  int next_id = 0;
  bool probe_ready = false;
  Inputs probe;
  TensorValue ref;
  double rtol = op.output().dtype.is_float() ? 1e-3 : 0.0;

  for (const auto& m : rep.mappings) {
    if (static_cast<int>(res.evaluated.size()) >= opts.budget) break;
    TensorizedOp t;
    try {
      t = tile_and_reorder(op, intr, m, opts.allow_pad);
    } catch (const DivisibilityError&) {
      continue;  // padding disabled and this mapping needs it
    }

    std::vector<std::string> names;
    std::vector<Schedule> schedules;
    if (opts.target == Target::Cpu) {
      for (const auto& s : enumerate_cpu_space(t, opts.cpu_limits)) {
        names.push_back(s.to_string());
        schedules.push_back(apply_cpu_sketch(t, s));
      }
    } else {
      for (const auto& s : enumerate_gpu_space(t, opts.gpu_limits)) {
        names.push_back(s.to_string());
        schedules.push_back(apply_gpu_sketch(t, s));
      }
    }

    bool padded_ready = false;
    Inputs padded;
    for (size_t si = 0; si < schedules.size(); ++si) {
      if (static_cast<int>(res.evaluated.size()) >= opts.budget) break;
      Candidate c;
      c.mapping = m;
      c.sketch = names[si];
      c.schedule = schedules[si];

      // A mapping can satisfy the access-feasibility condition yet still be
      // inexpressible with the instruction's declared operand rules (e.g. an
      // operand that varies along a lane the rule replicates). Such
      // candidates leave the race without consuming budget.
      TensorIR injected;
      try {
        injected = inject_intrinsic(lower(t.op, c.schedule), intr, m);
      } catch (const InjectError&) {
        continue;
      }
      c.id = next_id++;
      c.cost = measure_static(injected);
      c.key = cost_key(c.cost, opts.cost_model);

      int64_t volume = 1;
      for (const auto& l : t.op.loops) volume *= l.extent;
      if (opts.force_verify || volume <= opts.verify_limit) {
        if (!probe_ready) {
          probe = random_inputs(op, opts.seed);
          ref = eval_reference(op, probe);
          probe_ready = true;
        }
        if (!padded_ready) {
          for (const auto& [name, v] : probe)
            padded.emplace(name, embed(v, t.op.find_tensor(name)->shape));
          padded_ready = true;
        }
        TensorValue got = slice(eval_tir(injected, padded), op.output().shape);
        Deviation dev = compare(ref, got, rtol);
        if (dev.mismatches > 0)
          throw InternalError("candidate " + std::to_string(c.id) +
                              " is not equivalent to the operation (max_rel=" +
                              std::to_string(dev.max_rel) + ")");
        c.verified = true;
      }

      if (opts.log)
        *opts.log << "candidate " << c.id << " mapping=" << m.to_string()
                  << " sketch=" << c.sketch
                  << " cost=" << cost_key_to_string(c.key) << "\n";
      res.evaluated.push_back(std::move(c));
    }
  }

  if (res.evaluated.empty())
    throw NoFeasibleMapping(
        "no candidate could be scheduled within the search constraints");
  size_t best = 0;
  for (size_t k = 1; k < res.evaluated.size(); ++k)
    if (res.evaluated[k].key < res.evaluated[best].key) best = k;
  res.best = res.evaluated[best];
  return res;
}

}  // namespace tzc
