#include "tzc/tensor_ir.hpp"

#include <functional>

#include "tzc/errors.hpp"

namespace tzc {

std::string loop_ann_name(LoopAnn a) {
  switch (a) {
    case LoopAnn::Serial:
      return "serial";
    case LoopAnn::Parallel:
      return "parallel";
    case LoopAnn::Unrolled:
      return "unroll";
    case LoopAnn::Tensorize:
      return "tensorize";
  }
  return "?";
}

StmtPtr make_for(std::string var, int64_t extent, StmtPtr body, LoopAnn ann) {
  internal_check(extent > 0, "loop extent must be positive");
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::For;
  s->var = std::move(var);
  s->extent = extent;
  s->ann = ann;
  s->body = std::move(body);
  return s;
}

StmtPtr make_store(std::string tensor, std::vector<ExprPtr> indices,
                   ExprPtr value) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Store;
  s->tensor = std::move(tensor);
  s->indices = std::move(indices);
  s->value = std::move(value);
  return s;
}

StmtPtr make_intrinsic(std::string name, std::string dst_tensor,
                       ExprPtr dst_index, std::vector<ExprPtr> args) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Intrinsic;
  s->intrinsic = std::move(name);
  s->tensor = std::move(dst_tensor);
  s->dst_index = std::move(dst_index);
  s->args = std::move(args);
  return s;
}

StmtPtr make_seq(std::vector<StmtPtr> stmts) {
  if (stmts.size() == 1) return stmts[0];
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Seq;
  s->stmts = std::move(stmts);
  return s;
}

const TensorDecl* TensorIR::find_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

namespace {

void print_stmt(const Stmt& s, int depth, std::string* out) {
  std::string pad(static_cast<size_t>(depth) * 2, ' ');
  switch (s.kind) {
    case Stmt::Kind::For: {
      *out += pad + "for " + s.var + " : " + std::to_string(s.extent);
      if (s.ann != LoopAnn::Serial) *out += " " + loop_ann_name(s.ann);
      *out += " {\n";
      print_stmt(*s.body, depth + 1, out);
      *out += pad + "}\n";
      return;
    }
    case Stmt::Kind::Store: {
      *out += pad + s.tensor + "[";
      for (size_t i = 0; i < s.indices.size(); ++i) {
        if (i) *out += ", ";
        *out += expr_to_string(s.indices[i]);
      }
      *out += "] = " + expr_to_string(s.value) + "\n";
      return;
    }
    case Stmt::Kind::Intrinsic: {
      *out += pad + s.intrinsic + "(dst = " + s.tensor + "[" +
              expr_to_string(s.dst_index) + "]";
      for (const auto& a : s.args) *out += ", " + expr_to_string(a);
      *out += ")\n";
      return;
    }
    case Stmt::Kind::Seq: {
      for (const auto& c : s.stmts) print_stmt(*c, depth, out);
      return;
    }
  }
}

}  // namespace

std::string print_tensor_ir(const TensorIR& ir) {
  std::string out;
  for (const auto& t : ir.tensors) {
    out += "buffer " + t.name + " : " + dtype_name(t.dtype) + " [";
    for (size_t i = 0; i < t.shape.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(t.shape[i]);
    }
    out += "]";
    bool is_temp = false;
    for (const auto& n : ir.temps) is_temp |= (n == t.name);
    if (is_temp)
      out += " temp";
    else if (t.role == Role::Output)
      out += " output";
    else
      out += " input";
    out += "\n";
  }
  if (ir.seed_output) out += "# output seeded from input image\n";
  print_stmt(*ir.root, 0, &out);
  return out;
}

void visit_stmts(const StmtPtr& s, const std::function<void(const Stmt&)>& f) {
  if (!s) return;
  f(*s);
  if (s->body) visit_stmts(s->body, f);
  for (const auto& c : s->stmts) visit_stmts(c, f);
}

int count_stmts(const StmtPtr& s, Stmt::Kind kind) {
  int n = 0;
  visit_stmts(s, [&](const Stmt& st) { n += (st.kind == kind) ? 1 : 0; });
  return n;
}

const Intrinsic* TensorIR::find_intrinsic(const std::string& name) const {
  for (const auto& i : intrinsics)
    if (i.name == name) return &i;
  return nullptr;
}

}  // namespace tzc
