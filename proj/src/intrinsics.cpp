#include "tzc/intrinsics.hpp"

#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tzc/errors.hpp"
#include "tzc/parser.hpp"

namespace tzc {

std::string OperandRule::kind_name(Kind k) {
  switch (k) {
    case Kind::Vectorize:
      return "vectorize";
    case Kind::Broadcast:
      return "broadcast";
    case Kind::UnrollConcat:
      return "unroll_concat";
    case Kind::Passthrough:
      return "passthrough";
  }
  return "?";
}

const std::vector<OperandRule>* Intrinsic::rules_for(
    const std::string& tensor) const {
  for (const auto& [name, rules] : operand_rules)
    if (name == tensor) return &rules;
  return nullptr;
}

std::string Intrinsic::accumulator() const {
  if (semantics.update) return semantics.out;
  for (const auto& t : semantics.tensors) {
    if (t.role != Role::Input) continue;
    // Scan the value tree for a load of t at exactly the store indices.
    bool found = false;
    std::vector<ExprPtr> stack{semantics.value};
    while (!stack.empty()) {
      ExprPtr e = stack.back();
      stack.pop_back();
      if (e->kind == Expr::Kind::Load && e->name == t.name &&
          e->args.size() == semantics.indices.size()) {
        bool same = true;
        for (size_t i = 0; i < e->args.size(); ++i)
          same &= expr_equal(e->args[i], semantics.indices[i], false);
        found |= same;
      }
      for (const auto& a : e->args) stack.push_back(a);
    }
    if (found) return t.name;
  }
  return "";
}

void validate_intrinsic(const Intrinsic& intr) {
  if (intr.name.empty()) throw RuleError("intrinsic without a name");
  validate(intr.semantics);
  if (intr.requires_inplace_acc != intr.semantics.update)
    throw RuleError("requires_inplace_acc must mirror accumulate-form semantics");

  std::set<std::string> covered;
  for (const auto& [tensor, rules] : intr.operand_rules) {
    const TensorDecl* t = intr.semantics.find_tensor(tensor);
    if (!t) throw RuleError("rule for unknown tensor '" + tensor + "'");
    if (t->role != Role::Input)
      throw RuleError("rule for non-input tensor '" + tensor + "'");
    if (!covered.insert(tensor).second)
      throw RuleError("duplicate rule for tensor '" + tensor + "'");
    if (rules.empty())
      throw RuleError("empty rule list for tensor '" + tensor + "'");
    int64_t lanes = 1;
    for (const auto& r : rules) {
      if (r.kind == OperandRule::Kind::Passthrough) {
        if (!r.loop.empty())
          throw RuleError("passthrough takes no loop argument");
        continue;
      }
      const LoopVar* l = intr.semantics.find_loop(r.loop);
      if (!l)
        throw RuleError("rule on tensor '" + tensor +
                        "' references unknown loop '" + r.loop + "'");
      if (r.count != l->extent)
        throw RuleError("rule count " + std::to_string(r.count) + " on '" +
                        tensor + "' must equal extent of loop '" + r.loop +
                        "' (" + std::to_string(l->extent) + ")");
      lanes *= r.count;
    }
    if (lanes != t->size())
      throw RuleError("rules on '" + tensor + "' cover " +
                      std::to_string(lanes) + " lanes but the register holds " +
                      std::to_string(t->size()));
  }
  for (const auto& t : intr.semantics.tensors) {
    if (t.role == Role::Input && !covered.count(t.name))
      throw RuleError("input tensor '" + t.name + "' has no operand rule");
  }
}

namespace {

Intrinsic make_builtin(const std::string& name, const std::string& text) {
  Intrinsic intr = parse_intrinsic(text, name);
  return intr;
}

// 16-lane x 4-deep unsigned*signed byte dot product accumulating into a
// separate 32-bit register (the accumulator operand takes arbitrary initial
// values, so plain reduction ops match too).
const char* kVdot16x4 = R"(
tensor a : u8 [64] input
tensor b : i8 [64] input
tensor c : i32 [16] input
tensor d : i32 [16] output
loop i : dp 16
loop j : red 4
d[i] = c[i] + cast<i32>(a[i * 4 + j]) * cast<i32>(b[i * 4 + j])
rule a: vectorize(j) broadcast(i)
rule b: vectorize(j) unroll_concat(i)
rule c: vectorize(i)
mnemonic "llvm.x86.avx512.vpdpbusd.512"
)";

// 4-lane variant of the same shape (128-bit vector units).
const char* kVdot4x4 = R"(
tensor a : u8 [16] input
tensor b : i8 [16] input
tensor c : i32 [4] input
tensor d : i32 [4] output
loop i : dp 4
loop j : red 4
d[i] = c[i] + cast<i32>(a[i * 4 + j]) * cast<i32>(b[i * 4 + j])
rule a: vectorize(j) broadcast(i)
rule b: vectorize(j) unroll_concat(i)
rule c: vectorize(i)
mnemonic "llvm.aarch64.neon.usdot.v4i32.v16i8"
)";

// 16x16x16 fp16 matrix multiply accumulating in fp32. Accumulate-form
// semantics: the instruction adds into the existing accumulator tile, so it
// only replaces ops that are themselves accumulate-form.
const char* kWmma16 = R"(
tensor a : fp16 [16, 16] input
tensor b : fp16 [16, 16] input
tensor c : fp32 [16, 16] output
loop x : dp 16
loop y : dp 16
loop k : red 16
c[x, y] += cast<fp32>(a[x, k]) * cast<fp32>(b[k, y])
rule a: vectorize(k) unroll_concat(x)
rule b: vectorize(y) unroll_concat(k)
mnemonic "llvm.nvvm.wmma.m16n16k16.mma.row.row.f32.f32"
)";

const std::map<std::string, Intrinsic>& builtin_table() {
  static const std::map<std::string, Intrinsic> table = [] {
    std::map<std::string, Intrinsic> t;
    t.emplace("vdot_16x4", make_builtin("vdot_16x4", kVdot16x4));
    t.emplace("vdot_4x4", make_builtin("vdot_4x4", kVdot4x4));
    t.emplace("wmma_16x16x16", make_builtin("wmma_16x16x16", kWmma16));
    return t;
  }();
  return table;
}

}  // namespace

const Intrinsic& builtin(const std::string& name) {
  const auto& table = builtin_table();
  auto it = table.find(name);
  if (it == table.end())
    throw UnknownIntrinsic("no built-in intrinsic named '" + name + "'");
  return it->second;
}

std::vector<std::string> builtin_names() {
  std::vector<std::string> names;
  for (const auto& [k, v] : builtin_table()) names.push_back(k);
  return names;
}

Intrinsic parse_intrinsic(const std::string& text, const std::string& name) {
  // Split description lines from the semantics block, then reuse the DSL
  // parser for the latter.
  std::string semantics_text;
  std::vector<std::string> rule_lines;
  std::string mnemonic;
  bool saw_mnemonic = false;

  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::string trimmed = line;
    size_t b = trimmed.find_first_not_of(" \t");
    trimmed = (b == std::string::npos) ? "" : trimmed.substr(b);
    if (trimmed.rfind("rule", 0) == 0) {
      rule_lines.push_back(trimmed);
    } else if (trimmed.rfind("mnemonic", 0) == 0) {
      size_t q1 = trimmed.find('"');
      size_t q2 = trimmed.rfind('"');
      if (q1 == std::string::npos || q2 <= q1)
        throw SyntaxError("mnemonic line must carry a quoted string");
      mnemonic = trimmed.substr(q1 + 1, q2 - q1 - 1);
      saw_mnemonic = true;
    } else {
      semantics_text += line + "\n";
    }
  }
  if (!saw_mnemonic) throw SyntaxError("intrinsic description lacks a mnemonic");

  Intrinsic intr;
  intr.name = name;
  intr.semantics = infer_types(parse_compute(semantics_text));
  intr.target_mnemonic = mnemonic;
  intr.requires_inplace_acc = intr.semantics.update;

  for (const auto& rl : rule_lines) {
    // rule <tensor>: <kind>(<loop>)...
    std::istringstream rs(rl.substr(4));
    std::string tensor;
    rs >> tensor;
    if (!tensor.empty() && tensor.back() == ':') tensor.pop_back();
    std::string rest;
    std::getline(rs, rest);
    size_t colon = rest.find_first_not_of(" \t");
    if (colon != std::string::npos && rest[colon] == ':') rest = rest.substr(colon + 1);
    if (tensor.empty()) throw SyntaxError("rule line without tensor name");

    std::vector<OperandRule> rules;
    size_t pos = 0;
    while (pos < rest.size()) {
      while (pos < rest.size() && std::isspace(static_cast<unsigned char>(rest[pos])))
        ++pos;
      if (pos >= rest.size()) break;
      size_t end = pos;
      while (end < rest.size() && !std::isspace(static_cast<unsigned char>(rest[end])))
        ++end;
      std::string item = rest.substr(pos, end - pos);
      pos = end;

      OperandRule r;
      size_t paren = item.find('(');
      std::string kind = (paren == std::string::npos) ? item : item.substr(0, paren);
      if (kind == "vectorize")
        r.kind = OperandRule::Kind::Vectorize;
      else if (kind == "broadcast")
        r.kind = OperandRule::Kind::Broadcast;
      else if (kind == "unroll_concat")
        r.kind = OperandRule::Kind::UnrollConcat;
      else if (kind == "passthrough")
        r.kind = OperandRule::Kind::Passthrough;
      else
        throw SyntaxError("unknown rule kind '" + kind + "'");
      if (r.kind != OperandRule::Kind::Passthrough) {
        if (paren == std::string::npos || item.back() != ')')
          throw SyntaxError("rule '" + kind + "' needs a loop argument");
        r.loop = item.substr(paren + 1, item.size() - paren - 2);
        const LoopVar* l = intr.semantics.find_loop(r.loop);
        // Let validate_intrinsic report unknown loops uniformly.
        r.count = l ? l->extent : 0;
      }
      rules.push_back(std::move(r));
    }
    intr.operand_rules.emplace_back(tensor, std::move(rules));
  }

  validate_intrinsic(intr);
  return intr;
}

Intrinsic load_intrinsic(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open intrinsic file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  // Derive the registry name from the file stem.
  size_t slash = path.find_last_of("/\\");
  std::string stem = (slash == std::string::npos) ? path : path.substr(slash + 1);
  size_t dot = stem.rfind('.');
  if (dot != std::string::npos) stem = stem.substr(0, dot);
  return parse_intrinsic(ss.str(), stem);
}

Intrinsic resolve_intrinsic(const std::string& ref) {
  if (ref.size() > 5 && ref.substr(ref.size() - 5) == ".intr")
    return load_intrinsic(ref);
  const auto& table = builtin_table();
  auto it = table.find(ref);
  if (it != table.end()) return it->second;
  std::ifstream probe(ref);
  if (probe) return load_intrinsic(ref);
  throw UnknownIntrinsic("'" + ref + "' is neither a built-in nor a readable file");
}

std::string print_intrinsic(const Intrinsic& intr) {
  // Must stay parseable by parse_intrinsic; the accumulate-form gate is
  // carried by the "+=" spelling of the semantics.
  std::string s = "# intrinsic " + intr.name + "\n";
  s += print_compute(intr.semantics);
  for (const auto& [tensor, rules] : intr.operand_rules) {
    s += "rule " + tensor + ":";
    for (const auto& r : rules) {
      s += " " + OperandRule::kind_name(r.kind);
      if (r.kind != OperandRule::Kind::Passthrough) s += "(" + r.loop + ")";
    }
    s += "\n";
  }
  s += "mnemonic \"" + intr.target_mnemonic + "\"\n";
  return s;
}

}  // namespace tzc
