#include "tzc/parser.hpp"

#include <cctype>
#include <cstdlib>

#include "tzc/errors.hpp"

namespace tzc {

namespace {

struct Token {
  enum class Kind { Ident, Int, Float, Punct, End };
  Kind kind = Kind::End;
  std::string text;
  int64_t ival = 0;
  double fval = 0.0;
  int line = 0;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

  bool accept_punct(const std::string& p) {
    if (tok_.kind == Token::Kind::Punct && tok_.text == p) {
      advance();
      return true;
    }
    return false;
  }

  void expect_punct(const std::string& p) {
    if (!accept_punct(p)) fail("expected '" + p + "'");
  }

  std::string expect_ident(const std::string& what) {
    if (tok_.kind != Token::Kind::Ident) fail("expected " + what);
    std::string s = tok_.text;
    advance();
    return s;
  }

  int64_t expect_int(const std::string& what) {
    if (tok_.kind != Token::Kind::Int) fail("expected " + what);
    int64_t v = tok_.ival;
    advance();
    return v;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    std::string got = tok_.kind == Token::Kind::End ? "end of input"
                                                    : "'" + tok_.text + "'";
    throw SyntaxError("line " + std::to_string(tok_.line) + ": " + msg +
                      ", got " + got);
  }

 private:
  void advance() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
    tok_ = Token{};
    tok_.line = line_;
    if (pos_ >= src_.size()) return;

    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
              src_[pos_] == '_' || src_[pos_] == '.'))
        ++pos_;
      tok_.kind = Token::Kind::Ident;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      bool is_float = false;
      while (pos_ < src_.size()) {
        char d = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(d))) {
          ++pos_;
        } else if (d == '.' || d == 'e' || d == 'E') {
          is_float = true;
          ++pos_;
          if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-') &&
              (d == 'e' || d == 'E'))
            ++pos_;
        } else {
          break;
        }
      }
      tok_.text = src_.substr(start, pos_ - start);
      if (is_float) {
        tok_.kind = Token::Kind::Float;
        tok_.fval = std::strtod(tok_.text.c_str(), nullptr);
      } else {
        tok_.kind = Token::Kind::Int;
        tok_.ival = std::strtoll(tok_.text.c_str(), nullptr, 10);
      }
      return;
    }
    // "+=" is the one two-character punctuator.
    if (c == '+' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') {
      tok_.kind = Token::Kind::Punct;
      tok_.text = "+=";
      pos_ += 2;
      return;
    }
    static const std::string kPunct = ":[](),+*<>=";
    if (kPunct.find(c) != std::string::npos) {
      tok_.kind = Token::Kind::Punct;
      tok_.text = std::string(1, c);
      ++pos_;
      return;
    }
    throw SyntaxError("line " + std::to_string(line_) +
                      ": unexpected character '" + std::string(1, c) + "'");
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1;
  Token tok_;
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  ComputeOp parse() {
    ComputeOp op;
    bool saw_store = false;
    while (lex_.peek().kind != Token::Kind::End) {
      if (saw_store) lex_.fail("store statement must be the last statement");
      const Token& t = lex_.peek();
      if (t.kind == Token::Kind::Ident && t.text == "tensor") {
        parse_tensor(&op);
      } else if (t.kind == Token::Kind::Ident && t.text == "loop") {
        parse_loop(&op);
      } else {
        parse_store(&op);
        saw_store = true;
      }
    }
    if (!saw_store) throw SyntaxError("missing store statement");
    validate(op);
    return op;
  }

 private:
  void parse_tensor(ComputeOp* op) {
    lex_.next();  // 'tensor'
    TensorDecl t;
    t.name = lex_.expect_ident("tensor name");
    lex_.expect_punct(":");
    t.dtype = dtype_from_name(lex_.expect_ident("dtype"));
    lex_.expect_punct("[");
    t.shape.push_back(lex_.expect_int("extent"));
    while (lex_.accept_punct(",")) t.shape.push_back(lex_.expect_int("extent"));
    lex_.expect_punct("]");
    std::string role = lex_.expect_ident("'input' or 'output'");
    if (role == "input")
      t.role = Role::Input;
    else if (role == "output")
      t.role = Role::Output;
    else
      lex_.fail("expected 'input' or 'output'");
    op->tensors.push_back(std::move(t));
  }

  void parse_loop(ComputeOp* op) {
    lex_.next();  // 'loop'
    LoopVar l;
    l.name = lex_.expect_ident("loop name");
    lex_.expect_punct(":");
    std::string kind = lex_.expect_ident("'dp' or 'red'");
    if (kind == "dp")
      l.kind = LoopKind::DataParallel;
    else if (kind == "red")
      l.kind = LoopKind::Reduction;
    else
      lex_.fail("expected 'dp' or 'red'");
    l.extent = lex_.expect_int("loop extent");
    op->loops.push_back(std::move(l));
  }

  void parse_store(ComputeOp* op) {
    op->out = lex_.expect_ident("store target");
    lex_.expect_punct("[");
    op->indices.push_back(parse_expr());
    while (lex_.accept_punct(",")) op->indices.push_back(parse_expr());
    lex_.expect_punct("]");
    if (lex_.accept_punct("+=")) {
      op->update = true;
      ExprPtr rhs = parse_expr();
      // Canonical accumulate form: output load is the left addend.
      op->value = add(load(op->out, op->indices), rhs);
    } else {
      lex_.expect_punct("=");
      op->update = false;
      op->value = parse_expr();
    }
  }

  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    while (lex_.accept_punct("+")) e = add(e, parse_term());
    return e;
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_factor();
    while (lex_.accept_punct("*")) e = mul(e, parse_factor());
    return e;
  }

  ExprPtr parse_factor() {
    const Token& t = lex_.peek();
    if (t.kind == Token::Kind::Int) return int_imm(lex_.next().ival);
    if (t.kind == Token::Kind::Float) return float_imm(lex_.next().fval);
    if (t.kind == Token::Kind::Punct && t.text == "(") {
      lex_.next();
      ExprPtr e = parse_expr();
      lex_.expect_punct(")");
      return e;
    }
    if (t.kind == Token::Kind::Ident) {
      if (t.text == "cast") {
        lex_.next();
        lex_.expect_punct("<");
        DType dt = dtype_from_name(lex_.expect_ident("dtype"));
        lex_.expect_punct(">");
        lex_.expect_punct("(");
        ExprPtr e = parse_expr();
        lex_.expect_punct(")");
        return cast(dt, e);
      }
      std::string name = lex_.next().text;
      if (lex_.accept_punct("[")) {
        std::vector<ExprPtr> idx;
        idx.push_back(parse_expr());
        while (lex_.accept_punct(",")) idx.push_back(parse_expr());
        lex_.expect_punct("]");
        return load(name, std::move(idx));
      }
      return var(name);
    }
    lex_.fail("expected expression");
  }

  Lexer lex_;
};

}  // namespace

ComputeOp parse_compute(const std::string& text) { return Parser(text).parse(); }

}  // namespace tzc
