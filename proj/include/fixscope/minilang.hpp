#pragma once

// Recursive-descent parser and printer for MiniLang (grammar in
// docs/minilang.ebnf).

#include <array>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "fixscope/ast.hpp"
#include "fixscope/error.hpp"

namespace fixscope {

namespace minilang {

enum class Tok { Int, Float, Ident, Keyword, Op, Punct, End };

struct Token {
  Tok kind;
  std::string text;
  std::size_t offset;
  std::size_t line;
  std::size_t column;
};

inline bool is_keyword(std::string_view s) {
  return s == "def" || s == "if" || s == "else" || s == "while" || s == "return";
}

inline bool is_comparison(std::string_view op) {
  return op == "==" || op == "!=" || op == "<" || op == "<=" || op == ">" || op == ">=";
}

inline const std::array<std::string_view, 6>& comparison_ops() {
  static const std::array<std::string_view, 6> ops{"==", "!=", "<", "<=", ">", ">="};
  return ops;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_trivia();
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "", pos_, line_, col_});
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_trivia() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '#' || (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/')) {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  Token next() {
    const std::size_t start = pos_, line = line_, col = col_;
    const char c = src_[pos_];
    auto make = [&](Tok k) {
      return Token{k, std::string(src_.substr(start, pos_ - start)), start, line, col};
    };
    if (std::isdigit(static_cast<unsigned char>(c))) {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      if (pos_ + 1 < src_.size() && src_[pos_] == '.' &&
          std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
        advance();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        return make(Tok::Float);
      }
      return make(Tok::Int);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                                    src_[pos_] == '_'))
        advance();
      Token t = make(Tok::Ident);
      if (is_keyword(t.text)) t.kind = Tok::Keyword;
      return t;
    }
    if (c == '=' || c == '!' || c == '<' || c == '>') {
      advance();
      if (pos_ < src_.size() && src_[pos_] == '=') {
        advance();
        return make(Tok::Op);
      }
      if (c == '!') throw SyntaxError("unexpected character '!'", start, line, col);
      return make(c == '=' ? Tok::Punct : Tok::Op);
    }
    if (c == '+' || c == '-' || c == '*' || c == '/') {
      advance();
      return make(Tok::Op);
    }
    if (c == '(' || c == ')' || c == '{' || c == '}' || c == ',' || c == ';') {
      advance();
      return make(Tok::Punct);
    }
    throw SyntaxError(std::string("unexpected character '") + c + "'", start, line, col);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : tokens_(Lexer(src).run()), src_len_(src.size()) {}

  NodeSpec program() {
    NodeSpec prog("Program");
    while (peek().kind != Tok::End) prog.children.push_back(statement());
    prog.span = {0, src_len_};
    return prog;
  }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }
  const Token& take() { return tokens_[pos_ < tokens_.size() - 1 ? pos_++ : pos_]; }

  bool at(std::string_view text) const {
    const Token& t = peek();
    return t.kind != Tok::End && t.kind != Tok::Int && t.kind != Tok::Float &&
           t.kind != Tok::Ident && t.text == text;
  }

  [[noreturn]] void fail(const std::string& what) const {
    const Token& t = peek();
    const std::string found = t.kind == Tok::End ? "end of input" : "'" + t.text + "'";
    throw SyntaxError(what + ", found " + found, t.offset, t.line, t.column);
  }

  const Token& expect(std::string_view text) {
    if (!at(text)) fail("expected '" + std::string(text) + "'");
    return take();
  }

  std::string expect_ident() {
    if (peek().kind != Tok::Ident) fail("expected identifier");
    return take().text;
  }

  // Span from the first token of a construct to the end of the last consumed one.
  Span span_from(std::size_t first_tok) const {
    const Token& a = tokens_[first_tok];
    const Token& b = tokens_[pos_ - 1];
    return {a.offset, b.offset + b.text.size() - a.offset};
  }

  NodeSpec statement() {
    const std::size_t first = pos_;
    NodeSpec s;
    if (at("def")) {
      s = funcdef();
    } else if (at("if")) {
      s = if_statement();
    } else if (at("while")) {
      take();
      expect("(");
      NodeSpec cond = expr();
      expect(")");
      s = NodeSpec("While", {}, {std::move(cond), block()});
    } else if (at("return")) {
      take();
      s = NodeSpec("Return");
      if (!at(";")) s.children.push_back(expr());
      expect(";");
    } else if (peek().kind == Tok::Ident && peek(1).kind == Tok::Punct && peek(1).text == "=") {
      NodeSpec target("Name", take().text);
      target.span = span_from(first);
      take();  // '='
      NodeSpec value = expr();
      expect(";");
      s = NodeSpec("Assign", {}, {std::move(target), std::move(value)});
    } else {
      NodeSpec e = expr();
      expect(";");
      s = NodeSpec("ExprStmt", {}, {std::move(e)});
    }
    s.span = span_from(first);
    return s;
  }

  NodeSpec funcdef() {
    take();  // def
    NodeSpec fn("FuncDef", expect_ident());
    const std::size_t params_first = pos_;
    expect("(");
    NodeSpec params("Params");
    if (!at(")")) {
      for (;;) {
        const std::size_t p = pos_;
        NodeSpec name("Name", expect_ident());
        name.span = span_from(p);
        params.children.push_back(std::move(name));
        if (!at(",")) break;
        take();
      }
    }
    expect(")");
    params.span = span_from(params_first);
    fn.children.push_back(std::move(params));
    fn.children.push_back(block());
    return fn;
  }

  NodeSpec if_statement() {
    const std::size_t first = pos_;
    take();  // if
    expect("(");
    NodeSpec cond = expr();
    expect(")");
    NodeSpec node("If", {}, {std::move(cond), block()});
    if (at("else")) {
      take();
      node.children.push_back(at("if") ? if_statement() : block());
    }
    node.span = span_from(first);
    return node;
  }

  NodeSpec block() {
    const std::size_t first = pos_;
    expect("{");
    NodeSpec b("Block");
    while (!at("}")) {
      if (peek().kind == Tok::End) fail("expected '}'");
      b.children.push_back(statement());
    }
    take();
    b.span = span_from(first);
    return b;
  }

  NodeSpec expr() {
    const std::size_t first = pos_;
    NodeSpec lhs = additive();
    if (peek().kind == Tok::Op && is_comparison(peek().text)) {
      std::string op = take().text;
      NodeSpec rhs = additive();
      lhs = NodeSpec("BinOp", op, {std::move(lhs), std::move(rhs)});
      lhs.span = span_from(first);
    }
    return lhs;
  }

  NodeSpec additive() {
    const std::size_t first = pos_;
    NodeSpec lhs = term();
    while (peek().kind == Tok::Op && (peek().text == "+" || peek().text == "-")) {
      std::string op = take().text;
      NodeSpec rhs = term();
      lhs = NodeSpec("BinOp", op, {std::move(lhs), std::move(rhs)});
      lhs.span = span_from(first);
    }
    return lhs;
  }

  NodeSpec term() {
    const std::size_t first = pos_;
    NodeSpec lhs = unary();
    while (peek().kind == Tok::Op && (peek().text == "*" || peek().text == "/")) {
      std::string op = take().text;
      NodeSpec rhs = unary();
      lhs = NodeSpec("BinOp", op, {std::move(lhs), std::move(rhs)});
      lhs.span = span_from(first);
    }
    return lhs;
  }

  NodeSpec unary() {
    const std::size_t first = pos_;
    if (peek().kind == Tok::Op && peek().text == "-") {
      take();
      NodeSpec n("UnaryOp", "-", {unary()});
      n.span = span_from(first);
      return n;
    }
    return primary();
  }

  NodeSpec primary() {
    const std::size_t first = pos_;
    const Token& t = peek();
    NodeSpec n;
    if (t.kind == Tok::Int || t.kind == Tok::Float) {
      n = NodeSpec("Literal", take().text);
    } else if (t.kind == Tok::Ident) {
      std::string name = take().text;
      if (at("(")) {
        take();
        n = NodeSpec("Call", std::move(name));
        if (!at(")")) {
          for (;;) {
            n.children.push_back(expr());
            if (!at(",")) break;
            take();
          }
        }
        expect(")");
      } else {
        n = NodeSpec("Name", std::move(name));
      }
    } else if (at("(")) {
      take();
      n = expr();
      expect(")");
      return n;  // parentheses do not appear in the tree
    } else {
      fail("expected expression");
    }
    n.span = span_from(first);
    return n;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::size_t src_len_;
};

// --- printing -------------------------------------------------------------

inline int precedence(const NodeSpec& e) {
  if (e.type == "BinOp") {
    if (is_comparison(e.label)) return 1;
    if (e.label == "+" || e.label == "-") return 2;
    return 3;
  }
  if (e.type == "UnaryOp") return 4;
  return 5;
}

inline void require_arity(const NodeSpec& n, std::size_t lo, std::size_t hi) {
  if (n.children.size() < lo || n.children.size() > hi)
    throw FormatError("node " + n.type + " has " + std::to_string(n.children.size()) +
                      " children; not printable as MiniLang");
}

inline std::string print_expr(const NodeSpec& e, int min_prec);

inline std::string print_expr(const NodeSpec& e, int min_prec) {
  std::string out;
  if (e.type == "BinOp") {
    require_arity(e, 2, 2);
    const int p = precedence(e);
    const int left_min = p == 1 ? 2 : p;
    out = print_expr(e.children[0], left_min) + " " + e.label + " " +
          print_expr(e.children[1], p + 1);
  } else if (e.type == "UnaryOp") {
    require_arity(e, 1, 1);
    out = e.label + print_expr(e.children[0], 4);
  } else if (e.type == "Call") {
    out = e.label + "(";
    for (std::size_t i = 0; i < e.children.size(); ++i) {
      if (i) out += ", ";
      out += print_expr(e.children[i], 0);
    }
    out += ")";
  } else if (e.type == "Name" || e.type == "Literal") {
    require_arity(e, 0, 0);
    out = e.label;
  } else {
    throw FormatError("node " + e.type + " is not a MiniLang expression");
  }
  return precedence(e) < min_prec ? "(" + out + ")" : out;
}

inline void print_statement(const NodeSpec& s, int indent, std::string& out);

inline void print_block(const NodeSpec& b, int indent, std::string& out) {
  if (b.type != "Block") throw FormatError("expected Block, got " + b.type);
  out += "{\n";
  for (const auto& c : b.children) print_statement(c, indent + 1, out);
  out += std::string(static_cast<std::size_t>(indent) * 2, ' ') + "}";
}

inline void print_if_tail(const NodeSpec& s, int indent, std::string& out) {
  require_arity(s, 2, 3);
  out += "if (" + print_expr(s.children[0], 0) + ") ";
  print_block(s.children[1], indent, out);
  if (s.children.size() == 3) {
    out += " else ";
    if (s.children[2].type == "If")
      print_if_tail(s.children[2], indent, out);
    else
      print_block(s.children[2], indent, out);
  }
}

inline void print_statement(const NodeSpec& s, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  out += pad;
  if (s.type == "Assign") {
    require_arity(s, 2, 2);
    if (s.children[0].type != "Name") throw FormatError("assignment target must be a Name");
    out += s.children[0].label + " = " + print_expr(s.children[1], 0) + ";";
  } else if (s.type == "ExprStmt") {
    require_arity(s, 1, 1);
    out += print_expr(s.children[0], 0) + ";";
  } else if (s.type == "Return") {
    require_arity(s, 0, 1);
    out += s.children.empty() ? "return;" : "return " + print_expr(s.children[0], 0) + ";";
  } else if (s.type == "While") {
    require_arity(s, 2, 2);
    out += "while (" + print_expr(s.children[0], 0) + ") ";
    print_block(s.children[1], indent, out);
  } else if (s.type == "If") {
    print_if_tail(s, indent, out);
  } else if (s.type == "FuncDef") {
    require_arity(s, 2, 2);
    const NodeSpec& params = s.children[0];
    if (params.type != "Params") throw FormatError("FuncDef without Params");
    out += "def " + s.label + "(";
    for (std::size_t i = 0; i < params.children.size(); ++i) {
      if (i) out += ", ";
      out += params.children[i].label;
    }
    out += ") ";
    print_block(s.children[1], indent, out);
  } else {
    throw FormatError("node " + s.type + " is not a MiniLang statement");
  }
  out += "\n";
}

}  // namespace minilang

/// Parses MiniLang source into an AstTree with pre-order ids. Throws
/// SyntaxError on malformed input.
inline AstTree parse_minilang(std::string_view source) {
  minilang::Parser parser(source);
  return AstTree(parser.program(), std::string(source));
}

/// Renders a tree as canonical MiniLang source. parse_minilang of the result
/// reproduces the tree structurally. Throws FormatError for trees that do not
/// have MiniLang shape.
inline std::string to_minilang(const NodeSpec& program) {
  if (program.type != "Program") throw FormatError("root must be Program, got " + program.type);
  std::string out;
  for (const auto& s : program.children) minilang::print_statement(s, 0, out);
  return out;
}

inline std::string to_minilang(const AstTree& tree) { return to_minilang(tree.to_spec()); }

}  // namespace fixscope
