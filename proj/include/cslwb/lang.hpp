#pragma once
// A small concurrent C-like surface language: non-atomic int cells, SC-atomic
// int cells (scalars or arrays), locks, spawn, and history events. Parsing
// builds an AST and statically checks atomic/lock usage against the cell
// declarations; the grammar is documented in docs/grammar.md.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cslwb/algebra.hpp"

namespace cslwb {

struct parse_error : usage_error {
  parse_error(int line, int col, const std::string& msg)
      : usage_error("parse error at " + std::to_string(line) + ":" +
                    std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
  int line, col;
};

struct type_error : usage_error {
  type_error(int line, const std::string& msg)
      : usage_error(line > 0 ? "type error at line " + std::to_string(line) +
                                   ": " + msg
                             : "type error: " + msg),
        line(line) {}
  int line;
};

enum class BinKind {
  Add, Sub, Mul,
  BitAnd, BitOr, BitXor, Shl, Shr,
  Eq, Ne, Lt, Le, Gt, Ge,
  LogAnd, LogOr,  // short-circuit; lowered to branches
};

enum class UnKind { LogNot, BitNot, Neg, Hash };

struct Expr;
using EPtr = std::shared_ptr<const Expr>;

// A statically named cell: a scalar global, or one element of an atomic
// array (index is null for scalars).
struct PlaceRef {
  std::string global;
  EPtr index;
  int line = 0;
};

struct Expr {
  enum class Kind { Num, Name, Bin, Un, AddrOf, AtomicLoad, Call };
  Kind kind{};
  uint32_t num = 0;     // Num
  std::string name;     // Name: local or non-atomic global; Call: callee
  BinKind bin{};
  UnKind un{};
  EPtr a, b;
  PlaceRef place;       // AddrOf, AtomicLoad
  std::vector<EPtr> args;  // Call
  int line = 0;
};

struct Stmt;
using SPtr = std::shared_ptr<const Stmt>;

struct Stmt {
  enum class Kind {
    Var,       // var name [= e]
    Assign,    // lhs = e (local assign or non-atomic store)
    AtomicStore,
    Cas,       // name [, name2] = cas(place, e, e2)
    Lock,      // makelock/acquire/release/freelock
    Spawn,
    ExprStmt,  // bare call, value discarded
    If, While, For, Break, Continue, Return,
    Invoke, Respond,
  };
  enum class LockOp { Make, Acquire, Release, Free };

  Kind kind{};
  std::string name, name2;  // Var name; Cas ok/seen targets; Spawn/Invoke callee
  PlaceRef lhs;             // Assign target; AtomicStore/Cas place
  EPtr e, e2;               // value / cas expected+desired / conditions' friends
  EPtr cond;                // If/While/For
  LockOp lock{};
  std::string lock_name;
  std::vector<EPtr> args;   // Spawn (0/1), Invoke
  std::vector<SPtr> body, els;
  SPtr init, step;          // For clauses
  bool has_value = false;   // Return carries a value
  int line = 0;
};

enum class CellKind { IntCell, AtomicCell, LockCell };

struct GlobalDecl {
  std::string name;
  CellKind kind{};
  int size = 1;
  bool is_array = false;
  int line = 0;
};

struct Function {
  std::string name;
  std::vector<std::string> params;
  std::vector<std::string> locals;  // filled by the checker, declaration order
  std::vector<SPtr> body;
  int line = 0;
};

struct Program {
  int width = 8;  // value width in bits; all arithmetic wraps mod 2^width
  std::vector<GlobalDecl> globals;
  std::vector<Function> functions;
  int entry = -1;  // index of main
};

namespace lang_detail {

struct Token {
  enum class T { Ident, Num, Punct, End };
  T t{};
  std::string s;
  uint32_t num = 0;
  int line = 1, col = 1;
};

inline bool is_keyword(const std::string& s) {
  static const std::set<std::string> kw = {
      "var",     "if",       "else",        "while",        "for",
      "break",   "continue", "return",      "spawn",        "acquire",
      "release", "makelock", "freelock",    "atomic_load",  "atomic_store",
      "cas",     "invoke",   "respond",     "hash",         "int",
      "atomic",  "lock",     "fn",          "width"};
  return kw.count(s) > 0;
}

inline std::vector<Token> lex(std::string_view src) {
  static const char* multi[] = {"<<", ">>", "<=", ">=", "==",
                                "!=", "&&", "||", "++"};
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto bump = [&](size_t n) {
    for (size_t k = 0; k < n; ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char ch = src[i];
    if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
      bump(1);
      continue;
    }
    if (ch == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') bump(1);
      continue;
    }
    if (ch == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      int l0 = line, c0 = col;
      bump(2);
      while (i + 1 < src.size() && !(src[i] == '*' && src[i + 1] == '/'))
        bump(1);
      if (i + 1 >= src.size()) throw parse_error(l0, c0, "unterminated comment");
      bump(2);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isalpha((unsigned char)ch) || ch == '_') {
      size_t j = i;
      while (j < src.size() &&
             (std::isalnum((unsigned char)src[j]) || src[j] == '_'))
        ++j;
      t.t = Token::T::Ident;
      t.s = std::string(src.substr(i, j - i));
      bump(j - i);
      out.push_back(std::move(t));
      continue;
    }
    if (std::isdigit((unsigned char)ch)) {
      size_t j = i;
      int base = 10;
      if (ch == '0' && j + 1 < src.size() &&
          (src[j + 1] == 'x' || src[j + 1] == 'X')) {
        base = 16;
        j += 2;
      }
      size_t d0 = j;
      while (j < src.size() && (std::isdigit((unsigned char)src[j]) ||
                                (base == 16 && std::isxdigit((unsigned char)src[j]))))
        ++j;
      if (base == 16 && j == d0)
        throw parse_error(line, col, "malformed hex literal");
      unsigned long v = 0;
      try {
        v = std::stoul(std::string(src.substr(i, j - i)), nullptr, base);
      } catch (const std::exception&) {
        throw parse_error(line, col, "integer literal out of range");
      }
      if (v > 0xfffffffful)
        throw parse_error(line, col, "integer literal out of range");
      t.t = Token::T::Num;
      t.num = (uint32_t)v;
      t.s = std::string(src.substr(i, j - i));
      bump(j - i);
      out.push_back(std::move(t));
      continue;
    }
    bool matched = false;
    for (const char* m : multi) {
      if (src.substr(i, 2) == m) {
        t.t = Token::T::Punct;
        t.s = m;
        bump(2);
        out.push_back(std::move(t));
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (std::string_view("{}()[];,=<>+-*&|^~!").find(ch) !=
        std::string_view::npos) {
      t.t = Token::T::Punct;
      t.s = std::string(1, ch);
      bump(1);
      out.push_back(std::move(t));
      continue;
    }
    throw parse_error(line, col,
                      std::string("unexpected character '") + ch + "'");
  }
  Token end;
  end.t = Token::T::End;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

struct Parser {
  std::vector<Token> toks;
  size_t i = 0;
  Program prog;

  const Token& cur() const { return toks[i]; }
  const Token& ahead(size_t k) const {
    return toks[std::min(i + k, toks.size() - 1)];
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw parse_error(cur().line, cur().col, msg);
  }
  bool at_punct(const char* p) const {
    return cur().t == Token::T::Punct && cur().s == p;
  }
  bool at_ident(const char* w) const {
    return cur().t == Token::T::Ident && cur().s == w;
  }
  void expect_punct(const char* p) {
    if (!at_punct(p)) fail(std::string("expected '") + p + "'");
    ++i;
  }
  bool eat_punct(const char* p) {
    if (!at_punct(p)) return false;
    ++i;
    return true;
  }
  bool eat_ident(const char* w) {
    if (!at_ident(w)) return false;
    ++i;
    return true;
  }
  std::string expect_name(const char* what) {
    if (cur().t != Token::T::Ident)
      fail(std::string("expected ") + what);
    if (is_keyword(cur().s))
      fail("'" + cur().s + "' is a reserved word");
    return toks[i++].s;
  }

  // --- expressions, C precedence ---

  int bin_prec(const std::string& p) const {
    if (p == "||") return 1;
    if (p == "&&") return 2;
    if (p == "|") return 3;
    if (p == "^") return 4;
    if (p == "&") return 5;
    if (p == "==" || p == "!=") return 6;
    if (p == "<" || p == "<=" || p == ">" || p == ">=") return 7;
    if (p == "<<" || p == ">>") return 8;
    if (p == "+" || p == "-") return 9;
    if (p == "*") return 10;
    return 0;
  }
  BinKind bin_kind(const std::string& p) const {
    if (p == "||") return BinKind::LogOr;
    if (p == "&&") return BinKind::LogAnd;
    if (p == "|") return BinKind::BitOr;
    if (p == "^") return BinKind::BitXor;
    if (p == "&") return BinKind::BitAnd;
    if (p == "==") return BinKind::Eq;
    if (p == "!=") return BinKind::Ne;
    if (p == "<") return BinKind::Lt;
    if (p == "<=") return BinKind::Le;
    if (p == ">") return BinKind::Gt;
    if (p == ">=") return BinKind::Ge;
    if (p == "<<") return BinKind::Shl;
    if (p == ">>") return BinKind::Shr;
    if (p == "+") return BinKind::Add;
    if (p == "-") return BinKind::Sub;
    return BinKind::Mul;
  }

  EPtr parse_expr() { return parse_bin(1); }

  EPtr parse_bin(int min_prec) {
    EPtr lhs = parse_unary();
    while (cur().t == Token::T::Punct) {
      int prec = bin_prec(cur().s);
      if (prec < min_prec || prec == 0) break;
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Bin;
      e->bin = bin_kind(cur().s);
      e->line = cur().line;
      ++i;
      e->a = lhs;
      e->b = parse_bin(prec + 1);  // all binary operators left-associative
      lhs = e;
    }
    return lhs;
  }

  EPtr parse_unary() {
    int line = cur().line;
    auto un = [&](UnKind k) {
      ++i;
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Un;
      e->un = k;
      e->a = parse_unary();
      e->line = line;
      return EPtr(e);
    };
    if (at_punct("!")) return un(UnKind::LogNot);
    if (at_punct("~")) return un(UnKind::BitNot);
    if (at_punct("-")) return un(UnKind::Neg);
    if (at_punct("&")) {
      ++i;
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::AddrOf;
      e->line = line;
      e->place = parse_place();
      return e;
    }
    return parse_primary();
  }

  PlaceRef parse_place() {
    PlaceRef pl;
    pl.line = cur().line;
    pl.global = expect_name("a cell name");
    if (eat_punct("[")) {
      pl.index = parse_expr();
      expect_punct("]");
    }
    return pl;
  }

  EPtr parse_primary() {
    int line = cur().line;
    if (cur().t == Token::T::Num) {
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Num;
      e->num = cur().num;
      e->line = line;
      ++i;
      return e;
    }
    if (eat_punct("(")) {
      EPtr e = parse_expr();
      expect_punct(")");
      return e;
    }
    if (at_ident("atomic_load")) {
      ++i;
      expect_punct("(");
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::AtomicLoad;
      e->line = line;
      e->place = parse_place();
      expect_punct(")");
      return e;
    }
    if (at_ident("hash")) {
      ++i;
      expect_punct("(");
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Un;
      e->un = UnKind::Hash;
      e->line = line;
      e->a = parse_expr();
      expect_punct(")");
      return e;
    }
    if (at_ident("cas")) fail("cas is a statement, not an expression");
    if (cur().t != Token::T::Ident || is_keyword(cur().s))
      fail("expected an expression");
    std::string name = toks[i++].s;
    if (at_punct("(")) {
      ++i;
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Call;
      e->name = name;
      e->line = line;
      if (!at_punct(")")) {
        do {
          e->args.push_back(parse_expr());
        } while (eat_punct(","));
      }
      expect_punct(")");
      return e;
    }
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Name;
    e->name = name;
    e->line = line;
    return e;
  }

  // --- statements ---

  std::vector<SPtr> parse_block() {
    expect_punct("{");
    std::vector<SPtr> out;
    while (!eat_punct("}")) {
      if (cur().t == Token::T::End) fail("unterminated block");
      parse_stmt(out);
    }
    return out;
  }

  SPtr mk(Stmt&& s) { return std::make_shared<Stmt>(std::move(s)); }

  void parse_stmt(std::vector<SPtr>& out) {
    int line = cur().line;
    if (at_ident("if")) {
      ++i;
      Stmt s;
      s.kind = Stmt::Kind::If;
      s.line = line;
      expect_punct("(");
      s.cond = parse_expr();
      expect_punct(")");
      s.body = parse_block();
      if (eat_ident("else")) {
        if (at_ident("if")) {
          std::vector<SPtr> nested;
          parse_stmt(nested);
          s.els = std::move(nested);
        } else {
          s.els = parse_block();
        }
      }
      out.push_back(mk(std::move(s)));
      return;
    }
    if (at_ident("while")) {
      ++i;
      Stmt s;
      s.kind = Stmt::Kind::While;
      s.line = line;
      expect_punct("(");
      s.cond = parse_expr();
      expect_punct(")");
      s.body = parse_block();
      out.push_back(mk(std::move(s)));
      return;
    }
    if (at_ident("for")) {
      ++i;
      Stmt s;
      s.kind = Stmt::Kind::For;
      s.line = line;
      expect_punct("(");
      if (!at_punct(";")) s.init = parse_simple(out);
      expect_punct(";");
      if (!at_punct(";")) s.cond = parse_expr();
      expect_punct(";");
      if (!at_punct(")")) s.step = parse_simple(out);
      expect_punct(")");
      s.body = parse_block();
      out.push_back(mk(std::move(s)));
      return;
    }
    if (at_ident("break") || at_ident("continue")) {
      Stmt s;
      s.kind = at_ident("break") ? Stmt::Kind::Break : Stmt::Kind::Continue;
      s.line = line;
      ++i;
      expect_punct(";");
      out.push_back(mk(std::move(s)));
      return;
    }
    if (at_ident("return")) {
      ++i;
      Stmt s;
      s.kind = Stmt::Kind::Return;
      s.line = line;
      if (!at_punct(";")) {
        s.e = parse_expr();
        s.has_value = true;
      }
      expect_punct(";");
      out.push_back(mk(std::move(s)));
      return;
    }
    if (at_ident("invoke")) {
      ++i;
      Stmt s;
      s.kind = Stmt::Kind::Invoke;
      s.line = line;
      s.name = expect_name("an operation name");
      expect_punct("(");
      if (!at_punct(")")) {
        do {
          s.args.push_back(parse_expr());
        } while (eat_punct(","));
      }
      expect_punct(")");
      expect_punct(";");
      out.push_back(mk(std::move(s)));
      return;
    }
    if (at_ident("respond")) {
      ++i;
      Stmt s;
      s.kind = Stmt::Kind::Respond;
      s.line = line;
      s.e = parse_expr();
      expect_punct(";");
      out.push_back(mk(std::move(s)));
      return;
    }
    SPtr simple = parse_simple(out);
    expect_punct(";");
    if (simple) out.push_back(simple);
  }

  // A statement with no control flow: var declaration, assignment, ++
  // sugar, lock/spawn/atomic_store/cas form, or a bare call. The trailing
  // ';' is left to the caller. "var x = cas(...)" desugars into a
  // declaration appended to `out` plus the returned cas statement.
  SPtr parse_simple(std::vector<SPtr>& out) {
    int line = cur().line;
    if (at_ident("var")) {
      ++i;
      Stmt decl;
      decl.kind = Stmt::Kind::Var;
      decl.line = line;
      decl.name = expect_name("a variable name");
      if (eat_punct("=")) {
        if (at_ident("cas")) {
          std::string target = decl.name;
          out.push_back(mk(std::move(decl)));
          return parse_cas(target, "", line);
        }
        decl.e = parse_expr();
      }
      return mk(std::move(decl));
    }
    if (at_ident("acquire") || at_ident("release") || at_ident("makelock") ||
        at_ident("freelock")) {
      Stmt s;
      s.kind = Stmt::Kind::Lock;
      s.line = line;
      s.lock = at_ident("acquire")   ? Stmt::LockOp::Acquire
               : at_ident("release") ? Stmt::LockOp::Release
               : at_ident("makelock") ? Stmt::LockOp::Make
                                      : Stmt::LockOp::Free;
      ++i;
      expect_punct("(");
      s.lock_name = expect_name("a lock name");
      expect_punct(")");
      return mk(std::move(s));
    }
    if (at_ident("atomic_store")) {
      ++i;
      Stmt s;
      s.kind = Stmt::Kind::AtomicStore;
      s.line = line;
      expect_punct("(");
      s.lhs = parse_place();
      expect_punct(",");
      s.e = parse_expr();
      expect_punct(")");
      return mk(std::move(s));
    }
    if (at_ident("spawn")) {
      ++i;
      Stmt s;
      s.kind = Stmt::Kind::Spawn;
      s.line = line;
      s.name = expect_name("a function name");
      expect_punct("(");
      if (!at_punct(")")) {
        do {
          s.args.push_back(parse_expr());
        } while (eat_punct(","));
      }
      expect_punct(")");
      return mk(std::move(s));
    }
    if (cur().t != Token::T::Ident || is_keyword(cur().s))
      fail("expected a statement");
    std::string name = toks[i++].s;
    if (at_punct("++")) {
      ++i;
      Stmt s;
      s.kind = Stmt::Kind::Assign;
      s.line = line;
      s.lhs.global = name;
      s.lhs.line = line;
      auto rd = std::make_shared<Expr>();
      rd->kind = Expr::Kind::Name;
      rd->name = name;
      rd->line = line;
      auto one = std::make_shared<Expr>();
      one->kind = Expr::Kind::Num;
      one->num = 1;
      one->line = line;
      auto add = std::make_shared<Expr>();
      add->kind = Expr::Kind::Bin;
      add->bin = BinKind::Add;
      add->a = rd;
      add->b = one;
      add->line = line;
      s.e = add;
      return mk(std::move(s));
    }
    if (at_punct(",")) {  // ok, seen = cas(...)
      ++i;
      std::string seen = expect_name("a variable name");
      expect_punct("=");
      if (!at_ident("cas")) fail("expected cas after paired assignment");
      return parse_cas(name, seen, line);
    }
    if (at_punct("(")) {  // bare call
      --i;
      Stmt s;
      s.kind = Stmt::Kind::ExprStmt;
      s.line = line;
      s.e = parse_primary();
      return mk(std::move(s));
    }
    // assignment: local, global scalar, or array element
    Stmt s;
    s.kind = Stmt::Kind::Assign;
    s.line = line;
    s.lhs.global = name;
    s.lhs.line = line;
    if (eat_punct("[")) {
      s.lhs.index = parse_expr();
      expect_punct("]");
    }
    expect_punct("=");
    if (at_ident("cas")) {
      if (s.lhs.index) fail("cas target must be a variable");
      return parse_cas(name, "", line);
    }
    s.e = parse_expr();
    return mk(std::move(s));
  }

  SPtr parse_cas(const std::string& ok, const std::string& seen, int line) {
    Stmt s;
    s.kind = Stmt::Kind::Cas;
    s.line = line;
    s.name = ok;
    s.name2 = seen;
    ++i;  // 'cas'
    expect_punct("(");
    s.lhs = parse_place();
    expect_punct(",");
    s.e = parse_expr();
    expect_punct(",");
    s.e2 = parse_expr();
    expect_punct(")");
    return mk(std::move(s));
  }

  // --- top level ---

  void parse_top() {
    while (cur().t != Token::T::End) {
      int line = cur().line;
      if (eat_ident("width")) {
        if (cur().t != Token::T::Num) fail("expected a bit width");
        uint32_t w = cur().num;
        ++i;
        expect_punct(";");
        if (w < 1 || w > 16)
          throw type_error(line, "width must be between 1 and 16 bits");
        prog.width = (int)w;
        continue;
      }
      if (eat_ident("fn")) {
        Function f;
        f.line = line;
        f.name = expect_name("a function name");
        expect_punct("(");
        if (!at_punct(")")) {
          do {
            f.params.push_back(expect_name("a parameter name"));
          } while (eat_punct(","));
        }
        expect_punct(")");
        f.body = parse_block();
        prog.functions.push_back(std::move(f));
        continue;
      }
      GlobalDecl g;
      g.line = line;
      if (eat_ident("lock")) {
        g.kind = CellKind::LockCell;
      } else if (eat_ident("atomic")) {
        if (!eat_ident("int")) fail("expected 'int' after 'atomic'");
        g.kind = CellKind::AtomicCell;
      } else if (eat_ident("int")) {
        g.kind = CellKind::IntCell;
      } else {
        fail("expected a declaration");
      }
      g.name = expect_name("a cell name");
      if (eat_punct("[")) {
        if (g.kind != CellKind::AtomicCell)
          throw type_error(line, "only atomic int arrays are supported");
        if (cur().t != Token::T::Num) fail("expected an array size");
        uint32_t n = cur().num;
        ++i;
        expect_punct("]");
        if (n < 1 || n > 1024)
          throw type_error(line, "array size must be between 1 and 1024");
        g.is_array = true;
        g.size = (int)n;
      }
      expect_punct(";");
      prog.globals.push_back(std::move(g));
    }
  }
};

// Static checks: name resolution (declare before use, no shadowing), cell
// kind discipline (atomic ops on atomic cells, locks only under lock ops,
// arrays always indexed), call arities, loop placement of break/continue.
struct Checker {
  Program& p;
  std::map<std::string, const GlobalDecl*> globals;
  std::map<std::string, int> fns;
  Function* cur = nullptr;
  std::set<std::string> locals;
  int loop_depth = 0;

  explicit Checker(Program& prog) : p(prog) {}

  [[noreturn]] void fail(int line, const std::string& msg) const {
    throw type_error(line, msg);
  }

  const GlobalDecl* global(const std::string& n) const {
    auto it = globals.find(n);
    return it == globals.end() ? nullptr : it->second;
  }
  bool is_local(const std::string& n) const { return locals.count(n) > 0; }

  void run() {
    for (const auto& g : p.globals) {
      if (!globals.emplace(g.name, &g).second)
        fail(g.line, "duplicate global '" + g.name + "'");
    }
    for (size_t k = 0; k < p.functions.size(); ++k) {
      const auto& f = p.functions[k];
      if (globals.count(f.name))
        fail(f.line, "'" + f.name + "' is already a cell name");
      if (!fns.emplace(f.name, (int)k).second)
        fail(f.line, "duplicate function '" + f.name + "'");
    }
    for (auto& f : p.functions) check_fn(f);
    auto it = fns.find("main");
    if (it == fns.end()) fail(0, "program has no 'main' function");
    if (!p.functions[it->second].params.empty())
      fail(p.functions[it->second].line, "main takes no parameters");
    p.entry = it->second;
  }

  void check_fn(Function& f) {
    cur = &f;
    locals.clear();
    f.locals.clear();
    loop_depth = 0;
    for (const auto& prm : f.params) {
      if (globals.count(prm))
        fail(f.line, "parameter '" + prm + "' shadows a cell");
      if (!locals.insert(prm).second)
        fail(f.line, "duplicate parameter '" + prm + "'");
    }
    check_block(f.body);
  }

  void check_block(const std::vector<SPtr>& body) {
    for (const auto& s : body) check_stmt(*s);
  }

  void declare(const std::string& n, int line) {
    if (globals.count(n)) fail(line, "'" + n + "' shadows a cell");
    if (fns.count(n)) fail(line, "'" + n + "' shadows a function");
    if (!locals.insert(n).second) fail(line, "duplicate variable '" + n + "'");
    cur->locals.push_back(n);
  }

  void need_local(const std::string& n, int line, const char* what) const {
    if (!is_local(n))
      fail(line, std::string(what) + " '" + n + "' is not a declared variable");
  }

  // `want` selects the cell kind an operation requires of its place.
  void check_place(const PlaceRef& pl, CellKind want, const char* op) const {
    const GlobalDecl* g = global(pl.global);
    if (!g) {
      if (is_local(pl.global))
        fail(pl.line, std::string(op) + " needs a cell, and '" + pl.global +
                          "' is a variable");
      fail(pl.line, "unknown cell '" + pl.global + "'");
    }
    if (g->kind != want) {
      const char* kindname = g->kind == CellKind::IntCell ? "a non-atomic cell"
                             : g->kind == CellKind::AtomicCell
                                 ? "an atomic cell"
                                 : "a lock";
      fail(pl.line, std::string(op) + " cannot be applied to '" + pl.global +
                        "', which is " + kindname);
    }
    if (g->is_array && !pl.index)
      fail(pl.line, "'" + pl.global + "' is an array and needs an index");
    if (!g->is_array && pl.index)
      fail(pl.line, "'" + pl.global + "' is not an array");
    if (pl.index) check_expr(*pl.index);
  }

  void check_expr(const Expr& e) const {
    switch (e.kind) {
      case Expr::Kind::Num:
        return;
      case Expr::Kind::Name: {
        if (is_local(e.name)) return;
        const GlobalDecl* g = global(e.name);
        if (!g) fail(e.line, "unknown identifier '" + e.name + "'");
        if (g->kind == CellKind::AtomicCell)
          fail(e.line, "atomic cell '" + e.name +
                           "' must be read with atomic_load");
        if (g->kind == CellKind::LockCell)
          fail(e.line, "lock '" + e.name + "' cannot be read");
        if (g->is_array)
          fail(e.line, "'" + e.name + "' is an array and needs an index");
        return;
      }
      case Expr::Kind::Bin:
        check_expr(*e.a);
        check_expr(*e.b);
        return;
      case Expr::Kind::Un:
        check_expr(*e.a);
        return;
      case Expr::Kind::AddrOf: {
        const GlobalDecl* g = global(e.place.global);
        if (!g) fail(e.place.line, "unknown cell '" + e.place.global + "'");
        if (e.place.index) {
          if (!g->is_array)
            fail(e.place.line, "'" + e.place.global + "' is not an array");
          check_expr(*e.place.index);
        }
        return;
      }
      case Expr::Kind::AtomicLoad:
        check_place(e.place, CellKind::AtomicCell, "atomic_load");
        return;
      case Expr::Kind::Call: {
        auto it = fns.find(e.name);
        if (it == fns.end()) fail(e.line, "unknown function '" + e.name + "'");
        const Function& f = p.functions[it->second];
        if (f.params.size() != e.args.size())
          fail(e.line, "'" + e.name + "' takes " +
                           std::to_string(f.params.size()) + " argument(s), got " +
                           std::to_string(e.args.size()));
        for (const auto& a : e.args) check_expr(*a);
        return;
      }
    }
  }

  void check_stmt(const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Var:
        if (s.e) check_expr(*s.e);  // initializer sees the outer scope only
        declare(s.name, s.line);
        return;
      case Stmt::Kind::Assign: {
        check_expr(*s.e);
        const std::string& n = s.lhs.global;
        if (is_local(n)) {
          if (s.lhs.index) fail(s.line, "cannot index variable '" + n + "'");
          return;
        }
        const GlobalDecl* g = global(n);
        if (!g) fail(s.line, "unknown identifier '" + n + "'");
        if (g->kind == CellKind::AtomicCell)
          fail(s.line, "atomic cell '" + n +
                           "' must be written with atomic_store or cas");
        if (g->kind == CellKind::LockCell)
          fail(s.line, "lock '" + n + "' cannot be assigned");
        if (g->is_array)
          fail(s.line, "'" + n + "' is an array and needs an index");
        if (s.lhs.index) fail(s.line, "'" + n + "' is not an array");
        return;
      }
      case Stmt::Kind::AtomicStore:
        check_place(s.lhs, CellKind::AtomicCell, "atomic_store");
        check_expr(*s.e);
        return;
      case Stmt::Kind::Cas:
        check_place(s.lhs, CellKind::AtomicCell, "cas");
        check_expr(*s.e);
        check_expr(*s.e2);
        need_local(s.name, s.line, "cas target");
        if (!s.name2.empty()) need_local(s.name2, s.line, "cas target");
        return;
      case Stmt::Kind::Lock: {
        const GlobalDecl* g = global(s.lock_name);
        if (!g) fail(s.line, "unknown cell '" + s.lock_name + "'");
        if (g->kind != CellKind::LockCell)
          fail(s.line, "'" + s.lock_name + "' is not a lock");
        return;
      }
      case Stmt::Kind::Spawn: {
        auto it = fns.find(s.name);
        if (it == fns.end()) fail(s.line, "unknown function '" + s.name + "'");
        const Function& f = p.functions[it->second];
        if (f.params.size() > 1)
          fail(s.line, "spawned function may take at most one argument");
        if (f.params.size() != s.args.size())
          fail(s.line, "spawn of '" + s.name + "' needs " +
                           std::to_string(f.params.size()) + " argument(s)");
        for (const auto& a : s.args) check_expr(*a);
        return;
      }
      case Stmt::Kind::ExprStmt:
        check_expr(*s.e);
        return;
      case Stmt::Kind::If:
        check_expr(*s.cond);
        check_block(s.body);
        check_block(s.els);
        return;
      case Stmt::Kind::While:
        check_expr(*s.cond);
        ++loop_depth;
        check_block(s.body);
        --loop_depth;
        return;
      case Stmt::Kind::For:
        if (s.init) check_stmt(*s.init);
        if (s.cond) check_expr(*s.cond);
        ++loop_depth;
        check_block(s.body);
        if (s.step) check_stmt(*s.step);
        --loop_depth;
        return;
      case Stmt::Kind::Break:
      case Stmt::Kind::Continue:
        if (loop_depth == 0)
          fail(s.line, s.kind == Stmt::Kind::Break
                           ? "break outside of a loop"
                           : "continue outside of a loop");
        return;
      case Stmt::Kind::Return:
        if (s.has_value) check_expr(*s.e);
        return;
      case Stmt::Kind::Invoke:
        for (const auto& a : s.args) check_expr(*a);
        return;
      case Stmt::Kind::Respond:
        check_expr(*s.e);
        return;
    }
  }
};

}  // namespace lang_detail

inline Program parse_program(std::string_view text) {
  lang_detail::Parser parser;
  parser.toks = lang_detail::lex(text);
  parser.parse_top();
  lang_detail::Checker chk(parser.prog);
  chk.run();
  return std::move(parser.prog);
}

}  // namespace cslwb
