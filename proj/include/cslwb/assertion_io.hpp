#pragma once
// Text syntax for assertions.
//
//   emp                      empty resources
//   pure(x + 1 == y)         pure fact over bound variables
//   pt(1/2, a, 3)            non-atomic cell at a with that share and value
//   apt(c, 0)                atomic cell
//   own(0, excl:ex0)         ghost slot 0 holds ex0; own(g, agree:v1, 1) tags it
//   P * Q, P /\ Q, P \/ Q, P -* Q
//   E x:val. P, A a:addr. P, E g:name. P, E k:0..3. P
//   |> P   # P   bupd P      later, persistently, basic update
//
// Binding gets looser left to right: prefix operators, *, /\, \/, -*
// (right associative), then quantifiers, which scope to the end of their
// subterm. Addresses and algebra elements are written by name and resolved
// against the universe; identifiers bound by a quantifier shadow them.

#include <cctype>
#include <string>
#include <vector>

#include "cslwb/assertion.hpp"
#include "cslwb/rmap.hpp"

namespace cslwb {

namespace detail {

struct Lexer {
  std::string src;
  size_t pos = 0;

  explicit Lexer(std::string s) : src(std::move(s)) {}

  void skip_ws() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos])))
      ++pos;
  }
  bool done() {
    skip_ws();
    return pos >= src.size();
  }
  bool peek(const std::string& tok) {
    skip_ws();
    return src.compare(pos, tok.size(), tok) == 0;
  }
  bool eat(const std::string& tok) {
    if (!peek(tok)) return false;
    pos += tok.size();
    return true;
  }
  void expect(const std::string& tok) {
    if (!eat(tok))
      throw usage_error("expected '" + tok + "' at offset " +
                        std::to_string(pos) + " in: " + src);
  }
  bool peek_ident() {
    skip_ws();
    return pos < src.size() &&
           (std::isalpha(static_cast<unsigned char>(src[pos])) || src[pos] == '_');
  }
  std::string ident() {
    skip_ws();
    size_t start = pos;
    while (pos < src.size() &&
           (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
      ++pos;
    if (pos == start)
      throw usage_error("expected identifier at offset " + std::to_string(pos) +
                        " in: " + src);
    return src.substr(start, pos - start);
  }
  bool peek_int() {
    skip_ws();
    return pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]));
  }
  // A token delimited by ',' or ')' at paren depth zero; parens may nest, so
  // element names like ex(0) or (1/2,0) come through whole.
  std::string balanced() {
    skip_ws();
    size_t start = pos;
    int depth = 0;
    while (pos < src.size()) {
      char c = src[pos];
      if (c == '(') ++depth;
      if (c == ')') {
        if (depth == 0) break;
        --depth;
      }
      if (depth == 0 && c == ',') break;
      ++pos;
    }
    size_t end = pos;
    while (end > start && std::isspace(static_cast<unsigned char>(src[end - 1])))
      --end;
    if (end == start)
      throw usage_error("expected a token at offset " + std::to_string(pos) +
                        " in: " + src);
    return src.substr(start, end - start);
  }
  int integer() {
    skip_ws();
    size_t start = pos;
    while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos])))
      ++pos;
    if (pos == start)
      throw usage_error("expected number at offset " + std::to_string(pos) +
                        " in: " + src);
    return std::stoi(src.substr(start, pos - start));
  }
};

struct AssertionParser {
  Lexer lex;
  const Universe& u;
  std::vector<std::string> bound;

  AssertionParser(std::string src, const Universe& uni)
      : lex(std::move(src)), u(uni) {}

  bool is_bound(const std::string& v) const {
    for (auto& b : bound)
      if (b == v) return true;
    return false;
  }

  // pure expressions, loosest first: || then && then comparison then sum
  PExpr parse_pure() { return parse_or(); }
  PExpr parse_or() {
    PExpr e = parse_and_();
    while (lex.eat("||")) e = PureExpr::mk(PureExpr::Op::Or, e, parse_and_());
    return e;
  }
  PExpr parse_and_() {
    PExpr e = parse_cmp();
    while (lex.eat("&&")) e = PureExpr::mk(PureExpr::Op::And, e, parse_cmp());
    return e;
  }
  PExpr parse_cmp() {
    PExpr e = parse_sum();
    using Op = PureExpr::Op;
    if (lex.eat("==")) return PureExpr::mk(Op::Eq, e, parse_sum());
    if (lex.eat("!=")) return PureExpr::mk(Op::Ne, e, parse_sum());
    if (lex.eat("<=")) return PureExpr::mk(Op::Le, e, parse_sum());
    if (lex.eat(">=")) return PureExpr::mk(Op::Ge, e, parse_sum());
    if (lex.eat("<")) return PureExpr::mk(Op::Lt, e, parse_sum());
    if (lex.eat(">")) return PureExpr::mk(Op::Gt, e, parse_sum());
    return e;
  }
  PExpr parse_sum() {
    PExpr e = parse_prod();
    for (;;) {
      if (lex.eat("+"))
        e = PureExpr::mk(PureExpr::Op::Add, e, parse_prod());
      else if (lex.eat("-"))
        e = PureExpr::mk(PureExpr::Op::Sub, e, parse_prod());
      else
        return e;
    }
  }
  PExpr parse_prod() {
    PExpr e = parse_punary();
    while (lex.eat("*")) e = PureExpr::mk(PureExpr::Op::Mul, e, parse_punary());
    return e;
  }
  PExpr parse_punary() {
    if (lex.eat("!"))
      return PureExpr::mk(PureExpr::Op::Not, parse_punary(), nullptr);
    if (lex.eat("-"))
      return PureExpr::mk(PureExpr::Op::Sub, PureExpr::mk(0), parse_punary());
    if (lex.eat("(")) {
      PExpr e = parse_pure();
      lex.expect(")");
      return e;
    }
    if (lex.peek_int()) return PureExpr::mk(lex.integer());
    return PureExpr::mk(lex.ident());
  }

  enum class Slot { Addr, Value, Name };

  Term parse_term(Slot slot) {
    if (lex.peek_int()) return Term::mk(lex.integer());
    std::string id = lex.ident();
    if (is_bound(id)) return Term::mk(id);
    if (slot == Slot::Addr) return Term::mk(u.addr(id));
    throw usage_error("unbound identifier '" + id + "' in: " + lex.src);
  }

  Dom parse_dom() {
    if (lex.peek_int()) {
      int lo = lex.integer();
      lex.expect("..");
      return Dom::range(lo, lex.integer());
    }
    std::string id = lex.ident();
    if (id == "val") return Dom::values();
    if (id == "addr") return Dom::range(0, u.addr_count() - 1);
    if (id == "name") return Dom::names();
    throw usage_error("unknown domain '" + id + "' (want val, addr, name, or lo..hi)");
  }

  APtr parse() {
    APtr p = parse_quant();
    if (!lex.done())
      throw usage_error("trailing input at offset " + std::to_string(lex.pos) +
                        " in: " + lex.src);
    return p;
  }

  APtr parse_quant() {
    size_t save = lex.pos;
    if (lex.peek_ident()) {
      std::string id = lex.ident();
      if ((id == "E" || id == "A") && lex.peek_ident()) {
        std::string var = lex.ident();
        lex.expect(":");
        Dom d = parse_dom();
        lex.expect(".");
        bound.push_back(var);
        APtr body = parse_quant();
        bound.pop_back();
        return id == "E" ? exists(var, d, body) : forall(var, d, body);
      }
      lex.pos = save;
    }
    return parse_wand();
  }

  APtr parse_wand() {
    APtr p = parse_or_level();
    if (lex.eat("-*")) return wand(p, parse_wand());
    return p;
  }
  APtr parse_or_level() {
    APtr p = parse_and_level();
    while (lex.eat("\\/")) p = or_(p, parse_and_level());
    return p;
  }
  APtr parse_and_level() {
    APtr p = parse_star();
    while (lex.eat("/\\")) p = and_(p, parse_star());
    return p;
  }
  APtr parse_star() {
    APtr p = parse_prefix();
    while (lex.eat("*")) p = star(p, parse_prefix());
    return p;
  }

  APtr parse_prefix() {
    if (lex.eat("|>")) return later(parse_prefix());
    if (lex.eat("#")) return persistently(parse_prefix());
    size_t save = lex.pos;
    if (lex.peek_ident()) {
      std::string id = lex.ident();
      if (id == "bupd") return bupd(parse_prefix());
      lex.pos = save;
    }
    return parse_atom();
  }

  APtr parse_atom() {
    if (lex.eat("(")) {
      APtr p = parse_quant();
      lex.expect(")");
      return p;
    }
    std::string id = lex.ident();
    if (id == "emp") return emp();
    if (id == "true") return pure(true);
    if (id == "false") return pure(false);
    if (id == "pure") {
      lex.expect("(");
      PExpr e = parse_pure();
      lex.expect(")");
      return pure(e);
    }
    if (id == "pt") {
      lex.expect("(");
      int share = parse_share();
      lex.expect(",");
      Term addr = parse_term(Slot::Addr);
      lex.expect(",");
      Term val = parse_term(Slot::Value);
      lex.expect(")");
      return points_to(share, addr, val);
    }
    if (id == "apt") {
      lex.expect("(");
      Term addr = parse_term(Slot::Addr);
      lex.expect(",");
      Term val = parse_term(Slot::Value);
      lex.expect(")");
      return atomic_points_to(addr, val);
    }
    if (id == "own") {
      lex.expect("(");
      Term name = parse_term(Slot::Name);
      lex.expect(",");
      std::string alg_id = lex.ident();
      lex.expect(":");
      const AlgebraSpec& alg = u.reg().by_id(alg_id);
      int elem = alg.elem(lex.balanced());
      int tag = 0;
      if (lex.eat(",")) tag = lex.integer();
      lex.expect(")");
      return own(name, u.reg().index_of(alg_id), elem, tag);
    }
    throw usage_error("unknown assertion form '" + id + "' in: " + lex.src);
  }

  int parse_share() {
    int num = lex.integer();
    if (!lex.eat("/")) {
      if (num < 0 || num > 1) throw usage_error("share must be a fraction or 1");
      return num * u.shares.full();
    }
    int den = lex.integer();
    std::string frac = std::to_string(num) + "/" + std::to_string(den);
    auto s = u.shares.parse(frac);
    if (!s) throw usage_error("share '" + frac + "' is not on the lattice");
    return *s;
  }
};

inline void show_pure(std::string& out, const PureExpr& e, int min_prec) {
  using Op = PureExpr::Op;
  auto binop = [&](const char* sym, int prec) {
    if (prec < min_prec) out += "(";
    show_pure(out, *e.lhs, prec);
    out += sym;
    show_pure(out, *e.rhs, prec + 1);
    if (prec < min_prec) out += ")";
  };
  switch (e.op) {
    case Op::Const: out += std::to_string(e.value); return;
    case Op::Var: out += e.var; return;
    case Op::Or: binop(" || ", 1); return;
    case Op::And: binop(" && ", 2); return;
    case Op::Eq: binop(" == ", 3); return;
    case Op::Ne: binop(" != ", 3); return;
    case Op::Lt: binop(" < ", 3); return;
    case Op::Le: binop(" <= ", 3); return;
    case Op::Gt: binop(" > ", 3); return;
    case Op::Ge: binop(" >= ", 3); return;
    case Op::Add: binop(" + ", 4); return;
    case Op::Sub: binop(" - ", 4); return;
    case Op::Mul: binop(" * ", 5); return;
    case Op::Not:
      out += "!";
      show_pure(out, *e.lhs, 6);
      return;
  }
}

inline void show_term(std::string& out, const Universe& u, const Term& t,
                      bool as_addr) {
  if (t.is_var) {
    out += t.var;
    return;
  }
  if (as_addr && t.value >= 0 && t.value < u.addr_count()) {
    out += u.addr_names[t.value];
    return;
  }
  out += std::to_string(t.value);
}

inline void show_assertion(std::string& out, const Universe& u,
                           const Assertion& p, int min_prec) {
  using K = Assertion::Kind;
  auto binop = [&](const char* sym, int prec, int rprec) {
    if (prec < min_prec) out += "(";
    show_assertion(out, u, *p.a, prec + (rprec == prec ? 1 : 0));
    out += sym;
    show_assertion(out, u, *p.b, rprec);
    if (prec < min_prec) out += ")";
  };
  switch (p.kind) {
    case K::Emp: out += "emp"; return;
    case K::Pure:
      out += "pure(";
      show_pure(out, *p.pure, 0);
      out += ")";
      return;
    case K::PointsTo:
      out += "pt(" + u.shares.name(p.share) + ", ";
      show_term(out, u, p.addr, true);
      out += ", ";
      show_term(out, u, p.value, false);
      out += ")";
      return;
    case K::AtomicPointsTo:
      out += "apt(";
      show_term(out, u, p.addr, true);
      out += ", ";
      show_term(out, u, p.value, false);
      out += ")";
      return;
    case K::Own: {
      const AlgebraSpec& alg = u.reg().at(p.algebra);
      out += "own(";
      show_term(out, u, p.name, false);
      out += ", " + alg.id + ":" + alg.names[p.elem];
      if (p.tag != 0) out += ", " + std::to_string(p.tag);
      out += ")";
      return;
    }
    case K::Wand: binop(" -* ", 1, 1); return;
    case K::Or: binop(" \\/ ", 2, 3); return;
    case K::And: binop(" /\\ ", 3, 4); return;
    case K::Star: binop(" * ", 4, 5); return;
    case K::Exists:
    case K::Forall: {
      if (min_prec > 0) out += "(";
      out += (p.kind == K::Exists ? "E " : "A ") + p.var + ":";
      switch (p.dom.kind) {
        case Dom::Kind::Values: out += "val"; break;
        case Dom::Kind::Names: out += "name"; break;
        case Dom::Kind::Range:
          out += std::to_string(p.dom.lo) + ".." + std::to_string(p.dom.hi);
          break;
      }
      out += ". ";
      show_assertion(out, u, *p.a, 0);
      if (min_prec > 0) out += ")";
      return;
    }
    case K::Later:
      out += "|> ";
      show_assertion(out, u, *p.a, 5);
      return;
    case K::Persistently:
      out += "# ";
      show_assertion(out, u, *p.a, 5);
      return;
    case K::BUpd:
      out += "bupd ";
      show_assertion(out, u, *p.a, 5);
      return;
  }
}

}  // namespace detail

inline APtr parse_assertion(const Universe& u, const std::string& src) {
  detail::AssertionParser p(src, u);
  return p.parse();
}

inline std::string show_assertion(const Universe& u, const APtr& p) {
  std::string out;
  detail::show_assertion(out, u, *p, 0);
  return out;
}

}  // namespace cslwb
