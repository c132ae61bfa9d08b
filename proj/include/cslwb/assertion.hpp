#pragma once
// Assertion syntax over rmaps. Trees are immutable and shared; variables are
// resolved through an environment at satisfaction time.

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "cslwb/rmap.hpp"

namespace cslwb {

struct Term {
  bool is_var = false;
  int value = 0;
  std::string var;

  static Term mk(int v) { return Term{false, v, {}}; }
  static Term mk(std::string name) { return Term{true, 0, std::move(name)}; }
};

using Env = std::map<std::string, int>;

inline int eval_term(const Term& t, const Env& env) {
  if (!t.is_var) return t.value;
  auto it = env.find(t.var);
  if (it == env.end()) throw usage_error("unbound variable '" + t.var + "'");
  return it->second;
}

// Small boolean/arithmetic expressions for pure assertions.
struct PureExpr;
using PExpr = std::shared_ptr<const PureExpr>;

struct PureExpr {
  enum class Op {
    Const, Var, Add, Sub, Mul, Eq, Ne, Lt, Le, Gt, Ge, And, Or, Not
  };
  Op op = Op::Const;
  int value = 0;
  std::string var;
  PExpr lhs, rhs;

  static PExpr mk(int v) {
    auto e = std::make_shared<PureExpr>();
    e->value = v;
    return e;
  }
  static PExpr mk(std::string name) {
    auto e = std::make_shared<PureExpr>();
    e->op = Op::Var;
    e->var = std::move(name);
    return e;
  }
  static PExpr mk(Op op, PExpr a, PExpr b = nullptr) {
    auto e = std::make_shared<PureExpr>();
    e->op = op;
    e->lhs = std::move(a);
    e->rhs = std::move(b);
    return e;
  }
};

inline int eval_pure(const PureExpr& e, const Env& env) {
  using Op = PureExpr::Op;
  switch (e.op) {
    case Op::Const: return e.value;
    case Op::Var: {
      auto it = env.find(e.var);
      if (it == env.end()) throw usage_error("unbound variable '" + e.var + "'");
      return it->second;
    }
    case Op::Not: return !eval_pure(*e.lhs, env);
    default: break;
  }
  int a = eval_pure(*e.lhs, env), b = eval_pure(*e.rhs, env);
  switch (e.op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Eq: return a == b;
    case Op::Ne: return a != b;
    case Op::Lt: return a < b;
    case Op::Le: return a <= b;
    case Op::Gt: return a > b;
    case Op::Ge: return a >= b;
    case Op::And: return a && b;
    case Op::Or: return a || b;
    default: throw usage_error("malformed pure expression");
  }
}

// Quantifier domains.
struct Dom {
  enum class Kind { Values, Range, Names } kind = Kind::Values;
  int lo = 0, hi = 0;  // Range only

  std::vector<int> enumerate(const Universe& u) const {
    switch (kind) {
      case Kind::Values: return u.values;
      case Kind::Names: return all_names(u);
      case Kind::Range: {
        std::vector<int> v;
        for (int i = lo; i <= hi; ++i) v.push_back(i);
        return v;
      }
    }
    return {};
  }
  static Dom values() { return Dom{Kind::Values, 0, 0}; }
  static Dom names() { return Dom{Kind::Names, 0, 0}; }
  static Dom range(int lo, int hi) { return Dom{Kind::Range, lo, hi}; }
};

struct Assertion;
using APtr = std::shared_ptr<const Assertion>;

struct Assertion {
  enum class Kind {
    Emp, Pure, PointsTo, AtomicPointsTo, Own,
    Star, Wand, And, Or, Exists, Forall,
    Later, Persistently, BUpd
  };
  Kind kind = Kind::Emp;

  PExpr pure;             // Pure
  int share = 0;          // PointsTo
  Term addr;              // PointsTo / AtomicPointsTo
  Term value;             // PointsTo / AtomicPointsTo
  Term name;              // Own: ghost name
  int algebra = -1;       // Own: registry index
  int elem = -1;          // Own: element index
  int tag = 0;            // Own: predicate tag
  std::string var;        // Exists / Forall
  Dom dom;                // Exists / Forall
  APtr a, b;              // children
};

// ---- builders ----

inline APtr mk(Assertion n) { return std::make_shared<Assertion>(std::move(n)); }

inline APtr emp() {
  Assertion n;
  n.kind = Assertion::Kind::Emp;
  return mk(std::move(n));
}
inline APtr pure(PExpr e) {
  Assertion n;
  n.kind = Assertion::Kind::Pure;
  n.pure = std::move(e);
  return mk(std::move(n));
}
inline APtr pure(bool b) { return pure(PureExpr::mk(b ? 1 : 0)); }
inline APtr points_to(int share, Term addr, Term value) {
  Assertion n;
  n.kind = Assertion::Kind::PointsTo;
  n.share = share;
  n.addr = std::move(addr);
  n.value = std::move(value);
  return mk(std::move(n));
}
inline APtr atomic_points_to(Term addr, Term value) {
  Assertion n;
  n.kind = Assertion::Kind::AtomicPointsTo;
  n.addr = std::move(addr);
  n.value = std::move(value);
  return mk(std::move(n));
}
inline APtr own(Term name, int algebra, int elem, int tag = 0) {
  Assertion n;
  n.kind = Assertion::Kind::Own;
  n.name = std::move(name);
  n.algebra = algebra;
  n.elem = elem;
  n.tag = tag;
  return mk(std::move(n));
}
inline APtr star(APtr a, APtr b) {
  Assertion n;
  n.kind = Assertion::Kind::Star;
  n.a = std::move(a);
  n.b = std::move(b);
  return mk(std::move(n));
}
inline APtr wand(APtr a, APtr b) {
  Assertion n;
  n.kind = Assertion::Kind::Wand;
  n.a = std::move(a);
  n.b = std::move(b);
  return mk(std::move(n));
}
inline APtr and_(APtr a, APtr b) {
  Assertion n;
  n.kind = Assertion::Kind::And;
  n.a = std::move(a);
  n.b = std::move(b);
  return mk(std::move(n));
}
inline APtr or_(APtr a, APtr b) {
  Assertion n;
  n.kind = Assertion::Kind::Or;
  n.a = std::move(a);
  n.b = std::move(b);
  return mk(std::move(n));
}
inline APtr exists(std::string var, Dom dom, APtr body) {
  Assertion n;
  n.kind = Assertion::Kind::Exists;
  n.var = std::move(var);
  n.dom = dom;
  n.a = std::move(body);
  return mk(std::move(n));
}
inline APtr forall(std::string var, Dom dom, APtr body) {
  Assertion n;
  n.kind = Assertion::Kind::Forall;
  n.var = std::move(var);
  n.dom = dom;
  n.a = std::move(body);
  return mk(std::move(n));
}
inline APtr later(APtr p) {
  Assertion n;
  n.kind = Assertion::Kind::Later;
  n.a = std::move(p);
  return mk(std::move(n));
}
inline APtr persistently(APtr p) {
  Assertion n;
  n.kind = Assertion::Kind::Persistently;
  n.a = std::move(p);
  return mk(std::move(n));
}
inline APtr bupd(APtr p) {
  Assertion n;
  n.kind = Assertion::Kind::BUpd;
  n.a = std::move(p);
  return mk(std::move(n));
}

// Star of a whole list; empty list is emp.
inline APtr star_all(std::vector<APtr> parts) {
  if (parts.empty()) return emp();
  APtr acc = parts[0];
  for (size_t i = 1; i < parts.size(); ++i) acc = star(acc, parts[i]);
  return acc;
}

}  // namespace cslwb
