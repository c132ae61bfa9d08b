#pragma once
// Satisfaction and entailment over the finite model, plus the rule suites
// for ghost ownership and the basic separation-logic laws.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cslwb/assertion.hpp"
#include "cslwb/rmap.hpp"

namespace cslwb {

inline bool sat(const Universe& u, const Rmap& r, const Assertion& p,
                const Env& env);

namespace detail {

// Spatial atoms have one exact footprint per environment, so a star against
// one can subtract that footprint instead of enumerating splits. Keeps
// satisfaction of long star chains (wsat, ownership rules) tractable.
inline bool peelable(const Assertion& p) {
  using K = Assertion::Kind;
  return p.kind == K::Emp || p.kind == K::AtomicPointsTo ||
         p.kind == K::Own || (p.kind == K::PointsTo && p.share > 0);
}

// Subtract the atom's footprint from r, calling the continuation on each
// possible remainder (ghost subtraction can have several).
inline bool peel_atom(const Universe& u, const Rmap& r, const Assertion& atom,
                      const Env& env,
                      const std::function<bool(const Rmap&)>& rest) {
  using K = Assertion::Kind;
  if (atom.kind == K::Emp) return rest(r);
  if (atom.kind == K::PointsTo || atom.kind == K::AtomicPointsTo) {
    int addr = eval_term(atom.addr, env);
    auto it = r.heap.find(addr);
    if (it == r.heap.end() || it->second.value != eval_term(atom.value, env))
      return false;
    Rmap r1 = r;
    if (atom.kind == K::AtomicPointsTo) {
      if (it->second.kind != Resource::Kind::AtomicCell) return false;
      r1.heap.erase(addr);
    } else {
      if (it->second.kind != Resource::Kind::NonAtomic ||
          it->second.share < atom.share)
        return false;
      if (it->second.share == atom.share) r1.heap.erase(addr);
      else r1.heap[addr].share -= atom.share;
    }
    return rest(r1);
  }
  // Own: the entry must be present; the remainder either omits the slot
  // entirely or holds any element that joins back to it.
  int g = eval_term(atom.name, env);
  auto it = r.ghost.find(g);
  if (it == r.ghost.end()) return false;
  const GhostCell& cell = it->second;
  if (cell.elem.algebra != atom.algebra || cell.tag != atom.tag) return false;
  const auto& alg = u.reg().at(cell.elem.algebra);
  if (cell.elem.value == atom.elem) {
    Rmap r1 = r;
    r1.ghost.erase(g);
    if (rest(r1)) return true;
  }
  for (int x = 0; x < alg.size(); ++x) {
    if (!alg.valid[x]) continue;
    auto j = alg.join_valid(x, atom.elem);
    if (!j || *j != cell.elem.value) continue;
    Rmap r1 = r;
    r1.ghost[g].elem.value = x;
    if (rest(r1)) return true;
  }
  return false;
}

inline void flatten_star(const Assertion& p, std::vector<const Assertion*>& out) {
  if (p.kind == Assertion::Kind::Star) {
    flatten_star(*p.a, out);
    flatten_star(*p.b, out);
  } else {
    out.push_back(&p);
  }
}

// Satisfy a star of the given conjuncts: peel spatial atoms first, then
// fall back to split enumeration for whatever is left.
inline bool sat_star_list(const Universe& u, const Rmap& r,
                          const std::vector<const Assertion*>& leaves,
                          const Env& env) {
  if (leaves.empty()) return r.heap.empty() && r.ghost.empty();
  if (leaves.size() == 1) return sat(u, r, *leaves[0], env);
  for (size_t i = 0; i < leaves.size(); ++i) {
    if (!peelable(*leaves[i])) continue;
    std::vector<const Assertion*> others;
    for (size_t j = 0; j < leaves.size(); ++j)
      if (j != i) others.push_back(leaves[j]);
    return peel_atom(u, r, *leaves[i], env, [&](const Rmap& r1) {
      return sat_star_list(u, r1, others, env);
    });
  }
  std::vector<const Assertion*> others(leaves.begin() + 1, leaves.end());
  bool found = false;
  for_each_split(u, r, [&](const Rmap& r1, const Rmap& r2) {
    if (sat(u, r1, *leaves[0], env) && sat_star_list(u, r2, others, env)) {
      found = true;
      return false;
    }
    return true;
  });
  return found;
}

}  // namespace detail

// Satisfaction is exact: emp is the empty rmap, points-to and own describe
// singletons, star splits. Pure assertions are resource-independent (combine
// them with /\, as in fact /\ spatial). Wand and the update modality
// quantify over the universe: wand over extensions at any level at or below
// the current one (which keeps satisfaction monotone under level decrease),
// updates over ghost frames on the active slots with replacements drawn from
// active plus headroom slots. Headroom exists so allocation always has a
// fresh name no matter what the environment owns; the flip side is that the
// update modality's frame property is only promised for resources held in
// active slots.
inline bool sat(const Universe& u, const Rmap& r, const Assertion& p,
                const Env& env = {}) {
  using K = Assertion::Kind;
  switch (p.kind) {
    case K::Emp:
      return r.heap.empty() && r.ghost.empty();
    case K::Pure:
      return eval_pure(*p.pure, env) != 0;
    case K::PointsTo: {
      if (!r.ghost.empty() || r.heap.size() != 1) return false;
      auto it = r.heap.begin();
      return it->first == eval_term(p.addr, env) &&
             it->second.kind == Resource::Kind::NonAtomic &&
             it->second.share == p.share &&
             it->second.value == eval_term(p.value, env);
    }
    case K::AtomicPointsTo: {
      if (!r.ghost.empty() || r.heap.size() != 1) return false;
      auto it = r.heap.begin();
      return it->first == eval_term(p.addr, env) &&
             it->second.kind == Resource::Kind::AtomicCell &&
             it->second.value == eval_term(p.value, env);
    }
    case K::Own: {
      if (!r.heap.empty() || r.ghost.size() != 1) return false;
      auto it = r.ghost.begin();
      return it->first == eval_term(p.name, env) &&
             it->second.elem.algebra == p.algebra &&
             it->second.elem.value == p.elem && it->second.tag == p.tag;
    }
    case K::Star: {
      std::vector<const Assertion*> leaves;
      detail::flatten_star(p, leaves);
      return detail::sat_star_list(u, r, leaves, env);
    }
    case K::Wand: {
      for (int m = r.level; m >= 0; --m) {
        Rmap base = r;
        base.level = m;
        std::uint64_t per_level = rmap_count(u) / (u.max_level + 1);
        for (std::uint64_t ix = 0; ix < per_level; ++ix) {
          Rmap ext = decode_rmap(u, ix * (u.max_level + 1));
          ext.level = m;
          if (!rmap_in_model(u, ext)) continue;
          auto j = rmap_join(u, base, ext);
          if (!j) continue;
          if (sat(u, ext, *p.a, env) && !sat(u, *j, *p.b, env)) return false;
        }
      }
      return true;
    }
    case K::And:
      return sat(u, r, *p.a, env) && sat(u, r, *p.b, env);
    case K::Or:
      return sat(u, r, *p.a, env) || sat(u, r, *p.b, env);
    case K::Exists: {
      Env e2 = env;
      for (int v : p.dom.enumerate(u)) {
        e2[p.var] = v;
        if (sat(u, r, *p.a, e2)) return true;
      }
      return false;
    }
    case K::Forall: {
      Env e2 = env;
      for (int v : p.dom.enumerate(u)) {
        e2[p.var] = v;
        if (!sat(u, r, *p.a, e2)) return false;
      }
      return true;
    }
    case K::Later:
      return r.level == 0 || sat(u, decrement(r), *p.a, env);
    case K::Persistently:
      return sat(u, rmap_core(u, r), *p.a, env);
    case K::BUpd: {
      bool ok = true;
      for_each_ghost_map(u, active_names(u), [&](const GhostMap& frame) {
        if (!ghost_join(u.reg(), r.ghost, frame)) return true;  // not a frame
        bool replaced = false;
        for_each_ghost_map(u, all_names(u), [&](const GhostMap& g2) {
          if (!ghost_join(u.reg(), g2, frame)) return true;
          Rmap r2{r.level, r.heap, g2};
          if (sat(u, r2, *p.a, env)) {
            replaced = true;
            return false;
          }
          return true;
        });
        if (!replaced) {
          ok = false;
          return false;
        }
        return true;
      });
      return ok;
    }
  }
  return false;
}

inline bool sat(const Universe& u, const Rmap& r, const APtr& p,
                const Env& env = {}) {
  return sat(u, r, *p, env);
}

// ---- entailment ----

struct EntailConfig {
  std::uint64_t max_exhaustive = 2'000'000;  // switch to sampling above this
  std::uint64_t samples = 20'000;
  std::uint64_t seed = 1;
};

struct EntailReport {
  bool holds = false;
  bool exhaustive = true;
  std::uint64_t checked = 0;
  std::optional<Rmap> counterexample;
};

// P |- Q over every rmap of the universe (or a seeded sample of them when
// the space is too large; the report says which).
inline EntailReport entails(const Universe& u, const APtr& p, const APtr& q,
                            const EntailConfig& cfg = {}) {
  EntailReport rep;
  std::uint64_t total = rmap_count(u);
  rep.exhaustive = total <= cfg.max_exhaustive;
  rep.holds = true;
  if (rep.exhaustive) {
    for (std::uint64_t ix = 0; ix < total; ++ix) {
      Rmap r = decode_rmap(u, ix);
      if (!rmap_in_model(u, r)) continue;
      ++rep.checked;
      if (sat(u, r, p) && !sat(u, r, q)) {
        rep.holds = false;
        rep.counterexample = r;
        return rep;
      }
    }
  } else {
    std::mt19937_64 rng(cfg.seed);
    for (std::uint64_t i = 0; i < cfg.samples; ++i) {
      Rmap r = decode_rmap(u, rng() % total);
      if (!rmap_in_model(u, r)) continue;
      ++rep.checked;
      if (sat(u, r, p) && !sat(u, r, q)) {
        rep.holds = false;
        rep.counterexample = r;
        return rep;
      }
    }
  }
  return rep;
}

// First rmap in enumeration order satisfying p, if any.
inline std::optional<Rmap> find_model(const Universe& u, const APtr& p) {
  std::uint64_t total = rmap_count(u);
  for (std::uint64_t ix = 0; ix < total; ++ix) {
    Rmap r = decode_rmap(u, ix);
    if (!rmap_in_model(u, r)) continue;
    if (sat(u, r, p)) return r;
  }
  return std::nullopt;
}

// Satisfying set of an assertion, as indices into the enumeration order.
inline std::vector<std::uint64_t> sat_set(const Universe& u, const APtr& p) {
  std::vector<std::uint64_t> out;
  std::uint64_t total = rmap_count(u);
  for (std::uint64_t ix = 0; ix < total; ++ix) {
    Rmap r = decode_rmap(u, ix);
    if (!rmap_in_model(u, r)) continue;
    if (sat(u, r, p)) out.push_back(ix);
  }
  return out;
}

// ---- own rule suite ----

struct RuleVerdict {
  std::string rule;
  std::string instance;
  bool holds = false;
  std::string note;
};

struct OwnRulesReport {
  std::vector<RuleVerdict> verdicts;
  int checked = 0;
  bool pass() const {
    for (auto& v : verdicts)
      if (!v.holds) return false;
    return !verdicts.empty();
  }
  std::vector<RuleVerdict> failures() const {
    std::vector<RuleVerdict> f;
    for (auto& v : verdicts)
      if (!v.holds) f.push_back(v);
    return f;
  }
};

// The ownership rules, decided semantically against the universe:
//   alloc:   emp |- upd (E g. own g a)        for every valid a (headroom algebras)
//   dealloc: own g a |- upd emp
//   op:      own g (a*b) and own g a * own g b have the same satisfying rmaps
//   valid2:  own g a * own g b |- pure(a*b defined and valid)
//   update:  own g a |- upd (own g b)  iff  is_fp_update(a, b)
inline OwnRulesReport check_own_rules(const Universe& u,
                                      const EntailConfig& cfg = {}) {
  OwnRulesReport rep;
  const auto& reg = u.reg();
  auto add = [&](std::string rule, std::string inst, bool ok, std::string note = "") {
    rep.verdicts.push_back({std::move(rule), std::move(inst), ok, std::move(note)});
    ++rep.checked;
  };

  // alloc: one representative headroom slot per algebra
  std::vector<int> alloc_algs;
  for (int a : u.headroom)
    if (std::find(alloc_algs.begin(), alloc_algs.end(), a) == alloc_algs.end())
      alloc_algs.push_back(a);
  for (int ai : alloc_algs) {
    const auto& alg = reg.at(ai);
    for (int e = 0; e < alg.size(); ++e) {
      if (!alg.valid[e]) continue;
      auto goal = bupd(exists("g", Dom::names(), own(Term::mk("g"), ai, e)));
      auto r = entails(u, emp(), goal, cfg);
      add("own_alloc", alg.id + ":" + alg.names[e], r.holds,
          r.holds ? "" : "no allocatable name for some frame");
    }
  }

  for (int g = 0; g < u.active_count(); ++g) {
    int ai = u.slots[g];
    const auto& alg = reg.at(ai);
    std::string gs = std::to_string(g);
    for (int e = 0; e < alg.size(); ++e) {
      if (!alg.valid[e]) continue;
      auto r = entails(u, own(Term::mk(g), ai, e), bupd(emp()), cfg);
      add("own_dealloc", gs + ":" + alg.names[e], r.holds);
    }
    for (int e1 = 0; e1 < alg.size(); ++e1) {
      if (!alg.valid[e1]) continue;
      for (int e2 = 0; e2 < alg.size(); ++e2) {
        if (!alg.valid[e2]) continue;
        auto j = alg.join_valid(e1, e2);
        auto split = star(own(Term::mk(g), ai, e1), own(Term::mk(g), ai, e2));
        std::string inst =
            gs + ":" + alg.names[e1] + "*" + alg.names[e2];
        if (j) {
          bool same = sat_set(u, own(Term::mk(g), ai, *j)) == sat_set(u, split);
          add("own_op", inst, same,
              same ? "" : "satisfying sets differ for join " + alg.names[*j]);
        } else {
          bool none = sat_set(u, split).empty();
          add("own_op", inst, none,
              none ? "" : "incompatible pair has satisfying rmaps");
        }
        bool expect = j.has_value();
        auto v2 = entails(u, split, pure(expect), cfg);
        add("own_valid_2", inst, v2.holds);
        auto fp = is_fp_update(alg, e1, e2);
        auto upd = entails(u, own(Term::mk(g), ai, e1),
                           bupd(own(Term::mk(g), ai, e2)), cfg);
        bool agree = fp.ok == upd.holds;
        add("own_update", inst, agree,
            agree ? (fp.ok ? "update allowed" : "rejected; " + fp.reason)
                  : "semantic and algebraic verdicts disagree");
      }
    }
  }
  return rep;
}

// ---- separation-logic law suite ----

struct BiLawsReport {
  std::vector<RuleVerdict> verdicts;
  bool pass() const {
    for (auto& v : verdicts)
      if (!v.holds) return false;
    return !verdicts.empty();
  }
};

// Core laws on a family of assertions. The persistently-duplication law and
// the persistence of individual assertions are evaluated under both core
// disciplines; differences between the two are reported in the notes rather
// than failing the suite (only genuine law violations fail it).
inline BiLawsReport check_bi_laws(const Universe& u_in, std::vector<APtr> family,
                                  std::vector<std::string> names,
                                  const EntailConfig& cfg = {}) {
  BiLawsReport rep;
  auto add = [&](std::string rule, std::string inst, bool ok, std::string note = "") {
    rep.verdicts.push_back({std::move(rule), std::move(inst), ok, std::move(note)});
  };
  size_t n = family.size();
  auto nm = [&](size_t i) { return names.size() > i ? names[i] : std::to_string(i); };

  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      auto pq = star(family[i], family[j]);
      auto qp = star(family[j], family[i]);
      add("star_comm", nm(i) + "," + nm(j),
          entails(u_in, pq, qp, cfg).holds && entails(u_in, qp, pq, cfg).holds);
    }
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      for (size_t k = 0; k < n; ++k) {
        auto l = star(star(family[i], family[j]), family[k]);
        auto r = star(family[i], star(family[j], family[k]));
        add("star_assoc", nm(i) + "," + nm(j) + "," + nm(k),
            entails(u_in, l, r, cfg).holds && entails(u_in, r, l, cfg).holds);
      }
  for (size_t i = 0; i < n; ++i) {
    auto pe = star(family[i], emp());
    add("star_unit", nm(i),
        entails(u_in, pe, family[i], cfg).holds &&
            entails(u_in, family[i], pe, cfg).holds);
  }
  // wand adjunction: P * Q |- R  iff  P |- Q -* R
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      for (size_t k = 0; k < n; ++k) {
        bool lhs = entails(u_in, star(family[i], family[j]), family[k], cfg).holds;
        bool rhs = entails(u_in, family[i], wand(family[j], family[k]), cfg).holds;
        add("wand_adjunction", nm(i) + "," + nm(j) + "," + nm(k), lhs == rhs,
            lhs == rhs ? "" : "curried and uncurried forms disagree");
      }
  // later: monotone, and introducible
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j) {
      if (!entails(u_in, family[i], family[j], cfg).holds) continue;
      add("later_mono", nm(i) + "|-" + nm(j),
          entails(u_in, later(family[i]), later(family[j]), cfg).holds);
    }
  for (size_t i = 0; i < n; ++i)
    add("later_intro", nm(i), entails(u_in, family[i], later(family[i]), cfg).holds);

  // persistently, under each core discipline
  for (CoreMode mode : {CoreMode::Vst, CoreMode::Iris}) {
    Universe u = u_in;
    u.core_mode = mode;
    std::string tag = mode == CoreMode::Vst ? "vst" : "iris";
    for (size_t i = 0; i < n; ++i) {
      auto boxed = persistently(family[i]);
      bool vacuous = sat_set(u, boxed).empty();
      add("pers_dup[" + tag + "]", nm(i),
          entails(u, boxed, star(family[i], boxed), cfg).holds,
          vacuous ? "box is unsatisfiable under this core" : "");
      // persistence of the assertion itself: informational, always "holds"
      bool pers = entails(u, family[i], boxed, cfg).holds;
      add("persistent[" + tag + "]", nm(i), true,
          pers ? "assertion is persistent" : "assertion is not persistent");
    }
  }
  return rep;
}

}  // namespace cslwb
