#pragma once
// Finite ghost-state algebras: carriers, partial joins, validity, units and
// the two core disciplines (strict "vst" cores vs monotone "iris" cores).
// Everything is table-driven so laws can be decided by exhaustive enumeration.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace cslwb {

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct bound_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dyadic share lattice: nonzero multiples of 1/2^depth up to 1.
// Shares are stored as numerators; full() is the whole share.
struct ShareLattice {
  int depth = 1;

  int full() const { return 1 << depth; }
  // Sum of two shares, or nullopt on overflow past full.
  std::optional<int> add(int a, int b) const {
    int s = a + b;
    if (s > full()) return std::nullopt;
    return s;
  }
  std::string name(int s) const {
    if (s == full()) return "1";
    int num = s, den = full();
    int g = std::gcd(num, den);
    return std::to_string(num / g) + "/" + std::to_string(den / g);
  }
  // Accepts "1" or "p/q" where q divides 2^depth.
  std::optional<int> parse(const std::string& text) const {
    if (text == "1") return full();
    auto slash = text.find('/');
    if (slash == std::string::npos) return std::nullopt;
    int num = 0, den = 0;
    try {
      num = std::stoi(text.substr(0, slash));
      den = std::stoi(text.substr(slash + 1));
    } catch (...) {
      return std::nullopt;
    }
    if (num <= 0 || den <= 0 || full() % den != 0) return std::nullopt;
    int s = num * (full() / den);
    if (s > full()) return std::nullopt;
    return s;
  }
};

// A finite separation algebra given by tables. Elements are indices into
// `names`. The join is a partial function; `triples` is the raw relation the
// tables were built from, so functionality violations in loaded algebras stay
// observable.
struct AlgebraSpec {
  std::string id;
  std::vector<std::string> names;
  std::vector<char> valid;                       // per element
  std::vector<std::tuple<int, int, int>> triples;  // (a, b, a*b)
  std::vector<std::optional<int>> join_tab;        // n*n, row-major
  std::optional<int> unit;                         // global unit when present
  std::vector<std::optional<int>> vst_core;
  std::vector<std::optional<int>> iris_core;

  int size() const { return static_cast<int>(names.size()); }

  std::optional<int> join(int a, int b) const {
    return join_tab[static_cast<size_t>(a) * names.size() + b];
  }

  // Join that also requires the result to be valid.
  std::optional<int> join_valid(int a, int b) const {
    auto r = join(a, b);
    if (r && !valid[*r]) return std::nullopt;
    return r;
  }

  int elem(const std::string& name) const {
    for (int i = 0; i < size(); ++i)
      if (names[i] == name) return i;
    throw usage_error("algebra " + id + ": no element named '" + name + "'");
  }

  bool has_elem(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }

  // e is an identity if joining it never changes the other operand.
  bool is_identity(int e) const {
    for (int x = 0; x < size(); ++x) {
      auto r = join(e, x);
      if (r && *r != x) return false;
    }
    return true;
  }

  // Extension order: a <= b iff some c joins a up to b.
  bool below(int a, int b) const {
    for (int c = 0; c < size(); ++c) {
      auto r = join(a, c);
      if (r && *r == b) return true;
    }
    return false;
  }

  void compile() {
    size_t n = names.size();
    join_tab.assign(n * n, std::nullopt);
    for (auto& [a, b, c] : triples) {
      auto& slot = join_tab[static_cast<size_t>(a) * n + b];
      if (!slot) slot = c;  // first triple wins; duplicates show up in the law check
    }
    valid.resize(n, 1);
    vst_core.resize(n);
    iris_core.resize(n);
  }
};

// Builder helpers used by the shipped constructions.
class AlgebraBuilder {
 public:
  explicit AlgebraBuilder(std::string id) { spec_.id = std::move(id); }

  int elem(const std::string& name) {
    spec_.names.push_back(name);
    spec_.valid.push_back(1);
    return static_cast<int>(spec_.names.size()) - 1;
  }
  void join(int a, int b, int c) { spec_.triples.emplace_back(a, b, c); }
  void join_comm(int a, int b, int c) {
    join(a, b, c);
    if (a != b) join(b, a, c);
  }
  void unit(int e) {
    spec_.unit = e;
    for (int x = 0; x < static_cast<int>(spec_.names.size()); ++x) join_comm(e, x, x);
  }
  void invalid(int e) { spec_.valid[e] = 0; }
  void cores(int e, std::optional<int> vst, std::optional<int> iris) {
    spec_.vst_core.resize(spec_.names.size());
    spec_.iris_core.resize(spec_.names.size());
    spec_.vst_core[e] = vst;
    spec_.iris_core[e] = iris;
  }

  AlgebraSpec build() {
    spec_.compile();
    return spec_;
  }

 private:
  AlgebraSpec spec_;
};

// ---- law checking ----

struct LawCounterexample {
  std::string law;
  std::vector<std::string> elems;
  std::string detail;
};

struct LawReport {
  bool associative = false;
  bool commutative = false;
  bool functional = false;
  bool positive = false;
  bool unital = false;
  std::vector<LawCounterexample> counterexamples;
  bool pass() const {
    return associative && commutative && functional && positive && unital;
  }
};

// The five laws, by exhaustive enumeration. Partial joins compare in the
// Kleene sense: both undefined, or both defined and equal. With no declared
// global unit, "unital" asks every element for an identity of its own and
// positivity speaks about identity elements; with a declared unit the two
// readings coincide.
inline LawReport check_algebra_laws(const AlgebraSpec& alg, int max_carrier = 64) {
  if (alg.size() > max_carrier)
    throw bound_error("algebra " + alg.id + ": carrier size " +
                      std::to_string(alg.size()) + " exceeds enumeration bound " +
                      std::to_string(max_carrier));
  LawReport rep;
  int n = alg.size();
  auto name = [&](int e) { return alg.names[e]; };

  rep.functional = true;
  {
    std::map<std::pair<int, int>, int> seen;
    for (auto& [a, b, c] : alg.triples) {
      auto it = seen.find({a, b});
      if (it != seen.end() && it->second != c) {
        rep.functional = false;
        rep.counterexamples.push_back(
            {"functional", {name(a), name(b)},
             "join relates " + name(a) + "*" + name(b) + " to both " +
                 name(it->second) + " and " + name(c)});
        break;
      }
      seen[{a, b}] = c;
    }
  }

  rep.commutative = true;
  for (int a = 0; a < n && rep.commutative; ++a)
    for (int b = 0; b < n && rep.commutative; ++b) {
      auto ab = alg.join(a, b), ba = alg.join(b, a);
      if (ab != ba) {
        rep.commutative = false;
        rep.counterexamples.push_back(
            {"commutative", {name(a), name(b)},
             name(a) + "*" + name(b) + " and " + name(b) + "*" + name(a) + " differ"});
      }
    }

  rep.associative = true;
  for (int a = 0; a < n && rep.associative; ++a)
    for (int b = 0; b < n && rep.associative; ++b)
      for (int c = 0; c < n && rep.associative; ++c) {
        auto ab = alg.join(a, b);
        auto left = ab ? alg.join(*ab, c) : std::nullopt;
        auto bc = alg.join(b, c);
        auto right = bc ? alg.join(a, *bc) : std::nullopt;
        if (left != right) {
          rep.associative = false;
          rep.counterexamples.push_back(
              {"associative", {name(a), name(b), name(c)},
               "(" + name(a) + "*" + name(b) + ")*" + name(c) + " != " + name(a) +
                   "*(" + name(b) + "*" + name(c) + ")"});
          break;
        }
      }

  std::vector<char> ident(n, 0);
  for (int e = 0; e < n; ++e) ident[e] = alg.is_identity(e);

  rep.positive = true;
  for (int a = 0; a < n && rep.positive; ++a)
    for (int b = 0; b < n && rep.positive; ++b) {
      auto r = alg.join(a, b);
      if (r && ident[*r] && !ident[a]) {
        rep.positive = false;
        rep.counterexamples.push_back(
            {"positive", {name(a), name(b)},
             name(a) + "*" + name(b) + " = identity " + name(*r) + " but " + name(a) +
                 " is not an identity"});
      }
    }

  rep.unital = true;
  if (alg.unit) {
    for (int a = 0; a < n && rep.unital; ++a) {
      auto r = alg.join(*alg.unit, a);
      if (!r || *r != a) {
        rep.unital = false;
        rep.counterexamples.push_back(
            {"unital", {name(a)}, "declared unit does not fix " + name(a)});
      }
    }
    if (rep.unital && !ident[*alg.unit]) {
      rep.unital = false;
      rep.counterexamples.push_back(
          {"unital", {name(*alg.unit)}, "declared unit is not an identity"});
    }
  } else {
    for (int a = 0; a < n && rep.unital; ++a) {
      bool found = false;
      for (int e = 0; e < n && !found; ++e) {
        auto r = alg.join(e, a);
        found = ident[e] && r && *r == a;
      }
      if (!found) {
        rep.unital = false;
        rep.counterexamples.push_back(
            {"unital", {name(a)}, name(a) + " has no identity element"});
      }
    }
  }
  return rep;
}

// ---- frame-preserving updates ----

struct FpVerdict {
  bool ok = false;
  std::optional<int> frame;  // counterexample when !ok, if one exists
  std::string reason;
};

// a ~~> b: b is valid and every frame compatible with a stays compatible
// with b. Validity of b covers the frameless case.
inline FpVerdict is_fp_update(const AlgebraSpec& alg, int a, int b) {
  FpVerdict v;
  if (!alg.valid[b]) {
    v.ok = false;
    v.reason = "target " + alg.names[b] + " is not valid";
    return v;
  }
  for (int c = 0; c < alg.size(); ++c) {
    if (!alg.valid[c]) continue;
    if (alg.join_valid(a, c) && !alg.join_valid(b, c)) {
      v.ok = false;
      v.frame = c;
      v.reason = "frame " + alg.names[c] + " joins with " + alg.names[a] +
                 " but not with " + alg.names[b];
      return v;
    }
  }
  v.ok = true;
  return v;
}

// ---- core axioms ----

struct CoreReport {
  // strict discipline: a <= b implies |a| = |b| (Kleene equality)
  bool vst_axiom = false;
  // monotone discipline: |a| defined and a <= b imply |b| defined and |a| <= |b|
  bool iris_axiom = false;
  bool vst_core_law = false;  // |a| * a = a wherever |a| is defined
  bool iris_core_law = false;
  std::vector<int> divergence;  // elements where the two cores disagree
  std::vector<std::string> notes;
  bool pass() const {
    return vst_axiom && iris_axiom && vst_core_law && iris_core_law;
  }
};

inline CoreReport check_core_axioms(const AlgebraSpec& alg) {
  CoreReport rep;
  int n = alg.size();
  auto name = [&](int e) { return alg.names[e]; };

  std::vector<std::vector<char>> below(n, std::vector<char>(n, 0));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) below[a][b] = alg.below(a, b);

  rep.vst_axiom = true;
  for (int a = 0; a < n && rep.vst_axiom; ++a)
    for (int b = 0; b < n && rep.vst_axiom; ++b) {
      if (!below[a][b]) continue;
      if (alg.vst_core[a] != alg.vst_core[b]) {
        rep.vst_axiom = false;
        rep.notes.push_back("vst axiom: " + name(a) + " <= " + name(b) +
                            " but cores differ");
      }
    }

  rep.iris_axiom = true;
  for (int a = 0; a < n && rep.iris_axiom; ++a)
    for (int b = 0; b < n && rep.iris_axiom; ++b) {
      if (!below[a][b] || !alg.iris_core[a]) continue;
      if (!alg.iris_core[b] || !below[*alg.iris_core[a]][*alg.iris_core[b]]) {
        rep.iris_axiom = false;
        rep.notes.push_back("iris axiom: " + name(a) + " <= " + name(b) +
                            " but core of " + name(a) + " is not below core of " +
                            name(b));
      }
    }

  auto core_law = [&](const std::vector<std::optional<int>>& core, const char* which) {
    for (int a = 0; a < n; ++a) {
      if (!core[a]) continue;
      auto r = alg.join(*core[a], a);
      if (!r || *r != a) {
        rep.notes.push_back(std::string(which) + " core law: |" + name(a) + "| * " +
                            name(a) + " != " + name(a));
        return false;
      }
    }
    return true;
  };
  rep.vst_core_law = core_law(alg.vst_core, "vst");
  rep.iris_core_law = core_law(alg.iris_core, "iris");

  for (int a = 0; a < n; ++a)
    if (alg.vst_core[a] != alg.iris_core[a]) rep.divergence.push_back(a);
  return rep;
}

// ---- shipped algebras ----

// Exclusive ownership of one value; eps is the unit, two owners never join.
inline AlgebraSpec exclusive_algebra(const std::vector<int>& values,
                                     const std::string& id = "excl") {
  AlgebraBuilder b(id);
  int eps = b.elem("eps");
  std::vector<int> ex;
  for (int v : values) ex.push_back(b.elem("ex(" + std::to_string(v) + ")"));
  b.unit(eps);
  b.cores(eps, eps, eps);
  for (int e : ex) b.cores(e, eps, eps);
  return b.build();
}

// Pure agreement: an element only joins with itself. No global unit; every
// element is its own identity, and both cores are the identity function,
// which keeps the strict core axiom honest (the order is discrete).
inline AlgebraSpec agree_algebra(const std::vector<int>& values,
                                 const std::string& id = "agree") {
  AlgebraBuilder b(id);
  std::vector<int> ag;
  for (int v : values) ag.push_back(b.elem("ag(" + std::to_string(v) + ")"));
  for (int e : ag) {
    b.join(e, e, e);
    b.cores(e, e, e);
  }
  return b.build();
}

// Share-annotated values (the ghost-variable algebra): shares add when the
// values agree, overflow past the full share is undefined. eps is the unit.
inline AlgebraSpec sharev_algebra(const std::vector<int>& values,
                                  const ShareLattice& sh,
                                  const std::string& id = "sharev") {
  AlgebraBuilder b(id);
  int eps = b.elem("eps");
  std::map<std::pair<int, int>, int> ix;
  for (int s = 1; s <= sh.full(); ++s)
    for (int v : values)
      ix[{s, v}] = b.elem("(" + sh.name(s) + "," + std::to_string(v) + ")");
  b.unit(eps);
  for (auto& [sv1, e1] : ix)
    for (auto& [sv2, e2] : ix) {
      if (sv1.second != sv2.second) continue;
      auto sum = sh.add(sv1.first, sv2.first);
      if (sum) b.join(e1, e2, ix.at({*sum, sv1.second}));
    }
  b.cores(eps, eps, eps);
  for (auto& [sv, e] : ix) b.cores(e, eps, eps);
  return b.build();
}

// Single token: held or not.
inline AlgebraSpec token_algebra(const std::string& id = "token") {
  AlgebraBuilder b(id);
  int eps = b.elem("eps");
  int tok = b.elem("tok");
  b.unit(eps);
  b.cores(eps, eps, eps);
  b.cores(tok, eps, eps);
  return b.build();
}

// Master/snapshot over an ordered value domain. A master absorbs any snapshot
// at or below it; snapshots of comparable values join to the larger one. The
// monotone core keeps the snapshot part (so snapshots are persistent under
// it); the strict core collapses everything to eps (so they are not).
inline AlgebraSpec master_snap_algebra(
    const std::vector<int>& values,
    const std::function<bool(int, int)>& leq,
    const std::string& id = "mastersnap") {
  AlgebraBuilder b(id);
  int eps = b.elem("eps");
  std::map<int, int> snap, master;
  for (int v : values) snap[v] = b.elem("snap(" + std::to_string(v) + ")");
  for (int v : values) master[v] = b.elem("master(" + std::to_string(v) + ")");
  b.unit(eps);
  for (int v : values)
    for (int w : values) {
      if (leq(v, w) && leq(w, v) && v != w) continue;  // order must be antisymmetric
      if (leq(v, w)) b.join(snap[v], snap[w], snap[w]);
      if (leq(w, v)) b.join(snap[v], snap[w], snap[v]);
      if (leq(w, v)) b.join_comm(master[v], snap[w], master[v]);
    }
  b.cores(eps, eps, eps);
  for (int v : values) {
    b.cores(snap[v], eps, snap[v]);
    b.cores(master[v], eps, snap[v]);
  }
  return b.build();
}

// The order used for hash-table keys: 0 sits below every nonzero value.
inline bool zero_below_order(int a, int b) { return a == b || a == 0; }

// Product algebra: componentwise join, validity, and cores.
inline AlgebraSpec product_algebra(const AlgebraSpec& A, const AlgebraSpec& B,
                                   const std::string& id) {
  AlgebraBuilder b(id);
  int nA = A.size(), nB = B.size();
  auto pack = [&](int a, int bb) { return a * nB + bb; };
  for (int a = 0; a < nA; ++a)
    for (int bb = 0; bb < nB; ++bb)
      b.elem("(" + A.names[a] + "," + B.names[bb] + ")");
  AlgebraSpec spec = b.build();
  for (int a1 = 0; a1 < nA; ++a1)
    for (int b1 = 0; b1 < nB; ++b1) {
      spec.valid[pack(a1, b1)] = A.valid[a1] && B.valid[b1];
      for (int a2 = 0; a2 < nA; ++a2)
        for (int b2 = 0; b2 < nB; ++b2) {
          auto ja = A.join(a1, a2);
          auto jb = B.join(b1, b2);
          if (ja && jb)
            spec.triples.emplace_back(pack(a1, b1), pack(a2, b2), pack(*ja, *jb));
        }
      auto lift = [&](const std::optional<int>& ca, const std::optional<int>& cb)
          -> std::optional<int> {
        if (ca && cb) return pack(*ca, *cb);
        return std::nullopt;
      };
      spec.vst_core[pack(a1, b1)] = lift(A.vst_core[a1], B.vst_core[b1]);
      spec.iris_core[pack(a1, b1)] = lift(A.iris_core[a1], B.iris_core[b1]);
    }
  if (A.unit && B.unit) spec.unit = pack(*A.unit, *B.unit);
  spec.compile();
  return spec;
}

// Sum algebra: elements from either side, joins stay within a side.
inline AlgebraSpec sum_algebra(const AlgebraSpec& A, const AlgebraSpec& B,
                               const std::string& id) {
  AlgebraBuilder b(id);
  int nA = A.size();
  for (int a = 0; a < nA; ++a) b.elem("inl(" + A.names[a] + ")");
  for (int x = 0; x < B.size(); ++x) b.elem("inr(" + B.names[x] + ")");
  AlgebraSpec spec = b.build();
  auto lift = [&](const std::optional<int>& c, int off) -> std::optional<int> {
    if (c) return *c + off;
    return std::nullopt;
  };
  for (int a1 = 0; a1 < nA; ++a1) {
    spec.valid[a1] = A.valid[a1];
    spec.vst_core[a1] = lift(A.vst_core[a1], 0);
    spec.iris_core[a1] = lift(A.iris_core[a1], 0);
    for (int a2 = 0; a2 < nA; ++a2)
      if (auto j = A.join(a1, a2)) spec.triples.emplace_back(a1, a2, *j);
  }
  for (int b1 = 0; b1 < B.size(); ++b1) {
    spec.valid[nA + b1] = B.valid[b1];
    spec.vst_core[nA + b1] = lift(B.vst_core[b1], nA);
    spec.iris_core[nA + b1] = lift(B.iris_core[b1], nA);
    for (int b2 = 0; b2 < B.size(); ++b2)
      if (auto j = B.join(b1, b2)) spec.triples.emplace_back(nA + b1, nA + b2, *j + nA);
  }
  spec.compile();
  return spec;
}

// State-machine algebra over the reachability order of a transition relation:
// comparable states join to the later one. The monotone core is the identity
// (knowledge of a state is duplicable); the strict core maps every state to
// the initial state, which is where the two disciplines visibly part ways.
inline AlgebraSpec state_machine_algebra(
    const std::vector<std::string>& states, int initial,
    const std::vector<std::pair<int, int>>& transitions,
    const std::string& id = "statemachine") {
  int n = static_cast<int>(states.size());
  std::vector<std::vector<char>> reach(n, std::vector<char>(n, 0));
  for (int i = 0; i < n; ++i) reach[i][i] = 1;
  for (auto& [a, bb] : transitions) reach[a][bb] = 1;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = 1;

  AlgebraBuilder b(id);
  for (auto& s : states) b.elem(s);
  AlgebraSpec spec = b.build();
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c) {
      if (reach[a][c]) spec.triples.emplace_back(a, c, c);
      else if (reach[c][a]) spec.triples.emplace_back(a, c, a);
    }
  spec.unit = initial;
  for (int a = 0; a < n; ++a) {
    spec.vst_core[a] = initial;
    spec.iris_core[a] = a;
  }
  spec.compile();
  return spec;
}

// ---- ghost elements and maps ----

// Registry of algebras usable in ghost maps and universes.
struct AlgebraRegistry {
  std::vector<AlgebraSpec> specs;

  int add(AlgebraSpec spec) {
    for (auto& s : specs)
      if (s.id == spec.id)
        throw usage_error("algebra id '" + spec.id + "' already registered");
    specs.push_back(std::move(spec));
    return static_cast<int>(specs.size()) - 1;
  }
  const AlgebraSpec& at(int i) const { return specs.at(i); }
  const AlgebraSpec& by_id(const std::string& id) const { return specs.at(index_of(id)); }
  int index_of(const std::string& id) const {
    for (int i = 0; i < static_cast<int>(specs.size()); ++i)
      if (specs[i].id == id) return i;
    throw usage_error("no algebra registered with id '" + id + "'");
  }
  bool has(const std::string& id) const {
    for (auto& s : specs)
      if (s.id == id) return true;
    return false;
  }
};

struct GhostElement {
  int algebra = -1;  // registry index
  int value = -1;    // element index in that algebra

  auto operator<=>(const GhostElement&) const = default;
};

// One ghost-map entry: an element plus the predicate tag it was published
// with. Joins require the tags to agree, which is what makes own-style
// agreement on predicates work.
struct GhostCell {
  GhostElement elem;
  int tag = 0;

  auto operator<=>(const GhostCell&) const = default;
};

// Finite map from ghost names (small naturals) to cells.
using GhostMap = std::map<int, GhostCell>;

// Join an element of one algebra; mismatched algebras are a usage error,
// incompatible elements are an ordinary "no".
inline std::optional<GhostElement> join(const AlgebraRegistry& reg,
                                        const GhostElement& a,
                                        const GhostElement& b) {
  if (a.algebra != b.algebra)
    throw usage_error("join across algebras: " + reg.at(a.algebra).id + " vs " +
                      reg.at(b.algebra).id);
  auto r = reg.at(a.algebra).join_valid(a.value, b.value);
  if (!r) return std::nullopt;
  return GhostElement{a.algebra, *r};
}

// Pointwise join of ghost maps. Entries at the same name must carry the same
// algebra and tag and must join to a valid element.
inline std::optional<GhostMap> ghost_join(const AlgebraRegistry& reg,
                                          const GhostMap& m1, const GhostMap& m2) {
  GhostMap out = m1;
  for (auto& [g, cell] : m2) {
    auto it = out.find(g);
    if (it == out.end()) {
      out[g] = cell;
      continue;
    }
    if (it->second.elem.algebra != cell.elem.algebra) return std::nullopt;
    if (it->second.tag != cell.tag) return std::nullopt;
    auto j = reg.at(cell.elem.algebra)
                 .join_valid(it->second.elem.value, cell.elem.value);
    if (!j) return std::nullopt;
    it->second.elem.value = *j;
  }
  return out;
}

inline bool ghost_map_valid(const AlgebraRegistry& reg, const GhostMap& m) {
  for (auto& [g, cell] : m) {
    (void)g;
    if (cell.elem.algebra < 0 ||
        cell.elem.algebra >= static_cast<int>(reg.specs.size()))
      return false;
    const auto& alg = reg.at(cell.elem.algebra);
    if (cell.elem.value < 0 || cell.elem.value >= alg.size()) return false;
    if (!alg.valid[cell.elem.value]) return false;
  }
  return true;
}

inline std::string show_ghost_map(const AlgebraRegistry& reg, const GhostMap& m) {
  std::ostringstream os;
  os << "{";
  bool first = true;
  for (auto& [g, cell] : m) {
    if (!first) os << ", ";
    first = false;
    os << g << " -> " << reg.at(cell.elem.algebra).id << ":"
       << reg.at(cell.elem.algebra).names[cell.elem.value] << "@" << cell.tag;
  }
  os << "}";
  return os.str();
}

// The default registry shipped with the tool.
inline AlgebraRegistry default_registry() {
  AlgebraRegistry reg;
  std::vector<int> v03 = {0, 1, 2, 3};
  std::vector<int> v04 = {0, 1, 2, 3, 4};
  std::vector<int> v01 = {0, 1};
  reg.add(exclusive_algebra(v03));
  reg.add(agree_algebra(v03));
  reg.add(sharev_algebra(v04, ShareLattice{2}));
  reg.add(token_algebra());
  reg.add(master_snap_algebra(v04, zero_below_order));
  reg.add(product_algebra(agree_algebra(v01, "agree01"), token_algebra("tok"),
                          "prod_agree_token"));
  reg.add(sum_algebra(exclusive_algebra(v01, "excl01"), agree_algebra(v01, "agree01"),
                      "sum_excl_agree"));
  reg.add(state_machine_algebra({"q1", "q2"}, 0, {{0, 1}}));
  return reg;
}

}  // namespace cslwb
