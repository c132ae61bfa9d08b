#pragma once
// Named invariants over ghost state: a master list of allocated names, one
// enabled and one disabled token per name, and per-name agreement on the
// invariant body. The world-satisfaction assertion wsat holds the master
// list, one token per invariant, and the body resources of every enabled
// invariant. An invariant counts as disabled exactly while wsat holds its
// enabled token; the opener holds the disabled token until it closes.

#include <string>
#include <vector>

#include "cslwb/entailment.hpp"

namespace cslwb {

struct NotRegistered : usage_error {
  explicit NotRegistered(const std::string& m) : usage_error(m) {}
};
struct ReentrancyError : usage_error {
  explicit ReentrancyError(const std::string& m) : usage_error(m) {}
};
struct RestoreError : usage_error {
  explicit RestoreError(const std::string& m) : usage_error(m) {}
};

enum class InvStatus { Enabled, Disabled };
enum class TokenSide { Enabled, Disabled };

struct InvariantEntry {
  int body = 0;  // index into the body table
  InvStatus status = InvStatus::Enabled;
  TokenSide outside = TokenSide::Enabled;  // token side held outside wsat

  bool operator==(const InvariantEntry&) const = default;
};

// Knowledge that a given name carries a given body: snapshot of the name
// list starred with the agreement cell. Freely duplicable.
struct InvAssertion {
  int name = 0;
  int body = 0;
};

// Plain value type: snapshotting for backtracking is a copy.
struct InvariantRegistry {
  std::vector<InvariantEntry> defined;

  bool operator==(const InvariantRegistry&) const = default;

  int count() const { return static_cast<int>(defined.size()); }

  // Token conservation: wsat holds the side opposite the status convention,
  // so the outside record must be enabled for enabled invariants and
  // disabled for disabled ones.
  bool consistent() const {
    for (auto& e : defined) {
      bool ok = e.status == InvStatus::Enabled
                    ? e.outside == TokenSide::Enabled
                    : e.outside == TokenSide::Disabled;
      if (!ok) return false;
    }
    return true;
  }
};

// Ghost layout backing a registry: slot 0 carries the name list in the
// master-snapshot algebra (the value is the list length, ordered by prefix),
// then three slots per name: body agreement, enabled token, disabled token.
struct InvariantSetup {
  Universe u;
  std::vector<APtr> bodies;
  int max_names = 0;

  int master_slot() const { return 0; }
  int agree_slot(int name) const { return 1 + 3 * name; }
  int enabled_slot(int name) const { return 2 + 3 * name; }
  int disabled_slot(int name) const { return 3 + 3 * name; }

  int list_algebra() const { return u.reg().index_of("invlist"); }
  int body_algebra() const { return u.reg().index_of("invbody"); }
  int token_algebra_ix() const { return u.reg().index_of("invtok"); }

  const AlgebraSpec& list_alg() const { return u.reg().at(list_algebra()); }
  const AlgebraSpec& body_alg() const { return u.reg().at(body_algebra()); }
  const AlgebraSpec& tok_alg() const { return u.reg().at(token_algebra_ix()); }

  int master_elem(int n) const {
    return list_alg().elem("master(" + std::to_string(n) + ")");
  }
  int snap_elem(int n) const {
    return list_alg().elem("snap(" + std::to_string(n) + ")");
  }
  int body_elem(int b) const {
    return body_alg().elem("ag(" + std::to_string(b) + ")");
  }
  int tok_elem() const { return tok_alg().elem("tok"); }
};

// Build the universe for up to max_names invariants over the given body
// table. Heap parameters come from the caller so bodies can mention cells.
inline InvariantSetup make_invariant_setup(int max_names, std::vector<APtr> bodies,
                                           std::vector<std::string> addr_names,
                                           std::vector<int> values,
                                           int max_level = 1) {
  if (max_names < 0 || bodies.empty())
    throw usage_error("invariant setup needs a nonnegative capacity and a body table");
  std::vector<int> lengths;
  for (int i = 0; i <= max_names; ++i) lengths.push_back(i);
  std::vector<int> body_ids;
  for (int i = 0; i < static_cast<int>(bodies.size()); ++i) body_ids.push_back(i);

  auto reg = std::make_shared<AlgebraRegistry>();
  int list_ix = reg->add(master_snap_algebra(
      lengths, [](int a, int b) { return a <= b; }, "invlist"));
  int body_ix = reg->add(agree_algebra(body_ids, "invbody"));
  int tok_ix = reg->add(token_algebra("invtok"));

  InvariantSetup s;
  s.max_names = max_names;
  s.bodies = std::move(bodies);
  s.u.registry = reg;
  s.u.addr_names = std::move(addr_names);
  s.u.values = std::move(values);
  s.u.shares = ShareLattice{1};
  s.u.max_level = max_level;
  s.u.slots.push_back(list_ix);
  for (int i = 0; i < max_names; ++i) {
    s.u.slots.push_back(body_ix);
    s.u.slots.push_back(tok_ix);
    s.u.slots.push_back(tok_ix);
  }
  return s;
}

// ---- operations ----

inline InvAssertion alloc_invariant(const InvariantSetup& s, InvariantRegistry& reg,
                                    int body) {
  if (body < 0 || body >= static_cast<int>(s.bodies.size()))
    throw usage_error("alloc_invariant: no body with id " + std::to_string(body));
  if (reg.count() >= s.max_names)
    throw bound_error("alloc_invariant: name capacity " +
                      std::to_string(s.max_names) + " exhausted");
  InvariantEntry e;
  e.body = body;
  reg.defined.push_back(e);
  return InvAssertion{reg.count() - 1, body};
}

inline void check_registered(const InvariantRegistry& reg, const InvAssertion& inv) {
  if (inv.name < 0 || inv.name >= reg.count())
    throw NotRegistered("no invariant named " + std::to_string(inv.name));
  if (reg.defined[inv.name].body != inv.body)
    throw usage_error("invariant " + std::to_string(inv.name) +
                      " carries body " + std::to_string(reg.defined[inv.name].body) +
                      ", not " + std::to_string(inv.body));
}

// Hand the body resources to the opener; wsat swaps its disabled token for
// the opener's enabled token. At most once until closed.
inline APtr open_invariant(const InvariantSetup& s, InvariantRegistry& reg,
                           const InvAssertion& inv) {
  check_registered(reg, inv);
  InvariantEntry& e = reg.defined[inv.name];
  if (e.status == InvStatus::Disabled)
    throw ReentrancyError("invariant " + std::to_string(inv.name) +
                          " is already open");
  e.status = InvStatus::Disabled;
  e.outside = TokenSide::Disabled;
  return s.bodies[inv.body];
}

// Restore the body resources; the evidence rmap must satisfy the body one
// level down (the opener got it guarded by later).
inline void close_invariant(const InvariantSetup& s, InvariantRegistry& reg,
                            const InvAssertion& inv, const Rmap& returned) {
  check_registered(reg, inv);
  InvariantEntry& e = reg.defined[inv.name];
  if (e.status == InvStatus::Enabled)
    throw usage_error("invariant " + std::to_string(inv.name) + " is not open");
  if (!sat(s.u, returned, later(s.bodies[inv.body])))
    throw RestoreError("returned resources do not restore invariant " +
                       std::to_string(inv.name));
  e.status = InvStatus::Enabled;
  e.outside = TokenSide::Enabled;
}

// ---- assertions ----

inline APtr inv_assertion(const InvariantSetup& s, const InvAssertion& inv) {
  return star(own(Term::mk(s.master_slot()), s.list_algebra(),
                  s.snap_elem(inv.name + 1)),
              own(Term::mk(s.agree_slot(inv.name)), s.body_algebra(),
                  s.body_elem(inv.body)));
}

// World satisfaction: master list, one token per name on the side wsat
// keeps (enabled invariants leave their enabled token outside), agreement
// for every name, and the body resources of each enabled invariant.
inline APtr wsat_assertion(const InvariantSetup& s, const InvariantRegistry& reg) {
  std::vector<APtr> parts;
  parts.push_back(own(Term::mk(s.master_slot()), s.list_algebra(),
                      s.master_elem(reg.count())));
  for (int i = 0; i < reg.count(); ++i) {
    const InvariantEntry& e = reg.defined[i];
    int tok_slot = e.status == InvStatus::Enabled ? s.disabled_slot(i)
                                                  : s.enabled_slot(i);
    parts.push_back(own(Term::mk(tok_slot), s.token_algebra_ix(), s.tok_elem()));
    if (e.status == InvStatus::Enabled) parts.push_back(s.bodies[e.body]);
    parts.push_back(own(Term::mk(s.agree_slot(i)), s.body_algebra(),
                        s.body_elem(e.body)));
  }
  return star_all(parts);
}

// wsat together with the outside-held tokens as recorded. Satisfiable
// exactly when token conservation holds: a side recorded outside while wsat
// also holds it collides on the token slot.
inline APtr registry_assertion(const InvariantSetup& s,
                               const InvariantRegistry& reg) {
  std::vector<APtr> parts = {wsat_assertion(s, reg)};
  for (int i = 0; i < reg.count(); ++i) {
    int tok_slot = reg.defined[i].outside == TokenSide::Enabled
                       ? s.enabled_slot(i)
                       : s.disabled_slot(i);
    parts.push_back(own(Term::mk(tok_slot), s.token_algebra_ix(), s.tok_elem()));
  }
  return star_all(parts);
}

}  // namespace cslwb
