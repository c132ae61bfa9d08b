#pragma once
// Linearizability checking against finite abstract specifications: recorded
// operation histories, a memoized search for a witness linearization, the
// brute-force permutation oracle it is cross-checked against, and an online
// monitor folding the same check into interleaving exploration.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cslwb/explore.hpp"

namespace cslwb {

// Operation identity: invoking thread plus that thread's invoke counter, so
// ids do not depend on the schedule.
struct OpId {
  int tid = -1;
  int seq = -1;
  auto operator<=>(const OpId&) const = default;
};

struct HistEvent {
  enum class Kind { Invoke, Respond };
  Kind kind{};
  OpId id;
  std::string op;              // invoke only
  std::vector<uint32_t> args;  // invoke only
  uint32_t ret = 0;            // respond only
  auto operator<=>(const HistEvent&) const = default;
};

// Invoke/respond events in real-time order. Well-formed means every thread
// alternates invoke and respond, each respond answering its own latest
// invoke; traces read off the machine satisfy this by construction.
struct History {
  std::vector<HistEvent> events;
  auto operator<=>(const History&) const = default;
};

inline History history_of(const std::vector<Event>& trace) {
  History h;
  for (const Event& e : trace) {
    if (e.kind == EventKind::Invoke)
      h.events.push_back(
          {HistEvent::Kind::Invoke, {e.tid, e.seq}, e.op, e.args, 0});
    else if (e.kind == EventKind::Respond)
      h.events.push_back(
          {HistEvent::Kind::Respond, {e.tid, e.seq}, "", {}, e.value});
  }
  return h;
}

inline std::string show_history(const History& h) {
  std::string out;
  for (const HistEvent& e : h.events) {
    if (!out.empty()) out += "; ";
    out += "t" + std::to_string(e.id.tid) + " ";
    if (e.kind == HistEvent::Kind::Invoke) {
      out += e.op + "(";
      for (size_t k = 0; k < e.args.size(); ++k)
        out += (k ? "," : "") + std::to_string(e.args[k]);
      out += ")";
    } else {
      out += "-> " + std::to_string(e.ret);
    }
  }
  return out.empty() ? "(empty)" : out;
}

// One way an operation can take effect: successor abstract state and return.
struct AtomicOutcome {
  int state = 0;
  uint32_t ret = 0;
};

struct AtomicOp {
  // argument tuples the operation is meant for; used by validation and by
  // harness generators, not consulted during checking (allowed is the gate)
  std::vector<std::vector<uint32_t>> args_domain;
  std::function<bool(int, const std::vector<uint32_t>&)> allowed;  // default: everywhere
  std::function<std::vector<AtomicOutcome>(int, const std::vector<uint32_t>&)>
      apply;
};

// Finite abstract specification: states 0..state_count-1, one transition
// relation per operation name. The private pre/post sides of an operation's
// contract live in the harness programs; the spec holds the public part.
struct AtomicSpec {
  int state_count = 1;
  int initial = 0;
  std::map<std::string, AtomicOp> ops;
  std::function<std::string(int)> show;  // state rendering, default: the number

  bool op_allowed(const AtomicOp& op, int a,
                  const std::vector<uint32_t>& args) const {
    return !op.allowed || op.allowed(a, args);
  }
  std::string show_state(int a) const {
    return show ? show(a) : std::to_string(a);
  }
};

// Checks the documented invariants: states in range and, over the declared
// argument domains, at least one outcome wherever the precondition holds.
inline void validate_spec(const AtomicSpec& spec) {
  if (spec.state_count <= 0)
    throw usage_error("an atomic spec needs at least one abstract state");
  if (spec.initial < 0 || spec.initial >= spec.state_count)
    throw usage_error("initial abstract state " + std::to_string(spec.initial) +
                      " is out of range");
  for (const auto& [name, op] : spec.ops) {
    if (!op.apply)
      throw usage_error("operation '" + name + "' has no transition relation");
    for (int a = 0; a < spec.state_count; ++a)
      for (const auto& args : op.args_domain) {
        if (!spec.op_allowed(op, a, args)) continue;
        std::vector<AtomicOutcome> outs = op.apply(a, args);
        if (outs.empty())
          throw usage_error("operation '" + name +
                            "' has no outcome at abstract state " +
                            spec.show_state(a) +
                            " although its precondition holds there");
        for (const AtomicOutcome& o : outs)
          if (o.state < 0 || o.state >= spec.state_count)
            throw usage_error("operation '" + name +
                              "' reaches abstract state " +
                              std::to_string(o.state) + ", which is out of range");
      }
  }
}

// One operation of a witness linearization, with the return it takes there.
// For a pending invoke the witness completed, that return is its choice.
struct LinStep {
  OpId id;
  std::string op;
  std::vector<uint32_t> args;
  uint32_t ret = 0;
  bool completed = true;
  int state_after = 0;
};

struct LinVerdict {
  bool ok = false;
  std::vector<LinStep> order;  // witness; on failure, a longest placement found
  std::string reason;
  long explored = 0;  // (placed set, abstract state) pairs visited
};

namespace lincheck_detail {

struct OpRec {
  OpId id;
  std::string name;
  std::vector<uint32_t> args;
  int inv = -1;  // event index of the invoke
  int res = -1;  // event index of the respond, -1 while pending
  uint32_t ret = 0;
  bool completed() const { return res >= 0; }
};

inline std::vector<OpRec> collect_ops(const History& h) {
  std::vector<OpRec> ops;
  std::map<int, size_t> open;  // tid -> index of its pending op
  for (size_t i = 0; i < h.events.size(); ++i) {
    const HistEvent& e = h.events[i];
    if (e.kind == HistEvent::Kind::Invoke) {
      if (open.count(e.id.tid))
        throw usage_error("history: thread " + std::to_string(e.id.tid) +
                          " invokes while its previous operation is pending");
      open[e.id.tid] = ops.size();
      ops.push_back({e.id, e.op, e.args, (int)i, -1, 0});
    } else {
      auto it = open.find(e.id.tid);
      if (it == open.end())
        throw usage_error("history: thread " + std::to_string(e.id.tid) +
                          " responds without a pending invoke");
      if (ops[it->second].id != e.id)
        throw usage_error("history: a response answers op " +
                          std::to_string(e.id.seq) + " but op " +
                          std::to_string(ops[it->second].id.seq) +
                          " is the one pending");
      ops[it->second].res = (int)i;
      ops[it->second].ret = e.ret;
      open.erase(it);
    }
  }
  return ops;
}

inline const AtomicOp& op_of(const AtomicSpec& spec, const std::string& name) {
  auto it = spec.ops.find(name);
  if (it == spec.ops.end())
    throw usage_error("history operation '" + name +
                      "' is not in the atomic spec");
  return it->second;
}

}  // namespace lincheck_detail

// True iff some total order of the completed operations (optionally
// completing pending ones) extends real-time precedence and replays through
// the transition relation from the initial state, reproducing every
// response. Search over (placed set, abstract state) pairs; a pair that
// failed once is never retried.
inline LinVerdict check_linearizable(const History& h, const AtomicSpec& spec) {
  using namespace lincheck_detail;
  std::vector<OpRec> ops = collect_ops(h);
  const int n = (int)ops.size();
  if (n > 64)
    throw bound_error("a history of " + std::to_string(n) +
                      " operations exceeds the 64-operation search");
  for (const OpRec& o : ops) op_of(spec, o.name);

  uint64_t completed_mask = 0;
  for (int i = 0; i < n; ++i)
    if (ops[i].completed()) completed_mask |= 1ull << i;
  std::vector<uint64_t> pred(n, 0);  // must be placed before op i
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (ops[j].res >= 0 && ops[j].res < ops[i].inv) pred[i] |= 1ull << j;

  LinVerdict v;
  std::set<std::pair<uint64_t, int>> seen;
  std::vector<LinStep> line, best;

  std::function<bool(uint64_t, int)> go = [&](uint64_t mask, int a) -> bool {
    if ((mask & completed_mask) == completed_mask) return true;
    if (!seen.insert({mask, a}).second) return false;
    ++v.explored;
    if (line.size() > best.size()) best = line;
    for (int i = 0; i < n; ++i) {
      if (mask >> i & 1) continue;
      if ((pred[i] & mask) != pred[i]) continue;
      const OpRec& o = ops[i];
      const AtomicOp& op = spec.ops.at(o.name);
      if (!spec.op_allowed(op, a, o.args)) continue;
      for (const AtomicOutcome& out : op.apply(a, o.args)) {
        if (o.completed() && out.ret != o.ret) continue;
        line.push_back({o.id, o.name, o.args, o.completed() ? o.ret : out.ret,
                        o.completed(), out.state});
        if (go(mask | 1ull << i, out.state)) return true;
        line.pop_back();
      }
    }
    return false;
  };

  if (go(0, spec.initial)) {
    v.ok = true;
    v.order = std::move(line);
  } else {
    long placed = 0, total = 0;
    for (const LinStep& s : best) placed += s.completed;
    for (int i = 0; i < n; ++i) total += ops[i].completed();
    v.order = std::move(best);
    v.reason = "no linearization of " + show_history(h) + ": at most " +
               std::to_string(placed) + " of " + std::to_string(total) +
               " completed operations can take effect in precedence order";
  }
  return v;
}

// The definition itself, for cross-checking: every completion subset, every
// permutation, tracking the set of abstract states reachable through the
// transition relation.
inline bool linearizable_oracle(const History& h, const AtomicSpec& spec) {
  using namespace lincheck_detail;
  std::vector<OpRec> ops = collect_ops(h);
  for (const OpRec& o : ops) op_of(spec, o.name);
  std::vector<int> completed, pending;
  for (int i = 0; i < (int)ops.size(); ++i)
    (ops[i].completed() ? completed : pending).push_back(i);
  if (ops.size() > 9)
    throw bound_error("the permutation oracle is for short histories");

  for (uint32_t sub = 0; sub < (1u << pending.size()); ++sub) {
    std::vector<int> chosen = completed;
    for (size_t k = 0; k < pending.size(); ++k)
      if (sub >> k & 1) chosen.push_back(pending[k]);
    std::sort(chosen.begin(), chosen.end());
    do {
      bool prec_ok = true;
      for (size_t x = 0; prec_ok && x < chosen.size(); ++x)
        for (size_t y = x + 1; prec_ok && y < chosen.size(); ++y)
          if (ops[chosen[y]].res >= 0 &&
              ops[chosen[y]].res < ops[chosen[x]].inv)
            prec_ok = false;
      if (!prec_ok) continue;
      std::set<int> states{spec.initial};
      for (int ix : chosen) {
        const OpRec& o = ops[ix];
        const AtomicOp& op = spec.ops.at(o.name);
        std::set<int> nxt;
        for (int a : states) {
          if (!spec.op_allowed(op, a, o.args)) continue;
          for (const AtomicOutcome& out : op.apply(a, o.args))
            if (!o.completed() || out.ret == o.ret) nxt.insert(out.state);
        }
        states = std::move(nxt);
        if (states.empty()) break;
      }
      if (!states.empty()) return true;
    } while (std::next_permutation(chosen.begin(), chosen.end()));
  }
  return false;
}

// Every distinct invoke/respond history an exhaustive exploration of the
// program can produce. A helper for offline checking of small harnesses;
// undefined behavior anywhere makes histories meaningless and throws.
inline std::set<History> collect_histories(const Compiled& c,
                                           ExploreBounds bounds = {}) {
  if (bounds.max_depth <= 0 || bounds.max_states <= 0)
    throw usage_error("exploration bounds must be positive");
  std::set<History> out;
  std::set<std::pair<std::string, History>> visited;
  struct Node {
    MachineState s;
    History h;
    long remaining;
  };
  std::vector<Node> stack;
  stack.push_back({initial_state(c), {}, bounds.max_depth});
  while (!stack.empty()) {
    Node n = std::move(stack.back());
    stack.pop_back();
    if (!visited.insert({canonical_state(c, n.s), n.h}).second) continue;
    if ((long)visited.size() > bounds.max_states)
      throw bound_error("history collection exceeded the state bound");
    bool live = false;
    for (int tid = 0; tid < (int)n.s.threads.size(); ++tid) {
      if (n.s.threads[tid].terminated()) continue;
      live = true;
      MachineState s2 = n.s;
      Outcome o = step(c, s2, tid);
      if (o.kind == Outcome::Kind::Undefined)
        throw usage_error("history collection hit undefined behavior: " +
                          o.reason);
      if (o.kind != Outcome::Kind::Next) continue;
      History h2 = n.h;
      if (o.event->kind == EventKind::Invoke ||
          o.event->kind == EventKind::Respond) {
        History one = history_of({*o.event});
        h2.events.push_back(one.events[0]);
      }
      if (n.remaining <= 0)
        throw bound_error("history collection exceeded the depth bound");
      stack.push_back({std::move(s2), std::move(h2), n.remaining - 1});
    }
    if (!live) out.insert(std::move(n.h));
  }
  return out;
}

// Online form of the same check, composable with exploration. A
// configuration pairs an abstract state with the status of each pending
// operation: not yet taken effect, or taken effect awaiting its response
// with a chosen return. The set is kept closed under taking effect;
// responses filter it. Once empty it stays empty under any extension, so
// exploration prunes there, and the pruned prefix is itself a
// non-linearizable history.
class LinMonitor : public Monitor {
 public:
  explicit LinMonitor(const AtomicSpec& spec) : spec_(&spec) {
    configs_.insert({spec.initial, {}});
  }

  void on_event(const Event& e) override {
    if (e.kind != EventKind::Invoke && e.kind != EventKind::Respond) return;
    History one = history_of({e});
    hist_.events.push_back(one.events[0]);
    OpId id{e.tid, e.seq};
    if (e.kind == EventKind::Invoke) {
      open_[id] = {e.op, e.args};
      std::set<Config> nxt;
      for (const Config& c : configs_) {
        Config c2 = c;
        c2.second.emplace(id, std::nullopt);
        nxt.insert(std::move(c2));
      }
      configs_ = std::move(nxt);
      close();
    } else {
      close();  // the effect may land just before the response
      std::set<Config> nxt;
      for (const Config& c : configs_) {
        auto it = c.second.find(id);
        if (it == c.second.end() || !it->second || *it->second != e.value)
          continue;
        Config c2 = c;
        c2.second.erase(id);
        nxt.insert(std::move(c2));
      }
      configs_ = std::move(nxt);
      open_.erase(id);
    }
  }

  bool failed() const override { return configs_.empty(); }
  std::string failure() const override {
    return "history " + show_history(hist_) +
           " admits no linearization consistent with its responses";
  }

  void fingerprint(std::string& out) const override {
    for (const auto& [id, sig] : open_) {
      out += std::to_string(id.tid) + "." + std::to_string(id.seq) + "=" +
             sig.first + "(";
      for (uint32_t a : sig.second) out += std::to_string(a) + ",";
      out += ");";
    }
    out.push_back('\1');
    for (const Config& c : configs_) {
      out += std::to_string(c.first) + ":";
      for (const auto& [id, st] : c.second)
        out += std::to_string(id.tid) + "." + std::to_string(id.seq) +
               (st ? "!" + std::to_string(*st) : "?") + ",";
      out.push_back('|');
    }
  }

  std::unique_ptr<Monitor> clone() const override {
    return std::make_unique<LinMonitor>(*this);
  }

 private:
  // abstract state + per-pending-op status (nullopt: not yet taken effect)
  using Pending = std::map<OpId, std::optional<uint32_t>>;
  using Config = std::pair<int, Pending>;

  void close() {
    std::vector<Config> todo(configs_.begin(), configs_.end());
    while (!todo.empty()) {
      Config c = std::move(todo.back());
      todo.pop_back();
      for (const auto& [id, st] : c.second) {
        if (st) continue;
        const auto& [name, args] = open_.at(id);
        const AtomicOp& op = spec_->ops.at(name);
        if (!spec_->op_allowed(op, c.first, args)) continue;
        for (const AtomicOutcome& out : op.apply(c.first, args)) {
          Config c2{out.state, c.second};
          c2.second[id] = out.ret;
          if (configs_.insert(c2).second) todo.push_back(std::move(c2));
        }
      }
    }
  }

  const AtomicSpec* spec_;
  std::set<Config> configs_;
  std::map<OpId, std::pair<std::string, std::vector<uint32_t>>> open_;
  History hist_;
};

struct AtomicTripleVerdict {
  bool ok = false;
  bool exhausted = false;  // bounds bit before any verdict was reached
  std::string reason;      // first refutation when neither ok nor exhausted
  ExplorationReport report;
};

// Explores every interleaving with the monitor above folded in: the triple
// holds when each operation appears to take effect once, at a single point
// between its invoke and respond, realizing the spec's public transition,
// and no race, undefined step, deadlock or invariant failure occurs.
inline AtomicTripleVerdict check_atomic_triple(const Compiled& c,
                                               const AtomicSpec& spec,
                                               const ExploreOptions& opt = {}) {
  for (const std::string& name : c.opnames) lincheck_detail::op_of(spec, name);
  validate_spec(spec);
  ExploreOptions o = opt;
  o.make_monitor = [&spec] { return std::make_unique<LinMonitor>(spec); };
  AtomicTripleVerdict v;
  v.report = explore(c, o);
  if (v.report.clean()) {
    v.ok = true;
    return v;
  }
  const ExplorationReport& r = v.report;
  if (!r.monitor_failures.empty())
    v.reason = r.monitor_failures[0].what;
  else if (!r.races.empty())
    v.reason = "data race on '" + r.races[0].cell + "' between threads " +
               std::to_string(r.races[0].tid_a) + " and " +
               std::to_string(r.races[0].tid_b);
  else if (!r.undefined.empty())
    v.reason = "undefined behavior: " + r.undefined[0].reason;
  else if (!r.deadlocks.empty())
    v.reason = "deadlock at " + r.deadlocks[0].state;
  else if (!r.violations.empty())
    v.reason = r.violations[0].what;
  else
    v.exhausted = true;
  return v;
}

}  // namespace cslwb
