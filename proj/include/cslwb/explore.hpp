#pragma once
// Bounded exhaustive interleaving exploration with canonical-state
// memoization: races between co-enabled non-atomic accesses, deadlocks,
// undefined steps, per-state and per-transition invariant hooks, and an
// optional monitor composed into the memoization key (used for online
// linearizability checking). Reports are sorted and deduplicated, so serial,
// parallel and shuffled explorations of the same state space agree.

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "cslwb/machine.hpp"

namespace cslwb {

inline std::string cell_name(const Compiled& c, int cell) {
  for (const auto& g : c.globals)
    if (cell >= g.base && cell < g.base + g.size)
      return g.is_array ? g.name + "[" + std::to_string(cell - g.base) + "]"
                        : g.name;
  return "cell" + std::to_string(cell);
}

inline const char* action_name(NextAction::Kind k) {
  switch (k) {
    case NextAction::Kind::Read: return "read";
    case NextAction::Kind::Write: return "write";
    case NextAction::Kind::AtomicRead: return "atomic-read";
    case NextAction::Kind::AtomicWrite: return "atomic-write";
    case NextAction::Kind::AtomicRmw: return "atomic-rmw";
    case NextAction::Kind::LockAction: return "lock";
    case NextAction::Kind::SpawnAction: return "spawn";
    case NextAction::Kind::HistoryEvent: return "history";
    case NextAction::Kind::Exit: return "exit";
  }
  return "?";
}

// A deterministic observer folded into exploration. Its fingerprint joins
// the memoization key, so the same machine state reached with different
// observation histories is explored separately; a failed monitor prunes its
// subtree (every extension would fail too).
struct Monitor {
  virtual ~Monitor() = default;
  virtual void on_event(const Event& e) = 0;
  virtual bool failed() const = 0;
  virtual std::string failure() const = 0;
  virtual std::optional<std::string> at_terminal(const MachineState&) const {
    return std::nullopt;
  }
  virtual void fingerprint(std::string& out) const = 0;
  virtual std::unique_ptr<Monitor> clone() const = 0;
};

struct ExploreBounds {
  long max_depth = 1'000'000;
  long max_states = 10'000'000;
};

struct ExploreOptions {
  ExploreBounds bounds{};
  // 0 explores successors in ascending tid order; any other value shuffles
  // them per state. The reported sets must not depend on this.
  unsigned shuffle_seed = 0;
  int parallelism = 1;
  std::function<std::optional<std::string>(const Compiled&,
                                           const MachineState&)>
      state_invariant;
  std::function<std::optional<std::string>(const Compiled&,
                                           const MachineState& before,
                                           const Event&,
                                           const MachineState& after)>
      step_invariant;
  std::function<std::unique_ptr<Monitor>()> make_monitor;
};

struct RaceReport {
  std::string cell;
  int cell_id = -1;
  int tid_a = -1, tid_b = -1;
  NextAction::Kind action_a{}, action_b{};
  std::string state;

  auto key() const {
    return std::tuple(cell_id, tid_a, tid_b, (int)action_a, (int)action_b);
  }
};

struct DeadlockReport {
  std::string state;
  std::vector<int> blocked;
};

struct UndefinedReport {
  std::string state;
  int tid = -1;
  std::string reason;
};

struct ViolationReport {
  std::string what;
  std::string state;
};

// Final global values of one terminal state: cell values for ints and
// atomics, the phase code (0 unmade, 1 unlocked, 2 held) for locks.
using Terminal = std::map<std::string, std::vector<uint32_t>>;

struct ExplorationReport {
  std::vector<Terminal> terminals;
  std::vector<RaceReport> races;
  std::vector<DeadlockReport> deadlocks;
  std::vector<UndefinedReport> undefined;
  std::vector<ViolationReport> violations;        // invariant hook failures
  std::vector<ViolationReport> monitor_failures;
  long visited = 0;
  bool depth_exhausted = false;
  bool states_exhausted = false;

  bool clean() const {
    return races.empty() && deadlocks.empty() && undefined.empty() &&
           violations.empty() && monitor_failures.empty() &&
           !depth_exhausted && !states_exhausted;
  }
};

namespace explore_detail {

struct Node {
  MachineState s;
  std::unique_ptr<Monitor> m;
  long remaining = 0;
};

struct Ctx {
  const Compiled& c;
  const ExploreOptions& opt;
  std::mutex mu;
  std::condition_variable cv;
  // canonical key (machine + monitor) -> largest depth budget explored with;
  // a key reached again with more budget is re-expanded, so the visited set
  // is the same fixpoint in any exploration order.
  std::unordered_map<std::string, long> visited;
  long distinct = 0;
  bool stop_states = false;
  std::deque<Node> queue;
  int active = 0;
};

inline void record_race(ExplorationReport& rep, const Compiled& c,
                        const MachineState& s, int ta, const NextAction& aa,
                        int tb, const NextAction& ab) {
  RaceReport r;
  r.cell_id = aa.cell;
  r.cell = cell_name(c, aa.cell);
  r.tid_a = ta;
  r.tid_b = tb;
  r.action_a = aa.kind;
  r.action_b = ab.kind;
  r.state = show_state(c, s);
  rep.races.push_back(std::move(r));
}

inline std::vector<Node> expand(Ctx& ctx, Node& n, ExplorationReport& rep) {
  const Compiled& c = ctx.c;
  std::string key = canonical_state(c, n.s);
  if (n.m) {
    key.push_back('\0');
    n.m->fingerprint(key);
  }
  {
    std::lock_guard<std::mutex> lk(ctx.mu);
    if (ctx.stop_states) {
      rep.states_exhausted = true;
      return {};
    }
    auto it = ctx.visited.find(key);
    if (it != ctx.visited.end() && it->second >= n.remaining) return {};
    if (it == ctx.visited.end()) {
      ctx.visited.emplace(key, n.remaining);
      if (++ctx.distinct >= ctx.opt.bounds.max_states) {
        ctx.stop_states = true;
        rep.states_exhausted = true;
      }
    } else {
      it->second = n.remaining;
    }
  }

  for (const auto& g : c.globals) {
    if (g.kind != CellKind::LockCell) continue;
    const Cell& lk = n.s.mem[g.base];
    bool sane = lk.phase == LockPhase::Held
                    ? lk.holder >= 0 && lk.holder < (int)n.s.threads.size()
                    : lk.holder == -1;
    if (!sane)
      rep.violations.push_back(
          {"internal: lock '" + g.name + "' has an invalid holder",
           show_state(c, n.s)});
  }
  if (ctx.opt.state_invariant) {
    if (auto msg = ctx.opt.state_invariant(c, n.s))
      rep.violations.push_back({*msg, show_state(c, n.s)});
  }

  std::vector<int> live;
  for (int tid = 0; tid < (int)n.s.threads.size(); ++tid)
    if (!n.s.threads[tid].terminated()) live.push_back(tid);

  if (live.empty()) {
    Terminal t;
    for (const auto& g : c.globals) {
      std::vector<uint32_t>& vs = t[g.name];
      for (int k = 0; k < g.size; ++k)
        vs.push_back(g.kind == CellKind::LockCell
                         ? (uint32_t)n.s.mem[g.base + k].phase
                         : n.s.mem[g.base + k].value);
    }
    rep.terminals.push_back(std::move(t));
    if (n.m) {
      if (auto msg = n.m->at_terminal(n.s))
        rep.monitor_failures.push_back({*msg, show_state(c, n.s)});
    }
    return {};
  }

  // Races: two live threads whose next visible actions conflict on the same
  // non-atomic cell, at least one writing. Non-atomic accesses never block,
  // so reaching this state makes both actions co-enabled.
  std::vector<std::optional<NextAction>> acts;
  for (int tid : live) acts.push_back(peek(c, n.s, tid));
  for (size_t a = 0; a < live.size(); ++a) {
    if (!acts[a]) continue;
    bool ra = acts[a]->kind == NextAction::Kind::Read;
    bool wa = acts[a]->kind == NextAction::Kind::Write;
    if (!ra && !wa) continue;
    for (size_t b = a + 1; b < live.size(); ++b) {
      if (!acts[b]) continue;
      bool rb = acts[b]->kind == NextAction::Kind::Read;
      bool wb = acts[b]->kind == NextAction::Kind::Write;
      if (!rb && !wb) continue;
      if (acts[a]->cell != acts[b]->cell) continue;
      if (!wa && !wb) continue;
      record_race(rep, c, n.s, live[a], *acts[a], live[b], *acts[b]);
    }
  }

  if (n.remaining <= 0) {
    rep.depth_exhausted = true;
    return {};
  }

  std::vector<int> order = live;
  if (ctx.opt.shuffle_seed != 0) {
    std::mt19937 rng(ctx.opt.shuffle_seed ^
                     (unsigned)std::hash<std::string>{}(key));
    std::shuffle(order.begin(), order.end(), rng);
  }

  std::vector<Node> succs;
  std::vector<int> blocked;
  for (int tid : order) {
    MachineState s2 = n.s;
    Outcome o = step(c, s2, tid);
    switch (o.kind) {
      case Outcome::Kind::Blocked:
        blocked.push_back(tid);
        break;
      case Outcome::Kind::Undefined:
        rep.undefined.push_back({show_state(c, n.s), tid, o.reason});
        break;
      case Outcome::Kind::Next: {
        std::unique_ptr<Monitor> m2;
        if (n.m) {
          m2 = n.m->clone();
          m2->on_event(*o.event);
          if (m2->failed()) {
            rep.monitor_failures.push_back({m2->failure(), show_state(c, s2)});
            break;
          }
        }
        if (ctx.opt.step_invariant) {
          if (auto msg = ctx.opt.step_invariant(c, n.s, *o.event, s2))
            rep.violations.push_back({*msg, show_state(c, s2)});
        }
        succs.push_back({std::move(s2), std::move(m2), n.remaining - 1});
        break;
      }
      case Outcome::Kind::Terminated:
        break;
    }
  }
  if (blocked.size() == live.size()) {
    std::sort(blocked.begin(), blocked.end());
    rep.deadlocks.push_back({show_state(c, n.s), std::move(blocked)});
  }
  return succs;
}

inline void work(Ctx& ctx, ExplorationReport& rep) {
  std::unique_lock<std::mutex> lk(ctx.mu);
  while (true) {
    ctx.cv.wait(lk, [&] { return !ctx.queue.empty() || ctx.active == 0; });
    if (ctx.queue.empty()) break;
    Node n = std::move(ctx.queue.back());
    ctx.queue.pop_back();
    ++ctx.active;
    lk.unlock();
    std::vector<Node> succs = expand(ctx, n, rep);
    lk.lock();
    for (auto& s : succs) ctx.queue.push_back(std::move(s));
    --ctx.active;
    ctx.cv.notify_all();
  }
  ctx.cv.notify_all();
}

}  // namespace explore_detail

inline ExplorationReport explore_from(const Compiled& c, MachineState root,
                                      const ExploreOptions& opt = {}) {
  using namespace explore_detail;
  if (opt.bounds.max_depth <= 0 || opt.bounds.max_states <= 0)
    throw usage_error("exploration bounds must be positive");
  root.trace.clear();
  root.record_trace = false;

  Ctx ctx{c, opt, {}, {}, {}, 0, false, {}, 0};
  ctx.queue.push_back(Node{std::move(root),
                           opt.make_monitor ? opt.make_monitor() : nullptr,
                           opt.bounds.max_depth});

  int nworkers = std::max(1, opt.parallelism);
  std::vector<ExplorationReport> parts((size_t)nworkers);
  if (nworkers == 1) {
    work(ctx, parts[0]);
  } else {
    std::vector<std::thread> pool;
    for (int k = 0; k < nworkers; ++k)
      pool.emplace_back([&ctx, &parts, k] { work(ctx, parts[(size_t)k]); });
    for (auto& th : pool) th.join();
  }

  ExplorationReport rep;
  std::set<Terminal> terminals;
  for (auto& part : parts) {
    for (auto& t : part.terminals) terminals.insert(std::move(t));
    auto move_into = [](auto& dst, auto& src) {
      dst.insert(dst.end(), std::make_move_iterator(src.begin()),
                 std::make_move_iterator(src.end()));
    };
    move_into(rep.races, part.races);
    move_into(rep.deadlocks, part.deadlocks);
    move_into(rep.undefined, part.undefined);
    move_into(rep.violations, part.violations);
    move_into(rep.monitor_failures, part.monitor_failures);
    rep.depth_exhausted |= part.depth_exhausted;
    rep.states_exhausted |= part.states_exhausted;
  }
  rep.terminals.assign(terminals.begin(), terminals.end());
  rep.visited = ctx.distinct;

  std::sort(rep.races.begin(), rep.races.end(),
            [](const RaceReport& a, const RaceReport& b) {
              return std::tuple_cat(a.key(), std::tie(a.state)) <
                     std::tuple_cat(b.key(), std::tie(b.state));
            });
  rep.races.erase(std::unique(rep.races.begin(), rep.races.end(),
                              [](const RaceReport& a, const RaceReport& b) {
                                return a.key() == b.key();
                              }),
                  rep.races.end());
  auto sort_unique = [](auto& v, auto proj) {
    std::sort(v.begin(), v.end(),
              [&](const auto& a, const auto& b) { return proj(a) < proj(b); });
    v.erase(std::unique(v.begin(), v.end(),
                        [&](const auto& a, const auto& b) {
                          return proj(a) == proj(b);
                        }),
            v.end());
  };
  sort_unique(rep.deadlocks, [](const DeadlockReport& d) {
    return std::tie(d.state, d.blocked);
  });
  sort_unique(rep.undefined, [](const UndefinedReport& u) {
    return std::tie(u.state, u.tid, u.reason);
  });
  sort_unique(rep.violations,
              [](const ViolationReport& v) { return std::tie(v.what, v.state); });
  sort_unique(rep.monitor_failures,
              [](const ViolationReport& v) { return std::tie(v.what, v.state); });
  return rep;
}

inline ExplorationReport explore(const Compiled& c,
                                 const ExploreOptions& opt = {}) {
  return explore_from(c, initial_state(c), opt);
}

}  // namespace cslwb
