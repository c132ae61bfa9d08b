#pragma once
// Whole-program checkers tying the machine to the finite resource model: a
// fuel-indexed safety game in which ghost state may be replaced, at every
// step, by anything every compatible frame tolerates, and a transactional
// runner for the open/update/close scripts a proof performs between steps.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cslwb/entailment.hpp"
#include "cslwb/invariants.hpp"
#include "cslwb/machine.hpp"

namespace cslwb {

// ---- safety game ----

// A triple against the finite resource model. Both assertions are read over
// the universe's address space; fuel bounds the depth of the game.
struct HoareSpec {
  APtr pre;
  APtr post;
  int fuel = 0;
};

// One edge of a winning strategy: which thread stepped, what it did, and the
// ghost map chosen afterward on the frame-free branch.
struct SafetyStep {
  int tid = -1;
  Event event;
  GhostMap ghost;
};

struct SafetyVerdict {
  bool safe = false;
  std::string reason;                      // refutation narrative when unsafe
  std::optional<GhostMap> refuting_frame;  // frame no replacement repairs
  std::vector<SafetyStep> witness;         // frame-free strategy line when safe
  long configs = 0;                        // configurations settled
};

// Thrown when the configuration budget runs out mid-game; carries the chain
// of steps under trial at that moment.
struct SearchLimit : bound_error {
  std::vector<SafetyStep> partial;
  SearchLimit(const std::string& m, std::vector<SafetyStep> p)
      : bound_error(m), partial(std::move(p)) {}
};

struct SafetyOptions {
  long max_configs = 1'000'000;
};

namespace speccheck_detail {

inline std::string event_verb(EventKind k) {
  switch (k) {
    case EventKind::Read: return "reads";
    case EventKind::Write: return "writes";
    case EventKind::AtomicRead: return "atomically reads";
    case EventKind::AtomicWrite: return "atomically writes";
    case EventKind::CasOk:
    case EventKind::CasFail: return "cas-updates";
    default: return "touches";
  }
}

inline std::string cell_label(const Compiled& c, int mc) {
  for (const auto& g : c.globals)
    if (mc >= g.base && mc < g.base + g.size)
      return g.is_array ? g.name + "[" + std::to_string(mc - g.base) + "]"
                        : g.name;
  return "cell " + std::to_string(mc);
}

inline std::string ghost_key(const GhostMap& g) {
  std::string out;
  for (auto& [name, cell] : g)
    out += std::to_string(name) + ":" + std::to_string(cell.elem.algebra) +
           ":" + std::to_string(cell.elem.value) + ":" +
           std::to_string(cell.tag) + ";";
  return out;
}

}  // namespace speccheck_detail

// Decides the game for one owned footprint: a configuration (state, ghost,
// fuel) is safe when the fuel is spent, or every thread has exited and the
// owned cells plus ghost satisfy the postcondition at the remaining
// approximation, or some thread has a step the footprint covers after which
// every compatible ghost frame admits a compatible replacement keeping the
// rest safe one level down. Memoized per configuration; the memo persists
// across safe() calls so fuel sweeps stay cheap.
class SafetyChecker {
 public:
  SafetyChecker(const Compiled& c, const Universe& u, Heap owned, APtr post,
                SafetyOptions opt = {})
      : c_(c), u_(u), owned_(std::move(owned)), post_(std::move(post)), opt_(opt) {
    if (opt_.max_configs <= 0)
      throw usage_error("safety search needs a positive configuration budget");
    for (int ua = 0; ua < u_.addr_count(); ++ua) {
      auto it = c_.global_index.find(u_.addr_names[ua]);
      if (it == c_.global_index.end())
        throw usage_error("universe cell '" + u_.addr_names[ua] +
                          "' is not a global of the program");
      const GlobalInfo& gi = c_.globals[it->second];
      if (gi.is_array || gi.kind == CellKind::LockCell)
        throw usage_error("universe cell '" + u_.addr_names[ua] +
                          "' must be a scalar int or atomic global");
      ua_to_mc_.push_back(gi.base);
      mc_to_ua_[gi.base] = ua;
    }
    for (auto& [ua, res] : owned_) {
      (void)res;
      if (ua < 0 || ua >= u_.addr_count())
        throw usage_error("owned cell " + std::to_string(ua) +
                          " is outside the universe");
    }
  }

  // Initial machine state with the owned cells seeded to their model values.
  MachineState seeded_state() const {
    MachineState s = initial_state(c_);
    for (auto& [ua, res] : owned_)
      s.mem[ua_to_mc_[ua]].value = static_cast<uint32_t>(res.value);
    return s;
  }

  bool safe(const MachineState& s, const GhostMap& g, int fuel) {
    trail_.clear();
    return decide(s, g, fuel);
  }

  SafetyVerdict run(const MachineState& s, const GhostMap& g, int fuel) {
    memo_.clear();
    win_.clear();
    refute_.reset();
    trail_.clear();
    SafetyVerdict v;
    v.safe = decide(s, g, fuel);
    v.configs = static_cast<long>(memo_.size());
    if (v.safe) {
      v.witness = main_line(s, g, fuel);
      return v;
    }
    if (refute_) {
      v.refuting_frame = refute_->frame;
      v.reason = "thread " + std::to_string(refute_->tid) + " " +
                 speccheck_detail::event_verb(refute_->event.kind) +
                 (refute_->event.cell >= 0
                      ? " '" + speccheck_detail::cell_label(c_, refute_->event.cell) + "'"
                      : "") +
                 " at " + show_state(c_, refute_->state) + " with ghost " +
                 show_ghost_map(u_.reg(), refute_->ghost) +
                 ", but no replacement of the ghost suits frame " +
                 show_ghost_map(u_.reg(), refute_->frame);
    } else {
      v.reason = "no step clause applies: " + stuck_;
    }
    return v;
  }

  long configs() const { return static_cast<long>(memo_.size()); }

 private:
  struct WinRec {
    int tid;
    Event event;
    GhostMap ghost;
  };
  struct RefuteRec {
    int fuel;
    int tid;
    Event event;
    GhostMap frame;
    GhostMap ghost;
    MachineState state;
  };

  std::string config_key(const MachineState& s, const GhostMap& g, int fuel) const {
    return canonical_state(c_, s) + "#" + speccheck_detail::ghost_key(g) + "#" +
           std::to_string(fuel);
  }

  Rmap terminal_rmap(const MachineState& s, const GhostMap& g, int fuel) const {
    Rmap r;
    r.level = std::min(fuel, u_.max_level);
    for (auto& [ua, res] : owned_) {
      Resource cur = res;
      cur.value = static_cast<int>(s.mem[ua_to_mc_[ua]].value);
      r.heap[ua] = cur;
    }
    r.ghost = g;
    return r;
  }

  // Whether the footprint licenses this machine event. Lock traffic, thread
  // management, and history events carry no heap resource; reads want any
  // share of a plain cell, writes the full share, atomic operations the
  // atomic form of the cell.
  bool covered(const Event& ev, std::string& why) const {
    bool atomic = false;
    switch (ev.kind) {
      case EventKind::Read:
      case EventKind::Write: break;
      case EventKind::AtomicRead:
      case EventKind::AtomicWrite:
      case EventKind::CasOk:
      case EventKind::CasFail: atomic = true; break;
      default: return true;
    }
    std::string who = "thread " + std::to_string(ev.tid) + " " +
                      speccheck_detail::event_verb(ev.kind) + " '" +
                      speccheck_detail::cell_label(c_, ev.cell) + "'";
    auto ua = mc_to_ua_.find(ev.cell);
    if (ua == mc_to_ua_.end()) {
      why = who + ", which the precondition does not cover";
      return false;
    }
    auto res = owned_.find(ua->second);
    if (res == owned_.end()) {
      why = who + ", which the precondition does not cover";
      return false;
    }
    if (atomic != (res->second.kind == Resource::Kind::AtomicCell)) {
      why = who + ", which the precondition covers as " +
            (atomic ? "a plain cell" : "an atomic cell");
      return false;
    }
    if (ev.kind == EventKind::Write && res->second.share != u_.shares.full()) {
      why = who + " holding only share " + u_.shares.name(res->second.share);
      return false;
    }
    return true;
  }

  bool decide(const MachineState& s, const GhostMap& g, int fuel) {
    if (fuel <= 0) return true;
    std::string key = config_key(s, g, fuel);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    if (static_cast<long>(memo_.size()) >= opt_.max_configs)
      throw SearchLimit("safety search settled " + std::to_string(memo_.size()) +
                            " configurations without an answer",
                        trail_);
    bool v = compute(s, g, fuel, key);
    memo_.emplace(std::move(key), v);
    return v;
  }

  bool compute(const MachineState& s, const GhostMap& g, int fuel,
               const std::string& key) {
    bool all_done = true;
    for (auto& th : s.threads)
      if (!th.terminated()) {
        all_done = false;
        break;
      }
    if (all_done) return sat(u_, terminal_rmap(s, g, fuel), post_);

    std::string uncovered, faulted, blocked;
    for (int tid = 0; tid < static_cast<int>(s.threads.size()); ++tid) {
      if (s.threads[tid].terminated()) continue;
      MachineState nxt = s;
      Outcome o = step(c_, nxt, tid);
      if (o.kind == Outcome::Kind::Blocked) {
        if (blocked.empty())
          blocked = "thread " + std::to_string(tid) + " is blocked";
        continue;
      }
      if (o.kind != Outcome::Kind::Next) {
        if (faulted.empty())
          faulted = "thread " + std::to_string(tid) + " faults (" + o.reason + ")";
        continue;
      }
      const Event& ev = *o.event;
      std::string why;
      if (!covered(ev, why)) {
        if (uncovered.empty()) uncovered = why;
        continue;
      }

      bool frames_ok = true;
      GhostMap bad_frame, line_choice;
      for_each_ghost_map(u_, active_names(u_), [&](const GhostMap& frame) {
        if (!ghost_join(u_.reg(), g, frame)) return true;  // not a frame of g
        bool repaired = false;
        for_each_ghost_map(u_, all_names(u_), [&](const GhostMap& g2) {
          if (!ghost_join(u_.reg(), g2, frame)) return true;
          trail_.push_back(SafetyStep{tid, ev, g2});
          bool ok = decide(nxt, g2, fuel - 1);
          trail_.pop_back();
          if (!ok) return true;
          repaired = true;
          if (frame.empty()) line_choice = g2;
          return false;
        });
        if (!repaired) {
          frames_ok = false;
          bad_frame = frame;
          return false;
        }
        return true;
      });
      if (frames_ok) {
        win_[key] = WinRec{tid, ev, std::move(line_choice)};
        return true;
      }
      if (!refute_ || fuel > refute_->fuel)
        refute_ = RefuteRec{fuel, tid, ev, std::move(bad_frame), g, s};
    }
    if (!uncovered.empty())
      stuck_ = uncovered;
    else if (!faulted.empty())
      stuck_ = faulted;
    else if (!blocked.empty())
      stuck_ = blocked + " at " + show_state(c_, s);
    return false;
  }

  // Replay the winning strategy along the empty-frame branch.
  std::vector<SafetyStep> main_line(MachineState s, GhostMap g, int fuel) {
    std::vector<SafetyStep> line;
    while (fuel > 0) {
      auto it = win_.find(config_key(s, g, fuel));
      if (it == win_.end()) break;  // terminated or fuel clause
      step(c_, s, it->second.tid);
      line.push_back(SafetyStep{it->second.tid, it->second.event, it->second.ghost});
      g = it->second.ghost;
      --fuel;
    }
    return line;
  }

  const Compiled& c_;
  const Universe& u_;
  Heap owned_;
  APtr post_;
  SafetyOptions opt_;
  std::vector<int> ua_to_mc_;
  std::map<int, int> mc_to_ua_;
  std::map<std::string, bool> memo_;
  std::map<std::string, WinRec> win_;
  std::optional<RefuteRec> refute_;
  std::string stuck_;
  std::vector<SafetyStep> trail_;
};

// Models of the precondition at the approximation matching the fuel. Each
// model fixes the owned footprint, the initial values of the owned cells,
// and the starting ghost.
inline std::vector<Rmap> pre_models(const Universe& u, const APtr& pre, int fuel) {
  int level = std::min(fuel, u.max_level);
  std::vector<Rmap> out;
  std::uint64_t total = rmap_count(u);
  for (std::uint64_t ix = 0; ix < total; ++ix) {
    Rmap r = decode_rmap(u, ix);
    if (r.level != level || !rmap_in_model(u, r)) continue;
    if (sat(u, r, pre)) out.push_back(std::move(r));
  }
  return out;
}

// The triple holds when the game is won from every model of the
// precondition. An unsatisfiable precondition holds vacuously.
inline SafetyVerdict check_safety(const Compiled& c, const Universe& u,
                                  const HoareSpec& spec, SafetyOptions opt = {}) {
  SafetyVerdict overall;
  overall.safe = true;
  bool first = true;
  for (const Rmap& model : pre_models(u, spec.pre, spec.fuel)) {
    SafetyChecker ck(c, u, model.heap, spec.post, opt);
    SafetyVerdict v = ck.run(ck.seeded_state(), model.ghost, spec.fuel);
    overall.configs += v.configs;
    if (!v.safe) {
      v.configs = overall.configs;
      v.reason = "from precondition model " + show_rmap(u, model) + ": " + v.reason;
      return v;
    }
    if (first) {
      overall.witness = std::move(v.witness);
      first = false;
    }
  }
  return overall;
}

// ---- view-shift scripts ----

// Thrown when a scripted ghost update is not frame-preserving; carries the
// element a third party could hold that the update would invalidate.
struct NonFramePreserving : usage_error {
  std::optional<int> frame;
  NonFramePreserving(const std::string& m, std::optional<int> f)
      : usage_error(m), frame(f) {}
};

struct VsOp {
  enum class Kind { Open, Close, GhostUpdate, Alloc, Dealloc };
  Kind kind{};
  InvAssertion inv{};    // Open, Close
  int name = -1;         // GhostUpdate, Dealloc
  int algebra = -1;      // Alloc
  int from = -1;         // GhostUpdate
  int to = -1;           // GhostUpdate; Alloc: initial element
  int tag = 0;           // Alloc
};

inline VsOp vs_open(InvAssertion inv) {
  VsOp op;
  op.kind = VsOp::Kind::Open;
  op.inv = inv;
  return op;
}
inline VsOp vs_close(InvAssertion inv) {
  VsOp op;
  op.kind = VsOp::Kind::Close;
  op.inv = inv;
  return op;
}
inline VsOp vs_update(int name, int from, int to) {
  VsOp op;
  op.kind = VsOp::Kind::GhostUpdate;
  op.name = name;
  op.from = from;
  op.to = to;
  return op;
}
inline VsOp vs_alloc(int algebra, int elem, int tag = 0) {
  VsOp op;
  op.kind = VsOp::Kind::Alloc;
  op.algebra = algebra;
  op.to = elem;
  op.tag = tag;
  return op;
}
inline VsOp vs_dealloc(int name) {
  VsOp op;
  op.kind = VsOp::Kind::Dealloc;
  op.name = name;
  return op;
}

// What a script transforms: the invariant registry plus the resources held
// at the current program point.
struct VsState {
  InvariantRegistry reg;
  Rmap r;

  bool operator==(const VsState&) const = default;
};

namespace speccheck_detail {

inline void vs_apply(const InvariantSetup& s, VsState& st, const VsOp& op) {
  const Universe& u = s.u;
  switch (op.kind) {
    case VsOp::Kind::Open: {
      APtr body = open_invariant(s, st.reg, op.inv);
      std::optional<Rmap> content;
      std::uint64_t total = rmap_count(u);
      for (std::uint64_t ix = 0; ix < total && !content; ++ix) {
        Rmap m = decode_rmap(u, ix);
        if (m.level == st.r.level && rmap_in_model(u, m) && sat(u, m, body))
          content = std::move(m);
      }
      if (!content)
        throw usage_error("invariant " + std::to_string(op.inv.name) +
                          " has no content at level " + std::to_string(st.r.level));
      auto joined = rmap_join(u, st.r, *content);
      if (!joined)
        throw usage_error("content of invariant " + std::to_string(op.inv.name) +
                          " conflicts with the resources held");
      st.r = std::move(*joined);
      return;
    }
    case VsOp::Kind::Close: {
      check_registered(st.reg, op.inv);
      if (st.reg.defined[op.inv.name].status == InvStatus::Enabled)
        throw usage_error("invariant " + std::to_string(op.inv.name) +
                          " is not open");
      const APtr& body = s.bodies[op.inv.body];
      std::optional<Rmap> keep, give;
      for_each_split(u, st.r, [&](const Rmap& r1, const Rmap& r2) {
        if (!sat(u, r2, later(body))) return true;
        keep = r1;
        give = r2;
        return false;
      });
      if (!give)
        throw RestoreError("held resources cannot restore invariant " +
                           std::to_string(op.inv.name));
      close_invariant(s, st.reg, op.inv, *give);
      st.r = std::move(*keep);
      return;
    }
    case VsOp::Kind::GhostUpdate: {
      auto it = st.r.ghost.find(op.name);
      if (it == st.r.ghost.end())
        throw usage_error("script updates ghost " + std::to_string(op.name) +
                          ", which is not held");
      const AlgebraSpec& alg = u.reg().at(it->second.elem.algebra);
      if (it->second.elem.value != op.from)
        throw usage_error("ghost " + std::to_string(op.name) + " holds " +
                          alg.names[it->second.elem.value] + ", not " +
                          alg.names[op.from]);
      FpVerdict fv = is_fp_update(alg, op.from, op.to);
      if (!fv.ok)
        throw NonFramePreserving("update " + alg.names[op.from] + " ~~> " +
                                     alg.names[op.to] + " at ghost " +
                                     std::to_string(op.name) + ": " + fv.reason,
                                 fv.frame);
      it->second.elem.value = op.to;
      return;
    }
    case VsOp::Kind::Alloc: {
      const AlgebraSpec& alg = u.reg().at(op.algebra);
      if (op.to < 0 || op.to >= alg.size() || !alg.valid[op.to])
        throw usage_error("cannot allocate an invalid element of algebra " +
                          alg.id);
      for (int name = u.active_count(); name < u.name_count(); ++name) {
        if (u.slot_algebra(name) != op.algebra) continue;
        if (st.r.ghost.count(name)) continue;
        st.r.ghost[name] = GhostCell{{op.algebra, op.to}, op.tag};
        return;
      }
      throw bound_error("no free headroom slot carries algebra " + alg.id);
    }
    case VsOp::Kind::Dealloc: {
      if (!st.r.ghost.count(op.name))
        throw usage_error("script deallocates ghost " + std::to_string(op.name) +
                          ", which is not held");
      st.r.ghost.erase(op.name);
      return;
    }
  }
}

}  // namespace speccheck_detail

// Run the script against a copy of the state; any failure leaves the caller's
// state untouched. Open hands the invariant's content to the held resources,
// close carves out a part that restores the body, updates go through the
// frame-preservation check, and allocation targets the headroom slots no
// frame ranges over.
inline VsState run_viewshift_script(const InvariantSetup& s, const VsState& st,
                                    const std::vector<VsOp>& script) {
  VsState out = st;
  for (const VsOp& op : script) speccheck_detail::vs_apply(s, out, op);
  return out;
}

}  // namespace cslwb
