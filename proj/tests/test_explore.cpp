#include <catch2/catch_amalgamated.hpp>

#include "cslwb/explore.hpp"

using namespace cslwb;
using Catch::Matchers::ContainsSubstring;

namespace {

bool same_reports(const ExplorationReport& a, const ExplorationReport& b) {
  if (a.terminals != b.terminals) return false;
  if (a.races.size() != b.races.size()) return false;
  for (size_t k = 0; k < a.races.size(); ++k)
    if (a.races[k].key() != b.races[k].key()) return false;
  auto states = [](const auto& v) {
    std::vector<std::string> out;
    for (const auto& x : v) out.push_back(x.state);
    return out;
  };
  if (states(a.deadlocks) != states(b.deadlocks)) return false;
  if (states(a.undefined) != states(b.undefined)) return false;
  if (a.violations.size() != b.violations.size()) return false;
  if (a.monitor_failures.size() != b.monitor_failures.size()) return false;
  return a.visited == b.visited;
}

// Counts atomic writes; the fingerprint exposes the parity, so states equal
// up to the machine but differing in parity stay separate.
struct ParityMonitor : Monitor {
  int writes = 0;
  bool check_even_at_end = false;
  void on_event(const Event& e) override {
    if (e.kind == EventKind::AtomicWrite) ++writes;
  }
  bool failed() const override { return false; }
  std::string failure() const override { return {}; }
  std::optional<std::string> at_terminal(const MachineState&) const override {
    if (check_even_at_end && writes % 2 != 0)
      return "odd number of atomic writes at exit";
    return std::nullopt;
  }
  void fingerprint(std::string& out) const override {
    out.push_back(writes % 2 ? '1' : '0');
  }
  std::unique_ptr<Monitor> clone() const override {
    return std::make_unique<ParityMonitor>(*this);
  }
};

// Fails as soon as it sees a write of the poison value.
struct PoisonMonitor : Monitor {
  uint32_t poison;
  bool hit = false;
  explicit PoisonMonitor(uint32_t p) : poison(p) {}
  void on_event(const Event& e) override {
    if (e.kind == EventKind::Write && e.value == poison) hit = true;
  }
  bool failed() const override { return hit; }
  std::string failure() const override {
    return "wrote " + std::to_string(poison);
  }
  void fingerprint(std::string& out) const override {
    out.push_back(hit ? '1' : '0');
  }
  std::unique_ptr<Monitor> clone() const override {
    return std::make_unique<PoisonMonitor>(*this);
  }
};

}  // namespace

TEST_CASE("a sequential program visits exactly its own run, no duplicates") {
  Compiled c = compile_text(R"(
int x; int y;
fn main() { x = 1; y = x + 1; x = y * 2; }
)");
  MachineState s = initial_state(c);
  RunResult r = run(c, s);
  REQUIRE(r.stop == RunResult::Stop::Terminal);

  ExplorationReport rep = explore(c, {});
  CHECK(rep.clean());
  CHECK(rep.visited == r.steps + 1);
  REQUIRE(rep.terminals.size() == 1);
  CHECK(rep.terminals[0].at("x") == std::vector<uint32_t>{4});
  CHECK(rep.terminals[0].at("y") == std::vector<uint32_t>{2});
}

TEST_CASE("concurrent non-atomic writes to one cell race") {
  Compiled c = compile_text(R"(
int p;
fn put(v) { p = v; }
fn main() { spawn put(3); spawn put(4); }
)");
  ExplorationReport rep = explore(c, {});
  CHECK(!rep.clean());
  REQUIRE(rep.races.size() == 1);
  CHECK(rep.races[0].cell == "p");
  CHECK(rep.races[0].tid_a == 1);
  CHECK(rep.races[0].tid_b == 2);
  CHECK(rep.races[0].action_a == NextAction::Kind::Write);
  CHECK(rep.races[0].action_b == NextAction::Kind::Write);
  CHECK_THAT(rep.races[0].state, ContainsSubstring("p=0"));
  CHECK(rep.deadlocks.empty());
  CHECK(rep.undefined.empty());
}

TEST_CASE("the same writes through an atomic cell do not race") {
  Compiled c = compile_text(R"(
atomic int p;
fn put(v) { atomic_store(p, v); }
fn main() { spawn put(3); spawn put(4); }
)");
  ExplorationReport rep = explore(c, {});
  CHECK(rep.clean());
  REQUIRE(rep.terminals.size() == 2);  // one per final write order
  std::set<uint32_t> finals;
  for (const auto& t : rep.terminals) finals.insert(t.at("p")[0]);
  CHECK(finals == std::set<uint32_t>{3, 4});
}

TEST_CASE("a read racing a write is reported with both action kinds") {
  Compiled c = compile_text(R"(
int p; int sink;
fn reader() { sink = p; }
fn main() { spawn reader(); p = 1; }
)");
  ExplorationReport rep = explore(c, {});
  bool saw_rw = false;
  for (const auto& r : rep.races) {
    if (r.cell != "p") continue;
    int lo = std::min((int)r.action_a, (int)r.action_b);
    int hi = std::max((int)r.action_a, (int)r.action_b);
    saw_rw |= lo == (int)NextAction::Kind::Read &&
              hi == (int)NextAction::Kind::Write;
  }
  CHECK(saw_rw);
  // reads alone never race: sink is written by one thread only
  for (const auto& r : rep.races) CHECK(r.cell == "p");
}

TEST_CASE("the locked counter always ends at two, racelessly") {
  Compiled c = compile_text(R"(
int ctr;
lock ctr_lock;
lock thread_lock;
fn incr() { acquire(ctr_lock); ctr = ctr + 1; release(ctr_lock); }
fn thread_func() { incr(); release(thread_lock); }
fn main() {
  makelock(ctr_lock); release(ctr_lock);
  makelock(thread_lock);
  spawn thread_func();
  incr();
  acquire(thread_lock);
  freelock(thread_lock);
  acquire(ctr_lock);
  var t = ctr;
  freelock(ctr_lock);
}
)");
  ExplorationReport rep = explore(c, {});
  CHECK(rep.clean());
  REQUIRE(!rep.terminals.empty());
  for (const auto& t : rep.terminals) {
    CHECK(t.at("ctr") == std::vector<uint32_t>{2});
    CHECK(t.at("ctr_lock") == std::vector<uint32_t>{0});  // freed
  }
  // dropping the lock makes the increment a lost-update race
  Compiled bad = compile_text(R"(
int ctr;
fn incr() { ctr = ctr + 1; }
fn main() { spawn incr(); spawn incr(); }
)");
  ExplorationReport brep = explore(bad, {});
  CHECK(!brep.races.empty());
  std::set<uint32_t> finals;
  for (const auto& t : brep.terminals) finals.insert(t.at("ctr")[0]);
  CHECK(finals == std::set<uint32_t>{1, 2});  // the lost update is reachable
}

TEST_CASE("opposite acquisition orders deadlock; so does self-acquire") {
  Compiled c = compile_text(R"(
lock a; lock b;
fn f() { acquire(a); acquire(b); release(b); release(a); }
fn g() { acquire(b); acquire(a); release(a); release(b); }
fn main() { makelock(a); release(a); makelock(b); release(b); spawn f(); spawn g(); }
)");
  ExplorationReport rep = explore(c, {});
  REQUIRE(rep.deadlocks.size() == 1);
  CHECK(rep.deadlocks[0].blocked == std::vector<int>{1, 2});
  CHECK_THAT(rep.deadlocks[0].state,
             ContainsSubstring("a=held(1)") && ContainsSubstring("b=held(2)"));
  CHECK(!rep.terminals.empty());  // lucky schedules still finish

  Compiled self = compile_text(R"(
lock l;
fn main() { makelock(l); acquire(l); }
)");
  ExplorationReport srep = explore(self, {});
  REQUIRE(srep.deadlocks.size() == 1);
  CHECK(srep.deadlocks[0].blocked == std::vector<int>{0});
  CHECK(srep.terminals.empty());
}

TEST_CASE("undefined steps are recorded and their siblings still explored") {
  Compiled c = compile_text(R"(
atomic int t[2]; int done;
fn oob() { atomic_store(t[5], 1); }
fn main() { spawn oob(); done = 1; }
)");
  ExplorationReport rep = explore(c, {});
  REQUIRE(!rep.undefined.empty());
  CHECK(rep.undefined[0].tid == 1);
  CHECK_THAT(rep.undefined[0].reason,
             ContainsSubstring("index 5 out of range"));
  // main's path to the terminal survives alongside the faulting thread
  CHECK(rep.terminals.empty());  // the faulting thread never exits
  CHECK(rep.visited >= 3);
}

TEST_CASE("state invariants are checked in every reachable state") {
  Compiled c = compile_text(R"(
int in_crit; lock l;
fn worker() {
  acquire(l);
  in_crit = in_crit + 1;
  in_crit = in_crit - 1;
  release(l);
}
fn main() { makelock(l); release(l); spawn worker(); spawn worker(); }
)");
  ExploreOptions opt;
  opt.state_invariant = [](const Compiled& cc, const MachineState& ss) {
    return global_value(cc, ss, "in_crit") <= 1
               ? std::nullopt
               : std::make_optional<std::string>("two threads in the critical section");
  };
  ExplorationReport rep = explore(c, opt);
  CHECK(rep.clean());

  // without the lock the same invariant is violated somewhere
  Compiled bad = compile_text(R"(
int in_crit;
fn worker() { in_crit = in_crit + 1; in_crit = in_crit - 1; }
fn main() { spawn worker(); spawn worker(); }
)");
  ExplorationReport brep = explore(bad, opt);
  REQUIRE(!brep.violations.empty());
  CHECK_THAT(brep.violations[0].what,
             ContainsSubstring("two threads in the critical section"));
  CHECK_THAT(brep.violations[0].state, ContainsSubstring("in_crit=2"));
}

TEST_CASE("step invariants see the event and both endpoints") {
  Compiled c = compile_text(R"(
int x;
fn main() { x = 2; x = 4; x = 3; }
)");
  ExploreOptions opt;
  opt.step_invariant = [](const Compiled&, const MachineState&, const Event& e,
                          const MachineState&) -> std::optional<std::string> {
    if (e.kind == EventKind::Write && e.value % 2 != 0)
      return "odd write of " + std::to_string(e.value);
    return std::nullopt;
  };
  ExplorationReport rep = explore(c, opt);
  REQUIRE(rep.violations.size() == 1);
  CHECK_THAT(rep.violations[0].what, ContainsSubstring("odd write of 3"));
}

TEST_CASE("reported sets are independent of exploration order") {
  Compiled c = compile_text(R"(
int p; atomic int q; lock l;
fn writer(v) { p = v; atomic_store(q, v); }
fn locked() { acquire(l); atomic_store(q, 9); release(l); }
fn main() { makelock(l); release(l); spawn writer(3); spawn writer(4); spawn locked(); }
)");
  ExplorationReport base = explore(c, {});
  for (unsigned seed : {1u, 7u, 1234u}) {
    ExploreOptions opt;
    opt.shuffle_seed = seed;
    ExplorationReport rep = explore(c, opt);
    INFO("seed " << seed);
    CHECK(same_reports(base, rep));
  }
}

TEST_CASE("parallel exploration reproduces the serial report") {
  Compiled c = compile_text(R"(
int ctr; lock l; atomic int flag;
fn incr() { acquire(l); ctr = ctr + 1; release(l); atomic_store(flag, 1); }
fn main() { makelock(l); release(l); spawn incr(); spawn incr(); spawn incr(); }
)");
  ExplorationReport serial = explore(c, {});
  CHECK(serial.clean());
  for (int par : {2, 4, 8}) {
    ExploreOptions opt;
    opt.parallelism = par;
    ExplorationReport rep = explore(c, opt);
    INFO("parallelism " << par);
    CHECK(same_reports(serial, rep));
  }
  // and in combination with shuffling
  ExploreOptions opt;
  opt.parallelism = 4;
  opt.shuffle_seed = 99;
  CHECK(same_reports(serial, explore(c, opt)));
}

TEST_CASE("busy-wait loops converge through state memoization") {
  Compiled c = compile_text(R"(
atomic int flag; int out;
fn waiter() { var x = 0; while (x == 0) { x = atomic_load(flag); } out = 1; }
fn main() { spawn waiter(); atomic_store(flag, 1); }
)");
  ExplorationReport rep = explore(c, {});
  CHECK(rep.clean());
  REQUIRE(rep.terminals.size() == 1);
  CHECK(rep.terminals[0].at("out") == std::vector<uint32_t>{1});
  CHECK(rep.visited < 40);  // the flag=0 spin cycle is a single state
}

TEST_CASE("exhausted bounds raise flags instead of lying") {
  Compiled c = compile_text(R"(
atomic int a;
fn bump() { atomic_store(a, atomic_load(a) + 1); }
fn main() { spawn bump(); spawn bump(); spawn bump(); }
)");
  {
    ExploreOptions opt;
    opt.bounds.max_depth = 3;
    ExplorationReport rep = explore(c, opt);
    CHECK(rep.depth_exhausted);
    CHECK(rep.terminals.empty());
    CHECK(!rep.clean());
  }
  {
    ExploreOptions opt;
    opt.bounds.max_states = 5;
    ExplorationReport rep = explore(c, opt);
    CHECK(rep.states_exhausted);
    CHECK(!rep.clean());
  }
  {
    ExploreOptions opt;
    opt.bounds.max_depth = 0;
    CHECK_THROWS_AS(explore(c, opt), usage_error);
    opt.bounds.max_depth = 10;
    opt.bounds.max_states = -1;
    CHECK_THROWS_AS(explore(c, opt), usage_error);
  }
}

TEST_CASE("exploration can start from a prepared mid-run state") {
  Compiled c = compile_text(R"(
atomic int p;
fn put(v) { atomic_store(p, v); }
fn main() { spawn put(3); spawn put(4); }
)");
  MachineState s = initial_state(c);
  REQUIRE(step(c, s, 0).kind == Outcome::Kind::Next);  // spawn put(3)
  REQUIRE(step(c, s, 0).kind == Outcome::Kind::Next);  // spawn put(4)
  REQUIRE(step(c, s, 1).kind == Outcome::Kind::Next);  // p = 3 committed
  ExplorationReport rep = explore_from(c, s, {});
  CHECK(rep.clean());
  REQUIRE(rep.terminals.size() == 1);  // only the 4-last order remains
  CHECK(rep.terminals[0].at("p") == std::vector<uint32_t>{4});
}

TEST_CASE("a monitor's fingerprint splits otherwise-equal states") {
  Compiled c = compile_text(R"(
atomic int p;
fn put() { atomic_store(p, 1); atomic_store(p, 1); }
fn main() { spawn put(); spawn put(); }
)");
  ExplorationReport bare = explore(c, {});
  ExploreOptions opt;
  opt.make_monitor = [] { return std::make_unique<ParityMonitor>(); };
  ExplorationReport seen = explore(c, opt);
  CHECK(seen.monitor_failures.empty());  // 4 writes at every exit: even
  CHECK(seen.visited >= bare.visited);   // parity is extra distinction
  CHECK(seen.terminals == bare.terminals);

  // an odd write count is caught at the terminal
  Compiled odd = compile_text(R"(
atomic int p;
fn main() { atomic_store(p, 1); atomic_store(p, 2); atomic_store(p, 3); }
)");
  ExploreOptions req;
  req.make_monitor = [] {
    auto m = std::make_unique<ParityMonitor>();
    m->check_even_at_end = true;
    return m;
  };
  ExplorationReport orep = explore(odd, req);
  REQUIRE(orep.monitor_failures.size() == 1);
  CHECK_THAT(orep.monitor_failures[0].what,
             ContainsSubstring("odd number of atomic writes"));
}

TEST_CASE("a failed monitor prunes its whole subtree") {
  Compiled c = compile_text(R"(
int x; int y;
fn main() { x = 13; y = 1; y = 2; }
)");
  ExploreOptions opt;
  opt.make_monitor = [] { return std::make_unique<PoisonMonitor>(13); };
  ExplorationReport rep = explore(c, opt);
  REQUIRE(rep.monitor_failures.size() == 1);
  CHECK_THAT(rep.monitor_failures[0].what, ContainsSubstring("wrote 13"));
  CHECK(rep.terminals.empty());  // everything beyond the write is cut
  CHECK(rep.visited == 1);       // only the root ever expands

  opt.make_monitor = [] { return std::make_unique<PoisonMonitor>(99); };
  ExplorationReport ok = explore(c, opt);
  CHECK(ok.monitor_failures.empty());
  CHECK(ok.terminals.size() == 1);
}
