#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "cslwb/machine.hpp"

using namespace cslwb;
using Catch::Matchers::ContainsSubstring;

namespace {

// Runs a program to completion under the deterministic scheduler and hands
// back the final state for inspection.
struct Ran {
  Compiled c;
  MachineState s;
  RunResult r;
};

Ran run_text(std::string_view text, long max_steps = 1'000'000) {
  Ran out{compile_text(text), {}, {}};
  out.s = initial_state(out.c);
  out.r = run(out.c, out.s, max_steps);
  return out;
}

uint32_t eval(const std::string& expr, int width = 8) {
  auto got = run_text("width " + std::to_string(width) +
                      "; int out; fn main() { out = " + expr + "; }");
  REQUIRE(got.r.stop == RunResult::Stop::Terminal);
  return global_value(got.c, got.s, "out");
}

}  // namespace

TEST_CASE("the locked counter program parses into the expected shape") {
  Program p = parse_program(R"(
int ctr;
lock ctr_lock;
lock thread_lock;

fn incr() {
  acquire(ctr_lock);
  ctr = ctr + 1;
  release(ctr_lock);
}

fn thread_func() {
  incr();
  release(thread_lock);
}

fn main() {
  makelock(ctr_lock);
  release(ctr_lock);
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
  CHECK(p.width == 8);
  REQUIRE(p.globals.size() == 3);
  CHECK(p.globals[0].kind == CellKind::IntCell);
  CHECK(p.globals[1].kind == CellKind::LockCell);
  REQUIRE(p.functions.size() == 3);
  CHECK(p.functions[p.entry].name == "main");
  CHECK(p.functions[0].params.empty());

  auto got = run_text(R"(
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
  freelock(ctr_lock);
}
)");
  CHECK(got.r.stop == RunResult::Stop::Terminal);
  CHECK(global_value(got.c, got.s, "ctr") == 2);
  CHECK(lock_state(got.c, got.s, "ctr_lock") == LockPhase::Unmade);
  CHECK(lock_state(got.c, got.s, "thread_lock") == LockPhase::Unmade);
}

TEST_CASE("type errors name the offense") {
  auto bad = [](std::string_view text) {
    try {
      parse_program(text);
      FAIL("expected a type error");
      return std::string();
    } catch (const type_error& e) {
      return std::string(e.what());
    }
  };
  CHECK_THAT(bad("int p; fn main() { var x = atomic_load(p); }"),
             ContainsSubstring("atomic_load cannot be applied to 'p'"));
  CHECK_THAT(bad("atomic int p; fn main() { var x = p; }"),
             ContainsSubstring("atomic cell 'p'"));
  CHECK_THAT(bad("atomic int p; fn main() { p = 3; }"),
             ContainsSubstring("atomic cell 'p'"));
  CHECK_THAT(bad("lock l; fn main() { var x = l; }"),
             ContainsSubstring("lock 'l' cannot be read"));
  CHECK_THAT(bad("int p; fn main() { acquire(p); }"),
             ContainsSubstring("'p' is not a lock"));
  CHECK_THAT(bad("atomic int t[4]; fn main() { var x = atomic_load(t); }"),
             ContainsSubstring("array and needs an index"));
  CHECK_THAT(bad("fn main() { x = 1; }"),
             ContainsSubstring("unknown identifier 'x'"));
  CHECK_THAT(bad("fn main() { var x = x; }"),  // initializer precedes the name
             ContainsSubstring("unknown identifier 'x'"));
  CHECK_THAT(bad("fn f(a) { } fn main() { f(1, 2); }"),
             ContainsSubstring("'f' takes 1"));
  CHECK_THAT(bad("int p; int p; fn main() { }"),
             ContainsSubstring("duplicate global 'p'"));
  CHECK_THAT(bad("int p; fn p() { } fn main() { }"),
             ContainsSubstring("already a cell name"));
  CHECK_THAT(bad("int p; fn main() { var p; }"),
             ContainsSubstring("'p' shadows a cell"));
  CHECK_THAT(bad("fn f() { }"), ContainsSubstring("no 'main'"));
  CHECK_THAT(bad("fn main(a) { }"), ContainsSubstring("main takes no parameters"));
  CHECK_THAT(bad("fn main() { break; }"),
             ContainsSubstring("break outside of a loop"));
  CHECK_THAT(bad("int x[3]; fn main() { }"),
             ContainsSubstring("only atomic int arrays"));
  CHECK_THAT(bad("atomic int p; fn main() { ok = cas(p, 0, 1); }"),
             ContainsSubstring("'ok' is not a declared variable"));
  CHECK_THAT(bad("fn f() {} fn main() { spawn f(1); }"),
             ContainsSubstring("spawn of 'f' needs 0"));
  CHECK_THAT(bad("fn f(a, b) {} fn main() { spawn f(1, 2); }"),
             ContainsSubstring("at most one argument"));
}

TEST_CASE("syntax errors carry line and column") {
  try {
    parse_program("int p;\nfn main() {\n  p = ;\n}\n");
    FAIL("expected a parse error");
  } catch (const parse_error& e) {
    CHECK(e.line == 3);
    CHECK(e.col == 7);
    CHECK_THAT(e.what(), ContainsSubstring("parse error at 3:7"));
  }
  CHECK_THROWS_MATCHES(
      parse_program("atomic int p; fn main() { if (cas(p, 0, 1)) { } }"),
      parse_error, Catch::Matchers::MessageMatches(ContainsSubstring(
                       "cas is a statement, not an expression")));
  CHECK_THROWS_AS(parse_program("fn main() { var if = 1; }"), parse_error);
  CHECK_THROWS_AS(parse_program("fn main() { /* open"), parse_error);
  CHECK_THROWS_AS(parse_program("fn main() { var x = 0x; }"), parse_error);
  CHECK_THROWS_AS(parse_program("fn main() { var x = 5000000000; }"),
                  parse_error);
  CHECK_THROWS_MATCHES(parse_program("width 0; fn main() { }"), type_error,
                       Catch::Matchers::MessageMatches(ContainsSubstring(
                           "width must be between 1 and 16")));
  CHECK_THROWS_AS(parse_program("width 17; fn main() { }"), type_error);
  CHECK_THROWS_AS(parse_program("atomic int t[0]; fn main() { }"), type_error);
  CHECK_THROWS_AS(parse_program("atomic int t[1025]; fn main() { }"),
                  type_error);
}

TEST_CASE("empty main runs to a terminal in one step") {
  auto got = run_text("fn main() { }");
  CHECK(got.r.stop == RunResult::Stop::Terminal);
  CHECK(got.r.steps == 1);  // the exit itself is the only visible action
  CHECK(got.s.threads[0].terminated());
}

TEST_CASE("arithmetic wraps and compares unsigned at the declared width") {
  CHECK(eval("200 + 100") == 44);         // mod 256
  CHECK(eval("3 - 5") == 254);
  CHECK(eval("16 * 16") == 0);
  CHECK(eval("(0 - 1) > 1") == 1);        // 255 > 1 unsigned
  CHECK(eval("1 << 9") == 2);             // shift count mod width
  CHECK(eval("128 >> 1") == 64);
  CHECK(eval("~0") == 255);
  CHECK(eval("-1") == 255);
  CHECK(eval("!7") == 0);
  CHECK(eval("!0") == 1);
  CHECK(eval("5 | 3 ^ 1 & 6") == 7);      // precedence: & then ^ then |
  CHECK(eval("2 + 3 * 4 == 14") == 1);
  CHECK(eval("10 - 3 - 2") == 5);         // left associative
  CHECK(eval("200 + 100", 16) == 300);
  CHECK(eval("1 << 9", 16) == 512);
  CHECK(eval("1 + 1", 1) == 0);
  CHECK(eval("0xff & 0x0f") == 15);
}

TEST_CASE("logical operators short-circuit") {
  // The right operand writes a marker; it must run only when reached.
  auto got = run_text(R"(
int mark; int out;
fn probe() { mark = mark + 1; return 1; }
fn main() {
  out = 0 && probe();
  out = 1 || probe();
}
)");
  CHECK(global_value(got.c, got.s, "mark") == 0);
  CHECK(global_value(got.c, got.s, "out") == 1);

  auto got2 = run_text(R"(
int mark; int out;
fn probe() { mark = mark + 1; return 0; }
fn main() { out = 1 && probe() || probe(); }
)");
  CHECK(global_value(got2.c, got2.s, "mark") == 2);
  CHECK(global_value(got2.c, got2.s, "out") == 0);
}

TEST_CASE("operands and arguments evaluate left to right") {
  auto got = run_text(R"(
width 16;
int ord;
fn a() { ord = ord * 10 + 1; return 1; }
fn b() { ord = ord * 10 + 2; return 2; }
fn add(x, y) { return x + y; }
fn main() { var t = a() + b(); t = add(b(), a()); }
)");
  CHECK(global_value(got.c, got.s, "ord") == 1221);
}

TEST_CASE("cas writes on match and reports the observed value either way") {
  auto got = run_text(R"(
atomic int p;
int ok1; int ok2; int seen2; int ok3; int seen3;
fn main() {
  var ok = cas(p, 0, 7);
  ok1 = ok;
  var o; var s;
  o, s = cas(p, 0, 9);
  ok2 = o; seen2 = s;
  o, s = cas(p, 7, 250);
  ok3 = o; seen3 = s;
}
)");
  CHECK(global_value(got.c, got.s, "ok1") == 1);
  CHECK(global_value(got.c, got.s, "ok2") == 0);   // p was 7, not 0
  CHECK(global_value(got.c, got.s, "seen2") == 7);
  CHECK(global_value(got.c, got.s, "ok3") == 1);
  CHECK(global_value(got.c, got.s, "seen3") == 7); // value before the swap
  CHECK(global_value(got.c, got.s, "p") == 250);

  // var-form sugar declares and assigns in one statement
  auto got2 = run_text(R"(
atomic int p; int out;
fn main() { var ok = cas(p, 0, 3); out = ok; }
)");
  CHECK(global_value(got2.c, got2.s, "out") == 1);
}

TEST_CASE("lock protocol: creation, blocking, semaphore release, freeing") {
  Compiled c = compile_text(R"(
lock l; int seq;
fn other() { release(l); seq = 1; }
fn main() { makelock(l); spawn other(); acquire(l); }
)");
  MachineState s = initial_state(c);

  // makelock leaves the creator holding the lock
  REQUIRE(step(c, s, 0).kind == Outcome::Kind::Next);
  CHECK(lock_state(c, s, "l") == LockPhase::Held);
  CHECK(s.mem[cell_index(c, "l")].holder == 0);

  // main's own acquire blocks while it is held, and blocking mutates nothing
  REQUIRE(step(c, s, 0).kind == Outcome::Kind::Next);  // spawn
  std::string before = canonical_state(c, s);
  Outcome blocked = step(c, s, 0);
  CHECK(blocked.kind == Outcome::Kind::Blocked);
  CHECK(canonical_state(c, s) == before);

  // any thread may release (semaphore style), unblocking the acquirer
  REQUIRE(step(c, s, 1).kind == Outcome::Kind::Next);  // other: release
  CHECK(lock_state(c, s, "l") == LockPhase::Unlocked);
  Outcome acq = step(c, s, 0);
  REQUIRE(acq.kind == Outcome::Kind::Next);
  CHECK(acq.event->kind == EventKind::LockAcquire);
  CHECK(s.mem[cell_index(c, "l")].holder == 0);
}

TEST_CASE("lock misuse is undefined with a reason") {
  auto undef = [](std::string_view text) {
    auto got = run_text(text);
    REQUIRE(got.r.stop == RunResult::Stop::Undefined);
    return got.r.reason;
  };
  CHECK_THAT(undef("lock l; fn main() { acquire(l); }"),
             ContainsSubstring("acquire on unmade lock 'l'"));
  CHECK_THAT(undef("lock l; fn main() { release(l); }"),
             ContainsSubstring("release of unmade lock 'l'"));
  CHECK_THAT(undef("lock l; fn main() { makelock(l); release(l); release(l); }"),
             ContainsSubstring("not held"));
  CHECK_THAT(undef("lock l; fn main() { makelock(l); makelock(l); }"),
             ContainsSubstring("already made"));
  CHECK_THAT(undef("lock l; fn main() { freelock(l); }"),
             ContainsSubstring("freelock on unmade lock"));
  CHECK_THAT(undef("lock l; fn main() { makelock(l); release(l); freelock(l); }"),
             ContainsSubstring("not held"));
  // freeing a lock held by someone else
  CHECK_THAT(undef(R"(
lock l; int go;
fn thief() { freelock(l); }
fn main() { makelock(l); spawn thief(); go = 1; go = 2; go = 3; }
)"),
             ContainsSubstring("held by another thread"));
  // the holder itself may free
  auto ok = run_text("lock l; fn main() { makelock(l); freelock(l); }");
  CHECK(ok.r.stop == RunResult::Stop::Terminal);
  CHECK(lock_state(ok.c, ok.s, "l") == LockPhase::Unmade);
}

TEST_CASE("self-acquire deadlocks under the deterministic driver") {
  auto got = run_text("lock l; fn main() { makelock(l); acquire(l); }");
  CHECK(got.r.stop == RunResult::Stop::Deadlock);
}

TEST_CASE("hash matches the frozen reference values") {
  CHECK(eval("hash(0)") == 0);
  CHECK(eval("hash(1)") == 9);
  CHECK(eval("hash(3)") == 29);
  CHECK(eval("hash(7)") == 69);
  CHECK(eval("hash(15)") == 149);
  CHECK(eval("hash(255)") == 230);
  CHECK(eval("hash(1)", 4) == 2);
  CHECK(eval("hash(7)", 4) == 15);
  CHECK(eval("hash(15)", 4) == 1);
  CHECK(eval("hash(1)", 16) == 158);
  CHECK(eval("hash(15)", 16) == 2373);
  CHECK(eval("hash(65535)", 16) == 13921);
  for (uint32_t x : {0u, 1u, 9u, 200u})
    CHECK(eval("hash(" + std::to_string(x) + ")") == hash_value(x, 8));
}

TEST_CASE("loops and branches compute as written") {
  auto got = run_text(R"(
int evens; int sum; int cls;
fn main() {
  var i;
  for (i = 0; i < 10; i++) {
    if (i == 7) { break; }
    if (i & 1) { continue; }
    evens++;
  }
  var j = 0;
  while (j < 5) { sum = sum + j; j++; }
  if (j == 9) { cls = 1; } else if (j == 5) { cls = 2; } else { cls = 3; }
}
)");
  CHECK(got.r.stop == RunResult::Stop::Terminal);
  CHECK(global_value(got.c, got.s, "evens") == 4);  // 0 2 4 6
  CHECK(global_value(got.c, got.s, "sum") == 10);
  CHECK(global_value(got.c, got.s, "cls") == 2);
}

TEST_CASE("calls return values and recursion works up to the frame limit") {
  auto got = run_text(R"(
int out;
fn tri(n) { if (n == 0) { return 0; } return n + tri(n - 1); }
fn main() { out = tri(9); }
)");
  CHECK(got.r.stop == RunResult::Stop::Terminal);
  CHECK(global_value(got.c, got.s, "out") == 45);

  auto deep = run_text(R"(
int out;
fn down(n) { out = n; return down(n - 1); }
fn main() { out = down(0); }
)");
  CHECK(deep.r.stop == RunResult::Stop::Undefined);
  CHECK_THAT(deep.r.reason, ContainsSubstring("call stack depth exceeded"));
}

TEST_CASE("pure loops that never touch memory are undefined, not hangs") {
  auto got = run_text("fn main() { var x; while (1) { x = x + 1; } }");
  CHECK(got.r.stop == RunResult::Stop::Undefined);
  CHECK_THAT(got.r.reason, ContainsSubstring("no memory access"));
  CHECK_THAT(got.r.reason, ContainsSubstring("4096"));
  // the same loop with a store in the body is fine, merely unbounded
  auto spin = run_text("int x; fn main() { while (1) { x = x + 1; } }", 100);
  CHECK(spin.r.stop == RunResult::Stop::FuelOut);
}

TEST_CASE("spawn copies the argument and respects the thread limit") {
  auto got = run_text(R"(
int slot0; int slot1;
fn put(v) { if (v == 10) { slot0 = v; } else { slot1 = v; } }
fn main() { var a = 10; spawn put(a); a = 20; spawn put(a); }
)");
  CHECK(got.r.stop == RunResult::Stop::Terminal);
  CHECK(global_value(got.c, got.s, "slot0") == 10);  // by-value at spawn time
  CHECK(global_value(got.c, got.s, "slot1") == 20);

  auto burst = run_text(R"(
int n;
fn idle() { }
fn main() { var i; for (i = 0; i < 100; i++) { spawn idle(); n++; } }
)");
  CHECK(burst.r.stop == RunResult::Stop::Undefined);
  CHECK_THAT(burst.r.reason, ContainsSubstring("thread limit"));
}

TEST_CASE("array access checks bounds at runtime") {
  auto got = run_text(R"(
atomic int t[4]; int out;
fn main() {
  atomic_store(t[3], 5);
  out = atomic_load(t[3]);
  var i = 4;
  atomic_store(t[i], 1);
}
)");
  CHECK(global_value(got.c, got.s, "out") == 5);
  CHECK(got.r.stop == RunResult::Stop::Undefined);
  CHECK_THAT(got.r.reason, ContainsSubstring("index 4 out of range for 't'"));
}

TEST_CASE("addresses are the flat cell indices, masked to the width") {
  auto got = run_text(R"(
int a; atomic int t[3]; int b;
int pa; int pt2; int pb;
fn main() { pa = &a; pt2 = &t[2]; pb = &b; }
)");
  CHECK(global_value(got.c, got.s, "pa") == 0);
  CHECK(global_value(got.c, got.s, "pt2") == 3);  // a, then t[0..2]
  CHECK(global_value(got.c, got.s, "pb") == 4);
}

TEST_CASE("step is a function of state and thread") {
  Compiled c = compile_text(R"(
atomic int p; int q;
fn f() { atomic_store(p, 1); q = 2; }
fn main() { spawn f(); q = 1; }
)");
  MachineState s = initial_state(c);
  REQUIRE(step(c, s, 0).kind == Outcome::Kind::Next);  // spawn

  MachineState s1 = s, s2 = s;
  Outcome o1 = step(c, s1, 1), o2 = step(c, s2, 1);
  CHECK(o1.kind == o2.kind);
  REQUIRE(o1.event.has_value());
  CHECK(o1.event->kind == o2.event->kind);
  CHECK(o1.event->cell == o2.event->cell);
  CHECK(canonical_state(c, s1) == canonical_state(c, s2));

  CHECK_THROWS_AS(step(c, s, 9), usage_error);
  CHECK_THROWS_AS(peek(c, s, 9), usage_error);
}

TEST_CASE("canonical state ignores the trace and sees locals") {
  Compiled c = compile_text(R"(
int x;
fn main() { var a = 1; x = a; var b = a + 1; x = b; }
)");
  MachineState plain = initial_state(c);
  MachineState traced = initial_state(c);
  traced.record_trace = true;
  REQUIRE(step(c, plain, 0).kind == Outcome::Kind::Next);
  REQUIRE(step(c, traced, 0).kind == Outcome::Kind::Next);
  CHECK(!traced.trace.empty());
  CHECK(plain.trace.empty());
  CHECK(canonical_state(c, plain) == canonical_state(c, traced));

  // advancing one more visible action changes the fingerprint (pc, locals)
  std::string before = canonical_state(c, plain);
  REQUIRE(step(c, plain, 0).kind == Outcome::Kind::Next);
  CHECK(canonical_state(c, plain) != before);
}

TEST_CASE("two interleavings meeting at the same configuration agree") {
  Compiled c = compile_text(R"(
atomic int p; atomic int q;
fn f() { atomic_store(p, 1); }
fn main() { spawn f(); atomic_store(q, 1); }
)");
  MachineState a = initial_state(c);
  REQUIRE(step(c, a, 0).kind == Outcome::Kind::Next);  // spawn
  MachineState b = a;
  // a: main stores q, then f stores p; b: the opposite order
  REQUIRE(step(c, a, 0).kind == Outcome::Kind::Next);
  REQUIRE(step(c, a, 1).kind == Outcome::Kind::Next);
  REQUIRE(step(c, b, 1).kind == Outcome::Kind::Next);
  REQUIRE(step(c, b, 0).kind == Outcome::Kind::Next);
  CHECK(canonical_state(c, a) == canonical_state(c, b));
}

TEST_CASE("invoke and respond emit paired history events per thread") {
  Compiled c = compile_text(R"(
int x;
fn main() {
  invoke put(1, 2);
  x = 1;
  respond(7);
  invoke get();
  respond(0);
}
)");
  MachineState s = initial_state(c);
  s.record_trace = true;
  RunResult r = run(c, s);
  REQUIRE(r.stop == RunResult::Stop::Terminal);

  std::vector<Event> hist;
  for (const auto& e : s.trace)
    if (e.kind == EventKind::Invoke || e.kind == EventKind::Respond)
      hist.push_back(e);
  REQUIRE(hist.size() == 4);
  CHECK(hist[0].kind == EventKind::Invoke);
  CHECK(hist[0].op == "put");
  CHECK(hist[0].args == std::vector<uint32_t>{1, 2});
  CHECK(hist[0].seq == 0);
  CHECK(hist[1].kind == EventKind::Respond);
  CHECK(hist[1].seq == 0);
  CHECK(hist[1].value == 7);
  CHECK(hist[2].op == "get");
  CHECK(hist[2].seq == 1);
  CHECK(hist[3].seq == 1);

  auto nested = run_text("fn main() { invoke a(); invoke b(); }");
  CHECK(nested.r.stop == RunResult::Stop::Undefined);
  CHECK_THAT(nested.r.reason, ContainsSubstring("invoke while a previous"));
  auto bare = run_text("fn main() { respond(1); }");
  CHECK(bare.r.stop == RunResult::Stop::Undefined);
  CHECK_THAT(bare.r.reason, ContainsSubstring("respond without"));
}

TEST_CASE("peek names the next visible action without moving") {
  Compiled c = compile_text(R"(
int x; atomic int p; lock l;
fn main() { x = 1; var t = x; atomic_store(p, 2); t = atomic_load(p); makelock(l); }
)");
  MachineState s = initial_state(c);
  auto expect = [&](NextAction::Kind k) {
    std::string before = canonical_state(c, s);
    auto act = peek(c, s, 0);
    REQUIRE(act.has_value());
    CHECK(act->kind == k);
    CHECK(canonical_state(c, s) == before);  // peeking never moves
    REQUIRE(step(c, s, 0).kind == Outcome::Kind::Next);
  };
  expect(NextAction::Kind::Write);
  expect(NextAction::Kind::Read);
  expect(NextAction::Kind::AtomicWrite);
  expect(NextAction::Kind::AtomicRead);
  expect(NextAction::Kind::LockAction);
  expect(NextAction::Kind::Exit);
  CHECK(!peek(c, s, 0).has_value());  // terminated
}

TEST_CASE("show_state prints globals and thread positions") {
  Compiled c = compile_text(R"(
int a; lock l; atomic int t[2];
fn main() { a = 7; makelock(l); atomic_store(t[1], 3); }
)");
  MachineState s = initial_state(c);
  CHECK_THAT(show_state(c, s), ContainsSubstring("a=0") &&
                                   ContainsSubstring("l=unmade") &&
                                   ContainsSubstring("t=[0,0]") &&
                                   ContainsSubstring("t0:main@"));
  run(c, s);
  CHECK_THAT(show_state(c, s), ContainsSubstring("a=7") &&
                                   ContainsSubstring("l=held(0)") &&
                                   ContainsSubstring("t=[0,3]") &&
                                   ContainsSubstring("t0:exit"));
}
