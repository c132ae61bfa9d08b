#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cslwb/lincheck.hpp"

using namespace cslwb;
using Catch::Matchers::ContainsSubstring;

namespace {

// A single-cell register: set(v) writes, get() reads. Abstract state is the
// stored value.
AtomicSpec register_spec(int nvals = 4) {
  AtomicSpec s;
  s.state_count = nvals;
  AtomicOp st;
  for (int v = 0; v < nvals; ++v) st.args_domain.push_back({uint32_t(v)});
  st.apply = [](int, const std::vector<uint32_t>& args) {
    return std::vector<AtomicOutcome>{{int(args[0]), 0}};
  };
  AtomicOp gt;
  gt.args_domain = {{}};
  gt.apply = [](int a, const std::vector<uint32_t>&) {
    return std::vector<AtomicOutcome>{{a, uint32_t(a)}};
  };
  s.ops = {{"set", st}, {"get", gt}};
  return s;
}

// One boolean flag: add returns 1 exactly when it turns the flag on.
AtomicSpec flag_spec() {
  AtomicSpec s;
  s.state_count = 2;
  AtomicOp add;
  add.args_domain = {{1}};
  add.apply = [](int a, const std::vector<uint32_t>&) {
    return std::vector<AtomicOutcome>{{1, a == 0 ? 1u : 0u}};
  };
  s.ops = {{"add", add}};
  return s;
}

void inv(History& h, int tid, int seq, std::string op,
         std::vector<uint32_t> args = {}) {
  h.events.push_back(
      {HistEvent::Kind::Invoke, {tid, seq}, std::move(op), std::move(args), 0});
}
void res(History& h, int tid, int seq, uint32_t ret) {
  h.events.push_back({HistEvent::Kind::Respond, {tid, seq}, "", {}, ret});
}

// Replays a witness against the history it came from: placed in precedence
// order, each step a real transition, every completed operation placed once
// with its recorded return.
void check_witness(const History& h, const AtomicSpec& spec,
                   const std::vector<LinStep>& order) {
  std::map<OpId, std::pair<int, int>> window;  // id -> (invoke, respond) index
  std::map<OpId, uint32_t> rets;
  for (int i = 0; i < (int)h.events.size(); ++i) {
    const HistEvent& e = h.events[i];
    if (e.kind == HistEvent::Kind::Invoke)
      window[e.id] = {i, -1};
    else {
      window[e.id].second = i;
      rets[e.id] = e.ret;
    }
  }
  int state = spec.initial;
  std::set<OpId> placed;
  for (size_t x = 0; x < order.size(); ++x) {
    const LinStep& s = order[x];
    CHECK(placed.insert(s.id).second);
    for (size_t y = x + 1; y < order.size(); ++y) {
      int res_y = window.at(order[y].id).second;
      REQUIRE((res_y < 0 || res_y > window.at(s.id).first));
    }
    const AtomicOp& op = spec.ops.at(s.op);
    REQUIRE(spec.op_allowed(op, state, s.args));
    bool hit = false;
    for (const AtomicOutcome& out : op.apply(state, s.args))
      hit = hit || (out.state == s.state_after && out.ret == s.ret);
    REQUIRE(hit);
    CHECK(s.completed == (window.at(s.id).second >= 0));
    if (s.completed) CHECK(s.ret == rets.at(s.id));
    state = s.state_after;
  }
  for (const auto& [id, w] : window)
    if (w.second >= 0) CHECK(placed.count(id) == 1);
}

History random_history(std::mt19937& rng, const AtomicSpec& spec, int max_ops) {
  History h;
  int nthreads = 1 + int(rng() % 3);
  std::vector<int> pending(nthreads, -1), seq(nthreads, 0);
  std::vector<std::string> pending_op(nthreads);
  int target = int(rng() % (max_ops + 1));
  int started = 0;
  for (int guard = 0; guard < 200; ++guard) {
    int tid = int(rng() % nthreads);
    if (pending[tid] < 0) {
      if (started == target) continue;
      auto it = spec.ops.begin();
      std::advance(it, rng() % spec.ops.size());
      const auto& dom = it->second.args_domain;
      inv(h, tid, seq[tid], it->first, dom[rng() % dom.size()]);
      pending[tid] = seq[tid]++;
      pending_op[tid] = it->first;
      ++started;
    } else if (rng() % 2) {
      // plausible returns often, junk sometimes, so both verdicts occur
      uint32_t ret = rng() % 4 ? rng() % 2 : rng() % uint32_t(spec.state_count);
      if (pending_op[tid] == "set") ret = rng() % 4 ? 0 : 1;
      res(h, tid, pending[tid], ret);
      pending[tid] = -1;
    }
    bool all_done = started == target;
    for (int t = 0; t < nthreads; ++t) all_done = all_done && pending[t] < 0;
    if (all_done && rng() % 2) break;
  }
  return h;
}

const char* kLockedAdd = R"(
int present;
lock l;
fn client() {
  invoke add(1);
  var b = 0;
  acquire(l);
  if (present == 0) { present = 1; b = 1; }
  release(l);
  respond(b);
}
fn main() {
  makelock(l); release(l);
  spawn client();
  spawn client();
}
)";

const char* kBrokenAdd = R"(
int present;
lock l;
fn client() {
  invoke add(1);
  acquire(l);
  present = 1;
  release(l);
  respond(1);
}
fn main() {
  makelock(l); release(l);
  spawn client();
  spawn client();
}
)";

}  // namespace

TEST_CASE("the empty history is linearizable") {
  LinVerdict v = check_linearizable(History{}, register_spec());
  CHECK(v.ok);
  CHECK(v.order.empty());
  CHECK(linearizable_oracle(History{}, register_spec()));
}

TEST_CASE("a read after a completed write must see it") {
  AtomicSpec spec = register_spec();
  History h;
  inv(h, 0, 0, "set", {1});
  res(h, 0, 0, 0);
  inv(h, 0, 1, "get");
  res(h, 0, 1, 0);  // stale read
  LinVerdict v = check_linearizable(h, spec);
  REQUIRE_FALSE(v.ok);
  CHECK(v.order.size() == 1);  // only the write places
  CHECK_THAT(v.reason, ContainsSubstring("no linearization"));
  CHECK_THAT(v.reason, ContainsSubstring("1 of 2"));
  CHECK_FALSE(linearizable_oracle(h, spec));
}

TEST_CASE("an overlapping read may order before the write") {
  AtomicSpec spec = register_spec();
  History h;
  inv(h, 0, 0, "set", {1});
  inv(h, 1, 0, "get");
  res(h, 1, 0, 0);
  res(h, 0, 0, 0);
  LinVerdict v = check_linearizable(h, spec);
  REQUIRE(v.ok);
  REQUIRE(v.order.size() == 2);
  CHECK(v.order[0].op == "get");
  CHECK(v.order[1].op == "set");
  check_witness(h, spec, v.order);
  CHECK(linearizable_oracle(h, spec));
}

TEST_CASE("a pending write can be completed or dropped as needed") {
  AtomicSpec spec = register_spec();
  History seen;  // the read can only return 1 if the pending write took effect
  inv(seen, 0, 0, "set", {1});
  inv(seen, 1, 0, "get");
  res(seen, 1, 0, 1);
  LinVerdict v = check_linearizable(seen, spec);
  REQUIRE(v.ok);
  REQUIRE(v.order.size() == 2);
  CHECK(v.order[0].op == "set");
  CHECK_FALSE(v.order[0].completed);
  check_witness(seen, spec, v.order);
  CHECK(linearizable_oracle(seen, spec));

  History missed;
  inv(missed, 0, 0, "set", {1});
  inv(missed, 1, 0, "get");
  res(missed, 1, 0, 0);
  LinVerdict w = check_linearizable(missed, spec);
  REQUIRE(w.ok);
  CHECK(w.order.size() == 1);  // the write is dropped
  CHECK(w.order[0].op == "get");
  CHECK(linearizable_oracle(missed, spec));
}

TEST_CASE("the search backtracks through relational outcomes") {
  AtomicSpec spec;
  spec.state_count = 2;
  AtomicOp roll;
  roll.args_domain = {{}};
  roll.apply = [](int, const std::vector<uint32_t>&) {
    return std::vector<AtomicOutcome>{{0, 0}, {1, 0}};
  };
  AtomicOp ask;
  ask.args_domain = {{}};
  ask.apply = [](int a, const std::vector<uint32_t>&) {
    return std::vector<AtomicOutcome>{{a, uint32_t(a)}};
  };
  spec.ops = {{"roll", roll}, {"ask", ask}};

  History h;
  inv(h, 0, 0, "roll");
  res(h, 0, 0, 0);
  inv(h, 0, 1, "ask");
  res(h, 0, 1, 1);
  LinVerdict v = check_linearizable(h, spec);
  REQUIRE(v.ok);  // the roll may land on either state
  check_witness(h, spec, v.order);
  CHECK(linearizable_oracle(h, spec));
}

TEST_CASE("preconditions gate where an operation may take effect") {
  AtomicSpec spec;
  spec.state_count = 2;
  AtomicOp once;
  once.args_domain = {{}};
  once.allowed = [](int a, const std::vector<uint32_t>&) { return a == 0; };
  once.apply = [](int, const std::vector<uint32_t>&) {
    return std::vector<AtomicOutcome>{{1, 0}};
  };
  spec.ops = {{"once", once}};

  History one;
  inv(one, 0, 0, "once");
  res(one, 0, 0, 0);
  CHECK(check_linearizable(one, spec).ok);

  History twice = one;
  inv(twice, 0, 1, "once");
  res(twice, 0, 1, 0);
  CHECK_FALSE(check_linearizable(twice, spec).ok);
  CHECK_FALSE(linearizable_oracle(twice, spec));
}

TEST_CASE("malformed histories and specs are rejected") {
  AtomicSpec spec = register_spec();
  History h;
  res(h, 0, 0, 0);
  CHECK_THROWS_WITH(check_linearizable(h, spec),
                    ContainsSubstring("responds without a pending invoke"));

  History dbl;
  inv(dbl, 0, 0, "get");
  inv(dbl, 0, 1, "get");
  CHECK_THROWS_WITH(check_linearizable(dbl, spec),
                    ContainsSubstring("previous operation is pending"));

  History alien;
  inv(alien, 0, 0, "pop");
  CHECK_THROWS_WITH(check_linearizable(alien, spec),
                    ContainsSubstring("not in the atomic spec"));

  History big;
  for (int k = 0; k < 65; ++k) {
    inv(big, 0, k, "get");
    res(big, 0, k, 0);
  }
  CHECK_THROWS_AS(check_linearizable(big, spec), bound_error);

  AtomicSpec bad = register_spec();
  bad.initial = 9;
  CHECK_THROWS_WITH(validate_spec(bad), ContainsSubstring("out of range"));
  AtomicSpec hollow;
  hollow.ops["noop"] = AtomicOp{{{}}, nullptr, nullptr};
  CHECK_THROWS_WITH(validate_spec(hollow),
                    ContainsSubstring("no transition relation"));
  AtomicSpec empty_out;
  empty_out.ops["stuck"] =
      AtomicOp{{{}}, nullptr, [](int, const std::vector<uint32_t>&) {
                 return std::vector<AtomicOutcome>{};
               }};
  CHECK_THROWS_WITH(validate_spec(empty_out), ContainsSubstring("no outcome"));
  AtomicSpec wild;
  wild.ops["jump"] =
      AtomicOp{{{}}, nullptr, [](int, const std::vector<uint32_t>&) {
                 return std::vector<AtomicOutcome>{{5, 0}};
               }};
  CHECK_THROWS_WITH(validate_spec(wild), ContainsSubstring("out of range"));
  CHECK_NOTHROW(validate_spec(register_spec()));
}

TEST_CASE("the memoized search agrees with the permutation oracle") {
  AtomicSpec spec = register_spec();
  std::mt19937 rng(20260822u);
  int lin = 0, nonlin = 0;
  for (int trial = 0; trial < 400; ++trial) {
    History h = random_history(rng, spec, 6);
    LinVerdict v = check_linearizable(h, spec);
    bool oracle = linearizable_oracle(h, spec);
    INFO(show_history(h));
    REQUIRE(v.ok == oracle);
    if (v.ok) {
      check_witness(h, spec, v.order);
      ++lin;
    } else {
      ++nonlin;
    }
  }
  CHECK(lin > 50);
  CHECK(nonlin > 50);
}

TEST_CASE("sequential executions through the spec always linearize") {
  std::mt19937 rng(7u);
  AtomicSpec reg = register_spec();
  AtomicSpec dice;
  dice.state_count = 3;
  AtomicOp roll;
  roll.args_domain = {{}};
  roll.apply = [](int, const std::vector<uint32_t>&) {
    return std::vector<AtomicOutcome>{{0, 0}, {1, 0}, {2, 0}};
  };
  AtomicOp ask;
  ask.args_domain = {{}};
  ask.apply = [](int a, const std::vector<uint32_t>&) {
    return std::vector<AtomicOutcome>{{a, uint32_t(a)}};
  };
  dice.ops = {{"roll", roll}, {"ask", ask}};

  for (const AtomicSpec& spec : {reg, dice}) {
    for (int trial = 0; trial < 100; ++trial) {
      History h;
      int state = spec.initial;
      int len = int(rng() % 6);
      for (int k = 0; k < len; ++k) {
        auto it = spec.ops.begin();
        std::advance(it, rng() % spec.ops.size());
        const auto& dom = it->second.args_domain;
        const auto& args = dom[rng() % dom.size()];
        if (!spec.op_allowed(it->second, state, args)) continue;
        auto outs = it->second.apply(state, args);
        const AtomicOutcome& out = outs[rng() % outs.size()];
        inv(h, 0, k, it->first, args);
        res(h, 0, k, out.ret);
        state = out.state;
      }
      LinVerdict v = check_linearizable(h, spec);
      INFO(show_history(h));
      REQUIRE(v.ok);
      CHECK(linearizable_oracle(h, spec));
    }
  }
}

TEST_CASE("histories read off the machine check out") {
  Compiled c = compile_text(kLockedAdd);
  std::set<History> hs = collect_histories(c);
  REQUIRE(hs.size() >= 2);  // disjoint and overlapping windows both occur
  AtomicSpec spec = flag_spec();
  for (const History& h : hs) {
    INFO(show_history(h));
    int invokes = 0, wins = 0;
    for (const HistEvent& e : h.events) {
      invokes += e.kind == HistEvent::Kind::Invoke;
      wins += e.kind == HistEvent::Kind::Respond && e.ret == 1;
    }
    CHECK(invokes == 2);
    CHECK(wins == 1);  // exactly one add turned the flag on
    LinVerdict v = check_linearizable(h, spec);
    REQUIRE(v.ok);
    check_witness(h, spec, v.order);
    int placed_wins = 0;
    for (const LinStep& s : v.order) placed_wins += s.ret == 1;
    CHECK(placed_wins == 1);
  }
}

TEST_CASE("the atomic triple holds for the locked flag and not for the liar") {
  AtomicSpec spec = flag_spec();
  AtomicTripleVerdict good = check_atomic_triple(compile_text(kLockedAdd), spec);
  CHECK(good.ok);
  CHECK(good.report.terminals.size() >= 1);

  AtomicTripleVerdict bad = check_atomic_triple(compile_text(kBrokenAdd), spec);
  REQUIRE_FALSE(bad.ok);
  CHECK_FALSE(bad.exhausted);
  CHECK_THAT(bad.reason, ContainsSubstring("admits no linearization"));

  // the liar's histories refute offline too
  for (const History& h : collect_histories(compile_text(kBrokenAdd)))
    CHECK_FALSE(check_linearizable(h, spec).ok);
}

TEST_CASE("triple checking reports exhausted bounds apart from refutations") {
  AtomicSpec spec = flag_spec();
  ExploreOptions opt;
  opt.bounds.max_states = 3;
  AtomicTripleVerdict v =
      check_atomic_triple(compile_text(kLockedAdd), spec, opt);
  CHECK_FALSE(v.ok);
  CHECK(v.exhausted);
  CHECK(v.reason.empty());

  Compiled alien = compile_text("fn main() { invoke pop(); respond(0); }");
  CHECK_THROWS_WITH(check_atomic_triple(alien, spec),
                    ContainsSubstring("not in the atomic spec"));
}

TEST_CASE("histories render compactly") {
  History h;
  inv(h, 0, 0, "set", {1, 2});
  res(h, 0, 0, 7);
  CHECK(show_history(h) == "t0 set(1,2); t0 -> 7");
  CHECK(show_history(History{}) == "(empty)");
}
