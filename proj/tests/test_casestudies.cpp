#include <catch2/catch_amalgamated.hpp>

#include "cslwb/casestudies.hpp"

using namespace cslwb;
using Catch::Matchers::ContainsSubstring;

namespace {

// a small table over one hot key and two values, handy for atomic cases
TableConfig tiny_table() {
  TableConfig cfg;
  cfg.keys = {1};
  cfg.vals = {7, 9};
  return cfg;
}

std::vector<uint32_t> responses(const Compiled& c) {
  MachineState s = initial_state(c);
  s.record_trace = true;
  RunResult r = run(c, s);
  REQUIRE(r.stop == RunResult::Stop::Terminal);
  std::vector<uint32_t> out;
  for (const Event& e : s.trace)
    if (e.kind == EventKind::Respond) out.push_back(e.value);
  return out;
}

}  // namespace

TEST_CASE("both increments land under the lock") {
  CaseResult r = increment_case();
  INFO(r.detail);
  CHECK(r.ok);
  CHECK(r.report.clean());
  CHECK(!r.report.terminals.empty());
  for (const Terminal& t : r.report.terminals)
    CHECK(t.at("ctr") == std::vector<uint32_t>{2});
}

TEST_CASE("the unguarded increments race") {
  Compiled c = compile_text(increment_unlocked_program());
  ExplorationReport rep = explore(c, {});
  CHECK(!rep.races.empty());
  CHECK(rep.races[0].cell == "ctr");

  CaseResult r = increment_case(increment_unlocked_program());
  CHECK(!r.ok);
}

TEST_CASE("a missing increment shows up in the terminals") {
  CaseResult off = increment_case(increment_once_program(), 2);
  CHECK(!off.ok);
  CHECK_THAT(off.detail, ContainsSubstring("ctr = 1"));

  CaseResult on = increment_case(increment_once_program(), 1);
  INFO(on.detail);
  CHECK(on.ok);
}

TEST_CASE("a straight-line script drives the table as a map") {
  TableConfig cfg;  // keys 1..3, vals 1..3, size 4
  std::vector<TableOp> script = {op_set(1, 2), op_get(1), op_add(1, 3),
                                 op_get(1),    op_add(2, 3), op_get(2),
                                 op_get(3),    op_set(1, 1), op_get(1)};
  Compiled c = compile_text(hashtable_harness(cfg, {script}, true));
  CHECK(responses(c) ==
        std::vector<uint32_t>{0, 2, 0, 2, 1, 3, 0, 0, 1});
}

TEST_CASE("collisions chain to the next free slot") {
  TableConfig cfg;
  cfg.keys = {1, 5};  // both map to slot 1 on a size-4 table
  cfg.vals = {2, 3};
  std::vector<TableOp> script = {op_set(1, 2), op_set(5, 3), op_get(5),
                                 op_get(1)};
  Compiled c = compile_text(hashtable_harness(cfg, {script}, true));
  MachineState s = initial_state(c);
  s.record_trace = true;
  REQUIRE(run(c, s).stop == RunResult::Stop::Terminal);

  std::vector<uint32_t> rets;
  for (const Event& e : s.trace)
    if (e.kind == EventKind::Respond) rets.push_back(e.value);
  CHECK(rets == std::vector<uint32_t>{0, 0, 3, 2});

  CHECK(global_value(c, s, "keys", 1) == 1);
  CHECK(global_value(c, s, "keys", 2) == 5);
  CHECK(global_value(c, s, "vals", 1) == 2);
  CHECK(global_value(c, s, "vals", 2) == 3);
}

TEST_CASE("the abstract map spec behaves as a map") {
  TableConfig cfg;
  AtomicSpec spec = abstract_map_spec(cfg);
  validate_spec(spec);
  REQUIRE(spec.state_count == 64);

  const AtomicOp& get = spec.ops.at("get");
  for (int s = 0; s < spec.state_count; ++s)
    for (uint32_t k : cfg.keys) {
      std::vector<AtomicOutcome> outs = get.apply(s, {k});
      REQUIRE(outs.size() == 1);
      CHECK(outs[0].state == s);  // reads never move the map
    }

  // an empty map reads 0 everywhere; set fills exactly one key
  CHECK(get.apply(0, {2})[0].ret == 0);
  int s1 = spec.ops.at("set").apply(0, {2, 3})[0].state;
  CHECK(get.apply(s1, {2})[0].ret == 3);
  CHECK(get.apply(s1, {1})[0].ret == 0);
  CHECK(get.apply(s1, {3})[0].ret == 0);
  CHECK(spec.show_state(s1) == "{2:3}");

  // add lands only on absent keys and says which happened
  std::vector<AtomicOutcome> miss = spec.ops.at("add").apply(s1, {1, 1});
  REQUIRE(miss.size() == 1);
  CHECK(miss[0].ret == 1);
  std::vector<AtomicOutcome> hit = spec.ops.at("add").apply(s1, {2, 1});
  REQUIRE(hit.size() == 1);
  CHECK(hit[0].ret == 0);
  CHECK(hit[0].state == s1);

  // set overwrites in place
  int s2 = spec.ops.at("set").apply(s1, {2, 1})[0].state;
  CHECK(get.apply(s2, {2})[0].ret == 1);

  CHECK(spec.op_allowed(get, 0, {2}));
  CHECK(!spec.op_allowed(get, 0, {4}));
  CHECK(!spec.op_allowed(spec.ops.at("set"), 0, {1, 9}));
}

TEST_CASE("racing sets and gets stay atomic") {
  AtomicTripleVerdict v = hashtable_atomic_case(
      tiny_table(), {{op_set(1, 7), op_get(1)}, {op_set(1, 9)}});
  INFO(v.reason);
  CHECK(v.ok);
  CHECK(v.report.clean());
}

TEST_CASE("racing adds stay atomic") {
  TableConfig cfg;
  cfg.keys = {1, 2};
  cfg.vals = {7, 9};
  AtomicTripleVerdict v = hashtable_atomic_case(
      cfg, {{op_add(1, 7), op_add(2, 7)}, {op_add(1, 9), op_add(2, 9)}});
  INFO(v.reason);
  CHECK(v.ok);
}

TEST_CASE("an early declining add is caught out by a reader") {
  // add publishes its claim one step before the value lands, and a rival
  // add declines on the bare claim; a reader that slips in between sees
  // the key without its value, and no linearization explains all three
  AtomicTripleVerdict v = hashtable_atomic_case(
      tiny_table(), {{op_add(1, 7)}, {op_add(1, 9), op_get(1)}});
  CHECK(!v.ok);
  CHECK(!v.exhausted);
  CHECK_THAT(v.reason, ContainsSubstring("admits no linearization"));
}

TEST_CASE("the table invariant hooks flag broken writers") {
  const char* value_without_key = R"(
width 16;
atomic int keys[4];
atomic int vals[4];
fn main() {
  atomic_store(vals[0], 5);
}
)";
  ExploreOptions opt;
  opt.state_invariant = table_entry_invariant();
  ExplorationReport rep = explore(compile_text(value_without_key), opt);
  REQUIRE(!rep.violations.empty());
  CHECK_THAT(rep.violations[0].what,
             ContainsSubstring("value under an empty key"));

  const char* key_swapper = R"(
width 16;
atomic int keys[4];
atomic int vals[4];
fn main() {
  atomic_store(keys[2], 1);
  atomic_store(vals[2], 5);
  atomic_store(keys[2], 3);
}
)";
  ExploreOptions opt2;
  opt2.step_invariant = table_key_stability();
  ExplorationReport rep2 = explore(compile_text(key_swapper), opt2);
  REQUIRE(!rep2.violations.empty());
  CHECK_THAT(rep2.violations[0].what, ContainsSubstring("changed key 1 -> 3"));
}

TEST_CASE("contended adds land exactly once") {
  TableConfig cfg;
  cfg.keys = {1, 2};
  cfg.vals = {7, 9};
  CaseResult r = add_contention_case(cfg, 2, {1, 2});
  INFO(r.detail);
  CHECK(r.ok);
  CHECK(!r.report.terminals.empty());
  for (const Terminal& t : r.report.terminals) {
    int filled = 0;
    for (uint32_t k : t.at("keys")) filled += k != 0;
    CHECK(filled == 2);
  }
}

TEST_CASE("the probe discipline pins the unique index") {
  TableConfig cfg;
  cfg.size = 8;
  cfg.keys = {1, 2, 3, 4};
  cfg.hash = [](uint32_t) { return 6u; };  // park every chain at slot 6

  long tables = 0;
  CHECK(entries_lookup_at(cfg, 1, {2, 3, 4}, &tables) == 1);  // wraps past 7
  CHECK(tables > 0);
  CHECK(entries_lookup_at(cfg, 1, {}) == 6);
  CHECK(entries_lookup_at(cfg, 2, {3}) == 7);

  CHECK_THROWS_AS(entries_lookup_at(cfg, 0, {}), usage_error);
  CHECK_THROWS_WITH(entries_lookup_at(cfg, 1, {2, 0}),
                    ContainsSubstring("grown a key"));
  CHECK_THROWS_AS(entries_lookup_at(cfg, 1, {1}), usage_error);
  CHECK_THROWS_AS(
      entries_lookup_at(cfg, 1, {2, 3, 4, 2, 3, 4, 2, 3}), usage_error);
}

TEST_CASE("every admissible snapshot run pins its index") {
  LookupVerdict v = entries_lookup_check(TableConfig{});
  INFO(v.detail);
  CHECK(v.ok);
  // 3 keys, 2 observable others, free slots range over {0, k, other, other}:
  // per key, sum over run lengths of 2^len logs * 2 stop values * 4^(3-len)
  // free fillings = 128 + 64 + 32 + 16 = 240
  CHECK(v.tables == 3 * 240);

  TableConfig big;
  big.size = 16;
  CHECK_THROWS_AS(entries_lookup_check(big), bound_error);
}

TEST_CASE("table configurations are validated") {
  TableConfig cfg;
  cfg.size = 3;
  CHECK_THROWS_AS(validate_table(cfg), usage_error);
  cfg = {};
  cfg.keys = {1, 2, 1};
  CHECK_THROWS_AS(validate_table(cfg), usage_error);
  cfg = {};
  cfg.keys = {0};
  CHECK_THROWS_AS(validate_table(cfg), usage_error);
  cfg = {};
  cfg.width = 8;
  cfg.keys = {300};
  CHECK_THROWS_AS(validate_table(cfg), usage_error);
  cfg = {};
  cfg.vals = {};
  CHECK_THROWS_AS(validate_table(cfg), usage_error);
}

TEST_CASE("a full table spins and the exploration closes the loop") {
  TableConfig cfg;
  cfg.size = 1;
  cfg.keys = {1, 2};
  cfg.vals = {7, 9};
  Compiled c = compile_text(
      hashtable_harness(cfg, {{op_set(1, 7), op_set(2, 9)}}, false));

  // the second set probes the one occupied slot forever; the state graph
  // is a cycle, so the search finishes with nothing to report and no
  // terminal to show
  ExplorationReport rep = explore(c, {});
  CHECK(rep.clean());
  CHECK(rep.terminals.empty());

  // the whole graph sits a dozen steps from the root, so only a very short
  // leash cuts fresh states off
  ExploreOptions tight;
  tight.bounds.max_depth = 3;
  ExplorationReport cut = explore(c, tight);
  CHECK(cut.depth_exhausted);
}

TEST_CASE("harness histories read back and linearize") {
  TableConfig cfg = tiny_table();
  Compiled c =
      compile_text(hashtable_harness(cfg, {{op_set(1, 7)}, {op_get(1)}}, true));
  std::set<History> hs = collect_histories(c);
  CHECK(hs.size() >= 2);  // the get lands before or after the set

  AtomicSpec spec = abstract_map_spec(cfg);
  bool saw_zero = false, saw_seven = false;
  for (const History& h : hs) {
    LinVerdict lv = check_linearizable(h, spec);
    INFO(show_history(h));
    CHECK(lv.ok);
    for (const HistEvent& e : h.events)
      if (e.kind == HistEvent::Kind::Respond && e.id.tid == 2) {
        saw_zero |= e.ret == 0;
        saw_seven |= e.ret == 7;
      }
  }
  CHECK(saw_zero);
  CHECK(saw_seven);
}
