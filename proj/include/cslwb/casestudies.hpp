#pragma once
// The workbench's flagship programs: a lock-guarded parallel counter and a
// lock-free open-addressing hash table, as toy-language sources with checking
// harnesses, the abstract-map specification the table is checked against,
// and a brute-force verification of the probe discipline's unique-index
// property.

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "cslwb/lincheck.hpp"

namespace cslwb {

// Two threads increment a counter under a lock; a second lock, created held
// and released by the spawned thread, signals its completion so both locks
// can be reclaimed at the end.
inline const char* increment_program() {
  return R"(
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
  ctr = 0;
  makelock(ctr_lock);
  release(ctr_lock);
  makelock(thread_lock);
  spawn thread_func();

  incr();

  acquire(thread_lock);
  acquire(ctr_lock);
  freelock(thread_lock);
  freelock(ctr_lock);
}
)";
}

// the same program with the counter lock not taken: the increments race
inline const char* increment_unlocked_program() {
  return R"(
int ctr;
lock ctr_lock;
lock thread_lock;

fn incr() {
  ctr = ctr + 1;
}

fn thread_func() {
  incr();
  release(thread_lock);
}

fn main() {
  ctr = 0;
  makelock(ctr_lock);
  release(ctr_lock);
  makelock(thread_lock);
  spawn thread_func();

  incr();

  acquire(thread_lock);
  acquire(ctr_lock);
  freelock(thread_lock);
  freelock(ctr_lock);
}
)";
}

// only the spawned thread increments: the counter ends at 1, not 2
inline const char* increment_once_program() {
  return R"(
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
  ctr = 0;
  makelock(ctr_lock);
  release(ctr_lock);
  makelock(thread_lock);
  spawn thread_func();

  acquire(thread_lock);
  acquire(ctr_lock);
  freelock(thread_lock);
  freelock(ctr_lock);
}
)";
}

struct CaseResult {
  bool ok = false;
  std::string detail;
  ExplorationReport report;
};

// explores the counter program, insisting on clean runs that end with the
// counter at exactly `expected` and both locks reclaimed
inline CaseResult increment_case(const char* text = nullptr, int expected = 2) {
  CaseResult r;
  Compiled c = compile_text(text ? text : increment_program());
  r.report = explore(c, {});
  if (!r.report.clean()) {
    r.detail = "exploration is not clean";
    return r;
  }
  if (r.report.terminals.empty()) {
    r.detail = "no terminal states";
    return r;
  }
  for (const Terminal& t : r.report.terminals) {
    if (t.at("ctr") != std::vector<uint32_t>{uint32_t(expected)}) {
      r.detail = "a terminal ends with ctr = " +
                 std::to_string(t.at("ctr")[0]) + ", not " +
                 std::to_string(expected);
      return r;
    }
    for (const char* lk : {"ctr_lock", "thread_lock"})
      if (t.at(lk) != std::vector<uint32_t>{0}) {
        r.detail = std::string("lock '") + lk + "' was not reclaimed";
        return r;
      }
  }
  r.ok = true;
  return r;
}

// Hash table shape: a power-of-two array of key/value cell pairs, probed
// linearly with masked wraparound. Key 0 marks an empty slot, so usable
// keys and values are nonzero and drawn from small declared domains.
struct TableConfig {
  int size = 4;    // power of two: probing masks the index by size-1
  int width = 16;  // machine bit width for emitted programs
  std::vector<uint32_t> keys{1, 2, 3};
  std::vector<uint32_t> vals{1, 2, 3};
  std::function<uint32_t(uint32_t)> hash;  // null: identity in the model,
                                           // multiplicative in the native table
  bool guard_full = false;  // native only: throw instead of probing forever
};

inline void validate_table(const TableConfig& cfg) {
  if (cfg.size < 1 || cfg.size > 1024 || (cfg.size & (cfg.size - 1)))
    throw usage_error("table size must be a power of two between 1 and 1024");
  if (cfg.width < 1 || cfg.width > 16)
    throw usage_error("table width must be between 1 and 16");
  uint32_t mask = cfg.width == 16 ? 0xffffu : (1u << cfg.width) - 1;
  if (cfg.keys.empty() || cfg.vals.empty())
    throw usage_error("a table needs at least one usable key and value");
  for (auto* dom : {&cfg.keys, &cfg.vals})
    for (uint32_t x : *dom) {
      if (x == 0)
        throw usage_error("0 is reserved for empty cells");
      if (x > mask)
        throw usage_error(std::to_string(x) + " does not fit the table width");
    }
  for (size_t i = 0; i < cfg.keys.size(); ++i)
    for (size_t j = i + 1; j < cfg.keys.size(); ++j)
      if (cfg.keys[i] == cfg.keys[j])
        throw usage_error("duplicate key in the table domain");
}

inline uint32_t model_hash(const TableConfig& cfg, uint32_t key) {
  return (cfg.hash ? cfg.hash(key) : key) & uint32_t(cfg.size - 1);
}

namespace casestudies_detail {

// the starting probe index as program text over the parameter `key`
inline std::string hash_stmt(const TableConfig& cfg) {
  if (!cfg.hash) return "  var idx = key;\n";
  std::string out = "  var idx = 0;\n";
  for (uint32_t k : cfg.keys)
    out += "  if (key == " + std::to_string(k) + ") { idx = " +
           std::to_string(model_hash(cfg, k)) + "; }\n";
  return out;
}

}  // namespace casestudies_detail

// The table operations in the toy language, minus a main function. A set
// probes from the key's hash, skipping slots held by other keys, claims an
// empty slot by compare-and-swap (re-loading after a failed claim), and
// stores the value once a slot owns the key. A get probes the same chain
// and returns the value at the key, or 0 at an empty slot. An add claims
// exactly like a set but reports whether it was the claimer, declining
// when it finds the key already present.
inline std::string hashtable_model(const TableConfig& cfg) {
  validate_table(cfg);
  const std::string mask = std::to_string(cfg.size - 1);
  const std::string hash = casestudies_detail::hash_stmt(cfg);
  std::ostringstream out;
  out << "width " << cfg.width << ";\n"
      << "atomic int keys[" << cfg.size << "];\n"
      << "atomic int vals[" << cfg.size << "];\n\n";
  out << "fn set_item(key, value) {\n"
      << hash
      << "  while (1) {\n"
         "    idx = idx & " << mask << ";\n"
         "    var probed = atomic_load(keys[idx]);\n"
         "    if (probed != key) {\n"
         "      if (probed != 0) { idx = idx + 1; continue; }\n"
         "      var result = cas(keys[idx], 0, key);\n"
         "      if (!result) {\n"
         "        probed = atomic_load(keys[idx]);\n"
         "        if (probed != key) { idx = idx + 1; continue; }\n"
         "      }\n"
         "    }\n"
         "    atomic_store(vals[idx], value);\n"
         "    return;\n"
         "  }\n"
         "}\n\n";
  out << "fn get_item(key) {\n"
      << hash
      << "  while (1) {\n"
         "    idx = idx & " << mask << ";\n"
         "    var probed = atomic_load(keys[idx]);\n"
         "    if (probed == key) { return atomic_load(vals[idx]); }\n"
         "    if (probed == 0) { return 0; }\n"
         "    idx = idx + 1;\n"
         "  }\n"
         "}\n\n";
  out << "fn add_item(key, value) {\n"
      << hash
      << "  while (1) {\n"
         "    idx = idx & " << mask << ";\n"
         "    var probed = atomic_load(keys[idx]);\n"
         "    if (probed == key) { return 0; }\n"
         "    if (probed == 0) {\n"
         "      var claimed = cas(keys[idx], 0, key);\n"
         "      if (claimed) { atomic_store(vals[idx], value); return 1; }\n"
         "      probed = atomic_load(keys[idx]);\n"
         "      if (probed == key) { return 0; }\n"
         "    }\n"
         "    idx = idx + 1;\n"
         "  }\n"
         "}\n\n";
  return out.str();
}

struct TableOp {
  enum class Kind { Set, Get, Add };
  Kind kind{};
  uint32_t key = 1;
  uint32_t val = 0;  // unused for Get
};

inline TableOp op_set(uint32_t k, uint32_t v) {
  return {TableOp::Kind::Set, k, v};
}
inline TableOp op_get(uint32_t k) { return {TableOp::Kind::Get, k, 0}; }
inline TableOp op_add(uint32_t k, uint32_t v) {
  return {TableOp::Kind::Add, k, v};
}

inline std::string show_op(const TableOp& op) {
  switch (op.kind) {
    case TableOp::Kind::Set:
      return "set(" + std::to_string(op.key) + "," + std::to_string(op.val) +
             ")";
    case TableOp::Kind::Get:
      return "get(" + std::to_string(op.key) + ")";
    case TableOp::Kind::Add:
      return "add(" + std::to_string(op.key) + "," + std::to_string(op.val) +
             ")";
  }
  return "?";
}

// One client thread per op list, spawned from main. Instrumented clients
// bracket each operation with invoke/respond so histories can be read off
// the trace; the operation names match the abstract-map spec.
inline std::string hashtable_harness(
    const TableConfig& cfg, const std::vector<std::vector<TableOp>>& clients,
    bool instrument = true) {
  std::ostringstream out;
  out << hashtable_model(cfg);
  int tmp = 0;
  for (size_t t = 0; t < clients.size(); ++t) {
    out << "fn client" << t << "() {\n";
    for (const TableOp& op : clients[t]) {
      std::string k = std::to_string(op.key), v = std::to_string(op.val);
      switch (op.kind) {
        case TableOp::Kind::Set:
          if (instrument) out << "  invoke set(" << k << ", " << v << ");\n";
          out << "  set_item(" << k << ", " << v << ");\n";
          if (instrument) out << "  respond(0);\n";
          break;
        case TableOp::Kind::Get:
          if (instrument) {
            out << "  invoke get(" << k << ");\n"
                << "  var r" << tmp << " = get_item(" << k << ");\n"
                << "  respond(r" << tmp << ");\n";
            ++tmp;
          } else {
            out << "  get_item(" << k << ");\n";
          }
          break;
        case TableOp::Kind::Add:
          if (instrument) {
            out << "  invoke add(" << k << ", " << v << ");\n"
                << "  var r" << tmp << " = add_item(" << k << ", " << v
                << ");\n"
                << "  respond(r" << tmp << ");\n";
            ++tmp;
          } else {
            out << "  add_item(" << k << ", " << v << ");\n";
          }
          break;
      }
    }
    out << "}\n\n";
  }
  out << "fn main() {\n";
  for (size_t t = 0; t < clients.size(); ++t)
    out << "  spawn client" << t << "();\n";
  out << "}\n";
  return out.str();
}

// Abstract map states are packed mixed-radix: per key, 0 for absent or
// 1+index of its value.
inline int map_state_count(const TableConfig& cfg) {
  int n = 1;
  for (size_t i = 0; i < cfg.keys.size(); ++i)
    n *= int(cfg.vals.size()) + 1;
  return n;
}

inline int map_entry(const TableConfig& cfg, int state, size_t key_index) {
  int radix = int(cfg.vals.size()) + 1;
  for (size_t i = 0; i < key_index; ++i) state /= radix;
  return state % radix;
}

inline int map_update(const TableConfig& cfg, int state, size_t key_index,
                      int vslot) {
  int radix = int(cfg.vals.size()) + 1;
  int scale = 1;
  for (size_t i = 0; i < key_index; ++i) scale *= radix;
  int old = (state / scale) % radix;
  return state + (vslot - old) * scale;
}

// The map the table is checked against: set stores, get returns the stored
// value or 0 for an absent key, add stores only when the key is absent and
// reports whether it did. The get transition leaves the state untouched.
inline AtomicSpec abstract_map_spec(const TableConfig& cfg) {
  validate_table(cfg);
  AtomicSpec spec;
  spec.state_count = map_state_count(cfg);
  TableConfig c = cfg;  // captured by the transition closures

  auto key_index = [c](uint32_t k) {
    for (size_t i = 0; i < c.keys.size(); ++i)
      if (c.keys[i] == k) return int(i);
    return -1;
  };
  auto val_slot = [c](uint32_t v) {
    for (size_t i = 0; i < c.vals.size(); ++i)
      if (c.vals[i] == v) return int(i) + 1;
    return -1;
  };
  auto known = [key_index, val_slot](const std::vector<uint32_t>& args,
                                     bool with_val) {
    if (args.size() != (with_val ? 2u : 1u)) return false;
    if (key_index(args[0]) < 0) return false;
    return !with_val || val_slot(args[1]) > 0;
  };

  AtomicOp set;
  AtomicOp add;
  for (uint32_t k : cfg.keys)
    for (uint32_t v : cfg.vals) {
      set.args_domain.push_back({k, v});
      add.args_domain.push_back({k, v});
    }
  set.allowed = [known](int, const std::vector<uint32_t>& a) {
    return known(a, true);
  };
  set.apply = [c, key_index, val_slot](int s, const std::vector<uint32_t>& a) {
    return std::vector<AtomicOutcome>{
        {map_update(c, s, size_t(key_index(a[0])), val_slot(a[1])), 0}};
  };
  add.allowed = set.allowed;
  add.apply = [c, key_index, val_slot](int s, const std::vector<uint32_t>& a) {
    size_t ki = size_t(key_index(a[0]));
    if (map_entry(c, s, ki) != 0) return std::vector<AtomicOutcome>{{s, 0}};
    return std::vector<AtomicOutcome>{
        {map_update(c, s, ki, val_slot(a[1])), 1}};
  };

  AtomicOp get;
  for (uint32_t k : cfg.keys) get.args_domain.push_back({k});
  get.allowed = [known](int, const std::vector<uint32_t>& a) {
    return known(a, false);
  };
  get.apply = [c, key_index](int s, const std::vector<uint32_t>& a) {
    int e = map_entry(c, s, size_t(key_index(a[0])));
    return std::vector<AtomicOutcome>{
        {s, e == 0 ? 0 : c.vals[size_t(e - 1)]}};
  };

  spec.ops = {{"set", set}, {"get", get}, {"add", add}};
  spec.show = [c](int s) {
    std::string out = "{";
    bool first = true;
    for (size_t i = 0; i < c.keys.size(); ++i) {
      int e = map_entry(c, s, i);
      if (e == 0) continue;
      if (!first) out += ",";
      first = false;
      out += std::to_string(c.keys[i]) + ":" +
             std::to_string(c.vals[size_t(e - 1)]);
    }
    return out + "}";
  };
  return spec;
}

namespace casestudies_detail {

inline const GlobalInfo& table_array(const Compiled& c, const char* name) {
  auto it = c.global_index.find(name);
  if (it == c.global_index.end())
    throw usage_error(std::string("no '") + name + "' array");
  return c.globals[size_t(it->second)];
}

}  // namespace casestudies_detail

// key cell 0 forces value cell 0, in every reachable state
inline std::function<std::optional<std::string>(const Compiled&,
                                                const MachineState&)>
table_entry_invariant() {
  return [](const Compiled& c,
            const MachineState& s) -> std::optional<std::string> {
    const GlobalInfo& ks = casestudies_detail::table_array(c, "keys");
    const GlobalInfo& vs = casestudies_detail::table_array(c, "vals");
    for (int i = 0; i < ks.size; ++i)
      if (s.mem[size_t(ks.base + i)].value == 0 &&
          s.mem[size_t(vs.base + i)].value != 0)
        return "slot " + std::to_string(i) +
               " holds a value under an empty key";
    return std::nullopt;
  };
}

// a claimed key cell never changes again
inline std::function<std::optional<std::string>(
    const Compiled&, const MachineState&, const Event&, const MachineState&)>
table_key_stability() {
  return [](const Compiled& c, const MachineState& before, const Event&,
            const MachineState& after) -> std::optional<std::string> {
    const GlobalInfo& ks = casestudies_detail::table_array(c, "keys");
    for (int i = 0; i < ks.size; ++i) {
      uint32_t was = before.mem[size_t(ks.base + i)].value;
      uint32_t now = after.mem[size_t(ks.base + i)].value;
      if (was != 0 && now != was)
        return "slot " + std::to_string(i) + " changed key " +
               std::to_string(was) + " -> " + std::to_string(now);
    }
    return std::nullopt;
  };
}

// Every interleaving of the harness against the abstract map, with the
// entry invariant and key stability checked at each state and step.
//
// Caveat worth knowing when choosing clients: add publishes its claim (the
// key cell) one step before its value lands, and declines as soon as it
// sees a claim. A concurrent observer can therefore respond to the claim
// before the winner's value exists, and histories mixing add with get or
// set on a contended key genuinely fail to linearize. Harnesses of sets
// and gets, or of adds alone, check out.
inline AtomicTripleVerdict hashtable_atomic_case(
    const TableConfig& cfg, const std::vector<std::vector<TableOp>>& clients,
    ExploreOptions opt = {}) {
  Compiled c = compile_text(hashtable_harness(cfg, clients, true));
  opt.state_invariant = table_entry_invariant();
  opt.step_invariant = table_key_stability();
  return check_atomic_triple(c, abstract_map_spec(cfg), opt);
}

// Several threads race to add the same keys, each with its own value; every
// terminal must hold exactly those keys, each carrying one of the racers'
// values.
inline CaseResult add_contention_case(const TableConfig& cfg, int threads,
                                      const std::vector<uint32_t>& contended) {
  validate_table(cfg);
  if (threads < 1) throw usage_error("contention needs at least one thread");
  std::vector<std::vector<TableOp>> clients;
  for (int t = 0; t < threads; ++t) {
    std::vector<TableOp> ops;
    for (uint32_t k : contended)
      ops.push_back(op_add(k, cfg.vals[size_t(t) % cfg.vals.size()]));
    clients.push_back(std::move(ops));
  }
  Compiled c = compile_text(hashtable_harness(cfg, clients, false));
  ExploreOptions opt;
  opt.state_invariant = table_entry_invariant();
  opt.step_invariant = table_key_stability();

  CaseResult r;
  r.report = explore(c, opt);
  if (!r.report.clean()) {
    r.detail = "exploration is not clean";
    return r;
  }
  for (const Terminal& t : r.report.terminals) {
    const std::vector<uint32_t>& ks = t.at("keys");
    const std::vector<uint32_t>& vs = t.at("vals");
    int nonzero = 0;
    for (uint32_t k : ks) nonzero += k != 0;
    if (nonzero != int(contended.size())) {
      r.detail = "a terminal holds " + std::to_string(nonzero) + " keys, not " +
                 std::to_string(contended.size());
      return r;
    }
    for (uint32_t want : contended) {
      int found = -1;
      for (size_t i = 0; i < ks.size(); ++i)
        if (ks[i] == want) found = int(i);
      if (found < 0) {
        r.detail = "key " + std::to_string(want) + " missing from a terminal";
        return r;
      }
      bool racer_value = false;
      for (uint32_t v : cfg.vals) racer_value |= vs[size_t(found)] == v;
      if (!racer_value) {
        r.detail = "key " + std::to_string(want) + " holds foreign value " +
                   std::to_string(vs[size_t(found)]);
        return r;
      }
    }
  }
  r.ok = !r.report.terminals.empty();
  if (!r.ok) r.detail = "no terminal states";
  return r;
}

// The probe discipline pins a key's place: walking from hash(k) over
// observed slots known to hold other keys, the first slot that is empty or
// holds k is the only one where k can live or land.
struct LookupVerdict {
  bool ok = true;
  long tables = 0;
  std::string detail;
};

// Verifies one key/snapshot query over every table consistent with it: the
// snapshot slots are pinned (a claimed key never changes), the slot after
// them ranges over {0, k}, and every other slot over the whole key domain.
// Returns the unique index.
inline int entries_lookup_at(const TableConfig& cfg, uint32_t k,
                             const std::vector<uint32_t>& snapshots,
                             long* tables_out = nullptr) {
  validate_table(cfg);
  if (k == 0) throw usage_error("0 is reserved for empty cells");
  if (int(snapshots.size()) >= cfg.size)
    throw usage_error("snapshots must cover fewer slots than the table");
  for (uint32_t s : snapshots) {
    if (s == 0)
      throw usage_error(
          "a zero snapshot pins nothing: the slot may have grown a key since");
    if (s == k)
      throw usage_error("a snapshot of the key itself already ends the probe");
  }

  const int size = cfg.size;
  const uint32_t mask = uint32_t(size - 1);
  const uint32_t h = model_hash(cfg, k);
  const int i = int(snapshots.size());

  // slots outside the pinned range take any value from the domain
  std::vector<uint32_t> dom{0, k};
  for (uint32_t x : cfg.keys)
    if (x != k) dom.push_back(x);
  for (uint32_t x : snapshots) {
    bool seen = false;
    for (uint32_t d : dom) seen |= d == x;
    if (!seen) dom.push_back(x);
  }

  std::vector<uint32_t> table(size_t(size), 0);
  for (int j = 0; j < i; ++j)
    table[(h + uint32_t(j)) & mask] = snapshots[size_t(j)];
  const uint32_t stop = (h + uint32_t(i)) & mask;

  // everything outside the pinned range and the stop slot varies freely
  std::vector<int> free_slots;
  {
    std::vector<bool> fixed(size_t(size), false);
    for (int j = 0; j < i; ++j) fixed[(h + uint32_t(j)) & mask] = true;
    fixed[stop] = true;
    for (int j = 0; j < size; ++j)
      if (!fixed[size_t(j)]) free_slots.push_back(j);
  }

  long tables = 0;
  std::vector<size_t> pick(free_slots.size(), 0);
  for (uint32_t stop_val : {uint32_t(0), k}) {
    table[stop] = stop_val;
    std::fill(pick.begin(), pick.end(), 0);
    while (true) {
      for (size_t f = 0; f < free_slots.size(); ++f)
        table[size_t(free_slots[f])] = dom[pick[f]];
      ++tables;

      // walk the chain and insist it lands exactly on the stop slot
      int landed = -1;
      for (int j = 0; j < size; ++j) {
        uint32_t at = (h + uint32_t(j)) & mask;
        uint32_t probed = table[at];
        if (probed == k || probed == 0) {
          landed = int(at);
          break;
        }
      }
      bool bad = landed != int(stop);
      for (int j = 0; !bad && j < i; ++j)
        bad = table[(h + uint32_t(j)) & mask] == k;
      if (bad) {
        std::string t;
        for (int j = 0; j < size; ++j)
          t += (j ? "," : "[") + std::to_string(table[size_t(j)]);
        throw usage_error("probe discipline broken for key " +
                          std::to_string(k) + " over table " + t +
                          "]: landed at " + std::to_string(landed) +
                          ", expected " + std::to_string(stop));
      }

      size_t f = 0;
      while (f < pick.size() && ++pick[f] == dom.size()) pick[f++] = 0;
      if (f == pick.size()) break;
    }
  }
  if (tables_out) *tables_out += tables;
  return int(stop);
}

// the full sweep: every key, every snapshot run the discipline admits
inline LookupVerdict entries_lookup_check(const TableConfig& cfg) {
  validate_table(cfg);
  if (cfg.size > 8)
    throw bound_error("exhaustive lookup checking is for tables of size <= 8");
  LookupVerdict v;
  for (uint32_t k : cfg.keys) {
    std::vector<uint32_t> others;
    for (uint32_t x : cfg.keys)
      if (x != k) others.push_back(x);
    for (int len = 0; len < cfg.size; ++len) {
      if (len > 0 && others.empty()) break;
      std::vector<size_t> pick(size_t(len), 0);
      while (true) {
        std::vector<uint32_t> snap;
        for (size_t p : pick) snap.push_back(others[p]);
        try {
          entries_lookup_at(cfg, k, snap, &v.tables);
        } catch (const usage_error& e) {
          v.ok = false;
          v.detail = e.what();
          return v;
        }
        size_t f = 0;
        while (f < pick.size() && ++pick[f] == others.size()) pick[f++] = 0;
        if (f == pick.size()) break;
      }
    }
  }
  return v;
}

}  // namespace cslwb
