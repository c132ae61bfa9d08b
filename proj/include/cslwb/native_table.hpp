#pragma once
// The hash table again, over real sequentially consistent atomics: the same
// linear probing, empty-slot claim by compare-and-swap with a re-load after
// a failed claim, and value stores only into slots owning the key. Alongside
// it, a multithreaded stress driver that records operation windows and
// checks each against the abstract map, and a sequential cross-check that
// replays op sequences through the exploration model, this table, and the
// abstract transitions side by side.

#include <algorithm>
#include <atomic>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

#include "cslwb/casestudies.hpp"

namespace cslwb {

class NativeTable {
 public:
  explicit NativeTable(const TableConfig& cfg)
      : cfg_(checked(cfg)),
        mask_(uint32_t(cfg.size - 1)),
        entries_(new Entry[size_t(cfg.size)]) {}

  // called between the atomic steps of every operation, so tests can shake
  // the scheduler where it matters
  std::function<void()> pause;

  void set(uint32_t key, uint32_t value) {
    check(key, value);
    uint32_t idx = hash(key);
    int moved = 0;
    for (;;) {
      idx &= mask_;
      step();
      uint32_t probed = entries_[idx].key.load();
      if (probed != key) {
        if (probed != 0) {
          bump(moved);
          ++idx;
          continue;
        }
        uint32_t expect = 0;
        step();
        if (!entries_[idx].key.compare_exchange_strong(expect, key)) {
          step();
          probed = entries_[idx].key.load();
          if (probed != key) {
            bump(moved);
            ++idx;
            continue;
          }
        }
      }
      step();
      entries_[idx].val.store(value);
      return;
    }
  }

  uint32_t get(uint32_t key) const {
    check_key(key);
    uint32_t idx = hash(key);
    int moved = 0;
    for (;;) {
      idx &= mask_;
      step();
      uint32_t probed = entries_[idx].key.load();
      if (probed == key) {
        step();
        return entries_[idx].val.load();
      }
      if (probed == 0) return 0;
      bump(moved);
      ++idx;
    }
  }

  bool add(uint32_t key, uint32_t value) {
    check(key, value);
    uint32_t idx = hash(key);
    int moved = 0;
    for (;;) {
      idx &= mask_;
      step();
      uint32_t probed = entries_[idx].key.load();
      if (probed == key) return false;
      if (probed == 0) {
        uint32_t expect = 0;
        step();
        if (entries_[idx].key.compare_exchange_strong(expect, key)) {
          step();
          entries_[idx].val.store(value);
          return true;
        }
        step();
        probed = entries_[idx].key.load();
        if (probed == key) return false;
      }
      bump(moved);
      ++idx;
    }
  }

  int size() const { return cfg_.size; }
  uint32_t key_at(int i) const { return entries_[size_t(i)].key.load(); }
  uint32_t value_at(int i) const { return entries_[size_t(i)].val.load(); }

 private:
  struct Entry {
    std::atomic<uint32_t> key{0};
    std::atomic<uint32_t> val{0};
  };

  static const TableConfig& checked(const TableConfig& c) {
    validate_table(c);
    return c;
  }

  uint32_t hash(uint32_t key) const {
    if (cfg_.hash) return cfg_.hash(key) & mask_;
    return (key * 0x9e3779b9u >> 16) & mask_;
  }

  void step() const {
    if (pause) pause();
  }

  // probing moves to a fresh slot only past a foreign key, and claimed keys
  // never change, so `size` moves mean the table is full
  void bump(int& moved) const {
    if (cfg_.guard_full && ++moved >= cfg_.size)
      throw bound_error("the table is full: every slot holds another key");
  }

  static void check_key(uint32_t key) {
    if (key == 0) throw usage_error("0 is reserved for empty cells");
  }

  static void check(uint32_t key, uint32_t value) {
    check_key(key);
    if (value == 0) throw usage_error("0 is reserved for unset values");
  }

  TableConfig cfg_;
  uint32_t mask_;
  std::unique_ptr<Entry[]> entries_;
};

struct StressConfig {
  TableConfig table{};
  int threads = 4;
  int ops_per_thread = 1000;
  int window = 8;    // ops per recorded round; each round gets a fresh table
  uint64_t seed = 1;
  bool adds = false;  // race adds for contested keys instead of sets and gets
  bool fuzz = true;   // inject yields between the probe steps
};

struct StressResult {
  long ops = 0;
  long rounds = 0;
  bool ok = false;
  std::string detail;
};

// Hammers fresh tables in rounds of `window` operations spread over the
// worker threads, recording invoke/respond events in a shared log, and
// checks every recorded window against the abstract map. A concurrent
// observer probes each slot, value cell first, so a nonzero value under an
// empty key or a changed key is a genuine violation and not a read-order
// artifact.
inline StressResult native_stress(const StressConfig& sc) {
  validate_table(sc.table);
  if (sc.threads < 1 || sc.threads > 64)
    throw usage_error("stress runs 1 to 64 threads");
  if (sc.window < 1 || sc.window > 16)
    throw usage_error("recorded windows hold 1 to 16 operations");
  if (sc.ops_per_thread < 1) throw usage_error("each thread needs work");

  const AtomicSpec spec = abstract_map_spec(sc.table);
  const long total = long(sc.threads) * sc.ops_per_thread;
  StressResult r;
  std::mt19937_64 seeds(sc.seed);

  while (r.ops < total) {
    const int round_ops = int(std::min<long>(sc.window, total - r.ops));
    const uint64_t round_seed = seeds();
    NativeTable tab(sc.table);
    if (sc.fuzz)
      tab.pause = [] {
        thread_local std::mt19937 jitter{std::random_device{}()};
        if (jitter() % 4 == 0) std::this_thread::yield();
      };

    std::mutex mu;
    History hist;
    std::string complaint;
    auto complain = [&](const std::string& what) {
      std::lock_guard<std::mutex> g(mu);
      if (complaint.empty()) complaint = what;
    };

    auto worker = [&](int t) {
      std::mt19937_64 rng(round_seed ^
                          (0x9e3779b97f4a7c15ull * uint64_t(t + 1)));
      int seq = 0;
      for (int j = t; j < round_ops; j += sc.threads, ++seq) {
        uint32_t k = sc.table.keys[rng() % sc.table.keys.size()];
        uint32_t v = sc.table.vals[rng() % sc.table.vals.size()];
        int kind = sc.adds ? 2 : int(rng() % 2);

        HistEvent inv;
        inv.kind = HistEvent::Kind::Invoke;
        inv.id = {t, seq};
        inv.op = kind == 0 ? "set" : kind == 1 ? "get" : "add";
        inv.args = kind == 1 ? std::vector<uint32_t>{k}
                             : std::vector<uint32_t>{k, v};
        {
          std::lock_guard<std::mutex> g(mu);
          hist.events.push_back(inv);
        }

        uint32_t ret = 0;
        if (kind == 0)
          tab.set(k, v);
        else if (kind == 1)
          ret = tab.get(k);
        else
          ret = tab.add(k, v) ? 1 : 0;

        HistEvent res;
        res.kind = HistEvent::Kind::Respond;
        res.id = {t, seq};
        res.ret = ret;
        {
          std::lock_guard<std::mutex> g(mu);
          hist.events.push_back(res);
        }
      }
    };

    std::atomic<bool> done{false};
    std::thread watcher([&] {
      std::vector<uint32_t> seen(size_t(tab.size()), 0);
      while (!done.load()) {
        for (int i = 0; i < tab.size(); ++i) {
          uint32_t v = tab.value_at(i);
          uint32_t k = tab.key_at(i);
          if (v != 0 && k == 0)
            complain("slot " + std::to_string(i) + " shows value " +
                     std::to_string(v) + " under an empty key");
          if (k != 0 && seen[size_t(i)] != 0 && seen[size_t(i)] != k)
            complain("slot " + std::to_string(i) + " changed key " +
                     std::to_string(seen[size_t(i)]) + " -> " +
                     std::to_string(k));
          if (k != 0) seen[size_t(i)] = k;
        }
        std::this_thread::yield();
      }
    });

    std::vector<std::thread> workers;
    for (int t = 0; t < sc.threads; ++t) workers.emplace_back(worker, t);
    for (std::thread& w : workers) w.join();
    done.store(true);
    watcher.join();

    if (!complaint.empty()) {
      r.detail = complaint;
      return r;
    }
    LinVerdict lv = check_linearizable(hist, spec);
    if (!lv.ok) {
      r.detail = lv.reason;
      return r;
    }
    r.ops += round_ops;
    ++r.rounds;
  }
  r.ok = true;
  return r;
}

struct AgreementResult {
  long sequences = 0;
  bool ok = true;
  std::string detail;
};

namespace native_detail {

// replay one sequence three ways and compare the returns
inline bool agree_once(const TableConfig& cfg, const AtomicSpec& spec,
                       const std::vector<TableOp>& seq,
                       AgreementResult& out) {
  Compiled c = compile_text(hashtable_harness(cfg, {seq}, true));
  MachineState s = initial_state(c);
  s.record_trace = true;
  RunResult rr = run(c, s);
  if (rr.stop != RunResult::Stop::Terminal) {
    out.ok = false;
    out.detail = "the model run did not finish: " + rr.reason;
    return false;
  }
  std::vector<uint32_t> model;
  for (const Event& e : s.trace)
    if (e.kind == EventKind::Respond) model.push_back(e.value);

  NativeTable tab(cfg);
  std::vector<uint32_t> native;
  int state = spec.initial;
  std::vector<uint32_t> abstract;
  for (const TableOp& op : seq) {
    switch (op.kind) {
      case TableOp::Kind::Set:
        tab.set(op.key, op.val);
        native.push_back(0);
        break;
      case TableOp::Kind::Get:
        native.push_back(tab.get(op.key));
        break;
      case TableOp::Kind::Add:
        native.push_back(tab.add(op.key, op.val) ? 1 : 0);
        break;
    }
    const AtomicOp& aop = spec.ops.at(
        op.kind == TableOp::Kind::Set   ? "set"
        : op.kind == TableOp::Kind::Get ? "get"
                                        : "add");
    std::vector<uint32_t> args =
        op.kind == TableOp::Kind::Get
            ? std::vector<uint32_t>{op.key}
            : std::vector<uint32_t>{op.key, op.val};
    std::vector<AtomicOutcome> outs = aop.apply(state, args);
    state = outs.at(0).state;
    abstract.push_back(outs.at(0).ret);
  }

  if (model != native || native != abstract) {
    std::string ops;
    for (const TableOp& op : seq) ops += (ops.empty() ? "" : "; ") + show_op(op);
    auto render = [](const std::vector<uint32_t>& v) {
      std::string s;
      for (uint32_t x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
      return s;
    };
    out.ok = false;
    out.detail = "returns diverge on [" + ops + "]: model " + render(model) +
                 ", native " + render(native) + ", abstract " +
                 render(abstract);
    return false;
  }
  return true;
}

}  // namespace native_detail

// Replays every op sequence up to the given length through the exploration
// model, the native table, and the abstract transitions; all three must
// return the same results, op for op.
inline AgreementResult sequential_agreement(const TableConfig& cfg,
                                            int max_len) {
  validate_table(cfg);
  if (max_len < 1) throw usage_error("sequences need at least one op");
  AtomicSpec spec = abstract_map_spec(cfg);

  std::vector<TableOp> alphabet;
  for (uint32_t k : cfg.keys) {
    alphabet.push_back(op_get(k));
    for (uint32_t v : cfg.vals) {
      alphabet.push_back(op_set(k, v));
      alphabet.push_back(op_add(k, v));
    }
  }

  AgreementResult r;
  for (int len = 1; len <= max_len; ++len) {
    std::vector<size_t> pick(size_t(len), 0);
    for (;;) {
      std::vector<TableOp> seq;
      for (size_t p : pick) seq.push_back(alphabet[p]);
      if (!native_detail::agree_once(cfg, spec, seq, r)) return r;
      ++r.sequences;
      size_t f = 0;
      while (f < pick.size() && ++pick[f] == alphabet.size()) pick[f++] = 0;
      if (f == pick.size()) break;
    }
  }
  return r;
}

}  // namespace cslwb
