#pragma once
// Lowering to a per-thread micro-instruction form in which each instruction
// performs at most one memory access, and the sequentially consistent
// small-step machine over it. Pure compute and control fuse into the next
// visible action, so scheduling points are exactly the memory accesses, lock
// operations, spawns, history events and thread exits.

#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cslwb/lang.hpp"

namespace cslwb {

struct Operand {
  bool is_const = true;
  uint32_t cval = 0;
  int slot = -1;
};

enum class IOp {
  // pure compute / control (never a scheduling point)
  Mov, Un, Bin, AddrOf, Jmp, Br, CallF, RetF,
  // one memory access each
  Load, Store, ALoad, AStore, Cas,
  // synchronization and events
  LockI, SpawnF, EmitEv,
};

// Codes for IOp::Un; extends the surface operators with the bool-normalize
// step that short-circuit lowering needs.
enum class IUn { LogNot, BitNot, Neg, Hash, Bool };

struct Instr {
  IOp op{};
  int dst = -1, dst2 = -1;   // result slots (dst2: cas observed value)
  int glob = -1;             // global index for memory/lock/addr ops
  Operand index{};           // array subscript; valid when indexed
  bool indexed = false;
  Operand x{}, y{};          // operands: value/condition, cas expected/desired
  int target = -1, target2 = -1;  // Jmp/Br destinations
  int fn = -1;               // CallF/SpawnF callee
  int code = 0;              // BinKind / IUn / Stmt::LockOp / event kind
  int opname = -1;           // EmitEv invoke: index into Compiled.opnames
  std::vector<Operand> args; // CallF/SpawnF arguments, EmitEv invoke payload
};

struct CompiledFn {
  std::string name;
  int nparams = 0;
  int nslots = 0;
  std::vector<Instr> code;
};

struct GlobalInfo {
  std::string name;
  CellKind kind{};
  int base = 0;
  int size = 1;
  bool is_array = false;
};

struct Compiled {
  int width = 8;
  std::vector<GlobalInfo> globals;
  int ncells = 0;
  std::vector<CellKind> cell_kind;  // per flattened cell
  std::vector<CompiledFn> fns;
  int entry = 0;
  std::vector<std::string> opnames;
  std::map<std::string, int> fn_index;
  std::map<std::string, int> global_index;

  uint32_t mask() const { return (uint32_t)((1ull << width) - 1); }
};

// Multiplicative hash for the `hash` intrinsic: multiply by an odd constant
// derived from the golden ratio at the program's width and keep the top
// half of the product bits, so low-entropy keys spread before masking.
inline uint32_t hash_value(uint32_t x, int width) {
  uint64_t c = (0x9E3779B97F4A7C15ull >> (64 - width)) | 1ull;
  uint64_t mask = (1ull << width) - 1;
  return (uint32_t)(((uint64_t)x * c >> width / 2) & mask);
}

namespace machine_detail {

constexpr int local_fuel = 4096;  // pure instructions per step before giving up
constexpr int max_frames = 128;
constexpr int max_threads = 64;
constexpr int max_cells = 4096;

struct FnLower {
  const Program& p;
  Compiled& c;
  const Function& f;
  std::map<std::string, int> slot;
  int temp_base = 0;
  int temp_next = 0;
  int temp_high = 0;
  std::vector<Instr> code;
  struct Loop {
    std::vector<int> breaks;     // Jmp indices to patch to loop end
    std::vector<int> continues;  // Jmp indices to patch to the re-test/step
  };
  std::vector<Loop> loops;

  FnLower(const Program& p, Compiled& c, const Function& f) : p(p), c(c), f(f) {
    int n = 0;
    for (const auto& prm : f.params) slot[prm] = n++;
    for (const auto& lcl : f.locals) slot[lcl] = n++;
    temp_base = n;
  }

  int emit(Instr in) {
    code.push_back(std::move(in));
    return (int)code.size() - 1;
  }
  int here() const { return (int)code.size(); }
  int fresh() {
    int s = temp_base + temp_next++;
    if (temp_next > temp_high) temp_high = temp_next;
    return s;
  }
  static Operand cst(uint32_t v) { return Operand{true, v, -1}; }
  static Operand at(int s) { return Operand{false, 0, s}; }

  const GlobalInfo& ginfo(const std::string& n) const {
    return c.globals[c.global_index.at(n)];
  }

  // Lowers a place to (global index, index operand); evaluation happens here
  // so the subscript is ready before the access instruction runs.
  std::pair<int, std::optional<Operand>> lower_place(const PlaceRef& pl) {
    int g = c.global_index.at(pl.global);
    if (!pl.index) return {g, std::nullopt};
    return {g, lower_expr(*pl.index)};
  }

  Operand lower_expr(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Num:
        return cst(e.num & c.mask());
      case Expr::Kind::Name: {
        auto it = slot.find(e.name);
        if (it != slot.end()) return at(it->second);
        int t = fresh();
        Instr in;
        in.op = IOp::Load;
        in.dst = t;
        in.glob = c.global_index.at(e.name);
        emit(std::move(in));
        return at(t);
      }
      case Expr::Kind::Un: {
        Operand a = lower_expr(*e.a);
        int t = fresh();
        Instr in;
        in.op = IOp::Un;
        in.dst = t;
        in.x = a;
        in.code = (int)(e.un == UnKind::LogNot  ? IUn::LogNot
                        : e.un == UnKind::BitNot ? IUn::BitNot
                        : e.un == UnKind::Neg    ? IUn::Neg
                                                 : IUn::Hash);
        emit(std::move(in));
        return at(t);
      }
      case Expr::Kind::Bin: {
        if (e.bin == BinKind::LogAnd || e.bin == BinKind::LogOr)
          return lower_shortcircuit(e);
        Operand a = lower_expr(*e.a);  // operands evaluate left to right
        Operand b = lower_expr(*e.b);
        int t = fresh();
        Instr in;
        in.op = IOp::Bin;
        in.dst = t;
        in.x = a;
        in.y = b;
        in.code = (int)e.bin;
        emit(std::move(in));
        return at(t);
      }
      case Expr::Kind::AddrOf: {
        const GlobalInfo& g = ginfo(e.place.global);
        if (!e.place.index) return cst((uint32_t)g.base & c.mask());
        Operand ix = lower_expr(*e.place.index);
        if (ix.is_const) return cst((g.base + ix.cval) & c.mask());
        int t = fresh();
        Instr in;
        in.op = IOp::AddrOf;
        in.dst = t;
        in.glob = c.global_index.at(e.place.global);
        in.index = ix;
        in.indexed = true;
        emit(std::move(in));
        return at(t);
      }
      case Expr::Kind::AtomicLoad: {
        auto [g, ix] = lower_place(e.place);
        int t = fresh();
        Instr in;
        in.op = IOp::ALoad;
        in.dst = t;
        in.glob = g;
        if (ix) {
          in.index = *ix;
          in.indexed = true;
        }
        emit(std::move(in));
        return at(t);
      }
      case Expr::Kind::Call: {
        std::vector<Operand> args;
        for (const auto& a : e.args) args.push_back(lower_expr(*a));
        int t = fresh();
        Instr in;
        in.op = IOp::CallF;
        in.dst = t;
        in.fn = c.fn_index.at(e.name);
        in.args = std::move(args);
        emit(std::move(in));
        return at(t);
      }
    }
    return cst(0);
  }

  Operand lower_shortcircuit(const Expr& e) {
    int t = fresh();
    Operand a = lower_expr(*e.a);
    int br = emit([&] {
      Instr in;
      in.op = IOp::Br;
      in.x = a;
      return in;
    }());
    // LogAnd falls through to the rhs on true; LogOr on false.
    int rhs_begin = here();
    Operand b = lower_expr(*e.b);
    emit([&] {
      Instr in;
      in.op = IOp::Un;
      in.code = (int)IUn::Bool;
      in.dst = t;
      in.x = b;
      return in;
    }());
    int jend = emit([&] {
      Instr in;
      in.op = IOp::Jmp;
      return in;
    }());
    int other = here();
    emit([&] {
      Instr in;
      in.op = IOp::Mov;
      in.dst = t;
      in.x = cst(e.bin == BinKind::LogAnd ? 0 : 1);
      return in;
    }());
    int end = here();
    if (e.bin == BinKind::LogAnd) {
      code[br].target = rhs_begin;
      code[br].target2 = other;
    } else {
      code[br].target = other;
      code[br].target2 = rhs_begin;
    }
    code[jend].target = end;
    return at(t);
  }

  void lower_block(const std::vector<SPtr>& body) {
    for (const auto& s : body) {
      temp_next = 0;  // temps live within one statement only
      lower_stmt(*s);
    }
  }

  void lower_stmt(const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Var: {
        if (!s.e) return;  // slots start zeroed
        Operand v = lower_expr(*s.e);
        Instr in;
        in.op = IOp::Mov;
        in.dst = slot.at(s.name);
        in.x = v;
        emit(std::move(in));
        return;
      }
      case Stmt::Kind::Assign: {
        Operand v = lower_expr(*s.e);
        auto it = slot.find(s.lhs.global);
        if (it != slot.end()) {
          Instr in;
          in.op = IOp::Mov;
          in.dst = it->second;
          in.x = v;
          emit(std::move(in));
          return;
        }
        Instr in;
        in.op = IOp::Store;
        in.glob = c.global_index.at(s.lhs.global);
        in.y = v;
        emit(std::move(in));
        return;
      }
      case Stmt::Kind::AtomicStore: {
        auto [g, ix] = lower_place(s.lhs);
        Operand v = lower_expr(*s.e);
        Instr in;
        in.op = IOp::AStore;
        in.glob = g;
        if (ix) {
          in.index = *ix;
          in.indexed = true;
        }
        in.y = v;
        emit(std::move(in));
        return;
      }
      case Stmt::Kind::Cas: {
        auto [g, ix] = lower_place(s.lhs);
        Operand expected = lower_expr(*s.e);
        Operand desired = lower_expr(*s.e2);
        Instr in;
        in.op = IOp::Cas;
        in.glob = g;
        if (ix) {
          in.index = *ix;
          in.indexed = true;
        }
        in.x = expected;
        in.y = desired;
        in.dst = slot.at(s.name);
        in.dst2 = s.name2.empty() ? -1 : slot.at(s.name2);
        emit(std::move(in));
        return;
      }
      case Stmt::Kind::Lock: {
        Instr in;
        in.op = IOp::LockI;
        in.glob = c.global_index.at(s.lock_name);
        in.code = (int)s.lock;
        emit(std::move(in));
        return;
      }
      case Stmt::Kind::Spawn: {
        std::vector<Operand> args;
        for (const auto& a : s.args) args.push_back(lower_expr(*a));
        Instr in;
        in.op = IOp::SpawnF;
        in.fn = c.fn_index.at(s.name);
        in.args = std::move(args);
        emit(std::move(in));
        return;
      }
      case Stmt::Kind::ExprStmt:
        lower_expr(*s.e);
        return;
      case Stmt::Kind::If: {
        Operand cv = lower_expr(*s.cond);
        int br = emit([&] {
          Instr in;
          in.op = IOp::Br;
          in.x = cv;
          return in;
        }());
        code[br].target = here();
        lower_block(s.body);
        if (s.els.empty()) {
          code[br].target2 = here();
          return;
        }
        int jend = emit([&] {
          Instr in;
          in.op = IOp::Jmp;
          return in;
        }());
        code[br].target2 = here();
        lower_block(s.els);
        code[jend].target = here();
        return;
      }
      case Stmt::Kind::While: {
        int ltest = here();
        Operand cv = lower_expr(*s.cond);
        int br = emit([&] {
          Instr in;
          in.op = IOp::Br;
          in.x = cv;
          return in;
        }());
        code[br].target = here();
        loops.push_back({});
        lower_block(s.body);
        Loop done = std::move(loops.back());
        loops.pop_back();
        emit([&] {
          Instr in;
          in.op = IOp::Jmp;
          in.target = ltest;
          return in;
        }());
        int lend = here();
        code[br].target2 = lend;
        for (int ix : done.breaks) code[ix].target = lend;
        for (int ix : done.continues) code[ix].target = ltest;
        return;
      }
      case Stmt::Kind::For: {
        if (s.init) lower_stmt(*s.init);
        int ltest = here();
        int br = -1;
        if (s.cond) {
          Operand cv = lower_expr(*s.cond);
          br = emit([&] {
            Instr in;
            in.op = IOp::Br;
            in.x = cv;
            return in;
          }());
          code[br].target = here();
        }
        loops.push_back({});
        lower_block(s.body);
        Loop done = std::move(loops.back());
        loops.pop_back();
        int lstep = here();
        if (s.step) lower_stmt(*s.step);
        emit([&] {
          Instr in;
          in.op = IOp::Jmp;
          in.target = ltest;
          return in;
        }());
        int lend = here();
        if (br >= 0) code[br].target2 = lend;
        for (int ix : done.breaks) code[ix].target = lend;
        for (int ix : done.continues) code[ix].target = lstep;
        return;
      }
      case Stmt::Kind::Break:
      case Stmt::Kind::Continue: {
        int j = emit([&] {
          Instr in;
          in.op = IOp::Jmp;
          return in;
        }());
        if (s.kind == Stmt::Kind::Break)
          loops.back().breaks.push_back(j);
        else
          loops.back().continues.push_back(j);
        return;
      }
      case Stmt::Kind::Return: {
        Operand v = s.has_value ? lower_expr(*s.e) : cst(0);
        Instr in;
        in.op = IOp::RetF;
        in.x = v;
        emit(std::move(in));
        return;
      }
      case Stmt::Kind::Invoke: {
        std::vector<Operand> args;
        for (const auto& a : s.args) args.push_back(lower_expr(*a));
        int nm = -1;
        for (size_t k = 0; k < c.opnames.size(); ++k)
          if (c.opnames[k] == s.name) nm = (int)k;
        if (nm < 0) {
          nm = (int)c.opnames.size();
          c.opnames.push_back(s.name);
        }
        Instr in;
        in.op = IOp::EmitEv;
        in.code = 0;
        in.opname = nm;
        in.args = std::move(args);
        emit(std::move(in));
        return;
      }
      case Stmt::Kind::Respond: {
        Operand v = lower_expr(*s.e);
        Instr in;
        in.op = IOp::EmitEv;
        in.code = 1;
        in.x = v;
        emit(std::move(in));
        return;
      }
    }
  }

  CompiledFn finish() {
    lower_block(f.body);
    Instr ret;
    ret.op = IOp::RetF;
    ret.x = cst(0);
    emit(std::move(ret));  // implicit return at the end of the body
    CompiledFn out;
    out.name = f.name;
    out.nparams = (int)f.params.size();
    out.nslots = temp_base + temp_high;
    out.code = std::move(code);
    return out;
  }
};

}  // namespace machine_detail

inline Compiled compile(const Program& p) {
  Compiled c;
  c.width = p.width;
  int base = 0;
  for (const auto& g : p.globals) {
    GlobalInfo gi;
    gi.name = g.name;
    gi.kind = g.kind;
    gi.base = base;
    gi.size = g.size;
    gi.is_array = g.is_array;
    c.global_index[g.name] = (int)c.globals.size();
    c.globals.push_back(gi);
    for (int k = 0; k < g.size; ++k) c.cell_kind.push_back(g.kind);
    base += g.size;
  }
  c.ncells = base;
  if (c.ncells > machine_detail::max_cells)
    throw bound_error("program declares " + std::to_string(c.ncells) +
                      " cells; the machine supports at most " +
                      std::to_string(machine_detail::max_cells));
  for (size_t k = 0; k < p.functions.size(); ++k)
    c.fn_index[p.functions[k].name] = (int)k;
  for (const auto& f : p.functions) {
    machine_detail::FnLower lower(p, c, f);
    c.fns.push_back(lower.finish());
  }
  c.entry = p.entry;
  return c;
}

inline Compiled compile_text(std::string_view text) {
  return compile(parse_program(text));
}

// --- machine state ---

enum class LockPhase { Unmade, Unlocked, Held };

struct Cell {
  uint32_t value = 0;               // int cells
  LockPhase phase = LockPhase::Unmade;  // lock cells
  int holder = -1;                  // valid only when phase == Held
};

struct Frame {
  int fn = 0;
  int pc = 0;
  int ret_slot = -1;  // caller slot receiving the return value
  std::vector<uint32_t> slots;
};

struct ThreadState {
  std::vector<Frame> frames;
  int next_op_seq = 0;  // per-thread id source for invoke events
  int pending_op = -1;  // seq of the unanswered invoke, -1 if none
  bool terminated() const { return frames.empty(); }
};

enum class EventKind {
  Read, Write, AtomicRead, AtomicWrite, CasOk, CasFail,
  LockMake, LockAcquire, LockRelease, LockFree,
  ThreadSpawn, ThreadExit, Invoke, Respond,
};

struct Event {
  EventKind kind{};
  int tid = -1;
  int cell = -1;
  uint32_t value = 0;  // read/written value; spawn: new tid; respond: result
  int seq = -1;        // invoke/respond operation id (per-thread sequence)
  std::string op;      // invoke operation name
  std::vector<uint32_t> args;
};

struct MachineState {
  std::vector<Cell> mem;
  std::vector<ThreadState> threads;
  std::vector<Event> trace;  // appended only when record_trace
  bool record_trace = false;
};

inline MachineState initial_state(const Compiled& c) {
  MachineState s;
  s.mem.resize(c.ncells);
  ThreadState t;
  Frame fr;
  fr.fn = c.entry;
  fr.slots.assign(c.fns[c.entry].nslots, 0);
  t.frames.push_back(std::move(fr));
  s.threads.push_back(std::move(t));
  return s;
}

struct Outcome {
  enum class Kind { Next, Blocked, Terminated, Undefined };
  Kind kind{};
  std::optional<Event> event;  // present on Next
  std::string reason;          // present on Undefined
};

// What a thread's next visible action would be, for co-enabledness checks.
struct NextAction {
  enum class Kind {
    Read, Write, AtomicRead, AtomicWrite, AtomicRmw,
    LockAction, SpawnAction, HistoryEvent, Exit,
  };
  Kind kind{};
  int cell = -1;
};

namespace machine_detail {

inline uint32_t opval(const Frame& fr, const Operand& o) {
  return o.is_const ? o.cval : fr.slots[o.slot];
}

inline uint32_t apply_bin(int code, uint32_t a, uint32_t b, const Compiled& c) {
  uint32_t m = c.mask();
  switch ((BinKind)code) {
    case BinKind::Add: return (a + b) & m;
    case BinKind::Sub: return (a - b) & m;
    case BinKind::Mul: return (a * b) & m;
    case BinKind::BitAnd: return a & b;
    case BinKind::BitOr: return a | b;
    case BinKind::BitXor: return a ^ b;
    case BinKind::Shl: return (a << (b % c.width)) & m;
    case BinKind::Shr: return a >> (b % c.width);
    case BinKind::Eq: return a == b;
    case BinKind::Ne: return a != b;
    case BinKind::Lt: return a < b;   // values are unsigned
    case BinKind::Le: return a <= b;
    case BinKind::Gt: return a > b;
    case BinKind::Ge: return a >= b;
    default: return 0;  // LogAnd/LogOr never reach the IR
  }
}

inline uint32_t apply_un(int code, uint32_t a, const Compiled& c) {
  switch ((IUn)code) {
    case IUn::LogNot: return a == 0;
    case IUn::BitNot: return ~a & c.mask();
    case IUn::Neg: return (0 - a) & c.mask();
    case IUn::Hash: return hash_value(a, c.width);
    case IUn::Bool: return a != 0;
  }
  return 0;
}

struct LocalRun {
  enum class Stop { AtVisible, Exited, Fault };
  Stop stop{};
  std::string fault;
};

// Executes pure compute and control until the thread's pc rests on a
// visible instruction, it pops its last frame, or it runs out of the local
// budget (a loop with no memory access, or unbounded recursion).
inline LocalRun run_locals(const Compiled& c, ThreadState& th) {
  int fuel = local_fuel;
  while (true) {
    if (th.frames.empty()) return {LocalRun::Stop::Exited, {}};
    Frame& fr = th.frames.back();
    const Instr& in = c.fns[fr.fn].code[fr.pc];
    switch (in.op) {
      case IOp::Load: case IOp::Store: case IOp::ALoad: case IOp::AStore:
      case IOp::Cas: case IOp::LockI: case IOp::SpawnF: case IOp::EmitEv:
        return {LocalRun::Stop::AtVisible, {}};
      default:
        break;
    }
    if (--fuel < 0)
      return {LocalRun::Stop::Fault,
              "no memory access in " + std::to_string(local_fuel) +
                  " pure instructions (divergence or runaway recursion)"};
    switch (in.op) {
      case IOp::Mov:
        fr.slots[in.dst] = opval(fr, in.x);
        fr.pc++;
        break;
      case IOp::Un:
        fr.slots[in.dst] = apply_un(in.code, opval(fr, in.x), c);
        fr.pc++;
        break;
      case IOp::Bin:
        fr.slots[in.dst] =
            apply_bin(in.code, opval(fr, in.x), opval(fr, in.y), c);
        fr.pc++;
        break;
      case IOp::AddrOf:
        fr.slots[in.dst] =
            (c.globals[in.glob].base + opval(fr, in.index)) & c.mask();
        fr.pc++;
        break;
      case IOp::Jmp:
        fr.pc = in.target;
        break;
      case IOp::Br:
        fr.pc = opval(fr, in.x) != 0 ? in.target : in.target2;
        break;
      case IOp::CallF: {
        if ((int)th.frames.size() >= max_frames)
          return {LocalRun::Stop::Fault, "call stack depth exceeded"};
        std::vector<uint32_t> argv;
        for (const auto& a : in.args) argv.push_back(opval(fr, a));
        int callee = in.fn;
        int ret_slot = in.dst;
        fr.pc++;  // resume past the call
        Frame nf;
        nf.fn = callee;
        nf.ret_slot = ret_slot;
        nf.slots.assign(c.fns[callee].nslots, 0);
        for (size_t k = 0; k < argv.size(); ++k) nf.slots[k] = argv[k];
        th.frames.push_back(std::move(nf));  // invalidates fr
        break;
      }
      case IOp::RetF: {
        uint32_t v = opval(fr, in.x);
        int ret_slot = fr.ret_slot;
        th.frames.pop_back();
        if (!th.frames.empty() && ret_slot >= 0)
          th.frames.back().slots[ret_slot] = v;
        break;
      }
      default:
        break;
    }
  }
}

// Resolves the cell a memory/lock instruction addresses; empty message on
// success.
inline std::string resolve_cell(const Compiled& c, const Instr& in,
                                const Frame& fr, int& cell) {
  const GlobalInfo& g = c.globals[in.glob];
  if (!in.indexed) {
    cell = g.base;
    return {};
  }
  uint32_t ix = opval(fr, in.index);
  if (ix >= (uint32_t)g.size)
    return "index " + std::to_string(ix) + " out of range for '" + g.name +
           "' (size " + std::to_string(g.size) + ")";
  cell = g.base + (int)ix;
  return {};
}

}  // namespace machine_detail

inline std::optional<NextAction> peek(const Compiled& c, const MachineState& s,
                                      int tid) {
  using namespace machine_detail;
  if (tid < 0 || tid >= (int)s.threads.size())
    throw usage_error("peek: no thread " + std::to_string(tid));
  if (s.threads[tid].terminated()) return std::nullopt;
  ThreadState th = s.threads[tid];
  LocalRun lr = run_locals(c, th);
  if (lr.stop == LocalRun::Stop::Fault) return std::nullopt;
  if (lr.stop == LocalRun::Stop::Exited)
    return NextAction{NextAction::Kind::Exit, -1};
  const Frame& fr = th.frames.back();
  const Instr& in = c.fns[fr.fn].code[fr.pc];
  NextAction act;
  int cell = -1;
  switch (in.op) {
    case IOp::Load: act.kind = NextAction::Kind::Read; break;
    case IOp::Store: act.kind = NextAction::Kind::Write; break;
    case IOp::ALoad: act.kind = NextAction::Kind::AtomicRead; break;
    case IOp::AStore: act.kind = NextAction::Kind::AtomicWrite; break;
    case IOp::Cas: act.kind = NextAction::Kind::AtomicRmw; break;
    case IOp::LockI: act.kind = NextAction::Kind::LockAction; break;
    case IOp::SpawnF: act.kind = NextAction::Kind::SpawnAction; break;
    case IOp::EmitEv: act.kind = NextAction::Kind::HistoryEvent; break;
    default: return std::nullopt;
  }
  switch (in.op) {
    case IOp::Load: case IOp::Store: case IOp::ALoad: case IOp::AStore:
    case IOp::Cas: case IOp::LockI: {
      std::string err = resolve_cell(c, in, fr, cell);
      if (!err.empty()) return std::nullopt;  // the step itself reports it
      act.cell = cell;
      break;
    }
    default:
      break;
  }
  return act;
}

// Advances thread tid by one visible action (with its pure prefix), or
// reports why it cannot. Blocked and Undefined leave the state untouched.
inline Outcome step(const Compiled& c, MachineState& s, int tid) {
  using namespace machine_detail;
  if (tid < 0 || tid >= (int)s.threads.size())
    throw usage_error("step: no thread " + std::to_string(tid));
  if (s.threads[tid].terminated()) return {Outcome::Kind::Terminated, {}, {}};

  ThreadState th = s.threads[tid];  // scratch; committed only on Next
  LocalRun lr = run_locals(c, th);
  if (lr.stop == LocalRun::Stop::Fault)
    return {Outcome::Kind::Undefined, {}, lr.fault};

  Event ev;
  ev.tid = tid;
  if (lr.stop == LocalRun::Stop::Exited) {
    ev.kind = EventKind::ThreadExit;
    s.threads[tid] = std::move(th);
    if (s.record_trace) s.trace.push_back(ev);
    return {Outcome::Kind::Next, std::move(ev), {}};
  }

  Frame& fr = th.frames.back();
  const Instr& in = c.fns[fr.fn].code[fr.pc];
  int cell = -1;
  switch (in.op) {
    case IOp::Load: case IOp::Store: case IOp::ALoad: case IOp::AStore:
    case IOp::Cas: case IOp::LockI: {
      std::string err = resolve_cell(c, in, fr, cell);
      if (!err.empty()) return {Outcome::Kind::Undefined, {}, err};
      break;
    }
    default:
      break;
  }

  switch (in.op) {
    case IOp::Load: {
      uint32_t v = s.mem[cell].value;
      fr.slots[in.dst] = v;
      ev.kind = EventKind::Read;
      ev.cell = cell;
      ev.value = v;
      break;
    }
    case IOp::Store: {
      uint32_t v = opval(fr, in.y);
      s.mem[cell].value = v;
      ev.kind = EventKind::Write;
      ev.cell = cell;
      ev.value = v;
      break;
    }
    case IOp::ALoad: {
      uint32_t v = s.mem[cell].value;
      fr.slots[in.dst] = v;
      ev.kind = EventKind::AtomicRead;
      ev.cell = cell;
      ev.value = v;
      break;
    }
    case IOp::AStore: {
      uint32_t v = opval(fr, in.y);
      s.mem[cell].value = v;
      ev.kind = EventKind::AtomicWrite;
      ev.cell = cell;
      ev.value = v;
      break;
    }
    case IOp::Cas: {
      uint32_t cur = s.mem[cell].value;
      uint32_t expected = opval(fr, in.x);
      uint32_t desired = opval(fr, in.y);
      bool ok = cur == expected;
      if (ok) s.mem[cell].value = desired;
      fr.slots[in.dst] = ok ? 1 : 0;
      if (in.dst2 >= 0) fr.slots[in.dst2] = cur;  // observed value either way
      ev.kind = ok ? EventKind::CasOk : EventKind::CasFail;
      ev.cell = cell;
      ev.value = ok ? desired : cur;
      break;
    }
    case IOp::LockI: {
      Cell& lk = s.mem[cell];
      const std::string& name = c.globals[in.glob].name;
      switch ((Stmt::LockOp)in.code) {
        case Stmt::LockOp::Make:
          if (lk.phase != LockPhase::Unmade)
            return {Outcome::Kind::Undefined, {},
                    "makelock on '" + name + "', which is already made"};
          lk.phase = LockPhase::Held;  // created in the held state
          lk.holder = tid;
          ev.kind = EventKind::LockMake;
          break;
        case Stmt::LockOp::Acquire:
          if (lk.phase == LockPhase::Unmade)
            return {Outcome::Kind::Undefined, {},
                    "acquire on unmade lock '" + name + "'"};
          if (lk.phase == LockPhase::Held) return {Outcome::Kind::Blocked, {}, {}};
          lk.phase = LockPhase::Held;
          lk.holder = tid;
          ev.kind = EventKind::LockAcquire;
          break;
        case Stmt::LockOp::Release:
          // semaphore-style: any thread may release a held lock
          if (lk.phase != LockPhase::Held)
            return {Outcome::Kind::Undefined, {},
                    lk.phase == LockPhase::Unmade
                        ? "release of unmade lock '" + name + "'"
                        : "release of '" + name + "', which is not held"};
          lk.phase = LockPhase::Unlocked;
          lk.holder = -1;
          ev.kind = EventKind::LockRelease;
          break;
        case Stmt::LockOp::Free:
          if (lk.phase == LockPhase::Held && lk.holder == tid) {
            lk.phase = LockPhase::Unmade;
            lk.holder = -1;
            ev.kind = EventKind::LockFree;
            break;
          }
          return {Outcome::Kind::Undefined, {},
                  lk.phase == LockPhase::Unmade
                      ? "freelock on unmade lock '" + name + "'"
                  : lk.phase == LockPhase::Unlocked
                      ? "freelock on '" + name + "', which is not held"
                      : "freelock on '" + name +
                            "', which is held by another thread"};
      }
      ev.cell = cell;
      break;
    }
    case IOp::SpawnF: {
      if ((int)s.threads.size() >= max_threads)
        return {Outcome::Kind::Undefined, {}, "thread limit exceeded"};
      ThreadState nt;
      Frame nf;
      nf.fn = in.fn;
      nf.slots.assign(c.fns[in.fn].nslots, 0);
      for (size_t k = 0; k < in.args.size(); ++k)
        nf.slots[k] = opval(fr, in.args[k]);
      nt.frames.push_back(std::move(nf));
      ev.kind = EventKind::ThreadSpawn;
      ev.value = (uint32_t)s.threads.size();
      s.threads.push_back(std::move(nt));
      break;
    }
    case IOp::EmitEv: {
      if (in.code == 0) {
        if (th.pending_op >= 0)
          return {Outcome::Kind::Undefined, {},
                  "invoke while a previous operation is pending"};
        th.pending_op = th.next_op_seq++;
        ev.kind = EventKind::Invoke;
        ev.seq = th.pending_op;
        ev.op = c.opnames[in.opname];
        for (const auto& a : in.args) ev.args.push_back(opval(fr, a));
      } else {
        if (th.pending_op < 0)
          return {Outcome::Kind::Undefined, {},
                  "respond without a pending invoke"};
        ev.kind = EventKind::Respond;
        ev.seq = th.pending_op;
        ev.value = opval(fr, in.x);
        th.pending_op = -1;
      }
      break;
    }
    default:
      return {Outcome::Kind::Undefined, {}, "internal: non-visible instruction"};
  }

  fr.pc++;
  s.threads[tid] = std::move(th);
  if (s.record_trace) s.trace.push_back(ev);
  return {Outcome::Kind::Next, std::move(ev), {}};
}

// Memoization key: memory (with lock ownership), per-thread continuations
// and event counters. The trace is deliberately excluded.
inline std::string canonical_state(const Compiled& c, const MachineState& s) {
  std::string out;
  auto put = [&](uint32_t v) {
    out.push_back((char)(v & 0xff));
    out.push_back((char)((v >> 8) & 0xff));
    out.push_back((char)((v >> 16) & 0xff));
    out.push_back((char)((v >> 24) & 0xff));
  };
  for (int k = 0; k < c.ncells; ++k) {
    if (c.cell_kind[k] == CellKind::LockCell) {
      put((uint32_t)s.mem[k].phase);
      put((uint32_t)(s.mem[k].holder + 1));
    } else {
      put(s.mem[k].value);
    }
  }
  put((uint32_t)s.threads.size());
  for (const auto& th : s.threads) {
    put((uint32_t)th.next_op_seq);
    put((uint32_t)(th.pending_op + 1));
    put((uint32_t)th.frames.size());
    for (const auto& fr : th.frames) {
      put((uint32_t)fr.fn);
      put((uint32_t)fr.pc);
      put((uint32_t)(fr.ret_slot + 1));
      for (uint32_t v : fr.slots) put(v);
    }
  }
  return out;
}

inline std::string show_state(const Compiled& c, const MachineState& s) {
  std::ostringstream os;
  bool first = true;
  for (const auto& g : c.globals) {
    if (!first) os << ' ';
    first = false;
    os << g.name << '=';
    if (g.kind == CellKind::LockCell) {
      const Cell& lk = s.mem[g.base];
      os << (lk.phase == LockPhase::Unmade     ? "unmade"
             : lk.phase == LockPhase::Unlocked ? "unlocked"
                                               : "held(" +
                   std::to_string(lk.holder) + ")");
    } else if (g.is_array) {
      os << '[';
      for (int k = 0; k < g.size; ++k)
        os << (k ? "," : "") << s.mem[g.base + k].value;
      os << ']';
    } else {
      os << s.mem[g.base].value;
    }
  }
  for (size_t t = 0; t < s.threads.size(); ++t) {
    os << " | t" << t << ':';
    const ThreadState& th = s.threads[t];
    if (th.terminated()) {
      os << "exit";
    } else {
      const Frame& fr = th.frames.back();
      os << c.fns[fr.fn].name << '@' << fr.pc;
      if (th.frames.size() > 1) os << '+' << th.frames.size() - 1;
    }
  }
  return os.str();
}

inline int cell_index(const Compiled& c, std::string_view name, int idx = 0) {
  auto it = c.global_index.find(std::string(name));
  if (it == c.global_index.end())
    throw usage_error("no global named '" + std::string(name) + "'");
  const GlobalInfo& g = c.globals[it->second];
  if (idx < 0 || idx >= g.size)
    throw usage_error("index " + std::to_string(idx) + " out of range for '" +
                      std::string(name) + "'");
  return g.base + idx;
}

inline uint32_t global_value(const Compiled& c, const MachineState& s,
                             std::string_view name, int idx = 0) {
  return s.mem[cell_index(c, name, idx)].value;
}

inline LockPhase lock_state(const Compiled& c, const MachineState& s,
                            std::string_view name) {
  return s.mem[cell_index(c, name)].phase;
}

struct RunResult {
  enum class Stop { Terminal, Deadlock, Undefined, FuelOut };
  Stop stop{};
  long steps = 0;
  std::string reason;
  int tid = -1;
};

// Deterministic driver: always steps the lowest runnable thread. Exploration
// covers every other schedule; this one is for tests and sequential runs.
inline RunResult run(const Compiled& c, MachineState& s,
                     long max_steps = 1'000'000) {
  RunResult res;
  while (res.steps < max_steps) {
    bool all_done = true, progressed = false;
    for (int tid = 0; tid < (int)s.threads.size(); ++tid) {
      if (s.threads[tid].terminated()) continue;
      all_done = false;
      Outcome o = step(c, s, tid);
      if (o.kind == Outcome::Kind::Next) {
        progressed = true;
        ++res.steps;
        break;  // restart from the lowest tid
      }
      if (o.kind == Outcome::Kind::Undefined) {
        res.stop = RunResult::Stop::Undefined;
        res.reason = o.reason;
        res.tid = tid;
        return res;
      }
      // Blocked: try the next thread
    }
    if (all_done) {
      res.stop = RunResult::Stop::Terminal;
      return res;
    }
    if (!progressed) {
      res.stop = RunResult::Stop::Deadlock;
      return res;
    }
  }
  res.stop = RunResult::Stop::FuelOut;
  return res;
}

}  // namespace cslwb
