#pragma once
// Line-oriented text formats for the command line: finite universes, Hoare
// triples over them, atomic specifications, and recorded histories. Lines
// whose first non-blank character is '#' are comments; blank lines are
// skipped. Inline comments are not supported because '#' is the
// persistence modality inside assertions.
//
// Universe lines:
//   addr c              one data cell per line, in address order
//   values 0 1 2 3      the value domain
//   shares 2            share lattice depth (the full share is 2^depth)
//   levels 2            approximation level bound
//   slot sharev         an active ghost slot, algebra named by registry id
//   headroom agree      a spare slot for allocation to draw on
//   tags 0 1            predicate tags own() may carry
//   core vst            core discipline: vst or iris
//
// A Hoare file is a universe plus:
//   pre <assertion>     syntax as in assertion_io.hpp
//   post <assertion>
//   fuel 12
//
// An atomic spec file:
//   states 3
//   initial 0
//   show 1 {1:7}        optional display names for states
//   delta set 0 1 7 -> 1/0
//     op `set` applied to args (1, 7) in state 0 moves to state 1 and
//     returns 0; several state/ret outcomes on one line make the op
//     relational; a combination with no delta line is disallowed there
//
// A history file:
//   invoke 0 set 1 7    tid, op name, args
//   respond 0 1         tid, return value, closing that thread's open op

#include <istream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cslwb/assertion_io.hpp"
#include "cslwb/lincheck.hpp"
#include "cslwb/speccheck.hpp"

namespace cslwb {

namespace formats_detail {

// splits a file into keyword-led token lines, dropping comments
struct Lines {
  struct Line {
    int no = 0;
    std::string kw;
    std::vector<std::string> args;
    std::string rest;  // everything after the keyword, original spacing
  };
  std::vector<Line> all;

  explicit Lines(std::istream& in) {
    std::string raw;
    int no = 0;
    while (std::getline(in, raw)) {
      ++no;
      size_t first = raw.find_first_not_of(" \t\r");
      if (first == std::string::npos || raw[first] == '#') continue;
      Line l;
      l.no = no;
      std::istringstream ls(raw);
      ls >> l.kw;
      std::string tok;
      while (ls >> tok) l.args.push_back(tok);
      size_t after = raw.find(l.kw, first) + l.kw.size();
      size_t body = raw.find_first_not_of(" \t", after);
      l.rest = body == std::string::npos ? "" : raw.substr(body);
      while (!l.rest.empty() &&
             (l.rest.back() == '\r' || l.rest.back() == ' ' ||
              l.rest.back() == '\t'))
        l.rest.pop_back();
      all.push_back(std::move(l));
    }
  }
};

inline usage_error at_line(int no, const std::string& what) {
  return usage_error("line " + std::to_string(no) + ": " + what);
}

inline int to_int(const Lines::Line& l, const std::string& tok) {
  try {
    size_t used = 0;
    int v = std::stoi(tok, &used);
    if (used == tok.size()) return v;
  } catch (const std::exception&) {
  }
  throw at_line(l.no, "expected a number, got '" + tok + "'");
}

}  // namespace formats_detail

// Builds a universe over the default algebra registry from `addr`, `values`,
// `shares`, `levels`, `slot`, `headroom`, `tags`, and `core` lines.
// Unrecognized keywords are rejected unless `extra` says the caller handles
// them (the Hoare loader does).
inline Universe load_universe(std::istream& in,
                              const std::vector<std::string>& extra = {}) {
  using formats_detail::at_line;
  using formats_detail::to_int;
  formats_detail::Lines lines(in);
  Universe u;
  u.registry = std::make_shared<AlgebraRegistry>(default_registry());

  bool have_values = false;
  for (const auto& l : lines.all) {
    auto want = [&](size_t n) {
      if (l.args.size() != n)
        throw at_line(l.no, "'" + l.kw + "' takes " + std::to_string(n) +
                                " argument(s)");
    };
    if (l.kw == "addr") {
      want(1);
      for (const std::string& seen : u.addr_names)
        if (seen == l.args[0])
          throw at_line(l.no, "duplicate address '" + l.args[0] + "'");
      u.addr_names.push_back(l.args[0]);
    } else if (l.kw == "values") {
      if (l.args.empty()) throw at_line(l.no, "'values' needs a domain");
      u.values.clear();
      for (const std::string& t : l.args) u.values.push_back(to_int(l, t));
      have_values = true;
    } else if (l.kw == "shares") {
      want(1);
      int d = to_int(l, l.args[0]);
      if (d < 1 || d > 6) throw at_line(l.no, "share depth is 1 to 6");
      u.shares = ShareLattice{d};
    } else if (l.kw == "levels") {
      want(1);
      u.max_level = to_int(l, l.args[0]);
      if (u.max_level < 0) throw at_line(l.no, "levels cannot be negative");
    } else if (l.kw == "slot" || l.kw == "headroom") {
      want(1);
      if (!u.reg().has(l.args[0]))
        throw at_line(l.no, "no algebra named '" + l.args[0] + "'");
      (l.kw == "slot" ? u.slots : u.headroom)
          .push_back(u.reg().index_of(l.args[0]));
    } else if (l.kw == "tags") {
      if (l.args.empty()) throw at_line(l.no, "'tags' needs at least one");
      u.tags.clear();
      for (const std::string& t : l.args) u.tags.push_back(to_int(l, t));
    } else if (l.kw == "core") {
      want(1);
      if (l.args[0] == "vst")
        u.core_mode = CoreMode::Vst;
      else if (l.args[0] == "iris")
        u.core_mode = CoreMode::Iris;
      else
        throw at_line(l.no, "core is 'vst' or 'iris'");
    } else {
      bool handled = false;
      for (const std::string& e : extra) handled |= e == l.kw;
      if (!handled) throw at_line(l.no, "unknown keyword '" + l.kw + "'");
    }
  }
  if (!have_values) throw usage_error("universe: missing 'values' line");
  return u;
}

struct HoareFile {
  Universe universe;
  HoareSpec spec;
};

// a universe plus pre/post assertions and a fuel line
inline HoareFile load_hoare(std::istream& in) {
  using formats_detail::at_line;
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  std::istringstream pass1(text);
  HoareFile out;
  out.universe = load_universe(pass1, {"pre", "post", "fuel"});

  std::istringstream pass2(text);
  formats_detail::Lines lines(pass2);
  std::string pre, post;
  bool have_fuel = false;
  for (const auto& l : lines.all) {
    if (l.kw == "pre") {
      if (!pre.empty()) throw at_line(l.no, "duplicate 'pre'");
      pre = l.rest;
    } else if (l.kw == "post") {
      if (!post.empty()) throw at_line(l.no, "duplicate 'post'");
      post = l.rest;
    } else if (l.kw == "fuel") {
      out.spec.fuel = formats_detail::to_int(l, l.args.at(0));
      if (out.spec.fuel < 0) throw at_line(l.no, "fuel cannot be negative");
      have_fuel = true;
    }
  }
  if (pre.empty()) throw usage_error("hoare file: missing 'pre' line");
  if (post.empty()) throw usage_error("hoare file: missing 'post' line");
  if (!have_fuel) throw usage_error("hoare file: missing 'fuel' line");
  out.spec.pre = parse_assertion(out.universe, pre);
  out.spec.post = parse_assertion(out.universe, post);
  return out;
}

// finite atomic specification from states/initial/show/delta lines
inline AtomicSpec load_atomic_spec(std::istream& in) {
  using formats_detail::at_line;
  using formats_detail::to_int;
  formats_detail::Lines lines(in);

  AtomicSpec spec;
  bool have_states = false;
  auto table = std::make_shared<std::map<
      std::string, std::map<std::pair<int, std::vector<uint32_t>>,
                            std::vector<AtomicOutcome>>>>();
  std::map<std::string, size_t> arity;
  auto shows = std::make_shared<std::map<int, std::string>>();

  for (const auto& l : lines.all) {
    if (l.kw == "states") {
      if (l.args.size() != 1) throw at_line(l.no, "'states' takes a count");
      spec.state_count = to_int(l, l.args[0]);
      if (spec.state_count < 1) throw at_line(l.no, "need at least one state");
      have_states = true;
    } else if (l.kw == "initial") {
      if (l.args.size() != 1) throw at_line(l.no, "'initial' takes a state");
      spec.initial = to_int(l, l.args[0]);
    } else if (l.kw == "show") {
      if (l.args.size() < 2) throw at_line(l.no, "'show' takes state and text");
      size_t cut = l.rest.find_first_of(" \t");
      (*shows)[to_int(l, l.args[0])] =
          l.rest.substr(l.rest.find_first_not_of(" \t", cut));
    } else if (l.kw == "delta") {
      if (l.args.size() < 4)
        throw at_line(l.no, "'delta' is: delta <op> <state> <args...> -> "
                            "<state'/ret>...");
      const std::string& op = l.args[0];
      int from = to_int(l, l.args[1]);
      size_t arrow = 2;
      std::vector<uint32_t> args;
      while (arrow < l.args.size() && l.args[arrow] != "->")
        args.push_back(uint32_t(to_int(l, l.args[arrow++])));
      if (arrow == l.args.size()) throw at_line(l.no, "missing '->'");
      if (arrow + 1 == l.args.size())
        throw at_line(l.no, "no outcomes after '->'");

      auto known = arity.find(op);
      if (known == arity.end())
        arity[op] = args.size();
      else if (known->second != args.size())
        throw at_line(l.no, "op '" + op + "' used with " +
                                std::to_string(args.size()) + " args, had " +
                                std::to_string(known->second));

      std::vector<AtomicOutcome>& outs = (*table)[op][{from, args}];
      if (!outs.empty()) throw at_line(l.no, "duplicate delta line");
      for (size_t i = arrow + 1; i < l.args.size(); ++i) {
        size_t slash = l.args[i].find('/');
        if (slash == std::string::npos)
          throw at_line(l.no, "outcome '" + l.args[i] +
                                  "' is not <state'/ret>");
        AtomicOutcome o;
        o.state = to_int(l, l.args[i].substr(0, slash));
        o.ret = uint32_t(to_int(l, l.args[i].substr(slash + 1)));
        outs.push_back(o);
      }
    } else {
      throw at_line(l.no, "unknown keyword '" + l.kw + "'");
    }
  }
  if (!have_states) throw usage_error("atomic spec: missing 'states' line");
  if (table->empty()) throw usage_error("atomic spec: no delta lines");
  for (const auto& [op, rows] : *table)
    for (const auto& [key, outs] : rows) {
      if (key.first < 0 || key.first >= spec.state_count)
        throw usage_error("atomic spec: op '" + op + "' has a delta from state " +
                          std::to_string(key.first) + ", outside 0.." +
                          std::to_string(spec.state_count - 1));
      for (const AtomicOutcome& o : outs)
        if (o.state < 0 || o.state >= spec.state_count)
          throw usage_error("atomic spec: op '" + op +
                            "' steps to state " + std::to_string(o.state) +
                            ", outside 0.." +
                            std::to_string(spec.state_count - 1));
    }

  for (const auto& [op, rows] : *table) {
    AtomicOp aop;
    std::set<std::vector<uint32_t>> domain;
    for (const auto& [key, _] : rows) domain.insert(key.second);
    aop.args_domain.assign(domain.begin(), domain.end());
    aop.allowed = [table, op](int a, const std::vector<uint32_t>& args) {
      const auto& rows2 = table->at(op);
      return rows2.find({a, args}) != rows2.end();
    };
    aop.apply = [table, op](int a, const std::vector<uint32_t>& args) {
      return table->at(op).at({a, args});
    };
    spec.ops[op] = std::move(aop);
  }
  if (!shows->empty())
    spec.show = [shows](int a) {
      auto it = shows->find(a);
      return it == shows->end() ? std::to_string(a) : it->second;
    };
  validate_spec(spec);
  return spec;
}

// invoke/respond lines to a History, numbering operations per thread
inline History load_history(std::istream& in) {
  using formats_detail::at_line;
  using formats_detail::to_int;
  formats_detail::Lines lines(in);

  History h;
  std::map<int, int> invokes;  // per tid
  std::map<int, int> open;     // tid -> open seq, -1 when none
  for (const auto& l : lines.all) {
    if (l.kw == "invoke") {
      if (l.args.size() < 2)
        throw at_line(l.no, "'invoke' is: invoke <tid> <op> <args...>");
      int tid = to_int(l, l.args[0]);
      auto it = open.find(tid);
      if (it != open.end() && it->second >= 0)
        throw at_line(l.no, "thread " + std::to_string(tid) +
                                " already has an operation open");
      HistEvent e;
      e.kind = HistEvent::Kind::Invoke;
      e.id = {tid, invokes[tid]++};
      e.op = l.args[1];
      for (size_t i = 2; i < l.args.size(); ++i)
        e.args.push_back(uint32_t(to_int(l, l.args[i])));
      open[tid] = e.id.seq;
      h.events.push_back(std::move(e));
    } else if (l.kw == "respond") {
      if (l.args.size() != 2)
        throw at_line(l.no, "'respond' is: respond <tid> <ret>");
      int tid = to_int(l, l.args[0]);
      auto it = open.find(tid);
      if (it == open.end() || it->second < 0)
        throw at_line(l.no, "thread " + std::to_string(tid) +
                                " has no operation open");
      HistEvent e;
      e.kind = HistEvent::Kind::Respond;
      e.id = {tid, it->second};
      e.ret = uint32_t(to_int(l, l.args[1]));
      it->second = -1;
      h.events.push_back(std::move(e));
    } else {
      throw at_line(l.no, "unknown keyword '" + l.kw + "'");
    }
  }
  return h;
}

}  // namespace cslwb
