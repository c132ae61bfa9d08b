// The workbench's command line: every checker behind one binary. Each run
// prints a structured report with the configuration baked in, so a run can
// be reproduced from its own output; identical runs print identical bytes.
// Exit codes: 0 all checks pass, 1 a check is refuted or inconclusive,
// 2 the request itself is unusable.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cslwb/entailment.hpp"
#include "cslwb/formats.hpp"
#include "cslwb/native_table.hpp"

using json = nlohmann::ordered_json;
using namespace cslwb;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::ifstream open_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot read '" + path + "'");
  return in;
}

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::Read: return "read";
    case EventKind::Write: return "write";
    case EventKind::AtomicRead: return "atomic_read";
    case EventKind::AtomicWrite: return "atomic_write";
    case EventKind::CasOk: return "cas_ok";
    case EventKind::CasFail: return "cas_fail";
    case EventKind::LockMake: return "makelock";
    case EventKind::LockAcquire: return "acquire";
    case EventKind::LockRelease: return "release";
    case EventKind::LockFree: return "freelock";
    case EventKind::ThreadSpawn: return "spawn";
    case EventKind::ThreadExit: return "exit";
    case EventKind::Invoke: return "invoke";
    case EventKind::Respond: return "respond";
  }
  return "?";
}

json event_json(const Event& e) {
  json j;
  j["kind"] = kind_name(e.kind);
  j["tid"] = e.tid;
  if (e.cell >= 0) j["cell"] = e.cell;
  j["value"] = e.value;
  if (!e.op.empty()) j["op"] = e.op;
  return j;
}

json universe_json(const Universe& u) {
  json j;
  j["addrs"] = u.addr_names;
  j["values"] = u.values;
  j["share_depth"] = u.shares.depth;
  j["levels"] = u.max_level;
  json slots = json::array(), headroom = json::array();
  for (int s : u.slots) slots.push_back(u.reg().at(s).id);
  for (int s : u.headroom) headroom.push_back(u.reg().at(s).id);
  j["slots"] = slots;
  j["headroom"] = headroom;
  j["tags"] = u.tags;
  j["core"] = u.core_mode == CoreMode::Vst ? "vst" : "iris";
  return j;
}

json bounds_json(const ExploreBounds& b) {
  return json{{"max_depth", b.max_depth}, {"max_states", b.max_states}};
}

// canonical order, so parallel and serial exploration print the same bytes
json explore_json(const ExplorationReport& rep) {
  json j;
  j["visited"] = rep.visited;
  j["conclusive"] = !rep.depth_exhausted && !rep.states_exhausted;

  std::vector<Terminal> terms = rep.terminals;
  std::sort(terms.begin(), terms.end());
  json jt = json::array();
  for (const Terminal& t : terms) {
    json row;
    for (const auto& [name, cells] : t) row[name] = cells;
    jt.push_back(std::move(row));
  }
  j["terminals"] = std::move(jt);

  std::vector<std::tuple<std::string, int, int, std::string>> races;
  for (const RaceReport& r : rep.races)
    races.emplace_back(r.cell, r.tid_a, r.tid_b, r.state);
  std::sort(races.begin(), races.end());
  races.erase(std::unique(races.begin(), races.end()), races.end());
  json jr = json::array();
  for (const auto& [cell, a, b, state] : races)
    jr.push_back(json{{"cell", cell}, {"tid_a", a}, {"tid_b", b},
                      {"state", state}});
  j["races"] = std::move(jr);

  std::vector<std::pair<std::string, std::vector<int>>> locks;
  for (const DeadlockReport& d : rep.deadlocks)
    locks.emplace_back(d.state, d.blocked);
  std::sort(locks.begin(), locks.end());
  locks.erase(std::unique(locks.begin(), locks.end()), locks.end());
  json jd = json::array();
  for (const auto& [state, blocked] : locks)
    jd.push_back(json{{"state", state}, {"blocked", blocked}});
  j["deadlocks"] = std::move(jd);

  std::vector<std::tuple<std::string, int, std::string>> ub;
  for (const UndefinedReport& u : rep.undefined)
    ub.emplace_back(u.reason, u.tid, u.state);
  std::sort(ub.begin(), ub.end());
  ub.erase(std::unique(ub.begin(), ub.end()), ub.end());
  json ju = json::array();
  for (const auto& [reason, tid, state] : ub)
    ju.push_back(json{{"reason", reason}, {"tid", tid}, {"state", state}});
  j["undefined"] = std::move(ju);

  for (const char* key : {"violations", "monitor_failures"}) {
    const auto& src = std::string(key) == "violations" ? rep.violations
                                                       : rep.monitor_failures;
    std::vector<std::pair<std::string, std::string>> vs;
    for (const ViolationReport& v : src) vs.emplace_back(v.what, v.state);
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    json jv = json::array();
    for (const auto& [what, state] : vs)
      jv.push_back(json{{"what", what}, {"state", state}});
    j[key] = std::move(jv);
  }
  return j;
}

struct Out {
  std::string report_path;

  int finish(json& rep, bool pass) const {
    rep["pass"] = pass;
    std::string text = rep.dump(2);
    text += "\n";
    std::cout << text;
    if (!report_path.empty()) {
      std::ofstream f(report_path);
      if (!f) throw usage_error("cannot write '" + report_path + "'");
      f << text;
    }
    return pass ? 0 : 1;
  }
};

long env_long(const char* name, long fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  try {
    return std::stol(v);
  } catch (const std::exception&) {
    throw usage_error(std::string(name) + " is not a number: '" + v + "'");
  }
}

Universe default_entail_universe() {
  Universe u;
  u.registry = std::make_shared<AlgebraRegistry>(default_registry());
  u.addr_names = {"c", "d"};
  u.values = {0, 1, 2};
  return u;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"concurrent separation logic workbench"};
  app.require_subcommand(1);
  Out out;
  app.add_option("--report", out.report_path,
                 "also write the report to this file");

  // defaults for exploration bounds; flags override, reports echo
  ExploreBounds bounds;
  bounds.max_depth = env_long("CSLWB_MAX_DEPTH", bounds.max_depth);
  bounds.max_states = env_long("CSLWB_MAX_STATES", bounds.max_states);

  // laws
  auto* laws = app.add_subcommand("laws", "check the five algebra laws");
  std::string laws_algebra, laws_file;
  int laws_carrier = 64;
  laws->add_option("--algebra", laws_algebra, "registered algebra id");
  laws->add_option("--file", laws_file, "algebra definition file");
  laws->add_option("--max-carrier", laws_carrier, "enumeration bound");

  // entail
  auto* entail = app.add_subcommand("entail", "decide P |- Q over a universe");
  std::string entail_lhs, entail_rhs, entail_universe;
  EntailConfig entail_cfg;
  entail->add_option("lhs", entail_lhs, "left assertion")->required();
  entail->add_option("rhs", entail_rhs, "right assertion")->required();
  entail->add_option("--universe", entail_universe, "universe file");
  entail->add_option("--samples", entail_cfg.samples, "sample count");
  entail->add_option("--seed", entail_cfg.seed, "sampling seed");
  entail->add_option("--max-exhaustive", entail_cfg.max_exhaustive,
                     "largest space to enumerate fully");

  // check
  auto* check = app.add_subcommand("check", "explore every interleaving");
  std::string check_prog;
  int check_par = 1;
  unsigned check_shuffle = 0;
  check->add_option("program", check_prog, "program file")->required();
  check->add_option("--max-depth", bounds.max_depth, "depth bound");
  check->add_option("--max-states", bounds.max_states, "state bound");
  check->add_option("--parallelism", check_par, "worker threads");
  check->add_option("--shuffle-seed", check_shuffle,
                    "successor order seed (0 = ascending)");

  // hoare
  auto* hoare = app.add_subcommand("hoare", "play the safety game");
  std::string hoare_prog, hoare_spec;
  long hoare_configs = 1'000'000;
  hoare->add_option("program", hoare_prog, "program file")->required();
  hoare->add_option("--spec", hoare_spec, "hoare file: universe, pre, post, fuel")
      ->required();
  hoare->add_option("--max-configs", hoare_configs, "configuration budget");

  // lincheck
  auto* lin = app.add_subcommand("lincheck", "check histories for atomicity");
  std::string lin_prog, lin_hist, lin_spec;
  lin->add_option("--program", lin_prog, "instrumented program file");
  lin->add_option("--history", lin_hist, "recorded history file");
  lin->add_option("--spec", lin_spec, "atomic spec file")->required();
  lin->add_option("--max-depth", bounds.max_depth, "depth bound");
  lin->add_option("--max-states", bounds.max_states, "state bound");

  // case
  auto* kase = app.add_subcommand("case", "run a named case study");
  std::string case_name;
  int case_size = 4;
  kase->add_option("name", case_name,
                   "increment | increment_unlocked | increment_once | "
                   "hashtable | contention | lookup")
      ->required();
  kase->add_option("--size", case_size, "table size for lookup");

  // stress
  auto* stress = app.add_subcommand("stress", "hammer the native table");
  StressConfig stress_cfg;
  bool stress_no_fuzz = false;
  stress->add_option("--threads", stress_cfg.threads, "worker threads");
  stress->add_option("--ops", stress_cfg.ops_per_thread, "ops per thread");
  stress->add_option("--window", stress_cfg.window, "ops per recorded round");
  stress->add_option("--seed", stress_cfg.seed, "op sequence seed");
  stress->add_flag("--adds", stress_cfg.adds, "race adds instead of sets/gets");
  stress->add_flag("--no-fuzz", stress_no_fuzz, "skip injected yields");
  stress->add_option("--size", stress_cfg.table.size, "table size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n"
              << "usage: cslwb <laws|entail|check|hoare|lincheck|case|stress>"
                 " [options] (--help for details)\n";
    return 2;
  }

  try {
    if (laws->parsed()) {
      if (laws_algebra.empty() == laws_file.empty())
        throw usage_error("pass exactly one of --algebra or --file");
      AlgebraSpec alg;
      if (!laws_file.empty()) {
        std::ifstream in = open_file(laws_file);
        alg = load_algebra(in);
      } else {
        alg = default_registry().by_id(laws_algebra);
      }
      LawReport rep = check_algebra_laws(alg, laws_carrier);
      CoreReport cores = check_core_axioms(alg);
      json j;
      j["command"] = "laws";
      j["algebra"] = alg.id;
      j["carrier"] = alg.size();
      j["laws"] = {{"associative", rep.associative},
                   {"commutative", rep.commutative},
                   {"functional", rep.functional},
                   {"positive", rep.positive},
                   {"unital", rep.unital}};
      json cx = json::array();
      for (const LawCounterexample& c : rep.counterexamples)
        cx.push_back(json{{"law", c.law}, {"elems", c.elems},
                          {"detail", c.detail}});
      j["counterexamples"] = std::move(cx);
      j["cores"] = {{"vst_axiom", cores.vst_axiom},
                    {"iris_axiom", cores.iris_axiom},
                    {"vst_core_law", cores.vst_core_law},
                    {"iris_core_law", cores.iris_core_law}};
      json div = json::array();
      for (int e : cores.divergence) div.push_back(alg.names[size_t(e)]);
      j["core_divergence"] = std::move(div);
      return out.finish(j, rep.pass() && cores.pass());
    }

    if (entail->parsed()) {
      Universe u;
      if (!entail_universe.empty()) {
        std::ifstream in = open_file(entail_universe);
        u = load_universe(in);
      } else {
        u = default_entail_universe();
      }
      APtr p = parse_assertion(u, entail_lhs);
      APtr q = parse_assertion(u, entail_rhs);
      EntailReport rep = entails(u, p, q, entail_cfg);
      json j;
      j["command"] = "entail";
      j["lhs"] = entail_lhs;
      j["rhs"] = entail_rhs;
      j["universe"] = universe_json(u);
      j["seed"] = entail_cfg.seed;
      j["mode"] = rep.exhaustive ? "exhaustive" : "sampled";
      j["conclusive"] = rep.exhaustive || !rep.holds;
      j["checked"] = rep.checked;
      j["holds"] = rep.holds;
      j["counterexample"] =
          rep.counterexample ? json(show_rmap(u, *rep.counterexample))
                             : json(nullptr);
      return out.finish(j, rep.holds);
    }

    if (check->parsed()) {
      Compiled c = compile_text(slurp(check_prog));
      ExploreOptions opt;
      opt.bounds = bounds;
      opt.parallelism = check_par;
      opt.shuffle_seed = check_shuffle;
      ExplorationReport rep = explore(c, opt);
      json j;
      j["command"] = "check";
      j["program"] = check_prog;
      j["bounds"] = bounds_json(bounds);
      j["parallelism"] = check_par;
      j["seed"] = check_shuffle;
      j["mode"] = "exhaustive";
      j.update(explore_json(rep));
      return out.finish(j, rep.clean());
    }

    if (hoare->parsed()) {
      Compiled c = compile_text(slurp(hoare_prog));
      std::ifstream in = open_file(hoare_spec);
      HoareFile hf = load_hoare(in);
      SafetyOptions opt;
      opt.max_configs = hoare_configs;
      json j;
      j["command"] = "hoare";
      j["program"] = hoare_prog;
      j["spec"] = hoare_spec;
      j["universe"] = universe_json(hf.universe);
      j["pre"] = show_assertion(hf.universe, hf.spec.pre);
      j["post"] = show_assertion(hf.universe, hf.spec.post);
      j["fuel"] = hf.spec.fuel;
      j["max_configs"] = hoare_configs;
      j["mode"] = "exhaustive";
      try {
        SafetyVerdict v = check_safety(c, hf.universe, hf.spec, opt);
        j["conclusive"] = true;
        j["configs"] = v.configs;
        j["safe"] = v.safe;
        j["reason"] = v.reason;
        j["refuting_frame"] =
            v.refuting_frame
                ? json(show_ghost_map(hf.universe.reg(), *v.refuting_frame))
                : json(nullptr);
        json steps = json::array();
        for (const SafetyStep& s : v.witness) {
          json e = event_json(s.event);
          e["ghost"] = show_ghost_map(hf.universe.reg(), s.ghost);
          steps.push_back(std::move(e));
        }
        j["witness"] = std::move(steps);
        return out.finish(j, v.safe);
      } catch (const SearchLimit& e) {
        j["conclusive"] = false;
        j["configs"] = hoare_configs;
        j["safe"] = false;
        j["reason"] = e.what();
        j["steps_under_trial"] = long(e.partial.size());
        return out.finish(j, false);
      }
    }

    if (lin->parsed()) {
      if (lin_prog.empty() == lin_hist.empty())
        throw usage_error("pass exactly one of --program or --history");
      std::ifstream sin = open_file(lin_spec);
      AtomicSpec spec = load_atomic_spec(sin);
      json j;
      j["command"] = "lincheck";
      j["spec"] = lin_spec;
      if (!lin_hist.empty()) {
        std::ifstream hin = open_file(lin_hist);
        History h = load_history(hin);
        LinVerdict v = check_linearizable(h, spec);
        j["history"] = lin_hist;
        j["events"] = show_history(h);
        j["mode"] = "exhaustive";
        j["conclusive"] = true;
        j["explored"] = v.explored;
        j["linearizable"] = v.ok;
        j["reason"] = v.reason;
        json order = json::array();
        for (const LinStep& s : v.order)
          order.push_back(json{{"tid", s.id.tid},
                               {"seq", s.id.seq},
                               {"op", s.op},
                               {"args", s.args},
                               {"ret", s.ret},
                               {"completed", s.completed},
                               {"state_after", spec.show_state(s.state_after)}});
        j["order"] = std::move(order);
        return out.finish(j, v.ok);
      }
      Compiled c = compile_text(slurp(lin_prog));
      ExploreOptions opt;
      opt.bounds = bounds;
      AtomicTripleVerdict v = check_atomic_triple(c, spec, opt);
      j["program"] = lin_prog;
      j["bounds"] = bounds_json(bounds);
      j["mode"] = "exhaustive";
      j["conclusive"] = !v.exhausted;
      j["atomic"] = v.ok;
      j["reason"] = v.reason;
      j.update(explore_json(v.report));
      return out.finish(j, v.ok);
    }

    if (kase->parsed()) {
      json j;
      j["command"] = "case";
      j["name"] = case_name;
      if (case_name == "increment" || case_name == "increment_unlocked" ||
          case_name == "increment_once") {
        const char* text = case_name == "increment" ? increment_program()
                           : case_name == "increment_unlocked"
                               ? increment_unlocked_program()
                               : increment_once_program();
        int expected = case_name == "increment_once" ? 1 : 2;
        CaseResult r = increment_case(text, expected);
        j["expected_ctr"] = expected;
        j["detail"] = r.ok ? "terminals: all ctr=" + std::to_string(expected)
                           : r.detail;
        j.update(explore_json(r.report));
        return out.finish(j, r.ok);
      }
      if (case_name == "hashtable") {
        TableConfig cfg;
        cfg.keys = {1};
        cfg.vals = {7, 9};
        AtomicTripleVerdict sg = hashtable_atomic_case(
            cfg, {{op_set(1, 7), op_get(1)}, {op_set(1, 9)}});
        TableConfig two = cfg;
        two.keys = {1, 2};
        AtomicTripleVerdict ad = hashtable_atomic_case(
            two, {{op_add(1, 7), op_add(2, 7)}, {op_add(1, 9), op_add(2, 9)}});
        j["sets_and_gets"] = {{"atomic", sg.ok},
                              {"reason", sg.reason},
                              {"visited", sg.report.visited}};
        j["contended_adds"] = {{"atomic", ad.ok},
                               {"reason", ad.reason},
                               {"visited", ad.report.visited}};
        j["mode"] = "exhaustive";
        j["conclusive"] = !sg.exhausted && !ad.exhausted;
        return out.finish(j, sg.ok && ad.ok);
      }
      if (case_name == "contention") {
        TableConfig cfg;
        cfg.keys = {1, 2};
        cfg.vals = {7, 9};
        CaseResult r = add_contention_case(cfg, 2, {1, 2});
        j["detail"] = r.ok ? "terminals: both keys land exactly once"
                           : r.detail;
        j.update(explore_json(r.report));
        return out.finish(j, r.ok);
      }
      if (case_name == "lookup") {
        TableConfig cfg;
        cfg.size = case_size;
        LookupVerdict v = entries_lookup_check(cfg);
        j["size"] = case_size;
        j["tables"] = v.tables;
        j["detail"] = v.detail;
        j["mode"] = "exhaustive";
        return out.finish(j, v.ok);
      }
      throw usage_error("unknown case '" + case_name +
                        "' (want increment, increment_unlocked, "
                        "increment_once, hashtable, contention, or lookup)");
    }

    if (stress->parsed()) {
      stress_cfg.fuzz = !stress_no_fuzz;
      StressResult r = native_stress(stress_cfg);
      json j;
      j["command"] = "stress";
      j["threads"] = stress_cfg.threads;
      j["ops_per_thread"] = stress_cfg.ops_per_thread;
      j["window"] = stress_cfg.window;
      j["seed"] = stress_cfg.seed;
      j["adds"] = stress_cfg.adds;
      j["fuzz"] = stress_cfg.fuzz;
      j["table_size"] = stress_cfg.table.size;
      j["mode"] = "sampled";
      j["conclusive"] = false;  // sampling never proves atomicity
      j["rounds"] = r.rounds;
      j["ops"] = r.ops;
      j["detail"] = r.detail;
      return out.finish(j, r.ok);
    }
  } catch (const usage_error& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const bound_error& e) {
    std::cerr << "usage error (bounds): " << e.what() << "\n";
    return 2;
  }
  return 2;
}
