#include "iggp/trace.hpp"

#include <algorithm>
#include <set>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

namespace iggp {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::string to_string(Provenance p) {
  return p == Provenance::Random ? "random" : "intelligent";
}

std::string to_string(TargetKind t) {
  switch (t) {
    case TargetKind::Next: return "next";
    case TargetKind::Legal: return "legal";
    case TargetKind::Goal: return "goal";
    case TargetKind::Terminal: return "terminal";
  }
  return "next";
}

TargetKind parse_target(const std::string& name) {
  if (name == "next") return TargetKind::Next;
  if (name == "legal") return TargetKind::Legal;
  if (name == "goal") return TargetKind::Goal;
  if (name == "terminal") return TargetKind::Terminal;
  throw Error("unknown target predicate: " + name);
}

PlayerSpec::Kind parse_player_kind(const std::string& name) {
  if (name == "random") return PlayerSpec::Kind::Random;
  if (name == "mcts") return PlayerSpec::Kind::Mcts;
  if (name == "astar") return PlayerSpec::Kind::Astar;
  if (name == "intelligent") return PlayerSpec::Kind::Intelligent;
  throw Error("unknown player kind: " + name);
}

// --- match hosting ---------------------------------------------------------------

namespace {

struct PlayerState {
  PlayerSpec spec;
  std::vector<Heuristic> heuristics;
  std::optional<std::vector<Action>> plan;  // A* players
  bool plan_attempted = false;
  size_t plan_pos = 0;
};

Action choose_move(const Machine& machine, PlayerState& ps, int role_index,
                   const GameState& state, const Machine::StateInfo& info,
                   const MatchConfig& config, uint64_t turn_seed) {
  switch (ps.spec.kind) {
    case PlayerSpec::Kind::Random: {
      Rng rng(turn_seed);
      const auto& actions = info.legal[role_index];
      return actions[rng.below(actions.size())];
    }
    case PlayerSpec::Kind::Astar: {
      if (!ps.plan_attempted) {
        SearchBudget budget;
        budget.max_playouts = 500000;
        ps.plan = astar_solve(machine, state, budget);
        ps.plan_attempted = true;
        ps.plan_pos = 0;
      }
      if (ps.plan && ps.plan_pos < ps.plan->size())
        return (*ps.plan)[ps.plan_pos++];
      // No plan (unsolvable within budget) or plan exhausted: search instead.
      [[fallthrough]];
    }
    case PlayerSpec::Kind::Mcts:
    default: {
      MctsConfig mc;
      mc.budget.max_playouts = ps.spec.mcts_playouts;
      mc.budget.rng_seed = turn_seed;
      mc.exploration = ps.spec.exploration;
      mc.move_cap = config.move_cap;
      return mcts_choose(machine, state, role_index, mc, ps.heuristics);
    }
  }
}

}  // namespace

MatchTrace run_match(const Machine& machine,
                     const std::vector<PlayerSpec>& players,
                     const MatchConfig& config) {
  if (config.move_cap < 1) throw Error("run_match: move cap must be at least 1");
  const auto& roles = machine.roles();
  if (players.size() != roles.size())
    throw Error("run_match: one player per role required");

  MatchTrace trace;
  trace.game_id = machine.game_id();
  trace.roles = roles;
  trace.seed = config.seed;
  trace.move_cap = config.move_cap;
  trace.clock_millis = config.clock_millis;

  std::vector<PlayerState> states_of_players;
  bool any_intelligent = false;
  for (const PlayerSpec& spec : players) {
    PlayerState ps;
    ps.spec = spec;
    if (ps.spec.kind == PlayerSpec::Kind::Intelligent) {
      // Single-player games with a derivable target are puzzles for A*;
      // everything else gets the tree search.
      if (roles.size() == 1 && !astar_target(machine).empty())
        ps.spec.kind = PlayerSpec::Kind::Astar;
      else
        ps.spec.kind = PlayerSpec::Kind::Mcts;
    }
    if (ps.spec.kind != PlayerSpec::Kind::Random) any_intelligent = true;
    states_of_players.push_back(std::move(ps));
  }
  trace.provenance = any_intelligent ? Provenance::Intelligent : Provenance::Random;

  // Warm-up: heuristic derivation for MCTS players that asked for it.
  auto warmup_start = Clock::now();
  for (size_t i = 0; i < states_of_players.size(); ++i) {
    PlayerState& ps = states_of_players[i];
    if (ps.spec.kind == PlayerSpec::Kind::Mcts && ps.spec.use_heuristics) {
      double left = double(config.warmup_millis) -
                    std::chrono::duration<double, std::milli>(Clock::now() -
                                                              warmup_start)
                        .count();
      if (left <= 0) break;
      ps.heuristics =
          derive_heuristics(machine, ps.spec.heuristic_simulations,
                            ps.spec.heuristic_threshold,
                            mix_seed(config.seed, 0xbeef00 + i), config.move_cap);
    }
  }

  Rng fallback_rng(mix_seed(config.seed, 0xc10c));
  EvalScratch scratch;
  GameState state = machine.initial_state();
  Machine::StateInfo info = machine.analyze(state, &scratch);

  auto record_state = [&](const GameState& s, const Machine::StateInfo& si) {
    if (!si.terminal)
      for (size_t r = 0; r < roles.size(); ++r)
        if (si.legal[r].empty())
          throw GameFormError("role " + roles[r].name.text() +
                              " has no legal move in a non-terminal state");
    trace.states.push_back(s);
    trace.legals.push_back(si.legal);
    trace.goals.push_back(si.goals);
  };
  record_state(state, info);

  uint64_t turn = 0;
  while (!info.terminal && static_cast<int>(trace.moves.size()) < config.move_cap) {
    JointMove joint;
    joint.actions.resize(roles.size());
    for (size_t r = 0; r < roles.size(); ++r) {
      uint64_t turn_seed = mix_seed(config.seed, turn * 131 + r);
      auto move_start = Clock::now();
      Action action = choose_move(machine, states_of_players[r],
                                  static_cast<int>(r), state, info, config,
                                  turn_seed);
      double took =
          std::chrono::duration<double, std::milli>(Clock::now() - move_start)
              .count();
      const auto& legal = info.legal[r];
      bool is_legal = std::binary_search(legal.begin(), legal.end(), action);
      if (took > double(config.clock_millis) || !is_legal) {
        action = legal[fallback_rng.below(legal.size())];
        ++trace.clock_violations;
      }
      joint.actions[r] = action;
    }
    trace.moves.push_back(joint);
    state = machine.next_state(state, joint, &info, &scratch);
    info = machine.analyze(state, &scratch);
    record_state(state, info);
    ++turn;
  }
  trace.ends_terminal = info.terminal;
  return trace;
}

// --- role flattening ----------------------------------------------------------------

GroundAtom does_atom_of(const Role& role, const Action& a) {
  if (a.args.empty())
    return GroundAtom{Symbol::intern("does"), {role.name, a.functor}};
  GroundAtom out{Symbol::intern("does_" + a.functor.text()), {role.name}};
  out.args.insert(out.args.end(), a.args.begin(), a.args.end());
  return out;
}

GroundAtom legal_atom_of(const Role& role, const Action& a) {
  if (a.args.empty())
    return GroundAtom{Symbol::intern("legal"), {role.name, a.functor}};
  GroundAtom out{Symbol::intern("legal_" + a.functor.text()), {role.name}};
  out.args.insert(out.args.end(), a.args.begin(), a.args.end());
  return out;
}

GroundAtom role_flat_atom(const Role& role, const Action& a) {
  GroundAtom out{a.functor, {role.name}};
  out.args.insert(out.args.end(), a.args.begin(), a.args.end());
  return out;
}

FlattenedTrace flatten_roles(const MatchTrace& trace) {
  FlattenedTrace out;
  for (const JointMove& jm : trace.moves) {
    std::vector<GroundAtom> atoms;
    for (size_t r = 0; r < trace.roles.size(); ++r)
      atoms.push_back(role_flat_atom(trace.roles[r], jm.actions[r]));
    out.moves.push_back(FactSet::from(std::move(atoms)));
  }
  for (const auto& per_role : trace.legals) {
    std::vector<GroundAtom> atoms;
    for (size_t r = 0; r < trace.roles.size(); ++r)
      for (const Action& a : per_role[r])
        atoms.push_back(legal_atom_of(trace.roles[r], a));
    out.legals.push_back(FactSet::from(std::move(atoms)));
  }
  const Symbol kGoal = Symbol::intern("goal");
  for (const auto& per_role : trace.goals) {
    std::vector<GroundAtom> atoms;
    for (size_t r = 0; r < trace.roles.size(); ++r)
      atoms.push_back(GroundAtom{
          kGoal,
          {trace.roles[r].name, Symbol::intern(std::to_string(per_role[r]))}});
    out.goals.push_back(FactSet::from(std::move(atoms)));
  }
  return out;
}

FactSet substitute_pred(const FactSet& s, const std::string& p,
                        const std::string& q) {
  std::vector<GroundAtom> atoms;
  atoms.reserve(s.size());
  for (const GroundAtom& a : s) atoms.push_back(refamily(a, q, p));
  return FactSet::from(std::move(atoms));
}

// --- trace functions ------------------------------------------------------------------

std::vector<std::pair<FactSet, FactSet>> build_lambda(const MatchTrace& trace,
                                                      TargetKind target) {
  std::vector<std::pair<FactSet, FactSet>> pairs;
  const size_t n = trace.states.size();
  FlattenedTrace flat = flatten_roles(trace);

  switch (target) {
    case TargetKind::Legal:
      for (size_t i = 0; i < n; ++i)
        pairs.emplace_back(trace.states[i].fluents, flat.legals[i]);
      break;
    case TargetKind::Goal:
      for (size_t i = 0; i < n; ++i)
        pairs.emplace_back(trace.states[i].fluents, flat.goals[i]);
      break;
    case TargetKind::Next:
      for (size_t i = 0; i + 1 < n; ++i) {
        FactSet background = trace.states[i].fluents;
        for (size_t r = 0; r < trace.roles.size(); ++r)
          background.insert(
              does_atom_of(trace.roles[r], trace.moves[i].actions[r]));
        pairs.emplace_back(std::move(background),
                           substitute_pred(trace.states[i + 1].fluents, "next",
                                           "true"));
      }
      break;
    case TargetKind::Terminal: {
      const GroundAtom terminal_atom{Symbol::intern("terminal"), {}};
      for (size_t i = 0; i < n; ++i) {
        FactSet positives;
        if (i + 1 == n && trace.ends_terminal) positives.insert(terminal_atom);
        pairs.emplace_back(trace.states[i].fluents, std::move(positives));
      }
      break;
    }
  }
  return pairs;
}

// --- domain signatures ------------------------------------------------------------------

namespace {

struct UnionFind {
  std::vector<int> parent;
  int add() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

struct SignatureBuilder {
  UnionFind uf;
  std::map<std::pair<Symbol, int>, int> node_of;
  std::map<int, std::set<Symbol>> constants;  // keyed by node (pre-find)

  int node(Symbol pred, int pos) {
    auto [it, fresh] = node_of.emplace(std::make_pair(pred, pos), -1);
    if (fresh) it->second = uf.add();
    return it->second;
  }

  void observe_atom(const GroundAtom& a) {
    for (size_t i = 0; i < a.args.size(); ++i)
      constants[node(a.pred, static_cast<int>(i))].insert(a.args[i]);
  }

  void observe_rule(const Rule& r) {
    std::map<Symbol, int> var_node;  // variable -> representative node
    auto visit = [&](const Atom& a) {
      for (size_t i = 0; i < a.args.size(); ++i) {
        const Term& t = a.args[i];
        int n = node(a.pred, static_cast<int>(i));
        if (t.is_constant()) {
          constants[n].insert(t.symbol);
        } else if (t.is_variable()) {
          auto [it, fresh] = var_node.emplace(t.symbol, n);
          if (!fresh) uf.unite(n, it->second);
        }
      }
    };
    visit(r.head);
    const Symbol kDistinct = Symbol::intern("distinct");
    for (const Literal& l : r.body)
      if (l.atom.pred != kDistinct) visit(l.atom);  // distinct is a builtin
  }

  // true_f <-> next_f <-> init_f and legal_f <-> does_f share positions.
  void merge_families() {
    std::vector<std::pair<Symbol, int>> keys;
    for (const auto& [key, n] : node_of) keys.push_back(key);
    auto counterpart = [&](Symbol pred, const std::string& from,
                           const std::string& to) -> std::optional<Symbol> {
      const std::string& t = pred.text();
      if (t == from) return Symbol::intern(to);
      if (t.size() > from.size() + 1 && t.compare(0, from.size(), from) == 0 &&
          t[from.size()] == '_')
        return Symbol::intern(to + t.substr(from.size()));
      return std::nullopt;
    };
    for (const auto& [pred, pos] : keys) {
      for (auto [from, to] : std::initializer_list<std::pair<const char*, const char*>>{
               {"next", "true"}, {"init", "true"}, {"does", "legal"}}) {
        auto other = counterpart(pred, from, to);
        if (other) uf.unite(node(pred, pos), node(*other, pos));
      }
    }
  }

  DomainSignature finish() {
    DomainSignature sig;
    std::map<int, int> class_of_root;
    // Deterministic class numbering: walk nodes in key order.
    for (const auto& [key, n] : node_of) {
      int root = uf.find(n);
      auto [it, fresh] =
          class_of_root.emplace(root, static_cast<int>(class_of_root.size()));
      sig.class_of[key] = it->second;
    }
    sig.class_constants.resize(class_of_root.size());
    for (const auto& [n, consts] : constants) {
      int cls = class_of_root[uf.find(n)];
      for (Symbol c : consts) sig.class_constants[cls].push_back(c);
    }
    for (auto& v : sig.class_constants) {
      std::sort(v.begin(), v.end(), text_less);
      v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return sig;
  }
};

}  // namespace

FactSet DomainSignature::pool_for(Symbol pred, size_t arity) const {
  if (arity == 0) return FactSet{GroundAtom{pred, {}}};
  std::vector<const std::vector<Symbol>*> pools;
  for (size_t i = 0; i < arity; ++i) {
    auto it = class_of.find(std::make_pair(pred, static_cast<int>(i)));
    if (it == class_of.end()) return FactSet{};
    const auto& consts = class_constants[it->second];
    if (consts.empty()) return FactSet{};
    pools.push_back(&consts);
  }
  std::vector<GroundAtom> atoms;
  std::vector<size_t> idx(arity, 0);
  for (;;) {
    GroundAtom a{pred, {}};
    a.args.reserve(arity);
    for (size_t i = 0; i < arity; ++i) a.args.push_back((*pools[i])[idx[i]]);
    atoms.push_back(std::move(a));
    size_t k = arity;
    bool done = false;
    while (k > 0) {
      --k;
      if (++idx[k] < pools[k]->size()) break;
      idx[k] = 0;
      if (k == 0) done = true;
    }
    if (done) break;
    if (atoms.size() > 1000000)
      throw Error("domain pool for " + pred.text() + " exceeds 1e6 atoms");
  }
  return FactSet::from(std::move(atoms));
}

DomainSignature infer_signatures(const Machine& machine,
                                 const std::vector<MatchTrace>& traces) {
  if (traces.empty()) throw Error("infer_signatures needs at least one trace");
  SignatureBuilder b;
  for (const Rule& r : machine.flat_program().rules) b.observe_rule(r);
  for (const MatchTrace& trace : traces) {
    for (const GameState& s : trace.states)
      for (const GroundAtom& a : s.fluents) b.observe_atom(a);
    FlattenedTrace flat = flatten_roles(trace);
    for (size_t i = 0; i < trace.moves.size(); ++i)
      for (size_t r = 0; r < trace.roles.size(); ++r)
        b.observe_atom(does_atom_of(trace.roles[r], trace.moves[i].actions[r]));
    for (const FactSet& s : flat.legals)
      for (const GroundAtom& a : s) b.observe_atom(a);
    for (const FactSet& s : flat.goals)
      for (const GroundAtom& a : s) b.observe_atom(a);
  }
  b.merge_families();
  return b.finish();
}

// --- triples and tasks ----------------------------------------------------------------

std::vector<InductionTriple> build_triples(
    const std::vector<std::pair<FactSet, FactSet>>& pairs, const FactSet& pool) {
  FactSet effective_pool = pool;
  for (const auto& [background, positives] : pairs)
    for (const GroundAtom& e : positives)
      if (effective_pool.insert(e))
        std::cerr << "warning: positive " << to_string(e)
                  << " was missing from the negative pool\n";
  std::vector<InductionTriple> out;
  out.reserve(pairs.size());
  for (const auto& [background, positives] : pairs) {
    InductionTriple t;
    t.background = background;
    t.positives = positives;
    t.negatives = effective_pool.set_minus(positives);
    out.push_back(std::move(t));
  }
  return out;
}

FactSet IggpTask::pool() const {
  FactSet out;
  for (const auto& [pred, facts] : domain_pools) out.merge(facts);
  return out;
}

IggpTask build_task(const Machine& machine,
                    const std::vector<MatchTrace>& traces, TargetKind target) {
  if (traces.empty()) throw Error("build_task needs at least one trace");
  IggpTask task;
  task.game = machine.game_id();
  task.target = target;
  task.signature = infer_signatures(machine, traces);
  for (const MatchTrace& t : traces) {
    task.trace_seeds.push_back(t.seed);
    task.move_cap = std::max(task.move_cap, t.move_cap);
    task.clock_millis = std::max(task.clock_millis, t.clock_millis);
  }

  // Target-family predicates with their arities, from the program and the
  // observed traces.
  std::map<Symbol, size_t> family;
  const std::string family_name = to_string(target);
  auto note = [&](Symbol pred, size_t arity) {
    const std::string& t = pred.text();
    if (t == family_name ||
        (t.size() > family_name.size() + 1 &&
         t.compare(0, family_name.size(), family_name) == 0 &&
         t[family_name.size()] == '_'))
      family.emplace(pred, arity);
  };
  for (const auto& [pred, arity] : machine.flat_program().predicate_signatures)
    note(pred, arity);
  std::vector<std::vector<std::pair<FactSet, FactSet>>> all_pairs;
  for (const MatchTrace& trace : traces) {
    all_pairs.push_back(build_lambda(trace, target));
    for (const auto& [background, positives] : all_pairs.back())
      for (const GroundAtom& a : positives) note(a.pred, a.args.size());
  }
  if (target == TargetKind::Terminal)
    family.emplace(Symbol::intern("terminal"), 0);

  for (const auto& [pred, arity] : family) {
    FactSet pool = task.signature.pool_for(pred, arity);
    if (pool.empty() && arity > 0)
      std::cerr << "warning: no domain pool for predicate " << pred.text()
                << "/" << arity << "\n";
    task.domain_pools[pred] = std::move(pool);
  }

  // Make sure every positive is inside its predicate pool before building.
  for (const auto& pairs : all_pairs)
    for (const auto& [background, positives] : pairs)
      for (const GroundAtom& e : positives) task.domain_pools[e.pred].insert(e);

  FactSet pool = task.pool();
  const FactSet& statics = machine.static_background();
  for (size_t ti = 0; ti < traces.size(); ++ti) {
    std::vector<std::pair<FactSet, FactSet>> pairs = all_pairs[ti];
    for (auto& [background, positives] : pairs) background.merge(statics);
    std::vector<InductionTriple> triples = build_triples(pairs, pool);
    for (InductionTriple& t : triples) {
      t.provenance = traces[ti].provenance;
      task.triples.push_back(std::move(t));
    }
  }
  return task;
}

// --- files ---------------------------------------------------------------------------

void write_fact_file(const FactSet& facts, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  for (const GroundAtom& a : facts.sorted_by_text()) out << fact_line(a) << "\n";
}

FactSet read_fact_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot read " + file.string());
  std::vector<GroundAtom> atoms;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    try {
      atoms.push_back(to_ground(parse_fact_line(line)));
    } catch (const Error& e) {
      throw ParseError(file.string() + ":" + std::to_string(line_no) + ": " +
                           e.what(),
                       SourcePos{line_no, 1});
    }
  }
  return FactSet::from(std::move(atoms));
}

void write_trace(const MatchTrace& trace, const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << "trace " << trace.game_id << "\n";
  out << "provenance " << to_string(trace.provenance) << "\n";
  out << "seed " << trace.seed << "\n";
  out << "cap " << trace.move_cap << "\n";
  out << "clockmillis " << trace.clock_millis << "\n";
  out << "clockviolations " << trace.clock_violations << "\n";
  out << "endsterminal " << (trace.ends_terminal ? 1 : 0) << "\n";
  out << "roles\n";
  for (const Role& r : trace.roles) out << r.name.text() << "\n";
  out << "states\n";
  for (size_t i = 0; i < trace.states.size(); ++i) {
    out << "state " << i << "\n";
    for (const GroundAtom& a : trace.states[i].fluents.sorted_by_text())
      out << fact_line(a) << "\n";
  }
  out << "moves\n";
  for (size_t i = 0; i < trace.moves.size(); ++i) {
    out << "move " << i << "\n";
    std::vector<GroundAtom> atoms;
    for (size_t r = 0; r < trace.roles.size(); ++r)
      atoms.push_back(does_atom_of(trace.roles[r], trace.moves[i].actions[r]));
    for (const GroundAtom& a : FactSet::from(std::move(atoms)).sorted_by_text())
      out << fact_line(a) << "\n";
  }
  out << "legals\n";
  for (size_t i = 0; i < trace.legals.size(); ++i) {
    out << "legal " << i << "\n";
    std::vector<GroundAtom> atoms;
    for (size_t r = 0; r < trace.roles.size(); ++r)
      for (const Action& a : trace.legals[i][r])
        atoms.push_back(legal_atom_of(trace.roles[r], a));
    for (const GroundAtom& a : FactSet::from(std::move(atoms)).sorted_by_text())
      out << fact_line(a) << "\n";
  }
  out << "goals\n";
  for (size_t i = 0; i < trace.goals.size(); ++i) {
    out << "goal " << i << "\n";
    for (size_t r = 0; r < trace.roles.size(); ++r)
      out << "goal(" << trace.roles[r].name.text() << ","
          << trace.goals[i][r] << ").\n";
  }
}

namespace {

std::pair<Role, Action> split_does(const GroundAtom& a) {
  if (a.pred == Symbol::intern("does")) {
    if (a.args.size() != 2) throw Error("malformed does atom: " + to_string(a));
    return {Role{a.args[0]}, Action{a.args[1], {}}};
  }
  auto functor = strip_family(a.pred, "does");
  if (!functor || a.args.empty())
    throw Error("malformed does atom: " + to_string(a));
  return {Role{a.args[0]},
          Action{*functor, std::vector<Symbol>(a.args.begin() + 1, a.args.end())}};
}

std::pair<Role, Action> split_legal(const GroundAtom& a) {
  if (a.pred == Symbol::intern("legal")) {
    if (a.args.size() != 2) throw Error("malformed legal atom: " + to_string(a));
    return {Role{a.args[0]}, Action{a.args[1], {}}};
  }
  auto functor = strip_family(a.pred, "legal");
  if (!functor || a.args.empty())
    throw Error("malformed legal atom: " + to_string(a));
  return {Role{a.args[0]},
          Action{*functor, std::vector<Symbol>(a.args.begin() + 1, a.args.end())}};
}

}  // namespace

MatchTrace read_trace(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot read " + file.string());
  MatchTrace trace;
  std::string line;
  enum class Section { Header, Roles, States, Moves, Legals, Goals };
  Section section = Section::Header;
  int index = -1;

  auto role_index = [&trace](Symbol name) {
    for (size_t i = 0; i < trace.roles.size(); ++i)
      if (trace.roles[i].name == name) return static_cast<int>(i);
    throw Error("trace mentions unknown role " + name.text());
  };

  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n'))
      line.pop_back();
    if (line.empty()) continue;

    if (line == "roles") { section = Section::Roles; continue; }
    if (line == "states") { section = Section::States; continue; }
    if (line == "moves") { section = Section::Moves; continue; }
    if (line == "legals") { section = Section::Legals; continue; }
    if (line == "goals") { section = Section::Goals; continue; }

    std::istringstream ls(line);
    std::string word;
    switch (section) {
      case Section::Header: {
        ls >> word;
        if (word == "trace") ls >> trace.game_id;
        else if (word == "provenance") {
          ls >> word;
          trace.provenance =
              word == "intelligent" ? Provenance::Intelligent : Provenance::Random;
        } else if (word == "seed") ls >> trace.seed;
        else if (word == "cap") ls >> trace.move_cap;
        else if (word == "clockmillis") ls >> trace.clock_millis;
        else if (word == "clockviolations") ls >> trace.clock_violations;
        else if (word == "endsterminal") {
          int v = 0;
          ls >> v;
          trace.ends_terminal = v != 0;
        }
        break;
      }
      case Section::Roles:
        trace.roles.push_back(Role{Symbol::intern(line)});
        break;
      case Section::States:
        if (line.rfind("state ", 0) == 0) {
          index = std::stoi(line.substr(6));
          trace.states.push_back(GameState{FactSet{}, index});
        } else {
          trace.states.back().fluents.insert(to_ground(parse_fact_line(line)));
        }
        break;
      case Section::Moves:
        if (line.rfind("move ", 0) == 0) {
          trace.moves.push_back(JointMove{});
          trace.moves.back().actions.resize(trace.roles.size());
        } else {
          auto [role, action] = split_does(to_ground(parse_fact_line(line)));
          trace.moves.back().actions[role_index(role.name)] = action;
        }
        break;
      case Section::Legals:
        if (line.rfind("legal ", 0) == 0) {
          trace.legals.emplace_back(trace.roles.size());
        } else {
          auto [role, action] = split_legal(to_ground(parse_fact_line(line)));
          trace.legals.back()[role_index(role.name)].push_back(action);
        }
        break;
      case Section::Goals:
        if (line.rfind("goal ", 0) == 0 &&
            line.find('(') == std::string::npos) {
          trace.goals.emplace_back(trace.roles.size(), 0);
        } else {
          GroundAtom a = to_ground(parse_fact_line(line));
          if (a.args.size() != 2) throw Error("malformed goal line: " + line);
          trace.goals.back()[role_index(a.args[0])] =
              std::stoi(a.args[1].text());
        }
        break;
    }
  }
  for (auto& per_role : trace.legals)
    for (auto& actions : per_role) std::sort(actions.begin(), actions.end());
  return trace;
}

void serialize_task(const IggpTask& task, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest", std::ios::binary);
  if (!manifest) throw Error("cannot write " + (dir / "manifest").string());
  manifest << "game " << task.game << "\n";
  manifest << "target " << to_string(task.target) << "\n";
  manifest << "cap " << task.move_cap << "\n";
  manifest << "clockmillis " << task.clock_millis << "\n";
  for (uint64_t seed : task.trace_seeds) manifest << "seed " << seed << "\n";
  manifest << "triples " << task.triples.size() << "\n";
  for (size_t i = 0; i < task.triples.size(); ++i)
    manifest << "provenance " << i << " " << to_string(task.triples[i].provenance)
             << "\n";
  for (size_t c = 0; c < task.signature.class_constants.size(); ++c) {
    manifest << "class " << c;
    for (Symbol s : task.signature.class_constants[c])
      manifest << " " << s.text();
    manifest << "\n";
  }
  {
    // pos lines in canonical text order
    std::vector<std::pair<std::pair<Symbol, int>, int>> entries(
        task.signature.class_of.begin(), task.signature.class_of.end());
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      if (a.first.first != b.first.first)
        return text_less(a.first.first, b.first.first);
      return a.first.second < b.first.second;
    });
    for (const auto& [key, cls] : entries)
      manifest << "pos " << key.first.text() << " " << key.second << " " << cls
               << "\n";
  }
  write_fact_file(task.pool(), dir / "pool.pl");
  for (size_t i = 0; i < task.triples.size(); ++i) {
    write_fact_file(task.triples[i].background,
                    dir / ("background_" + std::to_string(i) + ".pl"));
    write_fact_file(task.triples[i].positives,
                    dir / ("pos_" + std::to_string(i) + ".pl"));
    write_fact_file(task.triples[i].negatives,
                    dir / ("neg_" + std::to_string(i) + ".pl"));
  }
}

IggpTask parse_task(const fs::path& dir) {
  std::ifstream manifest(dir / "manifest", std::ios::binary);
  if (!manifest) throw Error("cannot read " + (dir / "manifest").string());
  IggpTask task;
  size_t n_triples = 0;
  std::vector<Provenance> provenance;
  std::string line;
  while (std::getline(manifest, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "game") ls >> task.game;
    else if (word == "target") {
      std::string t;
      ls >> t;
      task.target = parse_target(t);
    } else if (word == "cap") ls >> task.move_cap;
    else if (word == "clockmillis") ls >> task.clock_millis;
    else if (word == "seed") {
      uint64_t seed;
      ls >> seed;
      task.trace_seeds.push_back(seed);
    } else if (word == "triples") {
      ls >> n_triples;
      provenance.assign(n_triples, Provenance::Random);
    } else if (word == "provenance") {
      size_t i;
      std::string p;
      ls >> i >> p;
      if (i < provenance.size() && p == "intelligent")
        provenance[i] = Provenance::Intelligent;
    } else if (word == "class") {
      size_t c;
      ls >> c;
      if (task.signature.class_constants.size() <= c)
        task.signature.class_constants.resize(c + 1);
      std::string s;
      while (ls >> s)
        task.signature.class_constants[c].push_back(Symbol::intern(s));
    } else if (word == "pos") {
      std::string pred;
      int pos, cls;
      ls >> pred >> pos >> cls;
      task.signature.class_of[{Symbol::intern(pred), pos}] = cls;
    }
  }
  FactSet pool = read_fact_file(dir / "pool.pl");
  for (const GroundAtom& a : pool) task.domain_pools[a.pred].insert(a);
  for (size_t i = 0; i < n_triples; ++i) {
    InductionTriple t;
    t.background =
        read_fact_file(dir / ("background_" + std::to_string(i) + ".pl"));
    t.positives = read_fact_file(dir / ("pos_" + std::to_string(i) + ".pl"));
    t.negatives = read_fact_file(dir / ("neg_" + std::to_string(i) + ".pl"));
    t.provenance = provenance[i];
    task.triples.push_back(std::move(t));
  }
  return task;
}

}  // namespace iggp
