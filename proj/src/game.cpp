#include "iggp/game.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>

namespace iggp {

namespace {

bool in_family(Symbol pred, const std::string& family) {
  const std::string& t = pred.text();
  if (t == family) return true;
  return t.size() > family.size() + 1 && t.compare(0, family.size(), family) == 0 &&
         t[family.size()] == '_';
}

int parse_int(Symbol s, const char* what) {
  const std::string& t = s.text();
  int value = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || p != t.data() + t.size())
    throw GameFormError(std::string(what) + " is not an integer: " + t);
  return value;
}

}  // namespace

std::optional<Symbol> strip_family(Symbol pred, const std::string& family) {
  const std::string& t = pred.text();
  if (t.size() > family.size() + 1 && t.compare(0, family.size(), family) == 0 &&
      t[family.size()] == '_')
    return Symbol::intern(t.substr(family.size() + 1));
  return std::nullopt;
}

Symbol wrap_family(Symbol functor_or_pred, const std::string& family,
                   bool is_wrapped_constant) {
  if (is_wrapped_constant) return Symbol::intern(family);
  return Symbol::intern(family + "_" + functor_or_pred.text());
}

GroundAtom refamily(const GroundAtom& a, const std::string& from,
                    const std::string& to) {
  const std::string& t = a.pred.text();
  if (t == from) return GroundAtom{Symbol::intern(to), a.args};
  if (t.size() > from.size() + 1 && t.compare(0, from.size(), from) == 0 &&
      t[from.size()] == '_')
    return GroundAtom{Symbol::intern(to + t.substr(from.size())), a.args};
  return a;
}

bool Action::operator<(const Action& o) const {
  if (functor != o.functor) return text_less(functor, o.functor);
  for (size_t i = 0; i < args.size() && i < o.args.size(); ++i)
    if (args[i] != o.args[i]) return text_less(args[i], o.args[i]);
  return args.size() < o.args.size();
}

std::string to_string(const Action& a) {
  if (a.args.empty()) return a.functor.text();
  std::string out = "(" + a.functor.text();
  for (Symbol s : a.args) out += " " + s.text();
  return out + ")";
}

bool JointMove::operator<(const JointMove& o) const {
  for (size_t i = 0; i < actions.size() && i < o.actions.size(); ++i) {
    if (actions[i] < o.actions[i]) return true;
    if (o.actions[i] < actions[i]) return false;
  }
  return actions.size() < o.actions.size();
}

size_t hash_value(const GameState& s) {
  return hash_value(s.fluents) * 1099511628211ull + static_cast<size_t>(s.step);
}

Machine Machine::from_file(const std::string& path) {
  Program p = parse_program_file(path);
  // game id = file stem
  std::string id = path;
  size_t slash = id.find_last_of("/\\");
  if (slash != std::string::npos) id = id.substr(slash + 1);
  size_t dot = id.find_last_of('.');
  if (dot != std::string::npos) id = id.substr(0, dot);
  return Machine(p, id);
}

Machine::Machine(const Program& game, std::string game_id)
    : game_id_(std::move(game_id)) {
  Program flat = flatten(game);
  std::vector<Violation> findings = validate(flat);
  if (!findings.empty()) {
    std::string msg = "game description is not well formed:";
    for (const Violation& v : findings) msg += "\n  " + v.message;
    throw GameFormError(msg);
  }
  prepared_ = std::make_shared<PreparedProgram>(flat);

  // Transitive dependency on the true/does families decides which layer a
  // predicate evaluates in.
  std::unordered_map<Symbol, bool> dep_true, dep_does;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Rule& r : flat.rules) {
      bool dt = dep_true[r.head.pred];
      bool dd = dep_does[r.head.pred];
      for (const Literal& l : r.body) {
        dt = dt || in_family(l.atom.pred, "true") || dep_true[l.atom.pred];
        dd = dd || in_family(l.atom.pred, "does") || dep_does[l.atom.pred];
      }
      if (dt && !dep_true[r.head.pred]) dep_true[r.head.pred] = changed = true;
      if (dd && !dep_does[r.head.pred]) dep_does[r.head.pred] = changed = true;
    }
  }

  enum class Layer { Static, State, Transition };
  auto layer_of = [&](Symbol pred) {
    if (in_family(pred, "next") || dep_does[pred]) return Layer::Transition;
    if (in_family(pred, "legal") || in_family(pred, "goal") ||
        pred == Symbol::intern("terminal") || dep_true[pred])
      return Layer::State;
    return Layer::Static;
  };

  for (Symbol pred : {Symbol::intern("legal"), Symbol::intern("goal"),
                      Symbol::intern("terminal")}) {
    // covers the flat family too: dep maps are keyed by flat names
    for (const auto& [p, arity] : flat.predicate_signatures)
      if ((p == pred || in_family(p, pred.text())) && dep_does[p])
        throw GameFormError(p.text() + " may not depend on does");
  }
  for (const auto& [p, arity] : flat.predicate_signatures)
    if (in_family(p, "init") && (dep_true[p] || dep_does[p]))
      throw GameFormError("init may not depend on true or does");

  Program state_program, trans_program;
  for (const Rule& r : flat.rules) {
    switch (layer_of(r.head.pred)) {
      case Layer::Transition:
        trans_program.rules.push_back(r);
        break;
      case Layer::State:
        state_program.rules.push_back(r);
        break;
      case Layer::Static:
        break;
    }
  }
  state_prog_ = std::make_shared<PreparedProgram>(state_program);
  trans_prog_ = std::make_shared<PreparedProgram>(trans_program);

  for (const Rule& r : trans_program.rules)
    for (const Literal& l : r.body)
      if (layer_of(l.atom.pred) == Layer::State)
        transition_needs_state_model_ = true;

  // One full evaluation over the program's own facts gives the static
  // closure and the initial state.
  FactSet startup = prepared_->evaluate(FactSet{});
  std::vector<GroundAtom> statics, background, init_atoms;
  for (const GroundAtom& a : startup) {
    if (layer_of(a.pred) != Layer::Static) continue;
    statics.push_back(a);
    if (in_family(a.pred, "init"))
      init_atoms.push_back(a);
    else
      background.push_back(a);
  }
  static_model_ = FactSet::from(std::move(statics));
  static_background_ = FactSet::from(std::move(background));

  std::vector<GroundAtom> fluents;
  fluents.reserve(init_atoms.size());
  for (const GroundAtom& a : init_atoms)
    fluents.push_back(refamily(a, "init", "true"));
  initial_.fluents = FactSet::from(std::move(fluents));
  initial_.step = 0;

  // Roles in declaration order, then any derived ones.
  const Symbol kRole = Symbol::intern("role");
  for (const Rule& r : flat.rules)
    if (r.is_fact() && r.head.pred == kRole && r.head.arity() == 1 &&
        r.head.is_ground()) {
      Role role{r.head.args[0].symbol};
      if (std::find(roles_.begin(), roles_.end(), role) == roles_.end())
        roles_.push_back(role);
    }
  for (const GroundAtom& a : static_model_.sorted_by_text())
    if (a.pred == kRole && a.args.size() == 1) {
      Role role{a.args[0]};
      if (std::find(roles_.begin(), roles_.end(), role) == roles_.end())
        roles_.push_back(role);
    }
  if (roles_.empty()) throw GameFormError("game declares no roles");

  // Resolve predicate families once.
  const PreparedProgram& sp = *state_prog_;
  for (size_t pid = 0; pid < sp.pred_count(); ++pid) {
    Symbol pred = sp.pred_symbol(static_cast<int>(pid));
    if (in_family(pred, "legal")) {
      legal_pred_ids_.push_back(static_cast<int>(pid));
      if (pred != Symbol::intern("legal")) {
        Symbol functor = *strip_family(pred, "legal");
        legal_to_action_.emplace(pred, functor);
        action_to_legal_.emplace(functor, pred);
        action_to_does_.emplace(functor,
                                Symbol::intern("does_" + functor.text()));
      }
    }
  }
  terminal_pred_id_ = sp.pred_id(Symbol::intern("terminal"), 0);
  goal_pred_id_ = sp.pred_id(Symbol::intern("goal"), 2);

  const PreparedProgram& tp = *trans_prog_;
  for (size_t pid = 0; pid < tp.pred_count(); ++pid) {
    Symbol pred = tp.pred_symbol(static_cast<int>(pid));
    if (in_family(pred, "next")) {
      next_pred_ids_.push_back(static_cast<int>(pid));
      next_to_true_.emplace(
          pred, pred == Symbol::intern("next")
                    ? Symbol::intern("true")
                    : Symbol::intern("true_" + strip_family(pred, "next")->text()));
    }
  }
}

int Machine::role_index(Symbol name) const {
  for (size_t i = 0; i < roles_.size(); ++i)
    if (roles_[i].name == name) return static_cast<int>(i);
  return -1;
}

GameState Machine::initial_state() const { return initial_; }

GroundAtom Machine::does_atom(const Role& role, const Action& a) const {
  if (a.args.empty())
    return GroundAtom{Symbol::intern("does"), {role.name, a.functor}};
  auto it = action_to_does_.find(a.functor);
  Symbol pred = it != action_to_does_.end()
                    ? it->second
                    : Symbol::intern("does_" + a.functor.text());
  GroundAtom out{pred, {role.name}};
  out.args.insert(out.args.end(), a.args.begin(), a.args.end());
  return out;
}

GroundAtom Machine::legal_atom(const Role& role, const Action& a) const {
  if (a.args.empty())
    return GroundAtom{Symbol::intern("legal"), {role.name, a.functor}};
  auto it = action_to_legal_.find(a.functor);
  Symbol pred = it != action_to_legal_.end()
                    ? it->second
                    : Symbol::intern("legal_" + a.functor.text());
  GroundAtom out{pred, {role.name}};
  out.args.insert(out.args.end(), a.args.begin(), a.args.end());
  return out;
}

std::optional<std::pair<Role, Action>> Machine::action_of_legal(
    const GroundAtom& a) const {
  if (a.pred == Symbol::intern("legal")) {
    if (a.args.size() != 2) return std::nullopt;
    return std::make_pair(Role{a.args[0]}, Action{a.args[1], {}});
  }
  auto functor = strip_family(a.pred, "legal");
  if (!functor || a.args.empty()) return std::nullopt;
  Action act{*functor, std::vector<Symbol>(a.args.begin() + 1, a.args.end())};
  return std::make_pair(Role{a.args[0]}, std::move(act));
}

Machine::StateInfo Machine::analyze(const GameState& s,
                                    EvalScratch* scratch) const {
  EvalScratch local;
  EvalScratch& sc = scratch ? *scratch : local;
  const FactSet* seeds[2] = {&static_model_, &s.fluents};
  state_prog_->run(std::span<const FactSet* const>(seeds, 2), sc);

  StateInfo info;
  info.legal.resize(roles_.size());
  info.goals.assign(roles_.size(), 0);

  info.terminal = terminal_pred_id_ >= 0 && sc.row_count(terminal_pred_id_) > 0;

  for (int pid : legal_pred_ids_) {
    Symbol pred = state_prog_->pred_symbol(pid);
    auto functor_it = legal_to_action_.find(pred);
    const size_t rows = sc.row_count(pid);
    for (size_t r = 0; r < rows; ++r) {
      auto row = sc.row(pid, r);
      int ri = role_index(row[0]);
      if (ri < 0)
        throw GameFormError("legal atom for unknown role " + row[0].text());
      Action act;
      if (functor_it == legal_to_action_.end()) {
        act.functor = row[1];  // plain legal/2, constant action
      } else {
        act.functor = functor_it->second;
        act.args.assign(row.begin() + 1, row.end());
      }
      info.legal[ri].push_back(std::move(act));
    }
  }
  for (auto& actions : info.legal) {
    std::sort(actions.begin(), actions.end());
    actions.erase(std::unique(actions.begin(), actions.end()), actions.end());
  }

  if (goal_pred_id_ >= 0) {
    std::vector<bool> seen(roles_.size(), false);
    const size_t rows = sc.row_count(goal_pred_id_);
    for (size_t r = 0; r < rows; ++r) {
      auto row = sc.row(goal_pred_id_, r);
      int ri = role_index(row[0]);
      if (ri < 0) continue;
      int value = parse_int(row[1], "goal value");
      if (value < 0 || value > 100)
        throw GameFormError("goal value outside [0,100]: " +
                            std::to_string(value));
      if (seen[ri] && info.goals[ri] != value)
        throw GameFormError("ambiguous goal for role " + roles_[ri].name.text() +
                            ": " + std::to_string(info.goals[ri]) + " and " +
                            std::to_string(value));
      seen[ri] = true;
      info.goals[ri] = value;
    }
    for (bool b : seen)
      if (!b) info.goal_warning = true;
  } else {
    info.goal_warning = true;
  }

  if (transition_needs_state_model_) {
    std::vector<GroundAtom> model;
    for (size_t pid = 0; pid < state_prog_->pred_count(); ++pid) {
      const size_t rows = sc.row_count(static_cast<int>(pid));
      for (size_t r = 0; r < rows; ++r) {
        auto row = sc.row(static_cast<int>(pid), r);
        model.push_back(
            GroundAtom{state_prog_->pred_symbol(static_cast<int>(pid)),
                       std::vector<Symbol>(row.begin(), row.end())});
      }
    }
    // Fluents the state rules never mention pass through untouched.
    model.insert(model.end(), sc.passthrough().begin(), sc.passthrough().end());
    info.state_model = FactSet::from(std::move(model));
  }
  return info;
}

std::vector<std::vector<Action>> Machine::legal_moves(const GameState& s) const {
  StateInfo info = analyze(s);
  if (!info.terminal)
    for (size_t r = 0; r < roles_.size(); ++r)
      if (info.legal[r].empty())
        throw GameFormError("ill-formed game: role " + roles_[r].name.text() +
                            " has no legal move in a non-terminal state");
  return info.legal;
}

bool Machine::is_terminal(const GameState& s) const { return analyze(s).terminal; }

std::vector<int> Machine::goal_values(const GameState& s) const {
  return analyze(s).goals;
}

GameState Machine::next_state(const GameState& s, const JointMove& joint,
                              const StateInfo* info,
                              EvalScratch* scratch) const {
  if (joint.actions.size() != roles_.size())
    throw IllegalMoveError("joint move must contain exactly one action per role");

  std::optional<StateInfo> computed;
  if (!info) {
    computed = analyze(s, scratch);
    info = &*computed;
  }
  for (size_t i = 0; i < roles_.size(); ++i) {
    const auto& legal = info->legal[i];
    if (!std::binary_search(legal.begin(), legal.end(), joint.actions[i]))
      throw IllegalMoveError("illegal move for role " + roles_[i].name.text() +
                             ": " + to_string(joint.actions[i]));
  }

  std::vector<GroundAtom> does;
  does.reserve(roles_.size());
  for (size_t i = 0; i < roles_.size(); ++i)
    does.push_back(does_atom(roles_[i], joint.actions[i]));
  FactSet does_set = FactSet::from(std::move(does));

  EvalScratch local;
  EvalScratch& sc = scratch ? *scratch : local;
  const FactSet* seeds[3];
  size_t n_seeds = 0;
  if (transition_needs_state_model_) {
    seeds[n_seeds++] = &info->state_model;  // includes statics and fluents
  } else {
    seeds[n_seeds++] = &static_model_;
    seeds[n_seeds++] = &s.fluents;
  }
  seeds[n_seeds++] = &does_set;
  trans_prog_->run(std::span<const FactSet* const>(seeds, n_seeds), sc);

  std::vector<GroundAtom> fluents;
  for (int pid : next_pred_ids_) {
    Symbol true_pred = next_to_true_.at(trans_prog_->pred_symbol(pid));
    const size_t rows = sc.row_count(pid);
    for (size_t r = 0; r < rows; ++r) {
      auto row = sc.row(pid, r);
      fluents.push_back(
          GroundAtom{true_pred, std::vector<Symbol>(row.begin(), row.end())});
    }
  }
  GameState out;
  out.fluents = FactSet::from(std::move(fluents));
  out.step = s.step + 1;
  return out;
}

}  // namespace iggp
