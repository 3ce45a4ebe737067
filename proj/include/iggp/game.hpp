// GDL program as a state machine over the reserved predicates
// (init, legal, next, goal, terminal).
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iggp/datalog.hpp"
#include "iggp/gdl.hpp"

namespace iggp {

struct Role {
  Symbol name;
  bool operator==(const Role& o) const { return name == o.name; }
};

// A player action; constant actions (noop, scissors) have no args.
struct Action {
  Symbol functor;
  std::vector<Symbol> args;

  bool operator==(const Action& o) const {
    return functor == o.functor && args == o.args;
  }
  bool operator<(const Action& o) const;  // canonical text order
};

std::string to_string(const Action& a);

// One action per role, in the machine's role order.
struct JointMove {
  std::vector<Action> actions;

  bool operator==(const JointMove& o) const { return actions == o.actions; }
  bool operator<(const JointMove& o) const;  // canonical text order
};

struct GameState {
  FactSet fluents;  // true-family flat atoms
  int step = 0;

  bool operator==(const GameState& o) const {
    return step == o.step && fluents == o.fluents;
  }
};

size_t hash_value(const GameState& s);

class IllegalMoveError : public Error {
 public:
  using Error::Error;
};
class GameFormError : public Error {
 public:
  using Error::Error;
};

class Machine {
 public:
  // Takes a parsed program, flattens and validates it. Throws GameFormError
  // on validation findings.
  explicit Machine(const Program& game, std::string game_id = "game");
  static Machine from_file(const std::string& path);

  const std::string& game_id() const { return game_id_; }
  const Program& flat_program() const { return prepared_->program(); }
  const PreparedProgram& prepared() const { return *prepared_; }

  const std::vector<Role>& roles() const { return roles_; }
  int role_index(Symbol name) const;

  GameState initial_state() const;

  // Everything derivable from one state model in one pass; legal action
  // sets are canonically sorted.
  struct StateInfo {
    bool terminal = false;
    std::vector<std::vector<Action>> legal;  // per role
    std::vector<int> goals;                  // per role
    bool goal_warning = false;               // some role had no goal atom
    FactSet state_model;  // filled only when transitions need derived atoms
  };
  StateInfo analyze(const GameState& s, EvalScratch* scratch = nullptr) const;

  std::vector<std::vector<Action>> legal_moves(const GameState& s) const;
  bool is_terminal(const GameState& s) const;
  // Values per role in role order; missing goal atoms yield 0 (see
  // StateInfo::goal_warning). Two distinct values for one role is an error.
  std::vector<int> goal_values(const GameState& s) const;

  // Applies a joint move. Verifies legality against `info` when given
  // (callers that just ran analyze pass it to skip recomputation),
  // otherwise computes the legal sets first.
  GameState next_state(const GameState& s, const JointMove& joint,
                       const StateInfo* info = nullptr,
                       EvalScratch* scratch = nullptr) const;

  // Static background: ground atoms derivable without any state or move
  // (role/succ/beats/... facts plus their closure), excluding the
  // init family. Replicated into induction backgrounds.
  const FactSet& static_background() const { return static_background_; }

  // Flat does-atom for a role's action, e.g. does_mark(x,1,2).
  GroundAtom does_atom(const Role& role, const Action& a) const;
  GroundAtom legal_atom(const Role& role, const Action& a) const;
  std::optional<std::pair<Role, Action>> action_of_legal(const GroundAtom& a) const;

 private:
  FactSet transition_inputs(const GameState& s, const JointMove& joint,
                            const FactSet* state_model,
                            EvalScratch* scratch) const;

  std::string game_id_;
  std::shared_ptr<const PreparedProgram> prepared_;    // full program
  std::shared_ptr<const PreparedProgram> state_prog_;  // fluent-dependent, does-free
  std::shared_ptr<const PreparedProgram> trans_prog_;  // does-dependent
  bool transition_needs_state_model_ = false;

  std::vector<Role> roles_;
  GameState initial_;
  FactSet static_model_;       // full static closure (feeds every state eval)
  FactSet static_background_;  // closure minus init family

  // Predicate families, resolved once.
  std::vector<int> legal_pred_ids_;  // ids in state_prog_
  int terminal_pred_id_ = -1;
  int goal_pred_id_ = -1;
  std::vector<int> next_pred_ids_;  // ids in trans_prog_
  std::unordered_map<Symbol, Symbol> next_to_true_;
  std::unordered_map<Symbol, Symbol> action_to_does_;
  std::unordered_map<Symbol, Symbol> action_to_legal_;
  std::unordered_map<Symbol, Symbol> legal_to_action_;  // flat legal pred -> functor
};

// Name mapping helpers shared with the trace pipeline: true_cell <-> cell
// and friends. `family` is e.g. "true"; returns nullopt when `pred` is not
// in that family.
std::optional<Symbol> strip_family(Symbol pred, const std::string& family);
Symbol wrap_family(Symbol functor_or_pred, const std::string& family,
                   bool is_wrapped_constant);
// Rewrites true_f -> next_f style names: atoms in family `from` move to
// family `to`; other atoms are returned unchanged.
GroundAtom refamily(const GroundAtom& a, const std::string& from,
                    const std::string& to);

}  // namespace iggp

template <>
struct std::hash<iggp::GameState> {
  size_t operator()(const iggp::GameState& s) const noexcept {
    return iggp::hash_value(s);
  }
};
