// Match hosting, trace logging, and the trace -> induction-task
// transformation, including task/trace file formats.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "iggp/game.hpp"
#include "iggp/players.hpp"

namespace iggp {

enum class Provenance { Random, Intelligent };
std::string to_string(Provenance p);

// The five logged sequences of one match: n states, k roles, n-1 joint
// moves, n per-role legal sets, n per-role goal values.
struct MatchTrace {
  std::string game_id;
  std::vector<Role> roles;
  std::vector<GameState> states;
  std::vector<JointMove> moves;
  std::vector<std::vector<std::vector<Action>>> legals;  // [step][role]
  std::vector<std::vector<int>> goals;                   // [step][role]
  bool ends_terminal = false;
  Provenance provenance = Provenance::Random;
  uint64_t seed = 0;
  int move_cap = 0;
  uint64_t clock_millis = 0;
  int clock_violations = 0;

  size_t length() const { return states.size(); }
};

struct PlayerSpec {
  enum class Kind { Random, Mcts, Astar, Intelligent };
  Kind kind = Kind::Random;
  uint64_t mcts_playouts = 400;
  double exploration = 1.4142135623730951;
  bool use_heuristics = false;       // derive during warm-up, guide MCTS
  int heuristic_simulations = 64;
  double heuristic_threshold = 0.5;
};

PlayerSpec::Kind parse_player_kind(const std::string& name);

struct MatchConfig {
  int move_cap = 60;
  uint64_t seed = 0;
  uint64_t clock_millis = 15000;   // per move
  uint64_t warmup_millis = 30000;  // pre-match budget (heuristic derivation)
};

// Simulates one match, querying the assigned player per role each turn.
// A player exceeding the per-move clock is replaced by a uniform random
// legal move for that turn and the violation is counted.
MatchTrace run_match(const Machine& machine,
                     const std::vector<PlayerSpec>& players,
                     const MatchConfig& config);

// --- role flattening and substitutions --------------------------------------

// Moves/legals/goals as per-step flat atom sets with the role inserted as
// the first extra argument: actions keep their functor (move(black,2,2)),
// legals are wrapped in the legal predicate, goals become goal(role,value).
struct FlattenedTrace {
  std::vector<FactSet> moves;   // length n-1
  std::vector<FactSet> legals;  // length n
  std::vector<FactSet> goals;   // length n
};
FlattenedTrace flatten_roles(const MatchTrace& trace);

// S[p/q]: atoms whose predicate is q (or whose flat name begins q_) are
// rewritten to p (resp. the p_ prefix); everything else passes through.
FactSet substitute_pred(const FactSet& s, const std::string& p,
                        const std::string& q);

// Free-standing flat-atom builders matching Machine::does_atom naming.
GroundAtom does_atom_of(const Role& role, const Action& a);
GroundAtom legal_atom_of(const Role& role, const Action& a);
GroundAtom role_flat_atom(const Role& role, const Action& a);  // move(black,2,2)

// --- induction tasks -----------------------------------------------------------

enum class TargetKind { Next, Legal, Goal, Terminal };
std::string to_string(TargetKind t);
TargetKind parse_target(const std::string& name);

struct InductionTriple {
  FactSet background;
  FactSet positives;
  FactSet negatives;
  Provenance provenance = Provenance::Random;
};

// Per-argument-position constant pools inferred from the game description
// and the observed traces; positions linked by shared rule variables (or by
// the true/next/init and legal/does family correspondence) share one pool.
struct DomainSignature {
  std::map<std::pair<Symbol, int>, int> class_of;   // (pred, argpos) -> class
  std::vector<std::vector<Symbol>> class_constants;  // per class, text order

  // Cross-product grounding of the predicate's positions; empty FactSet if
  // some position is unknown or has an empty pool.
  FactSet pool_for(Symbol pred, size_t arity) const;
};

struct IggpTask {
  std::string game;
  TargetKind target = TargetKind::Next;
  std::vector<InductionTriple> triples;
  std::map<Symbol, FactSet> domain_pools;  // per target-family predicate
  DomainSignature signature;
  // provenance of the source matches, recorded into the manifest
  std::vector<uint64_t> trace_seeds;
  int move_cap = 0;
  uint64_t clock_millis = 0;

  FactSet pool() const;  // union of domain_pools
};

// (B_i, E_i+) pairs per the four trace functions. For `next` the background
// includes the does-atoms of the step's joint move; for `terminal` the final
// positive is emitted only when the trace genuinely ended terminal.
std::vector<std::pair<FactSet, FactSet>> build_lambda(const MatchTrace& trace,
                                                      TargetKind target);

DomainSignature infer_signatures(const Machine& machine,
                                 const std::vector<MatchTrace>& traces);

// Each (B, E+) pair becomes (B, E+, pool - E+). Positives missing from the
// pool are added to it (with a warning flag in the return) first.
std::vector<InductionTriple> build_triples(
    const std::vector<std::pair<FactSet, FactSet>>& pairs, const FactSet& pool);

IggpTask build_task(const Machine& machine,
                    const std::vector<MatchTrace>& traces, TargetKind target);

// --- files ------------------------------------------------------------------------

void write_trace(const MatchTrace& trace, const std::filesystem::path& file);
MatchTrace read_trace(const std::filesystem::path& file);

// One directory per (game, target): background_<i>.pl / pos_<i>.pl /
// neg_<i>.pl with one canonical ground fact per line, plus pool.pl and a
// manifest. parse_task is the exact inverse.
void serialize_task(const IggpTask& task, const std::filesystem::path& dir);
IggpTask parse_task(const std::filesystem::path& dir);

FactSet read_fact_file(const std::filesystem::path& file);
void write_fact_file(const FactSet& facts, const std::filesystem::path& file);

}  // namespace iggp
