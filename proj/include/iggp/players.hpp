// Move selection at two quality levels: uniform random, UCT Monte-Carlo
// tree search with optional correlation-derived heuristics, and A* for
// single-player puzzles.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>

#include "iggp/game.hpp"

namespace iggp {

// Deterministic RNG wrapper; mt19937_64 plus rejection sampling so draws
// are identical across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  uint64_t next() { return engine_(); }
  size_t below(size_t n);      // uniform in [0, n)
  double unit();               // uniform in [0, 1)

 private:
  std::mt19937_64 engine_;
};

// Stable derivation of per-match / per-turn seeds from one root seed.
uint64_t mix_seed(uint64_t seed, uint64_t stream);

struct SearchBudget {
  uint64_t max_playouts = 10000;          // A*: node-expansion cap
  uint64_t max_millis = kUnlimited;
  uint64_t rng_seed = 0;

  static constexpr uint64_t kUnlimited = ~uint64_t{0};
  bool zero() const { return max_playouts == 0 && max_millis == 0; }
};

// One action per role, drawn uniformly and independently.
JointMove random_move(const std::vector<std::vector<Action>>& legal, Rng& rng);

struct Heuristic {
  Symbol fluent_pred;
  int value_pos = 0;    // numeric argument position
  int role_pos = -1;    // argument position carrying the role, -1 if none
  Symbol role;          // role this quantity is correlated with
  double correlation = 0.0;
  bool enabled = false;
  double min_value = 0.0, max_value = 0.0;  // observed range, for normalization
};

// Runs full random simulations and correlates each numeric state quantity
// (per-simulation mean) with the final goal value per role. Candidates at or
// above `threshold` in |correlation| are enabled.
std::vector<Heuristic> derive_heuristics(const Machine& machine,
                                         int n_simulations, double threshold,
                                         uint64_t seed, int move_cap = 60);

struct MctsConfig {
  SearchBudget budget;
  double exploration = 1.4142135623730951;  // sqrt(2)
  double heuristic_weight = 0.5;
  int move_cap = 60;  // playouts truncate at this absolute step
};

struct MctsResult {
  Action action;
  bool zero_budget_fallback = false;
  uint64_t playouts = 0;
  // Root visits aggregated per action of the searching role.
  std::map<std::string, uint64_t> action_visits;
};

MctsResult mcts_search(const Machine& machine, const GameState& state,
                       int role_index, const MctsConfig& config,
                       const std::vector<Heuristic>& heuristics = {});

Action mcts_choose(const Machine& machine, const GameState& state,
                   int role_index, const MctsConfig& config,
                   const std::vector<Heuristic>& heuristics = {});

// Target fluents for A*: the ground true-family atoms asserted positively in
// the body of a goal(role,100) rule. Empty when no rule yields one.
FactSet astar_target(const Machine& machine);

// Shortest action sequence to a goal-value-100 state, A* with the hamming
// distance to the target fluents. nullopt when the budget is exhausted or
// the reachable space contains no goal state. Single-role games only.
std::optional<std::vector<Action>> astar_solve(const Machine& machine,
                                               const GameState& start,
                                               const SearchBudget& budget);

}  // namespace iggp
