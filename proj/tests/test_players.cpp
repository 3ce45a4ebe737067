#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "iggp/players.hpp"
#include "support/puzzle_oracle.hpp"
#include "support/ttt_minimax.hpp"

using namespace iggp;

namespace {

Machine load(const char* name) {
  return Machine::from_file(
      (std::filesystem::path(IGGP_GAMES_DIR) / name).string());
}

Action act(const char* functor, std::initializer_list<const char*> args = {}) {
  Action a{Symbol::intern(functor), {}};
  for (const char* s : args) a.args.push_back(Symbol::intern(s));
  return a;
}

GroundAtom atom(const char* text) {
  return to_ground(parse_fact_line(std::string(text) + "."));
}

}  // namespace

// --- random_move -------------------------------------------------------------

TEST_CASE("forced noop for everyone") {
  Rng rng(1);
  std::vector<std::vector<Action>> legal = {{act("noop")}, {act("noop")}};
  JointMove jm = random_move(legal, rng);
  REQUIRE(jm.actions.size() == 2);
  CHECK(jm.actions[0] == act("noop"));
  CHECK(jm.actions[1] == act("noop"));
}

TEST_CASE("draws are uniform within three sigma") {
  Rng rng(20260808);
  std::vector<std::vector<Action>> legal = {{act("a"), act("b"), act("c")}};
  const int draws = 30000;
  std::map<std::string, int> counts;
  for (int i = 0; i < draws; ++i)
    counts[to_string(random_move(legal, rng).actions[0])]++;
  double expect = draws / 3.0;
  double sigma = std::sqrt(draws * (1.0 / 3) * (2.0 / 3));
  for (const auto& [name, count] : counts)
    CHECK(std::abs(count - expect) < 3 * sigma);
  CHECK(counts.size() == 3);
}

TEST_CASE("joint moves draw independently per role") {
  Rng rng(5);
  std::vector<std::vector<Action>> legal = {{act("a"), act("b")},
                                            {act("c"), act("d"), act("e")}};
  std::set<std::string> seen;
  for (int i = 0; i < 200; ++i) {
    JointMove jm = random_move(legal, rng);
    REQUIRE(jm.actions.size() == 2);
    seen.insert(to_string(jm.actions[0]) + "|" + to_string(jm.actions[1]));
  }
  CHECK(seen.size() == 6);  // full product observed
  CHECK_THROWS_AS(random_move({{act("a")}, {}}, rng), Error);
}

// --- MCTS ------------------------------------------------------------------------

TEST_CASE("a forced move returns immediately regardless of budget") {
  Machine ttt = load("tictactoe.gdl");
  MctsConfig config;
  config.budget.max_playouts = 0;
  config.budget.max_millis = 0;
  // o has only noop at the initial state
  Action a = mcts_choose(ttt, ttt.initial_state(), 1, config);
  CHECK(a == act("noop"));
}

TEST_CASE("zero budget falls back to a flagged random action") {
  Machine ttt = load("tictactoe.gdl");
  MctsConfig config;
  config.budget.max_playouts = 0;
  config.budget.max_millis = 0;
  config.budget.rng_seed = 7;
  MctsResult r = mcts_search(ttt, ttt.initial_state(), 0, config);
  CHECK(r.zero_budget_fallback);
  CHECK(r.playouts == 0);
}

TEST_CASE("mcts blocks the opponent's open line") {
  // x on (1,1),(1,2); o on (2,2); o to move must block (1,3).
  testing::TttBoard board = {'x', 'x', '.', '.', 'o', '.', '.', '.', '.'};
  auto safe = testing::ttt_non_losing_moves(board, 'o');
  REQUIRE(safe == std::vector<int>{2});  // the oracle: blocking is forced

  Machine ttt = load("tictactoe.gdl");
  GameState s;
  s.fluents = FactSet{atom("true_cell(1,1,x)"), atom("true_cell(1,2,x)"),
                      atom("true_cell(1,3,b)"), atom("true_cell(2,1,b)"),
                      atom("true_cell(2,2,o)"), atom("true_cell(2,3,b)"),
                      atom("true_cell(3,1,b)"), atom("true_cell(3,2,b)"),
                      atom("true_cell(3,3,b)"), atom("true_control(o)")};
  s.step = 3;
  MctsConfig config;
  config.budget.max_playouts = 10000;
  config.budget.rng_seed = 11;
  config.move_cap = 9;
  Action a = mcts_choose(ttt, s, 1, config);
  CHECK(a == act("mark", {"1", "3"}));
}

TEST_CASE("rps visit counts stay near-uniform at 30000 playouts") {
  // single round: the playout cap stops the match after one joint move
  Machine rps = load("rps.gdl");
  MctsConfig config;
  config.budget.max_playouts = 30000;
  config.budget.rng_seed = 17;
  config.move_cap = 1;
  MctsResult r = mcts_search(rps, rps.initial_state(), 0, config);
  REQUIRE(r.action_visits.size() == 3);
  uint64_t lo = ~uint64_t{0}, hi = 0;
  for (const auto& [name, visits] : r.action_visits) {
    lo = std::min(lo, visits);
    hi = std::max(hi, visits);
  }
  CHECK(double(hi - lo) / double(hi) < 0.10);
}

TEST_CASE("same seed and budget give the identical action") {
  Machine ttt = load("tictactoe.gdl");
  MctsConfig config;
  config.budget.max_playouts = 500;
  config.budget.rng_seed = 99;
  config.move_cap = 9;
  Action a = mcts_choose(ttt, ttt.initial_state(), 0, config);
  Action b = mcts_choose(ttt, ttt.initial_state(), 0, config);
  CHECK(a == b);
}

TEST_CASE("disabled heuristics leave plain UCT untouched, seed for seed") {
  Machine ttt = load("tictactoe.gdl");
  MctsConfig config;
  config.budget.max_playouts = 400;
  config.budget.rng_seed = 123;
  config.move_cap = 9;
  Heuristic off;
  off.fluent_pred = Symbol::intern("true_cell");
  off.value_pos = 0;
  off.role = Symbol::intern("x");
  off.enabled = false;
  Action plain = mcts_choose(ttt, ttt.initial_state(), 0, config, {});
  Action with = mcts_choose(ttt, ttt.initial_state(), 0, config, {off});
  CHECK(plain == with);
}

// --- heuristic derivation -----------------------------------------------------------

namespace {

const char* kCoinGame =
    "(role p)\n"
    "(coin 1)\n(coin 2)\n"
    "(ssucc 0 1)\n"
    "(scoregoal 0 0)\n(scoregoal 1 50)\n(scoregoal 2 100)\n"
    "(init (step 0))\n(init (score 0))\n"
    "(<= (legal p (pick ?c)) (coin ?c))\n"
    "(<= (next (score ?c)) (does p (pick ?c)))\n"
    "(<= (next (step ?n)) (true (step ?m)) (ssucc ?m ?n))\n"
    "(<= (goal p ?g) (true (score ?s)) (scoregoal ?s ?g))\n"
    "(<= terminal (true (step 1)))\n";

}  // namespace

TEST_CASE("a quantity copied into the goal correlates perfectly") {
  Machine m(parse_program(kCoinGame), "coin");
  auto hs = derive_heuristics(m, 32, 0.9, 2026, 10);
  bool found = false;
  for (const Heuristic& h : hs)
    if (h.fluent_pred == Symbol::intern("true_score") && h.value_pos == 0) {
      found = true;
      CHECK(h.correlation == doctest::Approx(1.0));
      CHECK(h.enabled);
    }
  CHECK(found);
}

TEST_CASE("zero-variance quantities are disabled with correlation zero") {
  Machine m(parse_program(kCoinGame), "coin");
  auto hs = derive_heuristics(m, 32, 0.9, 2026, 10);
  // the step counter's per-simulation mean never varies
  bool found = false;
  for (const Heuristic& h : hs)
    if (h.fluent_pred == Symbol::intern("true_step")) {
      found = true;
      CHECK(h.correlation == 0.0);
      CHECK_FALSE(h.enabled);
    }
  CHECK(found);
}

TEST_CASE("an unreachable threshold disables every candidate") {
  Machine m(parse_program(kCoinGame), "coin");
  for (const Heuristic& h : derive_heuristics(m, 16, 1.1, 7, 10))
    CHECK_FALSE(h.enabled);
}

TEST_CASE("games without numeric fluents yield no candidates") {
  Machine rps = load("rps.gdl");
  // rps scores *are* numeric; use tictactoe whose fluent args are coords and
  // marks -- coords are numeric, so instead check the call simply works and
  // marks positions are not offered
  Machine ttt = load("tictactoe.gdl");
  auto hs = derive_heuristics(ttt, 8, 0.5, 3, 9);
  for (const Heuristic& h : hs) {
    if (h.fluent_pred == Symbol::intern("true_cell")) CHECK(h.value_pos != 2);
    if (h.fluent_pred == Symbol::intern("true_control")) FAIL("control is not numeric");
  }
  CHECK(derive_heuristics(rps, 8, 0.5, 3, 6).size() > 0);
  CHECK_THROWS_AS(derive_heuristics(rps, 1, 0.5, 3, 6), Error);
}

// --- A* -------------------------------------------------------------------------------

TEST_CASE("a solved board needs the empty plan") {
  Machine puzzle = load("eightpuzzle.gdl");
  GameState s = testing::board_state(testing::solved_board());
  SearchBudget budget;
  auto plan = astar_solve(puzzle, s, budget);
  REQUIRE(plan.has_value());
  CHECK(plan->empty());
}

TEST_CASE("a four-move scramble solves in four moves") {
  Machine puzzle = load("eightpuzzle.gdl");
  testing::Board b = testing::scrambled_board(4, 11);
  auto oracle = testing::bfs_optimal_depth(b);
  REQUIRE(oracle.has_value());
  REQUIRE(*oracle <= 4);
  SearchBudget budget;
  auto plan = astar_solve(puzzle, testing::board_state(b), budget);
  REQUIRE(plan.has_value());
  CHECK(static_cast<int>(plan->size()) == *oracle);
}

TEST_CASE("a* matches the bfs oracle exactly on scrambles up to depth 12") {
  Machine puzzle = load("eightpuzzle.gdl");
  int checked = 0;
  for (uint64_t seed = 0; checked < 8; ++seed) {
    testing::Board b = testing::scrambled_board(12, seed);
    auto oracle = testing::bfs_optimal_depth(b);
    REQUIRE(oracle.has_value());
    if (*oracle < 2) continue;
    SearchBudget budget;
    auto plan = astar_solve(puzzle, testing::board_state(b), budget);
    REQUIRE(plan.has_value());
    CHECK(static_cast<int>(plan->size()) == *oracle);
    // replaying the plan reaches goal value 100
    GameState s = testing::board_state(b);
    for (const Action& a : *plan) s = puzzle.next_state(s, JointMove{{a}});
    CHECK(puzzle.goal_values(s)[0] == 100);
    ++checked;
  }
}

TEST_CASE("an unsolvable parity instance exhausts the budget to none") {
  testing::Board b = testing::solved_board();
  std::swap(b[0], b[1]);  // odd permutation: unreachable
  CHECK_FALSE(testing::bfs_optimal_depth(b).has_value());

  Machine puzzle = load("eightpuzzle.gdl");
  SearchBudget budget;
  budget.max_playouts = 20000;
  CHECK_FALSE(astar_solve(puzzle, testing::board_state(b), budget).has_value());
}

TEST_CASE("multi-role games are rejected") {
  Machine ttt = load("tictactoe.gdl");
  SearchBudget budget;
  CHECK_THROWS_AS(astar_solve(ttt, ttt.initial_state(), budget), Error);
}

TEST_CASE("the counter game is a puzzle for a*") {
  Machine counter = load("counter.gdl");
  CHECK(astar_target(counter) == FactSet{atom("true_count(7)")});
  SearchBudget budget;
  auto plan = astar_solve(counter, counter.initial_state(), budget);
  REQUIRE(plan.has_value());
  CHECK(plan->size() == 7);  // seven correct answers, no slack
}
