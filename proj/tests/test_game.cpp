#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "iggp/game.hpp"
#include "iggp/players.hpp"

using namespace iggp;

namespace {

Machine load(const char* name) {
  return Machine::from_file(
      (std::filesystem::path(IGGP_GAMES_DIR) / name).string());
}

GroundAtom atom(const char* text) {
  return to_ground(parse_fact_line(std::string(text) + "."));
}

Action act(const char* functor, std::initializer_list<const char*> args = {}) {
  Action a{Symbol::intern(functor), {}};
  for (const char* s : args) a.args.push_back(Symbol::intern(s));
  return a;
}

}  // namespace

TEST_CASE("roles come in declaration order") {
  Machine ttt = load("tictactoe.gdl");
  REQUIRE(ttt.roles().size() == 2);
  CHECK(ttt.roles()[0].name == Symbol::intern("x"));
  CHECK(ttt.roles()[1].name == Symbol::intern("o"));

  Machine rps = load("rps.gdl");
  REQUIRE(rps.roles().size() == 2);
  CHECK(rps.roles()[0].name == Symbol::intern("p1"));
  CHECK(rps.roles()[1].name == Symbol::intern("p2"));

  CHECK(load("eightpuzzle.gdl").roles().size() == 1);
}

TEST_CASE("a game without roles is rejected") {
  CHECK_THROWS_AS(Machine(parse_program("(succ 0 1)")), GameFormError);
}

TEST_CASE("rps initial state holds step zero and blank scores") {
  Machine rps = load("rps.gdl");
  GameState s = rps.initial_state();
  CHECK(s.step == 0);
  FactSet expect{atom("true_step(0)"), atom("true_score(p1,0)"),
                 atom("true_score(p2,0)")};
  CHECK(s.fluents == expect);
}

TEST_CASE("a game without init facts starts empty") {
  Machine m(parse_program("(role p)\n(<= (legal p noop) (role p))\n"
                          "(<= terminal (true gameover))"));
  GameState s = m.initial_state();
  CHECK(s.fluents.empty());
  CHECK(s.step == 0);
  CHECK_FALSE(m.is_terminal(s));
}

TEST_CASE("tic-tac-toe starts with nine blanks and x in control") {
  Machine ttt = load("tictactoe.gdl");
  GameState s = ttt.initial_state();
  CHECK(s.fluents.size() == 10);
  CHECK(s.fluents.contains(atom("true_control(x)")));
  CHECK(s.fluents.contains(atom("true_cell(2,2,b)")));
}

TEST_CASE("rps legal moves are the three gestures for both players") {
  Machine rps = load("rps.gdl");
  auto legal = rps.legal_moves(rps.initial_state());
  REQUIRE(legal.size() == 2);
  std::vector<Action> expect = {act("paper"), act("scissors"), act("stone")};
  CHECK(legal[0] == expect);
  CHECK(legal[1] == expect);
}

TEST_CASE("tic-tac-toe mover has nine marks, opponent only noop") {
  Machine ttt = load("tictactoe.gdl");
  auto legal = ttt.legal_moves(ttt.initial_state());
  CHECK(legal[0].size() == 9);
  REQUIRE(legal[1].size() == 1);
  CHECK(legal[1][0] == act("noop"));
}

TEST_CASE("rps next state scores a stone-vs-paper round") {
  Machine rps = load("rps.gdl");
  JointMove joint{{act("stone"), act("paper")}};
  GameState next = rps.next_state(rps.initial_state(), joint);
  CHECK(next.step == 1);
  FactSet expect{atom("true_step(1)"), atom("true_score(p1,0)"),
                 atom("true_score(p2,1)")};
  CHECK(next.fluents == expect);
}

TEST_CASE("frame-only games keep their fluents") {
  Machine m(parse_program(
      "(role p)\n(init f)\n(<= (legal p noop) (true f))\n"
      "(<= (next f) (true f))\n(<= terminal (not (true f)))"));
  GameState s0 = m.initial_state();
  GameState s1 = m.next_state(s0, JointMove{{act("noop")}});
  CHECK(s1.fluents == s0.fluents);
  CHECK(s1.step == 1);
}

TEST_CASE("tic-tac-toe applies a mark and swaps control") {
  Machine ttt = load("tictactoe.gdl");
  JointMove joint{{act("mark", {"2", "2"}), act("noop")}};
  GameState s1 = ttt.next_state(ttt.initial_state(), joint);
  CHECK(s1.fluents.contains(atom("true_cell(2,2,x)")));
  CHECK(s1.fluents.contains(atom("true_control(o)")));
  CHECK(s1.fluents.contains(atom("true_cell(1,1,b)")));
  CHECK_FALSE(s1.fluents.contains(atom("true_cell(2,2,b)")));
}

TEST_CASE("illegal moves are rejected by role and action") {
  Machine ttt = load("tictactoe.gdl");
  JointMove joint{{act("noop"), act("mark", {"1", "1"})}};
  try {
    ttt.next_state(ttt.initial_state(), joint);
    FAIL("expected IllegalMoveError");
  } catch (const IllegalMoveError& e) {
    std::string what = e.what();
    CHECK(what.find("x") != std::string::npos);
    CHECK(what.find("noop") != std::string::npos);
  }
}

TEST_CASE("terminal detection on a finished board") {
  Machine ttt = load("tictactoe.gdl");
  GameState s;
  s.fluents = FactSet{atom("true_cell(1,1,x)"), atom("true_cell(1,2,x)"),
                      atom("true_cell(1,3,x)"), atom("true_cell(2,1,o)"),
                      atom("true_cell(2,2,o)"), atom("true_cell(2,3,b)"),
                      atom("true_cell(3,1,b)"), atom("true_cell(3,2,b)"),
                      atom("true_cell(3,3,b)"), atom("true_control(o)")};
  s.step = 5;
  CHECK(ttt.is_terminal(s));
  auto goals = ttt.goal_values(s);
  CHECK(goals[0] == 100);
  CHECK(goals[1] == 0);
  CHECK_FALSE(ttt.is_terminal(ttt.initial_state()));
  // terminal states still answer legal_moves; callers gate on is_terminal
  CHECK_NOTHROW(ttt.legal_moves(s));
}

TEST_CASE("an empty legal set in a non-terminal state is an ill-formed game") {
  Machine m(parse_program("(role p)\n(init f)\n(<= (next f) (true f))\n"
                          "(<= (legal p noop) (not (true f)))\n"
                          "(<= terminal (not (true f)))"));
  CHECK_THROWS_AS(m.legal_moves(m.initial_state()), GameFormError);
}

TEST_CASE("an explicit terminal fact makes every state terminal") {
  Machine m(parse_program("(role p)\n(terminal)\n(<= (legal p noop) (role p))\n"
                          "(<= (goal p 100) (role p))"));
  CHECK(m.is_terminal(m.initial_state()));
}

TEST_CASE("goal values stay within range and default to zero with a warning") {
  Machine m(parse_program(
      "(role p)\n(init f)\n(<= (legal p noop) (true f))\n"
      "(<= (next f) (true f))\n(<= (goal p 100) (not (true f)))\n"
      "(<= terminal (not (true f)))"));
  // goal rule never fires while f holds: value 0, flagged
  auto info = m.analyze(m.initial_state());
  CHECK(info.goals[0] == 0);
  CHECK(info.goal_warning);

  Machine rps = load("rps.gdl");
  auto goals = rps.goal_values(rps.initial_state());
  for (int g : goals) {
    CHECK(g >= 0);
    CHECK(g <= 100);
  }
}

TEST_CASE("ambiguous goals raise an error") {
  Machine m(parse_program(
      "(role p)\n(init f)\n(<= (legal p noop) (true f))\n(<= (next f) (true f))\n"
      "(goalmap 10)\n(goalmap 20)\n"
      "(<= (goal p ?g) (true f) (goalmap ?g))\n(<= terminal (not (true f)))"));
  CHECK_THROWS_AS(m.goal_values(m.initial_state()), GameFormError);
}

TEST_CASE("legal/goal/terminal may not depend on does") {
  CHECK_THROWS_AS(
      Machine(parse_program("(role p)\n(init f)\n"
                            "(<= (legal p noop) (does p noop))\n"
                            "(<= terminal (true f))")),
      GameFormError);
}

TEST_CASE("random playouts keep every bundled game playable") {
  for (const char* name :
       {"rps.gdl", "tictactoe.gdl", "eightpuzzle.gdl", "counter.gdl"}) {
    Machine m = load(name);
    Rng rng(2026);
    for (int match = 0; match < 3; ++match) {
      GameState s = m.initial_state();
      auto info = m.analyze(s);
      int moves = 0;
      while (!info.terminal && moves < 60) {
        for (const auto& actions : info.legal) REQUIRE(!actions.empty());
        JointMove joint = random_move(info.legal, rng);
        s = m.next_state(s, joint, &info);
        info = m.analyze(s);
        ++moves;
        // reserved-predicate closure: no does atoms in returned fluents
        for (const GroundAtom& a : s.fluents) {
          CHECK(a.pred.text().rfind("does", 0) != 0);
          CHECK(a.pred.text().rfind("true", 0) == 0);
        }
        for (int g : info.goals) {
          CHECK(g >= 0);
          CHECK(g <= 100);
        }
      }
      CHECK((info.terminal || moves == 60));
    }
  }
}

TEST_CASE("next_state is a pure function of its inputs") {
  Machine ttt = load("tictactoe.gdl");
  GameState s = ttt.initial_state();
  JointMove joint{{act("mark", {"1", "3"}), act("noop")}};
  GameState a = ttt.next_state(s, joint);
  GameState b = ttt.next_state(s, joint);
  CHECK(a == b);
}

TEST_CASE("counter game rewards correct answers") {
  Machine counter = load("counter.gdl");
  GameState s = counter.initial_state();
  // step 0: the number to say is 1 -> saynumber is correct
  GameState s1 = counter.next_state(s, JointMove{{act("saynumber")}});
  CHECK(s1.fluents.contains(atom("true_count(1)")));
  CHECK(s1.fluents.contains(atom("true_step(1)")));
  // wrong answer leaves the count alone
  GameState s2 = counter.next_state(s1, JointMove{{act("sayfizzbuzz")}});
  CHECK(s2.fluents.contains(atom("true_count(1)")));
  CHECK(s2.fluents.contains(atom("true_step(2)")));
}
