#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <functional>
#include <random>
#include <set>

#include "iggp/gdl.hpp"

using namespace iggp;

namespace {

const char* kGames[] = {"rps.gdl", "tictactoe.gdl", "eightpuzzle.gdl",
                        "counter.gdl"};

std::filesystem::path game_path(const char* name) {
  return std::filesystem::path(IGGP_GAMES_DIR) / name;
}

}  // namespace

TEST_CASE("facts parse into empty-body rules") {
  Program p = parse_program("(succ 0 1)");
  REQUIRE(p.rules.size() == 1);
  const Rule& r = p.rules[0];
  CHECK(r.is_fact());
  CHECK(r.head.pred == Symbol::intern("succ"));
  REQUIRE(r.head.arity() == 2);
  CHECK(r.head.args[0] == Term::constant(Symbol::intern("0")));
  CHECK(r.head.args[1] == Term::constant(Symbol::intern("1")));
}

TEST_CASE("rules parse with variables and constants") {
  Program p = parse_program("(<= (legal ?p paper) (player ?p))");
  REQUIRE(p.rules.size() == 1);
  const Rule& r = p.rules[0];
  CHECK(r.head.pred == Symbol::intern("legal"));
  REQUIRE(r.head.arity() == 2);
  CHECK(r.head.args[0] == Term::variable(Symbol::intern("p")));
  CHECK(r.head.args[1] == Term::constant(Symbol::intern("paper")));
  REQUIRE(r.body.size() == 1);
  CHECK_FALSE(r.body[0].negated);
  CHECK(r.body[0].atom.pred == Symbol::intern("player"));
}

TEST_CASE("empty input gives an empty program") {
  CHECK(parse_program("").empty());
  CHECK(parse_program("; only a comment\n").empty());
}

TEST_CASE("symbols are case-insensitive, normalized to lower case") {
  Program a = parse_program("(Succ 0 1) (<= (LEGAL ?P paper) (player ?p))");
  Program b = parse_program("(succ 0 1) (<= (legal ?p PAPER) (PLAYER ?p))");
  CHECK(unparse(a) == unparse(b));
}

TEST_CASE("unbalanced parentheses report a position") {
  try {
    parse_program("(succ 0 1");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.pos.line == 1);
    CHECK(e.pos.column == 1);
  }
  CHECK_THROWS_AS(parse_program("succ) "), ParseError);
  try {
    parse_program("\n\n  (p a))");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.pos.line == 3);
  }
}

TEST_CASE("an arrow needs a head") {
  CHECK_THROWS_AS(parse_program("(<=)"), ParseError);
  CHECK_NOTHROW(parse_program("(<= terminal)"));  // bodyless rule = fact form
}

TEST_CASE("variables cannot be predicate or functor symbols") {
  CHECK_THROWS_AS(parse_program("(<= (?p a) (q ?p))"), ParseError);
  CHECK_THROWS_AS(parse_program("(p (?f 1))"), ParseError);
}

TEST_CASE("negation parses inside rule bodies") {
  Program p = parse_program("(<= (goal x 50) (not (line x)))");
  REQUIRE(p.rules[0].body.size() == 1);
  CHECK(p.rules[0].body[0].negated);
  CHECK(p.rules[0].body[0].atom.pred == Symbol::intern("line"));
}

TEST_CASE("arity is fixed per predicate") {
  CHECK_THROWS_AS(parse_program("(succ 0 1) (succ 0)"), ParseError);
}

// --- flatten ---------------------------------------------------------------

TEST_CASE("flatten merges a function into the predicate") {
  Program p = flatten(parse_program("(true (count 9))"));
  REQUIRE(p.rules.size() == 1);
  CHECK(unparse(p.rules[0]) == "(true_count 9)");
  auto it = p.flat_origin.find(Symbol::intern("true_count"));
  REQUIRE(it != p.flat_origin.end());
  CHECK(it->second.first == Symbol::intern("true"));
  CHECK(it->second.second == Symbol::intern("count"));
}

TEST_CASE("flatten keeps surrounding arguments in place") {
  Program p = flatten(parse_program("(legal (move 1 1))"));
  CHECK(unparse(p.rules[0]) == "(legal_move 1 1)");
  Program q = flatten(parse_program("(<= (legal ?w (mark ?m ?n)) (cellb ?m ?n))"));
  CHECK(unparse(q.rules[0].head) == "(legal_mark ?w ?m ?n)");
}

TEST_CASE("already-flat programs pass through unchanged") {
  Program p = parse_program("(succ 0 1)");
  CHECK(unparse(p) == unparse(flatten(p)));
}

TEST_CASE("deeper nesting flattens innermost-first") {
  Program p = flatten(parse_program("(true (cell (coord 1) 2))"));
  CHECK(unparse(p.rules[0]) == "(true_cell_coord 1 2)");
}

TEST_CASE("flatten collision with a different arity is an error") {
  CHECK_THROWS_AS(flatten(parse_program("(true_count 1 2) (true (count 9))")),
                  FlattenError);
}

TEST_CASE("mixed compound and variable at one position is rejected") {
  CHECK_THROWS_AS(
      flatten(parse_program("(<= (next ?f) (true ?f))\n(init (count 0))")),
      FlattenError);
}

TEST_CASE("flatten is idempotent on the corpus") {
  for (const char* name : kGames) {
    Program p = parse_program_file(game_path(name).string());
    Program once = flatten(p);
    Program twice = flatten(once);
    CHECK(unparse(once) == unparse(twice));
  }
}

TEST_CASE("flatten preserves variable occurrences and body lengths") {
  auto count_vars = [](const Rule& r) {
    std::multiset<std::string> vars;
    std::function<void(const Term&)> walk = [&](const Term& t) {
      if (t.is_variable()) vars.insert(t.symbol.text());
      for (const Term& a : t.args) walk(a);
    };
    for (const Term& t : r.head.args) walk(t);
    for (const Literal& l : r.body)
      for (const Term& t : l.atom.args) walk(t);
    return vars;
  };
  for (const char* name : kGames) {
    Program p = parse_program_file(game_path(name).string());
    Program f = flatten(p);
    REQUIRE(p.rules.size() == f.rules.size());
    for (size_t i = 0; i < p.rules.size(); ++i) {
      CHECK(count_vars(p.rules[i]) == count_vars(f.rules[i]));
      CHECK(p.rules[i].body.size() == f.rules[i].body.size());
    }
  }
}

// --- validate -----------------------------------------------------------------

TEST_CASE("unsafe head variable is a violation") {
  auto v = validate(parse_program("(<= (win ?p) (player ?q))"));
  REQUIRE(v.size() == 1);
  CHECK(v[0].message.find("unsafe") != std::string::npos);
}

TEST_CASE("defining does/2 by a rule is a violation") {
  auto v = validate(parse_program("(<= (does ?p noop) (player ?p))"));
  REQUIRE(v.size() == 1);
  CHECK(v[0].message.find("does") != std::string::npos);
}

TEST_CASE("reserved arity violations are reported") {
  auto v = validate(parse_program("(legal x)"));
  REQUIRE(v.size() == 1);
  CHECK(v[0].message.find("arity") != std::string::npos);
}

TEST_CASE("negated variables must be positively bound") {
  CHECK(validate(parse_program("(<= (p ?x) (q ?x) (not (r ?y)))")).size() == 1);
  CHECK(validate(parse_program("(<= (p ?x) (q ?x) (not (r ?x)))")).empty());
}

TEST_CASE("distinct arguments must be positively bound") {
  CHECK(validate(parse_program("(<= (p ?x) (q ?x) (distinct ?x ?y))")).size() == 1);
  CHECK(validate(parse_program("(<= (p ?x) (q ?x) (r ?y) (distinct ?x ?y))"))
            .empty());
}

TEST_CASE("the bundled corpus validates cleanly") {
  for (const char* name : kGames) {
    Program flat = flatten(parse_program_file(game_path(name).string()));
    CHECK(validate(flat).empty());
  }
}

// --- round trips and fuzz ---------------------------------------------------------

TEST_CASE("unparse/reparse round-trips the corpus") {
  for (const char* name : kGames) {
    Program p = parse_program_file(game_path(name).string());
    Program q = parse_program(unparse(p));
    CHECK(unparse(p) == unparse(q));
    REQUIRE(p.rules.size() == q.rules.size());
    for (size_t i = 0; i < p.rules.size(); ++i) CHECK(p.rules[i] == q.rules[i]);
  }
}

TEST_CASE("fact lines round-trip") {
  for (std::string line : {"true_step(0).", "terminal.", "next_cell(1,2,b)."}) {
    Atom a = parse_fact_line(line);
    CHECK(fact_line(a) == line);
  }
  CHECK_THROWS_AS(parse_fact_line("no_period(1)"), ParseError);
  CHECK_THROWS_AS(parse_fact_line("bad(1,)."), ParseError);
}

TEST_CASE("parser survives arbitrary byte input") {
  std::mt19937_64 rng(20260808);
  const std::string alphabet = "()?;ab 01\n\t<=_-\\\"z";
  for (int round = 0; round < 1000; ++round) {
    std::string text;
    size_t len = rng() % 64;
    for (size_t i = 0; i < len; ++i) {
      if (rng() % 16 == 0)
        text.push_back(static_cast<char>(rng() % 256));
      else
        text.push_back(alphabet[rng() % alphabet.size()]);
    }
    try {
      Program p = parse_program(text);
      (void)unparse(p);
    } catch (const ParseError&) {
      // a positioned error is the other allowed outcome
    }
  }
  CHECK(true);
}
