#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "iggp/eval.hpp"
#include "iggp/learn.hpp"

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

MatchTrace random_trace(const Machine& m, uint64_t seed, int cap = 60) {
  MatchConfig config;
  config.move_cap = cap;
  config.seed = seed;
  std::vector<PlayerSpec> players(m.roles().size(), PlayerSpec{});
  return run_match(m, players, config);
}

IggpTask rps_next_task(const Machine& rps, int traces, uint64_t seed0 = 100) {
  std::vector<MatchTrace> ts;
  for (int i = 0; i < traces; ++i)
    ts.push_back(random_trace(rps, seed0 + i));
  return build_task(rps, ts, TargetKind::Next);
}

const Rule kStepRule = parse_program(
    "(<= (next_step ?n) (true_step ?m) (succ ?m ?n))").rules[0];

// hand-built task: one triple per (background, positives, negatives)
IggpTask tiny_task(std::vector<InductionTriple> triples, FactSet pool) {
  IggpTask task;
  task.game = "tiny";
  task.target = TargetKind::Next;
  task.triples = std::move(triples);
  for (const GroundAtom& a : pool) task.domain_pools[a.pred].insert(a);
  // observed constants only: one class per predicate position
  int next_class = 0;
  std::map<std::pair<Symbol, int>, int> classes;
  auto observe = [&](const FactSet& s) {
    for (const GroundAtom& a : s)
      for (size_t i = 0; i < a.args.size(); ++i) {
        auto key = std::make_pair(a.pred, static_cast<int>(i));
        auto [it, fresh] = classes.emplace(key, next_class);
        if (fresh) {
          task.signature.class_constants.emplace_back();
          ++next_class;
        }
        auto& consts = task.signature.class_constants[it->second];
        if (std::find(consts.begin(), consts.end(), a.args[i]) == consts.end())
          consts.push_back(a.args[i]);
      }
  };
  for (const InductionTriple& t : task.triples) {
    observe(t.background);
    observe(t.positives);
    observe(t.negatives);
  }
  task.signature.class_of = classes;
  for (auto& v : task.signature.class_constants)
    std::sort(v.begin(), v.end(), text_less);
  return task;
}

}  // namespace

// --- bottom clause -----------------------------------------------------------------

TEST_CASE("the rps bottom clause links step and successor") {
  Machine rps = load("rps.gdl");
  IggpTask task = rps_next_task(rps, 1);
  Bias bias = bias_for(task, Symbol::intern("next_step"));
  const InductionTriple& t0 = task.triples[0];
  GroundAtom seed = atom("next_step(1)");
  REQUIRE(t0.positives.contains(seed));

  BottomClause bc = bottom_clause(seed, t0.background, bias);
  CHECK(bc.head.pred == Symbol::intern("next_step"));
  REQUIRE(bc.head.arity() == 1);
  CHECK(bc.head.args[0].is_variable());

  bool saw_true_step = false, saw_linking_succ = false;
  for (const Literal& l : bc.body) {
    CHECK_FALSE(l.negated);
    if (l.atom.pred == Symbol::intern("true_step")) saw_true_step = true;
    if (l.atom.pred == Symbol::intern("succ") &&
        l.atom.args[1] == bc.head.args[0])
      saw_linking_succ = true;
  }
  CHECK(saw_true_step);
  CHECK(saw_linking_succ);
}

TEST_CASE("a background disjoint from the seed gives a fact-like bottom clause") {
  Bias bias;
  bias.head_pred = Symbol::intern("t");
  bias.head_arity = 1;
  bias.body_preds = {{Symbol::intern("q"), 1}};
  BottomClause bc = bottom_clause(atom("t(a)"), FactSet{atom("q(zzz)")}, bias);
  CHECK(bc.body.empty());
  CHECK(bc.head.args[0].is_variable());
}

TEST_CASE("depth bound zero keeps only directly linked atoms") {
  Machine rps = load("rps.gdl");
  IggpTask task = rps_next_task(rps, 1);
  Bias bias = bias_for(task, Symbol::intern("next_step"));
  bias.bottom_depth = 0;
  BottomClause bc =
      bottom_clause(atom("next_step(1)"), task.triples[0].background, bias);
  for (const Literal& l : bc.body)
    CHECK(l.atom.pred != Symbol::intern("true_step"));  // two links away
  bool saw_succ = false;
  for (const Literal& l : bc.body)
    if (l.atom.pred == Symbol::intern("succ")) saw_succ = true;
  CHECK(saw_succ);  // succ(0,1) shares the seed's constant
}

TEST_CASE("seeds outside the bias head are rejected") {
  Bias bias;
  bias.head_pred = Symbol::intern("t");
  CHECK_THROWS_AS(bottom_clause(atom("u(a)"), FactSet{}, bias), Error);
}

// --- generalize ---------------------------------------------------------------------

TEST_CASE("generalize recovers the rps step rule with full coverage") {
  Machine rps = load("rps.gdl");
  IggpTask task = rps_next_task(rps, 2);
  Bias bias = bias_for(task, Symbol::intern("next_step"));
  GroundAtom seed = atom("next_step(1)");
  BottomClause bc = bottom_clause(seed, task.triples[0].background, bias);
  LearnBudget budget;
  budget.millis = 20000;
  Rule r = generalize(bc, seed, task, bias, budget);
  CHECK(canonical_rule(r) == canonical_rule(kStepRule));
}

TEST_CASE("generalize falls back to the ground seed when everything covers a negative") {
  InductionTriple t;
  t.background = FactSet{atom("q(a)"), atom("q(b)")};
  t.positives = FactSet{atom("t(a)")};
  t.negatives = FactSet{atom("t(b)")};
  IggpTask task = tiny_task({t}, FactSet{atom("t(a)"), atom("t(b)")});
  Bias bias = bias_for(task, Symbol::intern("t"));
  GroundAtom seed = atom("t(a)");
  BottomClause bc = bottom_clause(seed, t.background, bias);
  LearnBudget budget;
  Rule r = generalize(bc, seed, task, bias, budget);
  CHECK(r.is_fact());
  CHECK(r.head == to_syntax(seed));
}

TEST_CASE("a negative-covering candidate loses to a negative-free subset") {
  // two triples: generalizing through f would cover the second triple's
  // negative, generalizing through g stays clean
  InductionTriple t1, t2;
  t1.background = FactSet{atom("f(a)"), atom("g(a)")};
  t1.positives = FactSet{atom("t(a)")};
  t2.background = FactSet{atom("f(b)")};
  t2.negatives = FactSet{atom("t(b)")};
  IggpTask task = tiny_task({t1, t2}, FactSet{atom("t(a)"), atom("t(b)")});
  Bias bias = bias_for(task, Symbol::intern("t"));
  GroundAtom seed = atom("t(a)");
  BottomClause bc = bottom_clause(seed, t1.background, bias);
  REQUIRE(bc.body.size() == 2);
  LearnBudget budget;
  Rule r = generalize(bc, seed, task, bias, budget);
  REQUIRE(r.body.size() == 1);
  CHECK(r.body[0].atom.pred == Symbol::intern("g"));
}

// --- cover loop ------------------------------------------------------------------------

TEST_CASE("an empty positive set learns the empty hypothesis") {
  InductionTriple t;
  t.background = FactSet{atom("q(a)")};
  t.negatives = FactSet{atom("t(a)")};
  IggpTask task = tiny_task({t}, FactSet{atom("t(a)")});
  Bias bias = bias_for(task, Symbol::intern("t"));
  LearnBudget budget;
  Hypothesis h = cover_loop(task, bias, budget);
  CHECK(h.learned);
  CHECK(h.rules.empty());
}

TEST_CASE("the cover loop learns the step rule and solves held-out traces") {
  Machine rps = load("rps.gdl");
  IggpTask train = rps_next_task(rps, 2, 100);
  Bias bias = bias_for(train, Symbol::intern("next_step"));
  LearnBudget budget;
  budget.millis = 20000;
  Hypothesis h = cover_loop(train, bias, budget);
  REQUIRE(h.rules.size() == 1);
  CHECK(canonical_rule(h.rules[0]) == canonical_rule(kStepRule));

  // held-out coverage for the next_step portion
  IggpTask test = rps_next_task(rps, 2, 777);
  PreparedProgram prog([&] {
    Program p;
    p.rules = h.rules;
    return p;
  }());
  for (const InductionTriple& t : test.triples) {
    FactSet model = prog.evaluate(t.background);
    for (const GroundAtom& e : t.positives)
      if (e.pred == Symbol::intern("next_step")) CHECK(model.contains(e));
    for (const GroundAtom& e : t.negatives)
      if (e.pred == Symbol::intern("next_step")) CHECK_FALSE(model.contains(e));
  }
}

TEST_CASE("a zero budget memorizes every positive") {
  Machine rps = load("rps.gdl");
  IggpTask task = rps_next_task(rps, 1);
  Bias bias = bias_for(task, Symbol::intern("next_step"));
  LearnBudget budget;
  budget.millis = 0;
  Hypothesis h = cover_loop(task, bias, budget);
  CHECK(h.learned);
  std::set<std::string> heads;
  for (const Rule& r : h.rules) {
    CHECK(r.is_fact());
    heads.insert(unparse(r.head));
  }
  std::set<std::string> expect;
  for (const InductionTriple& t : task.triples)
    for (const GroundAtom& e : t.positives)
      if (e.pred == Symbol::intern("next_step"))
        expect.insert(unparse(to_syntax(e)));
  CHECK(heads == expect);
  // training completeness: every positive entailed by its own background
  Program p;
  p.rules = h.rules;
  PreparedProgram prog(p);
  for (const InductionTriple& t : task.triples)
    for (const GroundAtom& e : t.positives)
      if (e.pred == Symbol::intern("next_step"))
        CHECK(prog.entails(t.background, e));
}

// --- enumeration ----------------------------------------------------------------------

TEST_CASE("a tiny vocabulary enumerates exactly the expected rules") {
  Bias bias;
  bias.head_pred = Symbol::intern("t");
  bias.head_arity = 0;
  bias.body_preds = {{Symbol::intern("a"), 0}};

  auto len1 = enumerate_rules(bias, 1);
  REQUIRE(len1.size() == 1);
  CHECK(unparse(len1[0]) == "(<= t a)");

  bias.allow_negation = true;
  auto len1n = enumerate_rules(bias, 1);
  REQUIRE(len1n.size() == 2);
  CHECK(unparse(len1n[0]) == "(<= t (not a))");  // canonical order
  CHECK(unparse(len1n[1]) == "(<= t a)");

  auto len0 = enumerate_rules(bias, 0);
  REQUIRE(len0.size() == 1);
  CHECK(len0[0].is_fact());
  CHECK(len0[0].head.pred == Symbol::intern("t"));
}

TEST_CASE("the rps enumeration contains the step rule at length two") {
  Machine rps = load("rps.gdl");
  IggpTask task = rps_next_task(rps, 1);
  Bias bias = bias_for(task, Symbol::intern("next_step"));
  auto rules = enumerate_rules(bias, 2);
  std::string want = canonical_rule(kStepRule);
  bool found = false;
  for (const Rule& r : rules)
    if (canonical_rule(r) == want) found = true;
  CHECK(found);
  // canonicity: no two alpha-equivalent rules
  std::set<std::string> canon;
  for (const Rule& r : rules) CHECK(canon.insert(canonical_rule(r)).second);
  // canonical order
  std::vector<std::string> order;
  for (const Rule& r : rules) order.push_back(canonical_rule(r));
  CHECK(std::is_sorted(order.begin(), order.end()));
}

TEST_CASE("enumeration overflow raises an explicit error") {
  Machine rps = load("rps.gdl");
  IggpTask task = rps_next_task(rps, 1);
  Bias bias = bias_for(task, Symbol::intern("next_step"));
  bias.enumeration_cap = 10;
  CHECK_THROWS_AS(enumerate_rules(bias, 2), EnumerationOverflow);
}

// --- enumerative learner -----------------------------------------------------------------

TEST_CASE("a task already satisfied by its backgrounds learns the empty hypothesis") {
  InductionTriple t;
  t.background = FactSet{atom("t(a)"), atom("q(a)")};
  t.positives = FactSet{atom("t(a)")};
  t.negatives = FactSet{atom("t(b)")};
  IggpTask task = tiny_task({t}, FactSet{atom("t(a)"), atom("t(b)")});
  Bias bias = bias_for(task, Symbol::intern("t"));
  LearnBudget budget;
  Hypothesis h = learn_enumerative(task, bias, budget);
  CHECK(h.learned);
  CHECK(h.rules.empty());
}

TEST_CASE("the enumerative learner recovers the rps step rule") {
  Machine rps = load("rps.gdl");
  IggpTask task = rps_next_task(rps, 2);
  Bias bias = bias_for(task, Symbol::intern("next_step"));
  LearnBudget budget;
  budget.millis = 30000;
  Hypothesis h = learn_enumerative(task, bias, budget);
  REQUIRE(h.learned);
  REQUIRE(h.rules.size() == 1);
  CHECK(canonical_rule(h.rules[0]) == canonical_rule(kStepRule));
}

TEST_CASE("enumerative hypotheses are sound on their training triples") {
  Machine counter = load("counter.gdl");
  std::vector<MatchTrace> traces = {random_trace(counter, 11),
                                    random_trace(counter, 12)};
  IggpTask task = build_task(counter, traces, TargetKind::Terminal);
  Bias bias = bias_for(task, Symbol::intern("terminal"));
  LearnBudget budget;
  budget.millis = 30000;
  Hypothesis h = learn_enumerative(task, bias, budget);
  REQUIRE(h.learned);
  Program p;
  p.rules = h.rules;
  PreparedProgram prog(p);
  for (const InductionTriple& t : task.triples) {
    FactSet model = prog.evaluate(t.background);
    for (const GroundAtom& e : t.positives) CHECK(model.contains(e));
    for (const GroundAtom& e : t.negatives) CHECK_FALSE(model.contains(e));
  }
}

TEST_CASE("random counter traces teach the step-cap terminal shortcut") {
  Machine counter = load("counter.gdl");
  std::vector<MatchTrace> traces;
  for (uint64_t seed = 50; traces.size() < 2; ++seed) {
    MatchTrace t = random_trace(counter, seed);
    if (!t.states.back().fluents.contains(atom("true_count(7)")))
      traces.push_back(std::move(t));  // keep cap-limited matches
  }
  IggpTask task = build_task(counter, traces, TargetKind::Terminal);
  Bias bias = bias_for(task, Symbol::intern("terminal"));
  LearnBudget budget;
  budget.millis = 30000;
  Hypothesis h = learn_enumerative(task, bias, budget);
  REQUIRE(h.learned);
  REQUIRE(h.rules.size() == 1);
  CHECK(canonical_rule(h.rules[0]) ==
        canonical_rule(parse_program("(<= terminal (true_step 10))").rules[0]));
}

TEST_CASE("learned hypotheses are subset-minimal and deterministic") {
  Machine rps = load("rps.gdl");
  IggpTask task = rps_next_task(rps, 2);
  Bias bias = bias_for(task, Symbol::intern("next_step"));
  LearnBudget budget;
  budget.millis = 30000;
  Hypothesis a = learn_enumerative(task, bias, budget);
  Hypothesis b = learn_enumerative(task, bias, budget);
  REQUIRE(a.learned);
  REQUIRE(a.rules.size() == b.rules.size());
  for (size_t i = 0; i < a.rules.size(); ++i)
    CHECK(canonical_rule(a.rules[i]) == canonical_rule(b.rules[i]));

  // minimality: dropping any rule of a <=3 rule hypothesis breaks coverage
  if (a.rules.size() > 1 && a.rules.size() <= 3) {
    for (size_t skip = 0; skip < a.rules.size(); ++skip) {
      Program p;
      for (size_t i = 0; i < a.rules.size(); ++i)
        if (i != skip) p.rules.push_back(a.rules[i]);
      PreparedProgram prog(p);
      bool complete = true;
      for (const InductionTriple& t : task.triples)
        for (const GroundAtom& e : t.positives)
          if (e.pred == Symbol::intern("next_step") &&
              !prog.entails(t.background, e))
            complete = false;
      CHECK_FALSE(complete);
    }
  }
}

TEST_CASE("exhaustion returns the default hypothesis") {
  Machine rps = load("rps.gdl");
  IggpTask task = rps_next_task(rps, 2);
  Bias bias = bias_for(task, Symbol::intern("next_score"));
  LearnBudget budget;
  budget.millis = 0;  // no time at all
  Hypothesis h = learn_enumerative(task, bias, budget);
  CHECK_FALSE(h.learned);
  CHECK(h.default_preds.count(Symbol::intern("next_score")) == 1);
}

// --- task-level driver ---------------------------------------------------------------------

TEST_CASE("learn_task unions per-predicate results and defaults failures") {
  Machine rps = load("rps.gdl");
  IggpTask task = rps_next_task(rps, 2);
  LearnBudget budget;
  budget.millis = 8000;
  Hypothesis h = learn_task(task, LearnerKind::Cover, budget);
  CHECK(h.learned);
  bool has_step_rule = false;
  for (const Rule& r : h.rules)
    if (canonical_rule(r) == canonical_rule(kStepRule)) has_step_rule = true;
  CHECK(has_step_rule);
}

TEST_CASE("hypothesis files round-trip including default markers") {
  Hypothesis h;
  h.rules.push_back(kStepRule);
  h.default_preds.insert(Symbol::intern("next_score"));
  auto file = std::filesystem::temp_directory_path() / "iggp_hyp.gdl";
  write_hypothesis(h, "rps", "next", file);
  Hypothesis back = read_hypothesis(file);
  CHECK(back.learned);
  REQUIRE(back.rules.size() == 1);
  CHECK(canonical_rule(back.rules[0]) == canonical_rule(kStepRule));
  CHECK(back.default_preds.count(Symbol::intern("next_score")) == 1);

  Hypothesis d;
  d.learned = false;
  write_hypothesis(d, "rps", "next", file);
  CHECK_FALSE(read_hypothesis(file).learned);
}
