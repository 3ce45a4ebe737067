// Seeded generator of small stratifiable programs and fact sets for the
// engine-vs-oracle equivalence properties.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "iggp/datalog.hpp"

namespace iggp::testing {

struct GeneratedCase {
  Program program;
  FactSet facts;
};

inline GeneratedCase random_case(uint64_t seed, bool allow_negation = true) {
  std::mt19937_64 rng(seed);
  auto below = [&rng](size_t n) { return static_cast<size_t>(rng() % n); };

  const size_t n_preds = 2 + below(5);      // up to 6
  const size_t n_constants = 2 + below(3);  // up to 4
  std::vector<Symbol> preds, constants, vars;
  std::vector<size_t> arity;
  for (size_t i = 0; i < n_preds; ++i) {
    preds.push_back(Symbol::intern("p" + std::to_string(i)));
    arity.push_back(below(3));  // 0..2
  }
  for (size_t i = 0; i < n_constants; ++i)
    constants.push_back(Symbol::intern(std::string(1, char('a' + i))));
  for (size_t i = 0; i < 4; ++i)
    vars.push_back(Symbol::intern("x" + std::to_string(i)));

  auto random_term = [&](bool allow_var) {
    if (allow_var && below(2) == 0) return Term::variable(vars[below(vars.size())]);
    return Term::constant(constants[below(constants.size())]);
  };
  auto random_atom = [&](bool allow_var) {
    size_t p = below(preds.size());
    Atom a{preds[p], {}};
    for (size_t i = 0; i < arity[p]; ++i) a.args.push_back(random_term(allow_var));
    return a;
  };

  for (int attempt = 0; attempt < 64; ++attempt) {
    Program program;
    const size_t n_rules = 1 + below(8);
    for (size_t i = 0; i < n_rules; ++i) {
      for (int rule_try = 0; rule_try < 32; ++rule_try) {
        Rule r;
        r.head = random_atom(true);
        size_t n_body = 1 + below(3);
        for (size_t b = 0; b < n_body; ++b) {
          bool negated = allow_negation && below(4) == 0;
          r.body.push_back(Literal{random_atom(true), negated});
        }
        if (below(8) == 0) {
          // occasional distinct over variables used positively
          Atom d{Symbol::intern("distinct"),
                 {random_term(true), random_term(true)}};
          r.body.push_back(Literal{std::move(d), false});
        }
        Program check;
        check.rules.push_back(r);
        if (validate(check).empty()) {
          program.rules.push_back(std::move(r));
          break;
        }
      }
    }
    if (program.rules.empty()) continue;
    try {
      stratify(program);
    } catch (const UnstratifiableError&) {
      continue;
    }

    GeneratedCase out;
    out.program = std::move(program);
    std::vector<GroundAtom> facts;
    size_t n_facts = below(11);
    for (size_t i = 0; i < n_facts; ++i) {
      size_t p = below(preds.size());
      GroundAtom a{preds[p], {}};
      for (size_t j = 0; j < arity[p]; ++j)
        a.args.push_back(constants[below(constants.size())]);
      facts.push_back(std::move(a));
    }
    out.facts = FactSet::from(std::move(facts));
    return out;
  }
  // Give up gracefully: a single safe fact rule.
  GeneratedCase out;
  Rule r;
  r.head = Atom{preds[0], {}};
  for (size_t i = 0; i < arity[0]; ++i)
    r.head.args.push_back(Term::constant(constants[0]));
  out.program.rules.push_back(std::move(r));
  return out;
}

}  // namespace iggp::testing
