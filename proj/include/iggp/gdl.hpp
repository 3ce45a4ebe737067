// GDL (KIF s-expression) front end: syntax tree, parser, function-symbol
// flattening and well-formedness checks.
#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "iggp/symbol.hpp"

namespace iggp {

struct SourcePos {
  int line = 0;  // 1-based; 0 means "no position"
  int column = 0;
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, SourcePos pos) : Error(what), pos(pos) {}
  SourcePos pos;
};

class FlattenError : public Error {
 public:
  using Error::Error;
};

struct Term {
  enum class Kind { Constant, Variable, Compound };

  Kind kind = Kind::Constant;
  Symbol symbol;            // constant symbol, variable name, or functor
  std::vector<Term> args;   // compound only

  static Term constant(Symbol s) { return Term{Kind::Constant, s, {}}; }
  static Term variable(Symbol s) { return Term{Kind::Variable, s, {}}; }
  static Term compound(Symbol f, std::vector<Term> a) {
    return Term{Kind::Compound, f, std::move(a)};
  }

  bool is_constant() const { return kind == Kind::Constant; }
  bool is_variable() const { return kind == Kind::Variable; }
  bool is_compound() const { return kind == Kind::Compound; }
  bool is_ground() const;

  bool operator==(const Term& o) const;
};

struct Atom {
  Symbol pred;
  std::vector<Term> args;

  size_t arity() const { return args.size(); }
  bool is_ground() const;
  bool operator==(const Atom& o) const;
};

struct Literal {
  Atom atom;
  bool negated = false;

  bool operator==(const Literal& o) const {
    return negated == o.negated && atom == o.atom;
  }
};

struct Rule {
  Atom head;
  std::vector<Literal> body;  // empty body = fact

  bool is_fact() const { return body.empty(); }
  bool operator==(const Rule& o) const { return head == o.head && body == o.body; }
};

struct Program {
  std::vector<Rule> rules;
  // Fixed arity per predicate symbol, in first-occurrence order for output.
  std::map<Symbol, size_t> predicate_signatures;
  // Flattening record: flat predicate -> (original predicate, functor).
  // Empty until flatten() has run; lets flat names be inverted.
  std::map<Symbol, std::pair<Symbol, Symbol>> flat_origin;

  bool empty() const { return rules.empty(); }
};

// --- parsing -------------------------------------------------------------

// Parses whitespace-separated s-expressions. `;` comments to end of line,
// rules start with `<=`, `?x` tokens are variables, symbols are normalized
// to lower case. Throws ParseError with a position on malformed input.
Program parse_program(std::string_view text);
Program parse_program_file(const std::string& path);

// Parses a single ground fact line of the canonical form "pred(a,b)." or
// "pred." (nullary). Used for task/trace files.
Atom parse_fact_line(std::string_view line);

// --- canonical output ----------------------------------------------------

std::string unparse(const Term& t);
std::string unparse(const Atom& a);
std::string unparse(const Literal& l);
std::string unparse(const Rule& r);      // one line, KIF form
std::string unparse(const Program& p);   // one rule per line
std::string fact_line(const Atom& a);    // "pred(a,b)." form, ground atoms

// --- flattening -----------------------------------------------------------

// Rewrites every atom with a compound argument p(.., f(a1..ak), ..) to the
// flat predicate p_f(.., a1..ak, ..), innermost compounds first. Records
// the name mapping in flat_origin. Throws FlattenError on a name collision
// with a different arity, or when a predicate mixes a compound and a
// variable at the same argument position (the rewrite would change meaning).
Program flatten(const Program& p);

// True once no term anywhere in the program is compound.
bool is_flat(const Program& p);

// --- validation -----------------------------------------------------------

struct Violation {
  std::string message;
  int rule_index = -1;  // -1: program-level finding
};

// Reports rule-safety violations, reserved-predicate arity violations and
// reserved heads (true/1 and does/2 may not be defined by rules). Violations
// are data; an empty list means the program is well formed.
std::vector<Violation> validate(const Program& p);

// Reserved GDL predicate table: role/1 init/1 true/1 does/2 next/1 legal/2
// goal/2 terminal/0 distinct/2.
std::optional<size_t> reserved_arity(Symbol pred);

}  // namespace iggp
