// Rule induction from IGGP tasks: a bottom-clause cover-loop learner and
// a length-bounded enumerative learner, both checking coverage through the
// Datalog engine.
#pragma once

#include <set>

#include "iggp/trace.hpp"

namespace iggp {

class EnumerationOverflow : public Error {
 public:
  using Error::Error;
};

struct Bias {
  Symbol head_pred;
  size_t head_arity = 0;
  // Determinations: the target paired with every background predicate.
  std::vector<std::pair<Symbol, size_t>> body_preds;
  DomainSignature signature;  // argument types / constant pools
  int max_body = 2;
  int max_vars = 3;
  bool allow_negation = false;
  bool allow_head_constants = true;
  size_t enumeration_cap = 200000;
  int bottom_depth = 2;
  int max_false_positives = 0;
};

// Auto-generated bias: body vocabulary = every predicate occurring in the
// task backgrounds, argument types from the task signature.
Bias bias_for(const IggpTask& task, Symbol head_pred);

// Target-family predicates of a task, canonical text order.
std::vector<Symbol> target_predicates(const IggpTask& task);

struct Hypothesis {
  std::vector<Rule> rules;
  bool learned = true;             // false: the always-true default hypothesis
  std::set<Symbol> default_preds;  // predicates classified always-positive
};

struct LearnBudget {
  uint64_t millis = 5000;
  uint64_t max_candidates = 500000;  // coverage checks per generalization
};

struct BottomClause {
  Atom head;
  std::vector<Literal> body;
};

// Most specific clause entailing the seed over its background: every
// background atom reachable from the seed's constants within the variable
// depth bound, lifted consistently (shared constants become shared
// variables).
BottomClause bottom_clause(const GroundAtom& seed, const FactSet& background,
                           const Bias& bias);

// Bounded breadth-first search over body subsets of the bottom clause,
// shortest first; score = covered positives - covered negatives -
// 0.001 * length. Falls back to the ground seed as a unit fact when no safe
// subset stays within max_false_positives.
Rule generalize(const BottomClause& bottom, const GroundAtom& seed,
                const IggpTask& task, const Bias& bias,
                const LearnBudget& budget);

// Cover loop for one target predicate: pick an uncovered positive, build
// its bottom clause, generalize, remove what the new rule covers, repeat.
Hypothesis cover_loop(const IggpTask& task, const Bias& bias,
                      const LearnBudget& budget);

// All safe rules with exactly `body_length` body literals over the bias
// vocabulary, canonically deduplicated, canonical order. Throws
// EnumerationOverflow past bias.enumeration_cap.
std::vector<Rule> enumerate_rules(const Bias& bias, int body_length);

// Iterative deepening over total hypothesis size; returns the first rule
// subset that, with each triple's background, entails all its positives and
// none of its negatives. Unlearned default on exhaustion.
Hypothesis learn_enumerative(const IggpTask& task, const Bias& bias,
                             const LearnBudget& budget);

enum class LearnerKind { Cover, Enumerative };
LearnerKind parse_learner(const std::string& name);
std::string to_string(LearnerKind k);

// Learns every target predicate of the task separately and unions the
// results; predicates the enumerative learner gives up on become
// always-true defaults.
Hypothesis learn_task(const IggpTask& task, LearnerKind kind,
                      const LearnBudget& budget);

// Canonical rule text (body order and variable names quotiented out).
std::string canonical_rule(const Rule& r);

void write_hypothesis(const Hypothesis& h, const std::string& game,
                      const std::string& target,
                      const std::filesystem::path& file);
Hypothesis read_hypothesis(const std::filesystem::path& file);

}  // namespace iggp
