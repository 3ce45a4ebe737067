// Stratified-Datalog-with-negation evaluation over flat ground facts:
// least-model computation by semi-naive iteration per stratum, plus the
// entailment queries used by the game machine, the learners and the
// evaluator.
#pragma once

#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "iggp/gdl.hpp"

namespace iggp {

// --- ground atoms and fact sets --------------------------------------------

struct GroundAtom {
  Symbol pred;
  std::vector<Symbol> args;

  bool operator==(const GroundAtom& o) const {
    return pred == o.pred && args == o.args;
  }
  // In-run stable order (by symbol id). For cross-run canonical order use
  // text_less_atoms.
  bool operator<(const GroundAtom& o) const;
};

GroundAtom make_atom(Symbol pred, std::initializer_list<Symbol> args);
GroundAtom make_atom(std::string_view pred, std::initializer_list<std::string_view> args);

// Converts a ground, flat syntax Atom; throws Error otherwise.
GroundAtom to_ground(const Atom& a);
Atom to_syntax(const GroundAtom& a);
std::string to_string(const GroundAtom& a);  // canonical "pred(a,b)" form
std::string fact_line(const GroundAtom& a);  // "pred(a,b)." form

bool text_less_atoms(const GroundAtom& a, const GroundAtom& b);

size_t hash_value(const GroundAtom& a);

// A set of ground flat atoms, stored sorted (id order) and unique.
class FactSet {
 public:
  FactSet() = default;
  FactSet(std::initializer_list<GroundAtom> atoms);
  static FactSet from(std::vector<GroundAtom> atoms);

  bool contains(const GroundAtom& a) const;
  bool insert(GroundAtom a);  // true if newly added
  void merge(const FactSet& o);

  size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  auto begin() const { return atoms_.begin(); }
  auto end() const { return atoms_.end(); }

  FactSet set_union(const FactSet& o) const;
  FactSet set_minus(const FactSet& o) const;
  FactSet set_intersect(const FactSet& o) const;
  bool subset_of(const FactSet& o) const;

  // Atoms in canonical text order, for serialization.
  std::vector<GroundAtom> sorted_by_text() const;

  bool operator==(const FactSet& o) const { return atoms_ == o.atoms_; }

 private:
  std::vector<GroundAtom> atoms_;
};

size_t hash_value(const FactSet& s);

// --- stratification ----------------------------------------------------------

class UnstratifiableError : public Error {
 public:
  UnstratifiableError(const std::string& what, std::vector<Symbol> cycle)
      : Error(what), cycle(std::move(cycle)) {}
  std::vector<Symbol> cycle;  // predicates on an offending negative cycle
};

struct Stratification {
  std::unordered_map<Symbol, int> stratum_of;
  int stratum_count = 0;

  int of(Symbol pred) const {
    auto it = stratum_of.find(pred);
    return it == stratum_of.end() ? 0 : it->second;
  }
};

// Minimal stratification (lowest legal stratum per predicate) from the
// predicate dependency graph. Throws UnstratifiableError on a cycle
// through negation.
Stratification stratify(const Program& flat_program);

// --- evaluation ---------------------------------------------------------------

class PreparedProgram;

// Reusable evaluation workspace. One per thread of evaluation; reusing it
// across calls avoids re-allocating relation storage.
class EvalScratch {
 public:
  size_t row_count(int pred_id) const;
  std::span<const Symbol> row(int pred_id, size_t index) const;
  // Input atoms whose predicate the program never mentions.
  const std::vector<GroundAtom>& passthrough() const { return passthrough_; }
  // Callers that only read derived relations can skip collecting them.
  bool keep_passthrough = true;

 private:
  friend class PreparedProgram;
  struct Relation {
    uint32_t arity = 0;
    std::vector<Symbol> data;  // arity-strided rows
    // hash -> rows with that hash (collisions verified against data)
    std::unordered_map<uint64_t, uint32_t> first_row;
    std::vector<uint32_t> next_row;  // collision chain per row
    size_t rows() const { return arity == 0 ? nullary_count : data.size() / arity; }
    size_t nullary_count = 0;

    void reset(uint32_t new_arity);
    bool insert(std::span<const Symbol> tuple);    // false if duplicate
    bool contains(std::span<const Symbol> tuple) const;
  };
  std::vector<Relation> relations_;
  std::vector<GroundAtom> passthrough_;
};

// A flat, stratifiable program compiled for repeated evaluation. Immutable
// and safe to share across threads; each evaluation uses its own scratch.
class PreparedProgram {
 public:
  explicit PreparedProgram(Program flat_program);

  const Program& program() const { return program_; }
  const Stratification& strata() const { return strata_; }

  FactSet evaluate(const FactSet& facts) const;
  FactSet evaluate(const FactSet& facts, EvalScratch& scratch) const;
  bool entails(const FactSet& facts, const GroundAtom& query) const;
  bool entails(const FactSet& facts, const GroundAtom& query,
               EvalScratch& scratch) const;

  // Runs the fixpoint leaving results in the scratch relations, so hot
  // callers can read tuples without materializing a FactSet.
  void run(const FactSet& facts, EvalScratch& scratch) const;
  // Same, seeding from several fact sets without merging them first.
  void run(std::span<const FactSet* const> fact_sets, EvalScratch& scratch) const;

  // Dense id of (pred, arity), or -1 when the program never mentions it.
  int pred_id(Symbol pred, size_t arity) const;
  size_t pred_count() const { return pred_arity_.size(); }
  Symbol pred_symbol(int pred_id) const { return pred_symbols_[pred_id]; }
  size_t pred_arity(int pred_id) const { return pred_arity_[pred_id]; }

 private:
  struct ArgPat {
    bool is_var = false;
    Symbol constant;
    int slot = -1;
  };
  struct CompiledLiteral {
    int pred = -1;
    bool negated = false;
    bool is_distinct = false;
    bool all_bound = false;  // every arg const or already-bound var
    std::vector<ArgPat> args;
  };
  struct CompiledRule {
    int head_pred = -1;
    std::vector<ArgPat> head_args;
    std::vector<CompiledLiteral> body;
    std::vector<int> delta_positions;  // body indices usable as delta source
    int num_slots = 0;
    int stratum = 0;
  };

  void compile_rule(const Rule& r);
  void execute(const CompiledRule& rule, int delta_pos, EvalScratch& scratch,
               const std::vector<std::pair<uint32_t, uint32_t>>& delta,
               std::vector<Symbol>& slots, bool& grew) const;

  Program program_;
  Stratification strata_;
  std::unordered_map<Symbol, std::unordered_map<size_t, int>> pred_ids_;
  std::vector<Symbol> pred_symbols_;
  std::vector<uint32_t> pred_arity_;
  std::vector<int> pred_stratum_;
  std::vector<std::vector<CompiledRule>> rules_by_stratum_;
};

// One-shot conveniences (compile + evaluate).
FactSet evaluate(const Program& flat_program, const FactSet& facts);
bool entails(const Program& flat_program, const FactSet& facts,
             const GroundAtom& query);

}  // namespace iggp

template <>
struct std::hash<iggp::GroundAtom> {
  size_t operator()(const iggp::GroundAtom& a) const noexcept {
    return iggp::hash_value(a);
  }
};
