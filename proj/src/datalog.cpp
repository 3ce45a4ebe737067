#include "iggp/datalog.hpp"

#include <algorithm>
#include <cassert>

namespace iggp {

// --- ground atoms ------------------------------------------------------------

bool GroundAtom::operator<(const GroundAtom& o) const {
  if (pred != o.pred) return pred < o.pred;
  return args < o.args;
}

GroundAtom make_atom(Symbol pred, std::initializer_list<Symbol> args) {
  return GroundAtom{pred, std::vector<Symbol>(args)};
}

GroundAtom make_atom(std::string_view pred,
                     std::initializer_list<std::string_view> args) {
  GroundAtom a{Symbol::intern(pred), {}};
  a.args.reserve(args.size());
  for (std::string_view s : args) a.args.push_back(Symbol::intern(s));
  return a;
}

GroundAtom to_ground(const Atom& a) {
  GroundAtom g{a.pred, {}};
  g.args.reserve(a.args.size());
  for (const Term& t : a.args) {
    if (!t.is_constant())
      throw Error("atom is not ground and flat: " + unparse(a));
    g.args.push_back(t.symbol);
  }
  return g;
}

Atom to_syntax(const GroundAtom& a) {
  Atom out{a.pred, {}};
  out.args.reserve(a.args.size());
  for (Symbol s : a.args) out.args.push_back(Term::constant(s));
  return out;
}

std::string to_string(const GroundAtom& a) {
  std::string out = a.pred.text();
  if (a.args.empty()) return out;
  out += "(";
  for (size_t i = 0; i < a.args.size(); ++i) {
    if (i) out += ",";
    out += a.args[i].text();
  }
  return out + ")";
}

std::string fact_line(const GroundAtom& a) { return to_string(a) + "."; }

bool text_less_atoms(const GroundAtom& a, const GroundAtom& b) {
  if (a.pred != b.pred) return text_less(a.pred, b.pred);
  for (size_t i = 0; i < a.args.size() && i < b.args.size(); ++i)
    if (a.args[i] != b.args[i]) return text_less(a.args[i], b.args[i]);
  return a.args.size() < b.args.size();
}

size_t hash_value(const GroundAtom& a) {
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](uint32_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  mix(a.pred.id());
  for (Symbol s : a.args) mix(s.id());
  return static_cast<size_t>(h);
}

// --- FactSet ------------------------------------------------------------------

FactSet::FactSet(std::initializer_list<GroundAtom> atoms) {
  *this = from(std::vector<GroundAtom>(atoms));
}

FactSet FactSet::from(std::vector<GroundAtom> atoms) {
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  FactSet s;
  s.atoms_ = std::move(atoms);
  return s;
}

bool FactSet::contains(const GroundAtom& a) const {
  return std::binary_search(atoms_.begin(), atoms_.end(), a);
}

bool FactSet::insert(GroundAtom a) {
  auto it = std::lower_bound(atoms_.begin(), atoms_.end(), a);
  if (it != atoms_.end() && *it == a) return false;
  atoms_.insert(it, std::move(a));
  return true;
}

void FactSet::merge(const FactSet& o) {
  if (o.empty()) return;
  std::vector<GroundAtom> merged;
  merged.reserve(atoms_.size() + o.atoms_.size());
  std::merge(atoms_.begin(), atoms_.end(), o.atoms_.begin(), o.atoms_.end(),
             std::back_inserter(merged));
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  atoms_ = std::move(merged);
}

FactSet FactSet::set_union(const FactSet& o) const {
  FactSet out = *this;
  out.merge(o);
  return out;
}

FactSet FactSet::set_minus(const FactSet& o) const {
  FactSet out;
  std::set_difference(atoms_.begin(), atoms_.end(), o.atoms_.begin(),
                      o.atoms_.end(), std::back_inserter(out.atoms_));
  return out;
}

FactSet FactSet::set_intersect(const FactSet& o) const {
  FactSet out;
  std::set_intersection(atoms_.begin(), atoms_.end(), o.atoms_.begin(),
                        o.atoms_.end(), std::back_inserter(out.atoms_));
  return out;
}

bool FactSet::subset_of(const FactSet& o) const {
  return std::includes(o.atoms_.begin(), o.atoms_.end(), atoms_.begin(),
                       atoms_.end());
}

std::vector<GroundAtom> FactSet::sorted_by_text() const {
  std::vector<GroundAtom> out = atoms_;
  std::sort(out.begin(), out.end(), text_less_atoms);
  return out;
}

size_t hash_value(const FactSet& s) {
  // Order-independent would also work, but the storage is sorted already.
  uint64_t h = 14695981039346656037ull;
  for (const GroundAtom& a : s) {
    h ^= hash_value(a);
    h *= 1099511628211ull;
  }
  return static_cast<size_t>(h);
}

// --- stratification -----------------------------------------------------------

namespace {

const Symbol kDistinctSym = Symbol::intern("distinct");

struct DepEdge {
  Symbol from, to;  // head depends on body pred
  bool negated;
};

std::vector<Symbol> find_negative_cycle(const std::vector<DepEdge>& edges) {
  // Tarjan SCC over the dependency graph; any SCC containing a negative
  // edge whose both ends are inside it is an offending cycle.
  std::unordered_map<Symbol, std::vector<std::pair<Symbol, bool>>> adj;
  std::vector<Symbol> nodes;
  auto ensure = [&](Symbol s) {
    if (!adj.count(s)) {
      adj[s];
      nodes.push_back(s);
    }
  };
  for (const DepEdge& e : edges) {
    ensure(e.from);
    ensure(e.to);
    adj[e.from].push_back({e.to, e.negated});
  }

  std::unordered_map<Symbol, int> index, low, comp;
  std::vector<Symbol> stack;
  std::unordered_set<Symbol> on_stack;
  int next_index = 0, next_comp = 0;

  struct Frame {
    Symbol node;
    size_t child = 0;
  };
  for (Symbol root : nodes) {
    if (index.count(root)) continue;
    std::vector<Frame> frames{{root}};
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack.insert(root);
    while (!frames.empty()) {
      Frame& f = frames.back();
      auto& out = adj[f.node];
      if (f.child < out.size()) {
        Symbol next = out[f.child++].first;
        if (!index.count(next)) {
          index[next] = low[next] = next_index++;
          stack.push_back(next);
          on_stack.insert(next);
          frames.push_back({next});
        } else if (on_stack.count(next)) {
          low[f.node] = std::min(low[f.node], index[next]);
        }
      } else {
        if (low[f.node] == index[f.node]) {
          for (;;) {
            Symbol s = stack.back();
            stack.pop_back();
            on_stack.erase(s);
            comp[s] = next_comp;
            if (s == f.node) break;
          }
          ++next_comp;
        }
        Symbol done = f.node;
        frames.pop_back();
        if (!frames.empty())
          low[frames.back().node] = std::min(low[frames.back().node], low[done]);
      }
    }
  }

  for (const DepEdge& e : edges) {
    if (!e.negated || comp[e.from] != comp[e.to]) continue;
    std::vector<Symbol> cycle;
    for (auto& [s, c] : comp)
      if (c == comp[e.from]) cycle.push_back(s);
    std::sort(cycle.begin(), cycle.end(), text_less);
    return cycle;
  }
  return {};
}

}  // namespace

Stratification stratify(const Program& p) {
  std::vector<DepEdge> edges;
  std::unordered_set<Symbol> preds;
  for (const Rule& r : p.rules) {
    preds.insert(r.head.pred);
    for (const Literal& l : r.body) {
      if (l.atom.pred == kDistinctSym) continue;
      preds.insert(l.atom.pred);
      edges.push_back({r.head.pred, l.atom.pred, l.negated});
    }
  }

  Stratification out;
  for (Symbol s : preds) out.stratum_of[s] = 0;
  size_t guard = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const DepEdge& e : edges) {
      int need = out.stratum_of[e.to] + (e.negated ? 1 : 0);
      int& cur = out.stratum_of[e.from];
      if (cur < need) {
        cur = need;
        changed = true;
      }
    }
    if (++guard > preds.size() + 1 && changed) {
      std::vector<Symbol> cycle = find_negative_cycle(edges);
      std::string msg = "program is not stratifiable; negation cycle through:";
      for (Symbol s : cycle) msg += " " + s.text();
      throw UnstratifiableError(msg, cycle);
    }
  }
  int max_stratum = 0;
  for (auto& [s, v] : out.stratum_of) max_stratum = std::max(max_stratum, v);
  out.stratum_count = max_stratum + 1;
  return out;
}

// --- relations ------------------------------------------------------------------

namespace {

uint64_t tuple_hash(std::span<const Symbol> tuple) {
  uint64_t h = 1469598103934665603ull;
  for (Symbol s : tuple) {
    h ^= s.id();
    h *= 1099511628211ull;
  }
  return h;
}

constexpr uint32_t kNoRow = 0xffffffffu;

}  // namespace

void EvalScratch::Relation::reset(uint32_t new_arity) {
  arity = new_arity;
  data.clear();
  first_row.clear();
  next_row.clear();
  nullary_count = 0;
}

bool EvalScratch::Relation::insert(std::span<const Symbol> tuple) {
  if (arity == 0) {
    if (nullary_count > 0) return false;
    nullary_count = 1;
    return true;
  }
  uint64_t h = tuple_hash(tuple);
  auto it = first_row.find(h);
  if (it != first_row.end()) {
    for (uint32_t r = it->second; r != kNoRow; r = next_row[r]) {
      const Symbol* row_data = data.data() + size_t(r) * arity;
      bool same = true;
      for (uint32_t i = 0; i < arity; ++i)
        if (row_data[i] != tuple[i]) {
          same = false;
          break;
        }
      if (same) return false;
    }
  }
  uint32_t new_row = static_cast<uint32_t>(data.size() / arity);
  data.insert(data.end(), tuple.begin(), tuple.end());
  if (it != first_row.end()) {
    next_row.push_back(it->second);
    it->second = new_row;
  } else {
    next_row.push_back(kNoRow);
    first_row.emplace(h, new_row);
  }
  return true;
}

bool EvalScratch::Relation::contains(std::span<const Symbol> tuple) const {
  if (arity == 0) return nullary_count > 0;
  uint64_t h = tuple_hash(tuple);
  auto it = first_row.find(h);
  if (it == first_row.end()) return false;
  for (uint32_t r = it->second; r != kNoRow; r = next_row[r]) {
    const Symbol* row_data = data.data() + size_t(r) * arity;
    bool same = true;
    for (uint32_t i = 0; i < arity; ++i)
      if (row_data[i] != tuple[i]) {
        same = false;
        break;
      }
    if (same) return true;
  }
  return false;
}

size_t EvalScratch::row_count(int pred_id) const {
  return relations_[pred_id].rows();
}

std::span<const Symbol> EvalScratch::row(int pred_id, size_t index) const {
  const Relation& r = relations_[pred_id];
  return {r.data.data() + index * r.arity, r.arity};
}

// --- compilation -----------------------------------------------------------------

PreparedProgram::PreparedProgram(Program flat_program)
    : program_(std::move(flat_program)) {
  if (!is_flat(program_))
    throw Error("program must be flattened before evaluation");
  strata_ = stratify(program_);

  auto intern_pred = [this](Symbol pred, size_t arity) -> int {
    if (arity > 16)
      throw Error("predicate " + pred.text() + " has arity above 16");
    auto& by_arity = pred_ids_[pred];
    auto it = by_arity.find(arity);
    if (it != by_arity.end()) return it->second;
    int id = static_cast<int>(pred_symbols_.size());
    by_arity.emplace(arity, id);
    pred_symbols_.push_back(pred);
    pred_arity_.push_back(static_cast<uint32_t>(arity));
    pred_stratum_.push_back(strata_.of(pred));
    return id;
  };
  for (const Rule& r : program_.rules) {
    if (r.head.pred == kDistinctSym)
      throw Error("distinct/2 is a built-in and may not be defined");
    intern_pred(r.head.pred, r.head.arity());
    for (const Literal& l : r.body)
      if (l.atom.pred != kDistinctSym) intern_pred(l.atom.pred, l.atom.arity());
  }

  rules_by_stratum_.resize(strata_.stratum_count);
  for (const Rule& r : program_.rules) compile_rule(r);
}

int PreparedProgram::pred_id(Symbol pred, size_t arity) const {
  auto it = pred_ids_.find(pred);
  if (it == pred_ids_.end()) return -1;
  auto jt = it->second.find(arity);
  return jt == it->second.end() ? -1 : jt->second;
}

void PreparedProgram::compile_rule(const Rule& r) {
  CompiledRule cr;
  cr.stratum = strata_.of(r.head.pred);
  cr.head_pred = pred_id(r.head.pred, r.head.arity());

  std::unordered_map<Symbol, int> slots;
  auto slot_of = [&](Symbol var) {
    auto [it, inserted] = slots.emplace(var, static_cast<int>(slots.size()));
    return it->second;
  };
  auto compile_args = [&](const Atom& a) {
    std::vector<ArgPat> out;
    out.reserve(a.args.size());
    for (const Term& t : a.args) {
      ArgPat p;
      if (t.is_variable()) {
        p.is_var = true;
        p.slot = slot_of(t.symbol);
      } else if (t.is_constant()) {
        p.constant = t.symbol;
      } else {
        throw Error("compound term in supposedly flat rule: " + unparse(r));
      }
      out.push_back(p);
    }
    return out;
  };

  // Greedy bound-safe ordering: flush any negation/distinct as soon as its
  // variables are bound, otherwise take the next positive literal in source
  // order.
  std::vector<const Literal*> remaining;
  for (const Literal& l : r.body) remaining.push_back(&l);
  std::unordered_set<Symbol> bound;
  auto vars_bound = [&](const Atom& a) {
    for (const Term& t : a.args)
      if (t.is_variable() && !bound.count(t.symbol)) return false;
    return true;
  };
  std::vector<const Literal*> ordered;
  while (!remaining.empty()) {
    size_t pick = remaining.size();
    for (size_t i = 0; i < remaining.size(); ++i) {
      const Literal* l = remaining[i];
      if ((l->negated || l->atom.pred == kDistinctSym) && vars_bound(l->atom)) {
        pick = i;
        break;
      }
    }
    if (pick == remaining.size()) {
      for (size_t i = 0; i < remaining.size(); ++i) {
        const Literal* l = remaining[i];
        if (!l->negated && l->atom.pred != kDistinctSym) {
          pick = i;
          break;
        }
      }
    }
    if (pick == remaining.size())
      throw Error("unsafe rule (negation or distinct over unbound variables): " +
                  unparse(r));
    const Literal* l = remaining[pick];
    remaining.erase(remaining.begin() + pick);
    CompiledLiteral cl;
    cl.negated = l->negated;
    cl.is_distinct = l->atom.pred == kDistinctSym;
    cl.all_bound = vars_bound(l->atom);
    if (!cl.is_distinct) cl.pred = pred_id(l->atom.pred, l->atom.arity());
    cl.args = compile_args(l->atom);
    if (!l->negated && !cl.is_distinct)
      for (const Term& t : l->atom.args)
        if (t.is_variable()) bound.insert(t.symbol);
    ordered.push_back(l);
    cr.body.push_back(std::move(cl));
  }

  cr.head_args = compile_args(r.head);
  for (const Term& t : r.head.args)
    if (t.is_variable() && !bound.count(t.symbol))
      throw Error("unsafe rule (head variable ?" + t.symbol.text() +
                  " unbound by body): " + unparse(r));
  cr.num_slots = static_cast<int>(slots.size());
  if (cr.num_slots > 64)
    throw Error("rule has more than 64 distinct variables: " + unparse(r));

  for (size_t i = 0; i < cr.body.size(); ++i) {
    const CompiledLiteral& cl = cr.body[i];
    if (!cl.negated && !cl.is_distinct &&
        pred_stratum_[cl.pred] == cr.stratum)
      cr.delta_positions.push_back(static_cast<int>(i));
  }
  rules_by_stratum_[cr.stratum].push_back(std::move(cr));
}

// --- evaluation --------------------------------------------------------------------

void PreparedProgram::execute(
    const CompiledRule& rule, int delta_pos, EvalScratch& scratch,
    const std::vector<std::pair<uint32_t, uint32_t>>& delta,
    std::vector<Symbol>& slots, bool& grew) const {
  Symbol tuple_buf[16];
  const size_t n = rule.body.size();

  // Iterative backtracking over body literals; row_cursor[i] is the next row
  // to try for literal i.
  std::vector<size_t> cursor(n + 1, 0);
  std::vector<uint64_t> bound_mask(n + 1, 0);
  uint64_t mask = 0;

  size_t depth = 0;
  cursor[0] = 0;
  bound_mask[0] = 0;

  auto emit_head = [&]() {
    const auto& rel_args = rule.head_args;
    assert(rel_args.size() <= 16);
    for (size_t i = 0; i < rel_args.size(); ++i)
      tuple_buf[i] = rel_args[i].is_var ? slots[rel_args[i].slot]
                                        : rel_args[i].constant;
    if (scratch.relations_[rule.head_pred].insert(
            {tuple_buf, rel_args.size()}))
      grew = true;
  };

  while (true) {
    if (depth == n) {
      emit_head();
      if (depth == 0) return;  // bodyless fact-rule fires exactly once
      --depth;
      mask = bound_mask[depth];
      continue;
    }
    const CompiledLiteral& lit = rule.body[depth];

    if (lit.is_distinct || lit.negated || lit.all_bound) {
      // Filter literal: passes at most once per binding.
      if (cursor[depth] > 0) {
        if (depth == 0) return;
        --depth;
        mask = bound_mask[depth];
        continue;
      }
      cursor[depth] = 1;
      bool pass;
      if (lit.is_distinct) {
        Symbol a = lit.args[0].is_var ? slots[lit.args[0].slot]
                                      : lit.args[0].constant;
        Symbol b = lit.args[1].is_var ? slots[lit.args[1].slot]
                                      : lit.args[1].constant;
        pass = a != b;
      } else {
        assert(lit.args.size() <= 16);
        for (size_t i = 0; i < lit.args.size(); ++i)
          tuple_buf[i] = lit.args[i].is_var ? slots[lit.args[i].slot]
                                            : lit.args[i].constant;
        bool present =
            scratch.relations_[lit.pred].contains({tuple_buf, lit.args.size()});
        pass = lit.negated ? !present : present;
      }
      if (pass) {
        ++depth;
        cursor[depth] = 0;
        bound_mask[depth] = mask;
      }
      continue;
    }

    // Scan literal: iterate candidate rows.
    const EvalScratch::Relation& rel = scratch.relations_[lit.pred];
    size_t begin = 0, end = rel.rows();
    if (static_cast<int>(depth) == delta_pos) {
      begin = delta[lit.pred].first;
      end = delta[lit.pred].second;
    }
    size_t r = cursor[depth] == 0 ? begin : cursor[depth];
    bool matched = false;
    const uint32_t arity = rel.arity;
    for (; r < end; ++r) {
      const Symbol* row = rel.data.data() + size_t(r) * arity;
      uint64_t new_mask = mask;
      bool ok = true;
      for (size_t i = 0; i < lit.args.size(); ++i) {
        const ArgPat& ap = lit.args[i];
        if (!ap.is_var) {
          if (row[i] != ap.constant) {
            ok = false;
            break;
          }
        } else if (new_mask & (1ull << ap.slot)) {
          if (slots[ap.slot] != row[i]) {
            ok = false;
            break;
          }
        } else {
          slots[ap.slot] = row[i];
          new_mask |= 1ull << ap.slot;
        }
      }
      if (ok) {
        cursor[depth] = r + 1;
        ++depth;
        cursor[depth] = 0;
        bound_mask[depth] = new_mask;
        mask = new_mask;
        matched = true;
        break;
      }
    }
    if (!matched) {
      if (depth == 0) return;
      --depth;
      mask = bound_mask[depth];
    }
  }
}

void PreparedProgram::run(const FactSet& facts, EvalScratch& scratch) const {
  const FactSet* sets[1] = {&facts};
  run(std::span<const FactSet* const>(sets, 1), scratch);
}

void PreparedProgram::run(std::span<const FactSet* const> fact_sets,
                          EvalScratch& scratch) const {
  const size_t np = pred_symbols_.size();
  scratch.relations_.resize(std::max(scratch.relations_.size(), np));
  for (size_t i = 0; i < np; ++i) scratch.relations_[i].reset(pred_arity_[i]);
  scratch.passthrough_.clear();

  Symbol tuple_buf[16];
  for (const FactSet* set : fact_sets)
    for (const GroundAtom& a : *set) {
      int pid = pred_id(a.pred, a.args.size());
      if (pid < 0) {
        if (scratch.keep_passthrough) scratch.passthrough_.push_back(a);
        continue;
      }
      if (a.args.size() > 16) throw Error("atom arity above 16: " + to_string(a));
      for (size_t i = 0; i < a.args.size(); ++i) tuple_buf[i] = a.args[i];
      scratch.relations_[pid].insert({tuple_buf, a.args.size()});
    }

  std::vector<std::pair<uint32_t, uint32_t>> delta(np, {0, 0});
  std::vector<Symbol> slots;
  for (const auto& stratum_rules : rules_by_stratum_) {
    std::vector<uint32_t> before(np);
    for (size_t i = 0; i < np; ++i)
      before[i] = static_cast<uint32_t>(scratch.relations_[i].rows());

    // Naive first round over full relations.
    bool grew = false;
    for (const CompiledRule& rule : stratum_rules) {
      slots.assign(rule.num_slots, Symbol());
      execute(rule, -1, scratch, delta, slots, grew);
    }

    for (size_t i = 0; i < np; ++i)
      delta[i] = {before[i], static_cast<uint32_t>(scratch.relations_[i].rows())};

    // Semi-naive rounds: re-fire rules through each delta position.
    while (grew) {
      grew = false;
      for (const CompiledRule& rule : stratum_rules) {
        for (int dp : rule.delta_positions) {
          const auto& d = delta[rule.body[dp].pred];
          if (d.first == d.second) continue;
          slots.assign(rule.num_slots, Symbol());
          execute(rule, dp, scratch, delta, slots, grew);
        }
      }
      for (size_t i = 0; i < np; ++i)
        delta[i] = {delta[i].second,
                    static_cast<uint32_t>(scratch.relations_[i].rows())};
    }
  }
}

FactSet PreparedProgram::evaluate(const FactSet& facts,
                                  EvalScratch& scratch) const {
  run(facts, scratch);
  std::vector<GroundAtom> out;
  out.reserve(facts.size() + 64);
  for (size_t pid = 0; pid < pred_symbols_.size(); ++pid) {
    const size_t rows = scratch.row_count(static_cast<int>(pid));
    for (size_t r = 0; r < rows; ++r) {
      auto row = scratch.row(static_cast<int>(pid), r);
      out.push_back(GroundAtom{pred_symbols_[pid],
                               std::vector<Symbol>(row.begin(), row.end())});
    }
  }
  out.insert(out.end(), scratch.passthrough_.begin(), scratch.passthrough_.end());
  return FactSet::from(std::move(out));
}

FactSet PreparedProgram::evaluate(const FactSet& facts) const {
  EvalScratch scratch;
  return evaluate(facts, scratch);
}

bool PreparedProgram::entails(const FactSet& facts, const GroundAtom& query,
                              EvalScratch& scratch) const {
  int pid = pred_id(query.pred, query.args.size());
  if (pid < 0) return facts.contains(query);
  run(facts, scratch);
  if (query.args.size() > 16) throw Error("atom arity above 16");
  Symbol tuple_buf[16];
  for (size_t i = 0; i < query.args.size(); ++i) tuple_buf[i] = query.args[i];
  return scratch.relations_[pid].contains({tuple_buf, query.args.size()});
}

bool PreparedProgram::entails(const FactSet& facts,
                              const GroundAtom& query) const {
  EvalScratch scratch;
  return entails(facts, query, scratch);
}

FactSet evaluate(const Program& flat_program, const FactSet& facts) {
  return PreparedProgram(flat_program).evaluate(facts);
}

bool entails(const Program& flat_program, const FactSet& facts,
             const GroundAtom& query) {
  return PreparedProgram(flat_program).entails(facts, query);
}

}  // namespace iggp
