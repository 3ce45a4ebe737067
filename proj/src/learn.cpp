#include "iggp/learn.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

namespace iggp {

namespace {

using Clock = std::chrono::steady_clock;

struct Deadline {
  Clock::time_point end;
  explicit Deadline(uint64_t millis)
      : end(Clock::now() + std::chrono::milliseconds(millis)) {}
  bool passed() const { return Clock::now() >= end; }
};

// Task restricted to one target predicate.
struct PredView {
  Symbol pred;
  size_t arity = 0;
  std::vector<const InductionTriple*> triples;
  std::vector<FactSet> pos, neg;
  size_t total_pos = 0;
};

PredView view_of(const IggpTask& task, Symbol pred) {
  PredView v;
  v.pred = pred;
  for (const InductionTriple& t : task.triples) {
    FactSet pos, neg;
    for (const GroundAtom& a : t.positives)
      if (a.pred == pred) {
        pos.insert(a);
        v.arity = a.args.size();
      }
    for (const GroundAtom& a : t.negatives)
      if (a.pred == pred) {
        neg.insert(a);
        v.arity = a.args.size();
      }
    v.total_pos += pos.size();
    v.triples.push_back(&t);
    v.pos.push_back(std::move(pos));
    v.neg.push_back(std::move(neg));
  }
  if (v.arity == 0) {
    auto it = task.domain_pools.find(pred);
    if (it != task.domain_pools.end() && !it->second.empty())
      v.arity = it->second.begin()->args.size();
  }
  return v;
}

struct Coverage {
  std::vector<std::pair<size_t, GroundAtom>> pos;  // (triple index, atom)
  size_t neg = 0;
};

Coverage coverage_of(const Rule& rule, const PredView& view,
                     EvalScratch& scratch) {
  Program p;
  p.rules.push_back(rule);
  PreparedProgram prog(std::move(p));
  int hid = prog.pred_id(rule.head.pred, rule.head.arity());
  Coverage cov;
  scratch.keep_passthrough = false;
  for (size_t i = 0; i < view.triples.size(); ++i) {
    if (view.pos[i].empty() && view.neg[i].empty()) continue;
    prog.run(view.triples[i]->background, scratch);
    const size_t rows = scratch.row_count(hid);
    for (size_t r = 0; r < rows; ++r) {
      auto row = scratch.row(hid, r);
      GroundAtom a{rule.head.pred, std::vector<Symbol>(row.begin(), row.end())};
      if (view.pos[i].contains(a))
        cov.pos.emplace_back(i, std::move(a));
      else if (view.neg[i].contains(a))
        ++cov.neg;
    }
  }
  return cov;
}

bool rule_safe(const Rule& r) {
  std::set<Symbol> positive;
  auto collect = [](const Atom& a, std::set<Symbol>& out) {
    for (const Term& t : a.args)
      if (t.is_variable()) out.insert(t.symbol);
  };
  const Symbol kDistinct = Symbol::intern("distinct");
  for (const Literal& l : r.body)
    if (!l.negated && l.atom.pred != kDistinct) collect(l.atom, positive);
  std::set<Symbol> need;
  collect(r.head, need);
  for (const Literal& l : r.body)
    if (l.negated || l.atom.pred == kDistinct) collect(l.atom, need);
  for (Symbol v : need)
    if (!positive.count(v)) return false;
  return true;
}

}  // namespace

std::string canonical_rule(const Rule& r) {
  std::vector<size_t> order(r.body.size());
  std::iota(order.begin(), order.end(), 0);

  auto render = [&r](const std::vector<size_t>& perm) {
    std::map<Symbol, Symbol> rename;
    auto fresh = [&rename](Symbol v) {
      auto [it, added] =
          rename.emplace(v, Symbol::intern("v" + std::to_string(rename.size())));
      return it->second;
    };
    std::function<Term(const Term&)> rn = [&](const Term& t) -> Term {
      if (t.is_variable()) return Term::variable(fresh(t.symbol));
      if (t.is_constant()) return t;
      Term out = t;
      for (Term& a : out.args) a = rn(a);
      return out;
    };
    Rule rr;
    rr.head = r.head;
    for (Term& t : rr.head.args) t = rn(t);
    for (size_t i : perm) {
      Literal l = r.body[i];
      for (Term& t : l.atom.args) t = rn(t);
      rr.body.push_back(std::move(l));
    }
    return unparse(rr);
  };

  if (order.size() <= 6) {
    std::string best;
    std::sort(order.begin(), order.end());
    do {
      std::string s = render(order);
      if (best.empty() || s < best) best = s;
    } while (std::next_permutation(order.begin(), order.end()));
    return best;
  }
  // Large bodies: one stable order by variable-blind rendering.
  std::sort(order.begin(), order.end(), [&r](size_t a, size_t b) {
    return unparse(r.body[a]) < unparse(r.body[b]);
  });
  return render(order);
}

std::vector<Symbol> target_predicates(const IggpTask& task) {
  std::vector<Symbol> out;
  for (const auto& [pred, pool] : task.domain_pools) out.push_back(pred);
  std::sort(out.begin(), out.end(), text_less);
  return out;
}

Bias bias_for(const IggpTask& task, Symbol head_pred) {
  Bias bias;
  bias.head_pred = head_pred;
  bias.signature = task.signature;

  auto pool_it = task.domain_pools.find(head_pred);
  if (pool_it != task.domain_pools.end() && !pool_it->second.empty())
    bias.head_arity = pool_it->second.begin()->args.size();

  std::map<Symbol, size_t> body;
  for (const InductionTriple& t : task.triples)
    for (const GroundAtom& a : t.background) body.emplace(a.pred, a.args.size());
  for (const auto& [pred, arity] : body) bias.body_preds.emplace_back(pred, arity);
  std::sort(bias.body_preds.begin(), bias.body_preds.end(),
            [](const auto& a, const auto& b) { return text_less(a.first, b.first); });
  return bias;
}

// --- bottom clause ------------------------------------------------------------------

BottomClause bottom_clause(const GroundAtom& seed, const FactSet& background,
                           const Bias& bias) {
  if (seed.pred != bias.head_pred)
    throw Error("seed predicate " + seed.pred.text() +
                " is not the bias head " + bias.head_pred.text());

  std::set<std::pair<Symbol, size_t>> allowed(bias.body_preds.begin(),
                                              bias.body_preds.end());
  std::map<Symbol, Symbol> var_of;  // constant -> variable
  auto lift = [&var_of](Symbol c) {
    auto [it, added] =
        var_of.emplace(c, Symbol::intern("v" + std::to_string(var_of.size())));
    return it->second;
  };
  for (Symbol c : seed.args) lift(c);

  std::vector<const GroundAtom*> included;
  std::set<const GroundAtom*> in;
  for (int pass = 0; pass <= bias.bottom_depth; ++pass) {
    std::vector<const GroundAtom*> fresh;
    for (const GroundAtom& a : background) {
      if (in.count(&a)) continue;
      if (!allowed.count({a.pred, a.args.size()})) continue;
      bool linked = false;
      for (Symbol c : a.args)
        if (var_of.count(c)) {
          linked = true;
          break;
        }
      if (a.args.empty()) linked = true;  // nullary background facts
      if (linked) fresh.push_back(&a);
    }
    if (fresh.empty()) break;
    for (const GroundAtom* a : fresh) {
      in.insert(a);
      included.push_back(a);
      for (Symbol c : a->args) lift(c);
    }
  }

  BottomClause bc;
  bc.head = Atom{seed.pred, {}};
  for (Symbol c : seed.args) bc.head.args.push_back(Term::variable(var_of[c]));
  std::sort(included.begin(), included.end(),
            [](const GroundAtom* a, const GroundAtom* b) {
              return text_less_atoms(*a, *b);
            });
  for (const GroundAtom* a : included) {
    Atom atom{a->pred, {}};
    for (Symbol c : a->args) atom.args.push_back(Term::variable(var_of[c]));
    bc.body.push_back(Literal{std::move(atom), false});
  }
  return bc;
}

// --- generalization ------------------------------------------------------------------

Rule generalize(const BottomClause& bottom, const GroundAtom& seed,
                const IggpTask& task, const Bias& bias,
                const LearnBudget& budget) {
  PredView view = view_of(task, seed.pred);
  EvalScratch scratch;
  Deadline deadline(budget.millis);

  Rule fallback{to_syntax(seed), {}};
  std::optional<Rule> best;
  double best_score = -1e300;
  std::string best_canon;
  size_t candidates = 0;

  const size_t nb = bottom.body.size();
  const int max_size = std::min<int>(bias.max_body, static_cast<int>(nb));
  for (int size = 0; size <= max_size; ++size) {
    // combinations of `size` indices in lexicographic order
    std::vector<size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    bool more = size <= static_cast<int>(nb);
    if (size == 0) {
      // empty body: only safe when the head is ground, which a lifted seed
      // never is; skipped by the safety check below.
      more = true;
    }
    while (more) {
      if (deadline.passed() || candidates >= budget.max_candidates) break;
      Rule r;
      r.head = bottom.head;
      for (size_t i : idx) r.body.push_back(bottom.body[i]);
      ++candidates;
      if (rule_safe(r)) {
        Coverage cov = coverage_of(r, view, scratch);
        if (static_cast<int>(cov.neg) <= bias.max_false_positives) {
          double score = static_cast<double>(cov.pos.size()) -
                         static_cast<double>(cov.neg) -
                         0.001 * static_cast<double>(r.body.size());
          std::string canon = canonical_rule(r);
          bool better = false;
          if (!best || score > best_score + 1e-12) {
            better = true;
          } else if (score > best_score - 1e-12) {
            if (r.body.size() < best->body.size()) better = true;
            else if (r.body.size() == best->body.size() && canon < best_canon)
              better = true;
          }
          if (better) {
            best = r;
            best_score = score;
            best_canon = canon;
          }
        }
      }
      // advance combination
      if (size == 0) break;
      int k = size - 1;
      while (k >= 0 && idx[k] == nb - size + k) --k;
      if (k < 0) break;
      ++idx[k];
      for (int j = k + 1; j < size; ++j) idx[j] = idx[j - 1] + 1;
    }
    if (deadline.passed() || candidates >= budget.max_candidates) break;
  }
  return best ? *best : fallback;
}

// --- cover loop ------------------------------------------------------------------------

Hypothesis cover_loop(const IggpTask& task, const Bias& bias,
                      const LearnBudget& budget) {
  PredView view = view_of(task, bias.head_pred);
  EvalScratch scratch;
  Deadline deadline(budget.millis);

  // Uncovered positives in canonical order.
  std::vector<std::pair<size_t, GroundAtom>> uncovered;
  for (size_t i = 0; i < view.pos.size(); ++i)
    for (const GroundAtom& a : view.pos[i].sorted_by_text())
      uncovered.emplace_back(i, a);

  Hypothesis hyp;
  std::set<std::string> have;
  while (!uncovered.empty() && !deadline.passed()) {
    auto [triple_idx, seed] = uncovered.front();
    BottomClause bc =
        bottom_clause(seed, view.triples[triple_idx]->background, bias);
    LearnBudget remaining = budget;
    remaining.millis = static_cast<uint64_t>(std::max<int64_t>(
        0, std::chrono::duration_cast<std::chrono::milliseconds>(
               deadline.end - Clock::now())
               .count()));
    Rule rule = generalize(bc, seed, task, bias, remaining);
    std::string canon = canonical_rule(rule);
    Coverage cov = coverage_of(rule, view, scratch);
    if (have.insert(canon).second) hyp.rules.push_back(rule);

    std::set<std::pair<size_t, std::string>> gone;
    for (const auto& [i, a] : cov.pos) gone.emplace(i, to_string(a));
    gone.emplace(triple_idx, to_string(seed));  // a bottom clause covers its seed
    std::erase_if(uncovered, [&gone](const auto& entry) {
      return gone.count({entry.first, to_string(entry.second)}) > 0;
    });
  }

  // Budget exhausted: memorize what is left, one fact per distinct atom.
  std::set<std::string> facts;
  for (const auto& [i, a] : uncovered)
    if (facts.insert(to_string(a)).second)
      hyp.rules.push_back(Rule{to_syntax(a), {}});
  hyp.learned = true;
  return hyp;
}

// --- enumeration --------------------------------------------------------------------------

namespace {

struct EnumContext {
  const Bias* bias;
  int body_length;
  std::vector<Rule> out;
  std::set<std::string> seen;
  size_t generated = 0;

  int class_of(Symbol pred, int pos) const {
    auto it = bias->signature.class_of.find({pred, pos});
    return it == bias->signature.class_of.end() ? -1 : it->second;
  }
  const std::vector<Symbol>* constants_of(int cls) const {
    if (cls < 0 ||
        cls >= static_cast<int>(bias->signature.class_constants.size()))
      return nullptr;
    return &bias->signature.class_constants[cls];
  }

  void bump() {
    // raw-step valve, far above the rule cap, against degenerate spins
    if (++generated > 20 * bias->enumeration_cap)
      throw EnumerationOverflow(
          "rule enumeration exceeded " +
          std::to_string(20 * bias->enumeration_cap) + " generation steps");
  }
};

// Variables are typed by the class of the first position they appear at.
struct EnumState {
  std::vector<int> var_class;  // per variable index
  Rule rule;
};

void emit_if_valid(EnumContext& ctx, const Rule& r) {
  if (!rule_safe(r)) return;
  std::string canon = canonical_rule(r);
  if (ctx.seen.insert(canon).second) {
    ctx.out.push_back(r);
    if (ctx.out.size() > ctx.bias->enumeration_cap)
      throw EnumerationOverflow("rule enumeration exceeded the cap of " +
                                std::to_string(ctx.bias->enumeration_cap) +
                                " rules");
  }
}

void enum_literals(EnumContext& ctx, EnumState& st, int remaining);

void enum_literal_args(EnumContext& ctx, EnumState& st, Symbol pred,
                       size_t arity, size_t pos, Atom& atom, bool negated,
                       int remaining) {
  if (pos == arity) {
    st.rule.body.push_back(Literal{atom, negated});
    enum_literals(ctx, st, remaining - 1);
    st.rule.body.pop_back();
    return;
  }
  ctx.bump();
  int cls = ctx.class_of(pred, static_cast<int>(pos));
  // existing variables of a compatible class
  for (size_t v = 0; v < st.var_class.size(); ++v) {
    if (st.var_class[v] != cls) continue;
    atom.args.push_back(Term::variable(Symbol::intern("v" + std::to_string(v))));
    enum_literal_args(ctx, st, pred, arity, pos + 1, atom, negated, remaining);
    atom.args.pop_back();
  }
  // one fresh variable
  if (static_cast<int>(st.var_class.size()) < ctx.bias->max_vars) {
    st.var_class.push_back(cls);
    atom.args.push_back(Term::variable(
        Symbol::intern("v" + std::to_string(st.var_class.size() - 1))));
    enum_literal_args(ctx, st, pred, arity, pos + 1, atom, negated, remaining);
    atom.args.pop_back();
    st.var_class.pop_back();
  }
  // constants of the class
  if (const auto* consts = ctx.constants_of(cls))
    for (Symbol c : *consts) {
      atom.args.push_back(Term::constant(c));
      enum_literal_args(ctx, st, pred, arity, pos + 1, atom, negated, remaining);
      atom.args.pop_back();
    }
}

void enum_literals(EnumContext& ctx, EnumState& st, int remaining) {
  if (remaining == 0) {
    emit_if_valid(ctx, st.rule);
    return;
  }
  for (const auto& [pred, arity] : ctx.bias->body_preds) {
    for (int neg = 0; neg <= (ctx.bias->allow_negation ? 1 : 0); ++neg) {
      Atom atom{pred, {}};
      enum_literal_args(ctx, st, pred, arity, 0, atom, neg == 1, remaining);
    }
  }
}

void enum_heads(EnumContext& ctx, EnumState& st, size_t pos, Atom& head,
                int body_length) {
  if (pos == ctx.bias->head_arity) {
    st.rule.head = head;
    enum_literals(ctx, st, body_length);
    return;
  }
  ctx.bump();
  int cls = ctx.class_of(ctx.bias->head_pred, static_cast<int>(pos));
  {
    // fresh head variable (head vars are distinct)
    st.var_class.push_back(cls);
    head.args.push_back(Term::variable(
        Symbol::intern("v" + std::to_string(st.var_class.size() - 1))));
    enum_heads(ctx, st, pos + 1, head, body_length);
    head.args.pop_back();
    st.var_class.pop_back();
  }
  if (ctx.bias->allow_head_constants)
    if (const auto* consts = ctx.constants_of(cls))
      for (Symbol c : *consts) {
        head.args.push_back(Term::constant(c));
        enum_heads(ctx, st, pos + 1, head, body_length);
        head.args.pop_back();
      }
}

}  // namespace

std::vector<Rule> enumerate_rules(const Bias& bias, int body_length) {
  EnumContext ctx;
  ctx.bias = &bias;
  ctx.body_length = body_length;
  EnumState st;
  Atom head{bias.head_pred, {}};
  enum_heads(ctx, st, 0, head, body_length);
  std::sort(ctx.out.begin(), ctx.out.end(), [](const Rule& a, const Rule& b) {
    return canonical_rule(a) < canonical_rule(b);
  });
  return ctx.out;
}

// --- enumerative learner ----------------------------------------------------------------

Hypothesis learn_enumerative(const IggpTask& task, const Bias& bias,
                             const LearnBudget& budget) {
  PredView view = view_of(task, bias.head_pred);
  EvalScratch scratch;
  Deadline deadline(budget.millis);

  Hypothesis failed;
  failed.learned = false;
  failed.default_preds.insert(bias.head_pred);

  // A negative already inside its background can never be avoided.
  for (size_t i = 0; i < view.neg.size(); ++i)
    for (const GroundAtom& a : view.neg[i])
      if (view.triples[i]->background.contains(a)) return failed;

  // Global index of positives; base coverage = positives already in B.
  std::vector<std::pair<size_t, GroundAtom>> pos_index;
  for (size_t i = 0; i < view.pos.size(); ++i)
    for (const GroundAtom& a : view.pos[i]) pos_index.emplace_back(i, a);
  const size_t npos = pos_index.size();
  const size_t words = (npos + 63) / 64;
  std::vector<uint64_t> full(words, 0), base(words, 0);
  for (size_t b = 0; b < npos; ++b) full[b / 64] |= 1ull << (b % 64);
  for (size_t b = 0; b < npos; ++b)
    if (view.triples[pos_index[b].first]->background.contains(pos_index[b].second))
      base[b / 64] |= 1ull << (b % 64);

  auto covered_all = [&](const std::vector<uint64_t>& bits) {
    for (size_t w = 0; w < words; ++w)
      if ((bits[w] & full[w]) != full[w]) return false;
    return true;
  };
  if (covered_all(base)) {
    Hypothesis hyp;  // the empty hypothesis suffices
    return hyp;
  }

  struct Cand {
    Rule rule;
    std::vector<uint64_t> bits;
    int size;  // 1 + body length
  };
  std::vector<Cand> cands;
  std::vector<bool> length_done(static_cast<size_t>(bias.max_body) + 1, false);

  auto add_candidates_for_length = [&](int len) {
    if (len > bias.max_body || length_done[len]) return true;
    length_done[len] = true;
    std::vector<Rule> rules;
    try {
      rules = enumerate_rules(bias, len);
    } catch (const EnumerationOverflow&) {
      return false;
    }
    for (const Rule& r : rules) {
      if (deadline.passed()) return false;
      Coverage cov = coverage_of(r, view, scratch);
      if (cov.neg > 0) continue;
      std::vector<uint64_t> bits(words, 0);
      bool any = false;
      for (const auto& [i, a] : cov.pos) {
        for (size_t b = 0; b < npos; ++b)
          if (pos_index[b].first == i && pos_index[b].second == a) {
            bits[b / 64] |= 1ull << (b % 64);
            any = true;
          }
      }
      if (any) cands.push_back(Cand{r, std::move(bits), len + 1});
    }
    return true;
  };

  const int max_total = 4 * (bias.max_body + 1);
  for (int n = 1; n <= max_total; ++n) {
    if (deadline.passed()) return failed;
    // candidate pool: rules of size <= n (body length < n)
    for (int len = 0; len < n && len <= bias.max_body; ++len)
      if (!add_candidates_for_length(len)) return failed;

    // subsets of total size n, fewer rules first, canonical order
    for (int k = 1; k <= n; ++k) {
      std::vector<size_t> chosen;
      std::vector<uint64_t> acc = base;
      std::function<std::optional<Hypothesis>(size_t, int)> dfs =
          [&](size_t start, int size_left) -> std::optional<Hypothesis> {
        if (deadline.passed()) return std::nullopt;
        if (static_cast<int>(chosen.size()) == k) {
          if (size_left != 0) return std::nullopt;
          if (!covered_all(acc)) return std::nullopt;
          Hypothesis hyp;
          for (size_t c : chosen) hyp.rules.push_back(cands[c].rule);
          return hyp;
        }
        int slots_after = k - static_cast<int>(chosen.size()) - 1;
        for (size_t c = start; c < cands.size(); ++c) {
          if (cands[c].size > size_left - slots_after) continue;
          // skip rules adding no new coverage
          bool adds = false;
          for (size_t w = 0; w < words; ++w)
            if (cands[c].bits[w] & ~acc[w] & full[w]) {
              adds = true;
              break;
            }
          if (!adds) continue;
          std::vector<uint64_t> saved = acc;
          for (size_t w = 0; w < words; ++w) acc[w] |= cands[c].bits[w];
          chosen.push_back(c);
          auto found = dfs(c + 1, size_left - cands[c].size);
          if (found) return found;
          chosen.pop_back();
          acc = saved;
        }
        return std::nullopt;
      };
      auto found = dfs(0, n);
      if (found) return *found;
      if (deadline.passed()) return failed;
    }
  }
  return failed;
}

// --- task-level driver -----------------------------------------------------------------

LearnerKind parse_learner(const std::string& name) {
  if (name == "cover") return LearnerKind::Cover;
  if (name == "enum" || name == "enumerative") return LearnerKind::Enumerative;
  throw Error("unknown learner: " + name + " (expected cover or enum)");
}

std::string to_string(LearnerKind k) {
  return k == LearnerKind::Cover ? "cover" : "enum";
}

Hypothesis learn_task(const IggpTask& task, LearnerKind kind,
                      const LearnBudget& budget) {
  Hypothesis out;
  bool any_learned = false;
  for (Symbol pred : target_predicates(task)) {
    Bias bias = bias_for(task, pred);
    Hypothesis h = kind == LearnerKind::Cover
                       ? cover_loop(task, bias, budget)
                       : learn_enumerative(task, bias, budget);
    if (h.learned) {
      any_learned = true;
      for (Rule& r : h.rules) out.rules.push_back(std::move(r));
    } else {
      out.default_preds.insert(pred);
    }
  }
  out.learned = any_learned || target_predicates(task).empty();
  if (!out.learned) out.rules.clear();
  return out;
}

// --- hypothesis files ---------------------------------------------------------------------

void write_hypothesis(const Hypothesis& h, const std::string& game,
                      const std::string& target,
                      const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << "; hypothesis " << game << " " << target << "\n";
  if (!h.learned) out << "; default all\n";
  for (Symbol pred : h.default_preds) out << "; default " << pred.text() << "\n";
  std::vector<std::string> lines;
  for (const Rule& r : h.rules) lines.push_back(canonical_rule(r));
  std::sort(lines.begin(), lines.end());
  for (const std::string& line : lines) out << line << "\n";
}

Hypothesis read_hypothesis(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot read " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  Hypothesis h;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.rfind("; default all", 0) == 0) h.learned = false;
    else if (line.rfind("; default ", 0) == 0)
      h.default_preds.insert(Symbol::intern(line.substr(10)));
  }
  Program p = parse_program(text);
  h.rules = p.rules;
  return h;
}

}  // namespace iggp
