#include "iggp/gdl.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace iggp {

bool Term::is_ground() const {
  if (kind == Kind::Variable) return false;
  for (const Term& a : args)
    if (!a.is_ground()) return false;
  return true;
}

bool Term::operator==(const Term& o) const {
  return kind == o.kind && symbol == o.symbol && args == o.args;
}

bool Atom::is_ground() const {
  for (const Term& a : args)
    if (!a.is_ground()) return false;
  return true;
}

bool Atom::operator==(const Atom& o) const {
  return pred == o.pred && args == o.args;
}

// --- s-expression reader ---------------------------------------------------

namespace {

struct SExpr {
  // Leaf: sym set, children empty and is_list false. List: is_list true.
  Symbol sym;
  bool is_list = false;
  bool is_variable = false;
  std::vector<SExpr> children;
  SourcePos pos;
};

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {}

  std::vector<SExpr> read_all() {
    std::vector<SExpr> out;
    for (;;) {
      skip_space();
      if (at_end()) return out;
      out.push_back(read_expr());
    }
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  void advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  SourcePos here() const { return SourcePos{line_, col_}; }

  void skip_space() {
    while (!at_end()) {
      char c = peek();
      if (c == ';') {
        while (!at_end() && peek() != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        return;
      }
    }
  }

  SExpr read_expr() {
    SourcePos start = here();
    char c = peek();
    if (c == '(') {
      advance();
      SExpr list;
      list.is_list = true;
      list.pos = start;
      for (;;) {
        skip_space();
        if (at_end())
          throw ParseError("unbalanced parenthesis: '(' opened at line " +
                               std::to_string(start.line) + ", column " +
                               std::to_string(start.column) + " is never closed",
                           start);
        if (peek() == ')') {
          advance();
          return list;
        }
        list.children.push_back(read_expr());
      }
    }
    if (c == ')')
      throw ParseError("unbalanced parenthesis: unexpected ')' at line " +
                           std::to_string(start.line) + ", column " +
                           std::to_string(start.column),
                       start);
    return read_token(start);
  }

  SExpr read_token(SourcePos start) {
    std::string tok;
    while (!at_end()) {
      char c = peek();
      if (c == '(' || c == ')' || c == ';' ||
          std::isspace(static_cast<unsigned char>(c)))
        break;
      tok.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(c))));
      advance();
    }
    SExpr leaf;
    leaf.pos = start;
    if (tok[0] == '?') {
      leaf.is_variable = true;
      std::string name = tok.substr(1);
      if (name.empty())
        throw ParseError("'?' must be followed by a variable name", start);
      leaf.sym = Symbol::intern(name);
    } else {
      leaf.sym = Symbol::intern(tok);
    }
    return leaf;
  }

  std::string_view text_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

// --- s-expression -> syntax tree -------------------------------------------

Term to_term(const SExpr& e) {
  if (!e.is_list) {
    if (e.is_variable) return Term::variable(e.sym);
    return Term::constant(e.sym);
  }
  if (e.children.empty())
    throw ParseError("empty parentheses are not a term", e.pos);
  const SExpr& f = e.children.front();
  if (f.is_list)
    throw ParseError("functor must be a symbol", f.pos);
  if (f.is_variable)
    throw ParseError("variable ?" + f.sym.text() + " used as a functor", f.pos);
  std::vector<Term> args;
  for (size_t i = 1; i < e.children.size(); ++i)
    args.push_back(to_term(e.children[i]));
  return Term::compound(f.sym, std::move(args));
}

Atom to_atom(const SExpr& e) {
  if (!e.is_list) {
    if (e.is_variable)
      throw ParseError("variable ?" + e.sym.text() + " used as a predicate symbol",
                       e.pos);
    return Atom{e.sym, {}};
  }
  Term t = to_term(e);  // reuses functor checks
  return Atom{t.symbol, std::move(t.args)};
}

Literal to_literal(const SExpr& e) {
  static const Symbol kNot = Symbol::intern("not");
  if (e.is_list && !e.children.empty() && !e.children[0].is_list &&
      !e.children[0].is_variable && e.children[0].sym == kNot) {
    if (e.children.size() != 2)
      throw ParseError("'not' takes exactly one atom", e.pos);
    return Literal{to_atom(e.children[1]), true};
  }
  return Literal{to_atom(e), false};
}

void record_signature(Program& p, const Atom& a, SourcePos pos) {
  auto [it, inserted] = p.predicate_signatures.emplace(a.pred, a.arity());
  if (!inserted && it->second != a.arity())
    throw ParseError("predicate " + a.pred.text() + " used with arity " +
                         std::to_string(a.arity()) + " but previously with " +
                         std::to_string(it->second),
                     pos);
}

}  // namespace

Program parse_program(std::string_view text) {
  static const Symbol kArrow = Symbol::intern("<=");
  Reader reader(text);
  Program p;
  for (const SExpr& e : reader.read_all()) {
    bool is_rule = e.is_list && !e.children.empty() && !e.children[0].is_list &&
                   !e.children[0].is_variable && e.children[0].sym == kArrow;
    Rule rule;
    if (is_rule) {
      if (e.children.size() < 2)
        throw ParseError("'<=' needs a head", e.pos);
      rule.head = to_atom(e.children[1]);
      for (size_t i = 2; i < e.children.size(); ++i)
        rule.body.push_back(to_literal(e.children[i]));
    } else {
      rule.head = to_atom(e);
    }
    record_signature(p, rule.head, e.pos);
    for (const Literal& l : rule.body) record_signature(p, l.atom, e.pos);
    p.rules.push_back(std::move(rule));
  }
  return p;
}

Program parse_program_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_program(buf.str());
}

// --- canonical output ------------------------------------------------------

std::string unparse(const Term& t) {
  switch (t.kind) {
    case Term::Kind::Constant:
      return t.symbol.text();
    case Term::Kind::Variable:
      return "?" + t.symbol.text();
    case Term::Kind::Compound: {
      std::string out = "(" + t.symbol.text();
      for (const Term& a : t.args) out += " " + unparse(a);
      return out + ")";
    }
  }
  return {};
}

std::string unparse(const Atom& a) {
  if (a.args.empty()) return a.pred.text();
  std::string out = "(" + a.pred.text();
  for (const Term& t : a.args) out += " " + unparse(t);
  return out + ")";
}

std::string unparse(const Literal& l) {
  if (l.negated) return "(not " + unparse(l.atom) + ")";
  return unparse(l.atom);
}

std::string unparse(const Rule& r) {
  if (r.is_fact()) {
    // A nullary fact still needs parentheses to reparse as an atom.
    if (r.head.args.empty()) return "(" + r.head.pred.text() + ")";
    return unparse(r.head);
  }
  std::string out = "(<= " + unparse(r.head);
  for (const Literal& l : r.body) out += " " + unparse(l);
  return out + ")";
}

std::string unparse(const Program& p) {
  std::string out;
  for (const Rule& r : p.rules) {
    out += unparse(r);
    out += '\n';
  }
  return out;
}

std::string fact_line(const Atom& a) {
  if (a.args.empty()) return a.pred.text() + ".";
  std::string out = a.pred.text() + "(";
  for (size_t i = 0; i < a.args.size(); ++i) {
    if (i) out += ",";
    out += unparse(a.args[i]);
  }
  return out + ").";
}

Atom parse_fact_line(std::string_view line) {
  // Trim, then accept "pred." or "pred(c1,...,cn)." with constant args.
  size_t b = line.find_first_not_of(" \t\r\n");
  size_t e = line.find_last_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    throw ParseError("empty fact line", SourcePos{});
  line = line.substr(b, e - b + 1);
  if (line.empty() || line.back() != '.')
    throw ParseError("fact line must end with '.': " + std::string(line),
                     SourcePos{});
  line.remove_suffix(1);
  auto lower = [](std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s)
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
  };
  size_t open = line.find('(');
  if (open == std::string_view::npos) {
    if (line.empty())
      throw ParseError("missing predicate in fact line", SourcePos{});
    return Atom{Symbol::intern(lower(line)), {}};
  }
  if (line.back() != ')')
    throw ParseError("missing ')' in fact line: " + std::string(line),
                     SourcePos{});
  std::string_view name = line.substr(0, open);
  std::string_view inner = line.substr(open + 1, line.size() - open - 2);
  if (name.empty())
    throw ParseError("missing predicate in fact line", SourcePos{});
  Atom a{Symbol::intern(lower(name)), {}};
  size_t start = 0;
  while (start <= inner.size() && !inner.empty()) {
    size_t comma = inner.find(',', start);
    std::string_view piece = comma == std::string_view::npos
                                 ? inner.substr(start)
                                 : inner.substr(start, comma - start);
    size_t pb = piece.find_first_not_of(" \t");
    size_t pe = piece.find_last_not_of(" \t");
    if (pb == std::string_view::npos)
      throw ParseError("empty argument in fact line: " + std::string(line),
                       SourcePos{});
    a.args.push_back(Term::constant(
        Symbol::intern(lower(piece.substr(pb, pe - pb + 1)))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return a;
}

// --- flattening --------------------------------------------------------------

namespace {

// Collapses nested compounds inside a term bottom-up: f(.., g(a..), ..)
// becomes f_g(.., a.., ..).
Term flatten_term(const Term& t) {
  if (!t.is_compound()) return t;
  Term cur = t;
  for (Term& a : cur.args) a = flatten_term(a);
  for (;;) {
    size_t at = cur.args.size();
    for (size_t i = 0; i < cur.args.size(); ++i)
      if (cur.args[i].is_compound()) {
        at = i;
        break;
      }
    if (at == cur.args.size()) return cur;
    Term inner = cur.args[at];
    Symbol merged = Symbol::intern(cur.symbol.text() + "_" + inner.symbol.text());
    std::vector<Term> args;
    args.insert(args.end(), cur.args.begin(), cur.args.begin() + at);
    args.insert(args.end(), inner.args.begin(), inner.args.end());
    args.insert(args.end(), cur.args.begin() + at + 1, cur.args.end());
    cur = Term::compound(merged, std::move(args));
  }
}

struct Flattener {
  Program out;
  // (original pred, functor) -> flat name, to detect collisions.
  std::map<std::pair<Symbol, Symbol>, Symbol> seen;

  Atom flatten_atom(const Atom& a) {
    Atom cur = a;
    for (Term& t : cur.args) t = flatten_term(t);
    for (;;) {
      size_t at = cur.args.size();
      for (size_t i = 0; i < cur.args.size(); ++i)
        if (cur.args[i].is_compound()) {
          at = i;
          break;
        }
      if (at == cur.args.size()) return cur;
      Term inner = cur.args[at];
      Symbol flat = Symbol::intern(cur.pred.text() + "_" + inner.symbol.text());
      std::vector<Term> args;
      args.insert(args.end(), cur.args.begin(), cur.args.begin() + at);
      args.insert(args.end(), inner.args.begin(), inner.args.end());
      args.insert(args.end(), cur.args.begin() + at + 1, cur.args.end());
      seen.emplace(std::make_pair(cur.pred, inner.symbol), flat);
      out.flat_origin.emplace(flat, std::make_pair(cur.pred, inner.symbol));
      cur = Atom{flat, std::move(args)};
    }
  }
};

void check_mixed_shapes(const Program& p) {
  // position -> has-compound / has-variable, per predicate; init/next share
  // true's fluent slot and does shares legal's action slot, so they are
  // checked as one family.
  static const Symbol kTrue = Symbol::intern("true");
  static const Symbol kInit = Symbol::intern("init");
  static const Symbol kNext = Symbol::intern("next");
  static const Symbol kLegal = Symbol::intern("legal");
  static const Symbol kDoes = Symbol::intern("does");
  std::map<std::pair<Symbol, size_t>, std::pair<bool, bool>> shape;
  auto family_key = [](const Atom& a) {
    if ((a.pred == kInit || a.pred == kNext) && a.arity() == 1) return kTrue;
    if (a.pred == kDoes && a.arity() == 2) return kLegal;
    return a.pred;
  };
  auto scan = [&](const Atom& a) {
    Symbol key = family_key(a);
    for (size_t i = 0; i < a.args.size(); ++i) {
      auto& s = shape[{key, i}];
      if (a.args[i].is_compound()) s.first = true;
      if (a.args[i].is_variable()) s.second = true;
    }
  };
  for (const Rule& r : p.rules) {
    scan(r.head);
    for (const Literal& l : r.body) scan(l.atom);
  }
  for (const auto& [key, s] : shape)
    if (s.first && s.second)
      throw FlattenError("predicate family of " + key.first.text() +
                         " takes a compound at argument " +
                         std::to_string(key.second + 1) +
                         " in one atom and a variable in another; flattening "
                         "would change its meaning");
}

}  // namespace

Program flatten(const Program& p) {
  check_mixed_shapes(p);
  Flattener f;
  f.out.flat_origin = p.flat_origin;  // idempotence: keep prior record
  for (const Rule& r : p.rules) {
    Rule nr;
    nr.head = f.flatten_atom(r.head);
    for (const Literal& l : r.body)
      nr.body.push_back(Literal{f.flatten_atom(l.atom), l.negated});
    f.out.rules.push_back(std::move(nr));
  }
  // Rebuild signatures; collisions between a flat name and an existing
  // predicate of different arity are hard errors so dataset names stay stable.
  for (const Rule& r : f.out.rules) {
    auto record = [&](const Atom& a) {
      auto [it, inserted] = f.out.predicate_signatures.emplace(a.pred, a.arity());
      if (!inserted && it->second != a.arity())
        throw FlattenError("flattened predicate " + a.pred.text() +
                           " collides with an existing predicate of arity " +
                           std::to_string(it->second));
    };
    record(r.head);
    for (const Literal& l : r.body) record(l.atom);
  }
  return f.out;
}

bool is_flat(const Program& p) {
  auto flat_atom = [](const Atom& a) {
    for (const Term& t : a.args)
      if (t.is_compound()) return false;
    return true;
  };
  for (const Rule& r : p.rules) {
    if (!flat_atom(r.head)) return false;
    for (const Literal& l : r.body)
      if (!flat_atom(l.atom)) return false;
  }
  return true;
}

// --- validation ---------------------------------------------------------------

std::optional<size_t> reserved_arity(Symbol pred) {
  static const std::map<Symbol, size_t> kReserved = {
      {Symbol::intern("role"), 1},    {Symbol::intern("init"), 1},
      {Symbol::intern("true"), 1},    {Symbol::intern("does"), 2},
      {Symbol::intern("next"), 1},    {Symbol::intern("legal"), 2},
      {Symbol::intern("goal"), 2},    {Symbol::intern("terminal"), 0},
      {Symbol::intern("distinct"), 2}};
  auto it = kReserved.find(pred);
  if (it == kReserved.end()) return std::nullopt;
  return it->second;
}

namespace {

void collect_vars(const Term& t, std::set<Symbol>& out) {
  if (t.is_variable()) out.insert(t.symbol);
  for (const Term& a : t.args) collect_vars(a, out);
}

void collect_vars(const Atom& a, std::set<Symbol>& out) {
  for (const Term& t : a.args) collect_vars(t, out);
}

}  // namespace

std::vector<Violation> validate(const Program& p) {
  static const Symbol kTrue = Symbol::intern("true");
  static const Symbol kDoes = Symbol::intern("does");
  static const Symbol kDistinct = Symbol::intern("distinct");
  std::vector<Violation> out;

  for (const auto& [pred, arity] : p.predicate_signatures) {
    auto want = reserved_arity(pred);
    if (want && *want != arity)
      out.push_back({"reserved predicate " + pred.text() + " must have arity " +
                         std::to_string(*want) + ", found " +
                         std::to_string(arity),
                     -1});
  }

  for (size_t i = 0; i < p.rules.size(); ++i) {
    const Rule& r = p.rules[i];
    int idx = static_cast<int>(i);

    if (!r.is_fact() && (r.head.pred == kTrue || r.head.pred == kDoes))
      out.push_back({"rule may not define reserved predicate " +
                         r.head.pred.text() + " (it is supplied as facts)",
                     idx});
    if (r.is_fact() && (r.head.pred == kTrue || r.head.pred == kDoes) &&
        !r.head.is_ground())
      out.push_back({"non-ground fact for reserved predicate " +
                         r.head.pred.text(),
                     idx});

    // Safety: head vars, negated-literal vars and distinct args must occur
    // in some positive, non-distinct body literal.
    std::set<Symbol> positive;
    for (const Literal& l : r.body)
      if (!l.negated && l.atom.pred != kDistinct) collect_vars(l.atom, positive);

    auto check = [&](const std::set<Symbol>& vars, const std::string& where) {
      for (Symbol v : vars)
        if (!positive.count(v))
          out.push_back({"unsafe rule: variable ?" + v.text() + " in " + where +
                             " does not occur in a positive body literal",
                         idx});
    };
    std::set<Symbol> head_vars;
    collect_vars(r.head, head_vars);
    check(head_vars, "the head " + unparse(r.head));
    for (const Literal& l : r.body) {
      if (l.negated) {
        std::set<Symbol> vs;
        collect_vars(l.atom, vs);
        check(vs, "negated literal " + unparse(l));
      } else if (l.atom.pred == kDistinct) {
        std::set<Symbol> vs;
        collect_vars(l.atom, vs);
        check(vs, "distinct literal " + unparse(l));
      }
    }
    if (!r.is_fact() && r.head.pred == kDistinct)
      out.push_back({"distinct/2 is a built-in and may not be defined", idx});
  }
  return out;
}

}  // namespace iggp
