#include "iggp/players.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <chrono>
#include <cmath>
#include <memory>
#include <queue>
#include <set>
#include <unordered_set>

namespace iggp {

size_t Rng::below(size_t n) {
  assert(n > 0);
  uint64_t limit = ~uint64_t{0} - ~uint64_t{0} % n;
  for (;;) {
    uint64_t v = engine_();
    if (v < limit) return static_cast<size_t>(v % n);
  }
}

double Rng::unit() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  // splitmix64 finalizer over the combined value
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

JointMove random_move(const std::vector<std::vector<Action>>& legal, Rng& rng) {
  JointMove joint;
  joint.actions.reserve(legal.size());
  for (const auto& actions : legal) {
    if (actions.empty()) throw Error("random_move: empty legal set for a role");
    joint.actions.push_back(actions[rng.below(actions.size())]);
  }
  return joint;
}

namespace {

std::optional<long> symbol_int(Symbol s) {
  const std::string& t = s.text();
  long value = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || p != t.data() + t.size()) return std::nullopt;
  return value;
}

using Clock = std::chrono::steady_clock;

double elapsed_millis(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Cartesian product of the per-role legal sets; the inputs are sorted, so
// the odometer order is the canonical joint-move order.
std::vector<JointMove> joint_moves(const std::vector<std::vector<Action>>& legal) {
  std::vector<JointMove> out;
  size_t total = 1;
  for (const auto& actions : legal) {
    if (actions.empty()) return {};
    total *= actions.size();
  }
  out.reserve(total);
  std::vector<size_t> idx(legal.size(), 0);
  for (;;) {
    JointMove jm;
    jm.actions.reserve(legal.size());
    for (size_t i = 0; i < legal.size(); ++i) jm.actions.push_back(legal[i][idx[i]]);
    out.push_back(std::move(jm));
    size_t k = legal.size();
    while (k > 0) {
      --k;
      if (++idx[k] < legal[k].size()) break;
      idx[k] = 0;
      if (k == 0) return out;
    }
  }
}

}  // namespace

// --- heuristic derivation -----------------------------------------------------

std::vector<Heuristic> derive_heuristics(const Machine& machine,
                                         int n_simulations, double threshold,
                                         uint64_t seed, int move_cap) {
  if (n_simulations < 2) throw Error("derive_heuristics needs at least 2 simulations");
  const auto& roles = machine.roles();

  struct SimData {
    // (pred, value_pos, role_index or -1) -> sum and count of observed values
    std::map<std::tuple<Symbol, int, int>, std::pair<double, size_t>> sums;
    std::vector<int> final_goals;
  };
  std::vector<SimData> sims;
  // (pred,pos) -> all observed values integer?  (pred,pos) -> all role names?
  std::map<std::pair<Symbol, int>, bool> numeric, rolelike;
  std::map<std::pair<Symbol, int>, std::pair<double, double>> ranges;

  EvalScratch scratch;
  for (int s = 0; s < n_simulations; ++s) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(s)));
    GameState state = machine.initial_state();
    Machine::StateInfo info = machine.analyze(state, &scratch);
    SimData sim;

    auto observe = [&](const GameState& st) {
      for (const GroundAtom& a : st.fluents) {
        for (size_t pos = 0; pos < a.args.size(); ++pos) {
          auto key = std::make_pair(a.pred, static_cast<int>(pos));
          auto value = symbol_int(a.args[pos]);
          auto [nit, fresh] = numeric.emplace(key, value.has_value());
          if (!fresh) nit->second = nit->second && value.has_value();
          bool is_role = machine.role_index(a.args[pos]) >= 0;
          auto [rit, rfresh] = rolelike.emplace(key, is_role);
          if (!rfresh) rit->second = rit->second && is_role;
          if (value) {
            auto [rg, fresh2] = ranges.emplace(
                key, std::make_pair(double(*value), double(*value)));
            if (!fresh2) {
              rg->second.first = std::min(rg->second.first, double(*value));
              rg->second.second = std::max(rg->second.second, double(*value));
            }
          }
        }
        // accumulate per possible value position, keyed by the role argument
        // when one exists in this atom
        for (size_t pos = 0; pos < a.args.size(); ++pos) {
          auto value = symbol_int(a.args[pos]);
          if (!value) continue;
          int role_of_atom = -1;
          for (size_t rp = 0; rp < a.args.size(); ++rp) {
            if (rp == pos) continue;
            int ri = machine.role_index(a.args[rp]);
            if (ri >= 0) {
              role_of_atom = ri;
              break;
            }
          }
          auto key = std::make_tuple(a.pred, static_cast<int>(pos), role_of_atom);
          auto& slot = sim.sums[key];
          slot.first += static_cast<double>(*value);
          slot.second += 1;
        }
      }
    };

    observe(state);
    while (!info.terminal && state.step < move_cap) {
      JointMove jm = random_move(info.legal, rng);
      state = machine.next_state(state, jm, &info, &scratch);
      info = machine.analyze(state, &scratch);
      observe(state);
    }
    sim.final_goals = info.goals;
    sims.push_back(std::move(sim));
  }

  // Candidate positions: numeric everywhere they were observed.
  std::vector<Heuristic> out;
  std::set<std::pair<Symbol, int>> candidate_positions;
  for (const auto& [key, is_num] : numeric)
    if (is_num) candidate_positions.insert(key);

  auto pearson = [](const std::vector<double>& xs, const std::vector<double>& ys) {
    double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
    }
    double mx = sx / n, my = sy / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      syy += (ys[i] - my) * (ys[i] - my);
      sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx <= 0 || syy <= 0) return 0.0;  // zero variance: undefined -> 0
    return sxy / std::sqrt(sxx * syy);
  };

  for (const auto& [pred, pos] : candidate_positions) {
    // Does this predicate carry a role at some other position?
    int role_pos = -1;
    for (const auto& [key, is_role] : rolelike)
      if (key.first == pred && key.second != pos && is_role) {
        role_pos = key.second;
        break;
      }
    for (size_t ri = 0; ri < roles.size(); ++ri) {
      std::vector<double> xs, ys;
      for (const SimData& sim : sims) {
        int atom_role = role_pos >= 0 ? static_cast<int>(ri) : -1;
        auto it = sim.sums.find(std::make_tuple(pred, pos, atom_role));
        double mean = 0.0;
        if (it != sim.sums.end() && it->second.second > 0)
          mean = it->second.first / static_cast<double>(it->second.second);
        xs.push_back(mean);
        ys.push_back(ri < sim.final_goals.size()
                         ? static_cast<double>(sim.final_goals[ri])
                         : 0.0);
      }
      Heuristic h;
      h.fluent_pred = pred;
      h.value_pos = pos;
      h.role_pos = role_pos;
      h.role = roles[ri].name;
      h.correlation = pearson(xs, ys);
      h.enabled = std::abs(h.correlation) >= threshold;
      auto rg = ranges.find(std::make_pair(pred, pos));
      if (rg != ranges.end()) {
        h.min_value = rg->second.first;
        h.max_value = rg->second.second;
      }
      if (h.max_value <= h.min_value) h.enabled = false;
      out.push_back(h);
    }
  }
  return out;
}

// --- MCTS ------------------------------------------------------------------------

namespace {

struct MctsNode {
  GameState state;
  Machine::StateInfo info;
  std::vector<JointMove> untried;
  std::vector<std::pair<JointMove, std::unique_ptr<MctsNode>>> children;
  uint64_t visits = 0;
  uint64_t sims_here = 0;
  std::vector<double> reward;  // per role, in units of goal/100
  int perspective = 0;         // role whose choice varies here

#ifndef NDEBUG
  void check_invariants() const {
    uint64_t child_visits = 0;
    for (const auto& [jm, c] : children) child_visits += c->visits;
    assert(visits == child_visits + sims_here);
    for (double r : reward) assert(r >= -1e-9 && r <= double(visits) + 1e-9);
  }
#endif
};

double heuristic_value(const Machine& machine, const GameState& state,
                       Symbol role, const std::vector<Heuristic>& heuristics) {
  double total = 0.0;
  for (const Heuristic& h : heuristics) {
    if (!h.enabled || h.role != role) continue;
    double sum = 0.0;
    size_t count = 0;
    for (const GroundAtom& a : state.fluents) {
      if (a.pred != h.fluent_pred) continue;
      if (h.role_pos >= 0 &&
          (static_cast<size_t>(h.role_pos) >= a.args.size() ||
           a.args[h.role_pos] != role))
        continue;
      auto v = symbol_int(a.args[h.value_pos]);
      if (!v) continue;
      sum += static_cast<double>(*v);
      ++count;
    }
    if (count == 0) continue;
    double mean = sum / static_cast<double>(count);
    double norm = (mean - h.min_value) / (h.max_value - h.min_value);
    norm = std::clamp(norm, 0.0, 1.0);
    total += h.correlation * norm;
  }
  return total;
}

}  // namespace

MctsResult mcts_search(const Machine& machine, const GameState& state,
                       int role_index, const MctsConfig& config,
                       const std::vector<Heuristic>& heuristics) {
  if (config.budget.max_playouts == SearchBudget::kUnlimited &&
      config.budget.max_millis == SearchBudget::kUnlimited)
    throw Error("mcts_search: the budget must bound playouts or time");
  const size_t n_roles = machine.roles().size();
  EvalScratch scratch;
  Machine::StateInfo root_info = machine.analyze(state, &scratch);
  if (root_info.terminal) throw Error("mcts_search: state is terminal");

  MctsResult result;
  const auto& own_legal = root_info.legal[role_index];
  if (own_legal.empty()) throw Error("mcts_search: no legal action");
  if (own_legal.size() == 1) {  // forced move, regardless of budget
    result.action = own_legal[0];
    result.action_visits[to_string(own_legal[0])] = 0;
    return result;
  }

  Rng rng(config.budget.rng_seed);
  if (config.budget.zero()) {
    result.zero_budget_fallback = true;
    result.action = own_legal[rng.below(own_legal.size())];
    return result;
  }

  auto make_node = [&](GameState s, Machine::StateInfo info) {
    auto node = std::make_unique<MctsNode>();
    node->state = std::move(s);
    node->info = std::move(info);
    node->reward.assign(n_roles, 0.0);
    node->perspective = role_index;
    if (!node->info.terminal) {
      node->untried = joint_moves(node->info.legal);
      int varying = -1;
      int varying_count = 0;
      for (size_t i = 0; i < n_roles; ++i)
        if (node->info.legal[i].size() > 1) {
          varying = static_cast<int>(i);
          ++varying_count;
        }
      if (varying_count == 1) node->perspective = varying;
    }
    return node;
  };

  MctsNode root;
  root.state = state;
  root.info = root_info;
  root.reward.assign(n_roles, 0.0);
  root.perspective = role_index;
  {
    int varying = -1, varying_count = 0;
    for (size_t i = 0; i < n_roles; ++i)
      if (root.info.legal[i].size() > 1) {
        varying = static_cast<int>(i);
        ++varying_count;
      }
    if (varying_count == 1) root.perspective = varying;
    root.untried = joint_moves(root.info.legal);
  }

  const auto start_time = Clock::now();
  std::vector<MctsNode*> path;
  const bool use_heuristics = !heuristics.empty();

  while (result.playouts < config.budget.max_playouts) {
    if (config.budget.max_millis != SearchBudget::kUnlimited &&
        elapsed_millis(start_time) >= double(config.budget.max_millis))
      break;

    path.clear();
    path.push_back(&root);
    MctsNode* cur = &root;
    std::vector<int> playout_goals;

    for (;;) {
      if (cur->info.terminal) {
        playout_goals = cur->info.goals;
        cur->sims_here += 1;
        break;
      }
      if (cur->state.step >= config.move_cap) {
        playout_goals = cur->info.goals;  // truncated: score current goals
        cur->sims_here += 1;
        break;
      }
      if (!cur->untried.empty()) {
        JointMove jm = cur->untried.front();
        cur->untried.erase(cur->untried.begin());
        GameState child_state =
            machine.next_state(cur->state, jm, &cur->info, &scratch);
        Machine::StateInfo child_info = machine.analyze(child_state, &scratch);
        auto child = make_node(std::move(child_state), std::move(child_info));
        MctsNode* child_ptr = child.get();
        cur->children.emplace_back(std::move(jm), std::move(child));
        path.push_back(child_ptr);

        // Simulate uniformly at random from the new node.
        GameState sim_state = child_ptr->state;
        Machine::StateInfo sim_info = child_ptr->info;
        while (!sim_info.terminal && sim_state.step < config.move_cap) {
          JointMove move = random_move(sim_info.legal, rng);
          sim_state = machine.next_state(sim_state, move, &sim_info, &scratch);
          sim_info = machine.analyze(sim_state, &scratch);
        }
        playout_goals = sim_info.goals;
        child_ptr->sims_here += 1;
        break;
      }
      // Fully expanded: UCT descent from the node perspective.
      const int persp = cur->perspective;
      Symbol persp_role = machine.roles()[persp].name;
      double log_visits = std::log(std::max<uint64_t>(cur->visits, 1));
      MctsNode* best = nullptr;
      double best_score = -1e300;
      for (const auto& [jm, child] : cur->children) {
        double exploit = child->reward[persp] / double(child->visits);
        double explore =
            config.exploration * std::sqrt(log_visits / double(child->visits));
        double score = exploit + explore;
        if (use_heuristics)
          score += heuristic_value(machine, child->state, persp_role, heuristics) *
                   config.heuristic_weight / (1.0 + double(child->visits));
        if (score > best_score) {
          best_score = score;
          best = child.get();
        }
      }
      path.push_back(best);
      cur = best;
    }

    for (MctsNode* node : path) {
      node->visits += 1;
      for (size_t r = 0; r < n_roles && r < playout_goals.size(); ++r)
        node->reward[r] += playout_goals[r] / 100.0;
#ifndef NDEBUG
      node->check_invariants();
#endif
    }
    result.playouts += 1;
  }

  // Most-visited root child; ties go to the canonically lowest action.
  const MctsNode* best_child = nullptr;
  const JointMove* best_joint = nullptr;
  for (const auto& [jm, child] : root.children) {
    std::string key = to_string(jm.actions[role_index]);
    result.action_visits[key] += child->visits;
    bool better = false;
    if (!best_child) {
      better = true;
    } else if (child->visits != best_child->visits) {
      better = child->visits > best_child->visits;
    } else {
      const Action& a = jm.actions[role_index];
      const Action& b = best_joint->actions[role_index];
      better = a < b || (a == b && jm < *best_joint);
    }
    if (better) {
      best_child = child.get();
      best_joint = &jm;
    }
  }
  if (!best_joint) {
    // Budget too small to expand anything: fall back to a random action.
    result.zero_budget_fallback = true;
    result.action = own_legal[rng.below(own_legal.size())];
    return result;
  }
  result.action = best_joint->actions[role_index];
  return result;
}

Action mcts_choose(const Machine& machine, const GameState& state,
                   int role_index, const MctsConfig& config,
                   const std::vector<Heuristic>& heuristics) {
  return mcts_search(machine, state, role_index, config, heuristics).action;
}

// --- A* -----------------------------------------------------------------------------

FactSet astar_target(const Machine& machine) {
  const Symbol kGoal = Symbol::intern("goal");
  const Symbol k100 = Symbol::intern("100");
  for (const Rule& r : machine.flat_program().rules) {
    if (r.head.pred != kGoal || r.head.arity() != 2) continue;
    if (!(r.head.args[1].is_constant() && r.head.args[1].symbol == k100)) continue;
    std::vector<GroundAtom> target;
    bool all_ground = true;
    for (const Literal& l : r.body) {
      if (l.negated) continue;
      const std::string& t = l.atom.pred.text();
      bool true_family = t == "true" || t.rfind("true_", 0) == 0;
      if (!true_family) continue;
      if (!l.atom.is_ground()) {
        all_ground = false;
        break;
      }
      target.push_back(to_ground(l.atom));
    }
    if (all_ground && !target.empty()) return FactSet::from(std::move(target));
  }
  return FactSet{};
}

std::optional<std::vector<Action>> astar_solve(const Machine& machine,
                                               const GameState& start,
                                               const SearchBudget& budget) {
  if (machine.roles().size() != 1)
    throw Error("astar_solve supports single-role games only");
  FactSet target = astar_target(machine);
  if (target.empty())
    throw Error("astar_solve: no ground goal-100 target derivable");

  auto hamming = [&target](const GameState& s) {
    int missing = 0;
    for (const GroundAtom& a : target)
      if (!s.fluents.contains(a)) ++missing;
    return missing;
  };

  struct NodeRec {
    GameState state;
    int parent = -1;
    Action action;
    int g = 0;
  };
  struct OpenEntry {
    int f;
    int g;
    uint64_t order;
    int node;
    bool operator>(const OpenEntry& o) const {
      if (f != o.f) return f > o.f;
      if (g != o.g) return g < o.g;  // prefer deeper nodes at equal f
      return order > o.order;
    }
  };

  std::vector<NodeRec> nodes;
  std::priority_queue<OpenEntry, std::vector<OpenEntry>, std::greater<>> open;
  std::unordered_set<GameState> closed;
  EvalScratch scratch;

  nodes.push_back(NodeRec{start, -1, Action{}, 0});
  open.push(OpenEntry{hamming(start), 0, 0, 0});
  uint64_t order = 1;
  uint64_t expansions = 0;
  const auto start_time = Clock::now();

  while (!open.empty()) {
    if (expansions >= budget.max_playouts) return std::nullopt;
    if (budget.max_millis != SearchBudget::kUnlimited &&
        elapsed_millis(start_time) >= double(budget.max_millis))
      return std::nullopt;

    OpenEntry top = open.top();
    open.pop();
    const GameState cur_state = nodes[top.node].state;
    if (closed.count(cur_state)) continue;
    closed.insert(cur_state);
    ++expansions;

    Machine::StateInfo info = machine.analyze(cur_state, &scratch);
    if (!info.goals.empty() && info.goals[0] == 100) {
      std::vector<Action> plan;
      for (int at = top.node; nodes[at].parent >= 0; at = nodes[at].parent)
        plan.push_back(nodes[at].action);
      std::reverse(plan.begin(), plan.end());
      return plan;
    }
    if (info.terminal) continue;  // dead end short of the goal

    for (const Action& a : info.legal[0]) {
      JointMove jm{{a}};
      GameState next = machine.next_state(cur_state, jm, &info, &scratch);
      if (closed.count(next)) continue;
      int g = nodes[top.node].g + 1;
      nodes.push_back(NodeRec{next, top.node, a, g});
      open.push(OpenEntry{g + hamming(nodes.back().state), g, order++,
                          static_cast<int>(nodes.size() - 1)});
    }
  }
  return std::nullopt;  // space exhausted: unreachable goal
}

}  // namespace iggp
