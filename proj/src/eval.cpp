#include "iggp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace iggp {

EvalReport evaluate_hypothesis(const Hypothesis& h, const IggpTask& test_task) {
  if (test_task.triples.empty())
    throw Error("evaluate_hypothesis: empty test set");

  std::optional<PreparedProgram> prog;
  if (h.learned && !h.rules.empty()) {
    Program p;
    p.rules = h.rules;
    prog.emplace(std::move(p));
  }

  EvalReport report;
  EvalScratch scratch;
  for (const InductionTriple& t : test_task.triples) {
    std::optional<FactSet> model;
    auto classified_positive = [&](const GroundAtom& e) {
      if (!h.learned) return true;  // default hypothesis: everything is true
      if (h.default_preds.count(e.pred)) return true;
      if (t.background.contains(e)) return true;
      if (!prog) return false;
      if (!model) model = prog->evaluate(t.background, scratch);
      return model->contains(e);
    };
    for (const GroundAtom& e : t.positives) {
      ++report.p;
      if (classified_positive(e)) ++report.tp;
    }
    for (const GroundAtom& e : t.negatives) {
      ++report.n;
      if (!classified_positive(e)) ++report.tn;
    }
  }

  if (report.p == 0 && report.n == 0)
    throw Error("evaluate_hypothesis: no test examples");
  if (report.n == 0)
    report.balanced_accuracy = 100.0 * double(report.tp) / double(report.p);
  else if (report.p == 0)
    report.balanced_accuracy = 100.0 * double(report.tn) / double(report.n);
  else
    report.balanced_accuracy = 100.0 *
                               (double(report.tp) / double(report.p) +
                                double(report.tn) / double(report.n)) /
                               2.0;
  report.perfectly_solved = report.tp == report.p && report.tn == report.n;
  return report;
}

Split split_train_test(const std::vector<MatchTrace>& traces, size_t n_train,
                       size_t n_test, uint64_t seed) {
  if (traces.size() < n_train + n_test)
    throw Error("split_train_test: need " + std::to_string(n_train + n_test) +
                " traces, have " + std::to_string(traces.size()));
  std::vector<size_t> order(traces.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);
  Split split;
  for (size_t i = 0; i < n_train; ++i) split.train.push_back(traces[order[i]]);
  for (size_t i = 0; i < n_test; ++i)
    split.test.push_back(traces[order[n_train + i]]);
  return split;
}

namespace {

std::set<std::pair<size_t, std::string>> example_keys(const IggpTask& task) {
  std::set<std::pair<size_t, std::string>> keys;
  for (const InductionTriple& t : task.triples) {
    size_t bh = hash_value(t.background);
    for (const GroundAtom& e : t.positives) keys.emplace(bh, to_string(e));
  }
  return keys;
}

}  // namespace

size_t example_overlap(const IggpTask& train, const IggpTask& test) {
  auto train_keys = example_keys(train);
  size_t overlap = 0;
  for (const InductionTriple& t : test.triples) {
    size_t bh = hash_value(t.background);
    for (const GroundAtom& e : t.positives)
      if (train_keys.count({bh, to_string(e)})) ++overlap;
  }
  return overlap;
}

size_t drop_overlapping_positives(const IggpTask& train, IggpTask& test) {
  auto train_keys = example_keys(train);
  size_t dropped = 0;
  for (InductionTriple& t : test.triples) {
    size_t bh = hash_value(t.background);
    std::vector<GroundAtom> keep;
    for (const GroundAtom& e : t.positives) {
      if (train_keys.count({bh, to_string(e)}))
        ++dropped;
      else
        keep.push_back(e);
    }
    if (dropped) t.positives = FactSet::from(std::move(keep));
  }
  return dropped;
}

std::pair<double, double> chi_squared_counts(int64_t correct_a, int64_t wrong_a,
                                             int64_t correct_b,
                                             int64_t wrong_b) {
  double a = double(correct_a), b = double(wrong_a);
  double c = double(correct_b), d = double(wrong_b);
  double total = a + b + c + d;
  double row_a = a + b, row_b = c + d;
  double col_correct = a + c, col_wrong = b + d;
  if (row_a <= 0 || row_b <= 0 || col_correct <= 0 || col_wrong <= 0)
    throw Error("chi_squared: zero marginal, test undefined");
  double numer = a * d - b * c;
  double statistic = total * numer * numer / (row_a * row_b * col_correct * col_wrong);
  // one degree of freedom: survival function via the error function
  double p_value = std::erfc(std::sqrt(statistic / 2.0));
  return {statistic, p_value};
}

std::pair<double, double> chi_squared(const EvalReport& a, const EvalReport& b) {
  if (a.p + a.n <= 0 || b.p + b.n <= 0)
    throw Error("chi_squared: empty report");
  int64_t correct_a = a.tp + a.tn, wrong_a = (a.p + a.n) - (a.tp + a.tn);
  int64_t correct_b = b.tp + b.tn, wrong_b = (b.p + b.n) - (b.tp + b.tn);
  return chi_squared_counts(correct_a, wrong_a, correct_b, wrong_b);
}

// --- experiments --------------------------------------------------------------------

ExperimentConfig parse_experiment_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error("cannot read " + file.string());
  ExperimentConfig config;
  config.train_sources.clear();
  config.train_mixed = false;
  bool sources_set = false;
  std::string line;
  while (std::getline(in, line)) {
    size_t comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    std::string v;
    if (key == "game") {
      while (ls >> v) config.games.push_back(v);
    } else if (key == "targets") {
      config.targets.clear();
      while (ls >> v) config.targets.push_back(parse_target(v));
    } else if (key == "include_terminal") {
      int b = 0;
      ls >> b;
      config.include_terminal = b != 0;
    } else if (key == "train_sources") {
      sources_set = true;
      while (ls >> v) {
        if (v == "mixed") config.train_mixed = true;
        else if (v == "random") config.train_sources.push_back(Provenance::Random);
        else if (v == "intelligent")
          config.train_sources.push_back(Provenance::Intelligent);
        else throw Error("unknown train source: " + v);
      }
    } else if (key == "test_sources") {
      config.test_sources.clear();
      while (ls >> v) {
        if (v == "random") config.test_sources.push_back(Provenance::Random);
        else if (v == "intelligent")
          config.test_sources.push_back(Provenance::Intelligent);
        else throw Error("unknown test source: " + v);
      }
    } else if (key == "learners") {
      config.learners.clear();
      while (ls >> v) config.learners.push_back(parse_learner(v));
    } else if (key == "train_traces") ls >> config.train_traces;
    else if (key == "test_traces") ls >> config.test_traces;
    else if (key == "e2_trace_counts") {
      config.e2_trace_counts.clear();
      int c;
      while (ls >> c) config.e2_trace_counts.push_back(c);
    } else if (key == "mode") {
      ls >> v;
      config.e2_mode = v == "e2";
    } else if (key == "learn_millis") ls >> config.learn_millis;
    else if (key == "mcts_playouts") ls >> config.mcts_playouts;
    else if (key == "move_cap") ls >> config.move_cap;
    else if (key == "seed") ls >> config.seed;
    else if (key == "jobs") ls >> config.jobs;
    else throw Error("unknown experiment config key: " + key);
  }
  if (!sources_set) {
    config.train_sources = {Provenance::Random, Provenance::Intelligent};
    config.train_mixed = true;
  }
  if (config.games.empty()) throw Error("experiment config names no games");
  return config;
}

namespace {

void parallel_for(size_t count, int jobs, const std::function<void(size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  int n = std::min<int>(jobs, static_cast<int>(count));
  for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

struct GameData {
  std::string path;
  std::unique_ptr<Machine> machine;
  std::vector<MatchTrace> random_train, intelligent_train;
  std::vector<MatchTrace> random_test, intelligent_test;
  std::map<TargetKind, IggpTask> test_tasks_random, test_tasks_intelligent;
};

std::vector<MatchTrace> make_traces(const Machine& machine, Provenance prov,
                                    int count, const ExperimentConfig& config,
                                    uint64_t stream) {
  std::vector<MatchTrace> traces;
  for (int i = 0; i < count; ++i) {
    MatchConfig mc;
    mc.move_cap = config.move_cap;
    mc.seed = mix_seed(config.seed, stream * 7919 + i);
    mc.clock_millis = SearchBudget::kUnlimited;
    PlayerSpec spec;
    spec.kind = prov == Provenance::Random ? PlayerSpec::Kind::Random
                                           : PlayerSpec::Kind::Intelligent;
    spec.mcts_playouts = config.mcts_playouts;
    std::vector<PlayerSpec> players(machine.roles().size(), spec);
    traces.push_back(run_match(machine, players, mc));
  }
  return traces;
}

std::vector<MatchTrace> compose_training(const GameData& game,
                                         const std::string& source, int count) {
  std::vector<MatchTrace> out;
  if (source == "random") {
    out.assign(game.random_train.begin(), game.random_train.begin() + count);
  } else if (source == "intelligent") {
    out.assign(game.intelligent_train.begin(),
               game.intelligent_train.begin() + count);
  } else {  // mixed: 50/50, interleaved
    int half = count / 2;
    for (int i = 0; i < half; ++i) {
      out.push_back(game.random_train[i]);
      out.push_back(game.intelligent_train[i]);
    }
    if (count % 2) out.push_back(game.random_train[half]);
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::ostream* progress) {
  ExperimentResult result;
  result.e2_mode = config.e2_mode;

  int max_train = config.train_traces;
  if (config.e2_mode)
    for (int c : config.e2_trace_counts) max_train = std::max(max_train, c);
  const int per_source_train = config.e2_mode ? (max_train + 1) / 2 : max_train;

  // Per game: generate the trace pools and the fixed test tasks.
  std::vector<GameData> games(config.games.size());
  for (size_t gi = 0; gi < config.games.size(); ++gi) {
    GameData& game = games[gi];
    game.path = config.games[gi];
    game.machine = std::make_unique<Machine>(Machine::from_file(game.path));
    if (progress)
      *progress << "generating traces for " << game.machine->game_id() << "\n";
    game.random_train = make_traces(*game.machine, Provenance::Random,
                                    per_source_train, config, gi * 10 + 1);
    game.intelligent_train = make_traces(*game.machine, Provenance::Intelligent,
                                         per_source_train, config, gi * 10 + 2);
    game.random_test = make_traces(*game.machine, Provenance::Random,
                                   config.test_traces, config, gi * 10 + 3);
    game.intelligent_test = make_traces(*game.machine, Provenance::Intelligent,
                                        config.test_traces, config, gi * 10 + 4);
    std::vector<TargetKind> targets = config.targets;
    if (config.include_terminal &&
        std::find(targets.begin(), targets.end(), TargetKind::Terminal) ==
            targets.end())
      targets.push_back(TargetKind::Terminal);
    for (TargetKind t : targets) {
      game.test_tasks_random[t] = build_task(*game.machine, game.random_test, t);
      game.test_tasks_intelligent[t] =
          build_task(*game.machine, game.intelligent_test, t);
    }
  }

  std::vector<TargetKind> targets = config.targets;
  if (config.include_terminal &&
      std::find(targets.begin(), targets.end(), TargetKind::Terminal) ==
          targets.end())
    targets.push_back(TargetKind::Terminal);

  std::vector<std::string> train_sources;
  if (config.e2_mode) {
    train_sources = {"mixed"};
  } else {
    for (Provenance p : config.train_sources) train_sources.push_back(to_string(p));
    if (config.train_mixed) train_sources.push_back("mixed");
  }
  std::vector<int> trace_counts =
      config.e2_mode ? config.e2_trace_counts : std::vector<int>{config.train_traces};

  // Flatten the grid into independent cells: one learning run each, then
  // evaluated against every test source.
  struct LearnCell {
    size_t game;
    TargetKind target;
    std::string train_source;
    int trace_count;
    LearnerKind learner;
  };
  std::vector<LearnCell> cells;
  for (size_t gi = 0; gi < games.size(); ++gi)
    for (TargetKind target : targets)
      for (const std::string& source : train_sources)
        for (int count : trace_counts)
          for (LearnerKind learner : config.learners)
            cells.push_back(LearnCell{gi, target, source, count, learner});

  std::vector<std::vector<CellResult>> cell_results(cells.size());
  std::mutex progress_mutex;
  parallel_for(cells.size(), config.jobs, [&](size_t ci) {
    const LearnCell& cell = cells[ci];
    const GameData& game = games[cell.game];
    std::vector<CellResult> local;
    try {
      std::vector<MatchTrace> train =
          compose_training(game, cell.train_source, cell.trace_count);
      IggpTask train_task = build_task(*game.machine, train, cell.target);
      LearnBudget budget;
      budget.millis = config.learn_millis;
      Hypothesis h = learn_task(train_task, cell.learner, budget);
      for (Provenance test_source : config.test_sources) {
        CellResult r;
        r.game = game.machine->game_id();
        r.target = cell.target;
        r.learner = cell.learner;
        r.train_source = cell.train_source;
        r.test_source = to_string(test_source);
        r.trace_count = cell.trace_count;
        r.learned = h.learned;
        const auto& tasks = test_source == Provenance::Random
                                ? game.test_tasks_random
                                : game.test_tasks_intelligent;
        r.report = evaluate_hypothesis(h, tasks.at(cell.target));
        local.push_back(std::move(r));
      }
    } catch (const std::exception& e) {
      CellResult r;
      r.game = game.machine->game_id();
      r.target = cell.target;
      r.learner = cell.learner;
      r.train_source = cell.train_source;
      r.trace_count = cell.trace_count;
      r.error = e.what();
      local.push_back(std::move(r));
    }
    cell_results[ci] = std::move(local);
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      *progress << "cell " << (ci + 1) << "/" << cells.size() << " done\n";
    }
  });

  for (auto& local : cell_results)
    for (CellResult& r : local) result.cells.push_back(std::move(r));
  return result;
}

std::string ExperimentResult::render_table() const {
  // aggregate keyed by (learner, train or count, test)
  struct Agg {
    double ba_sum = 0;
    int count = 0;
    int solved = 0;
    int failed = 0;
  };
  std::map<std::string, std::map<std::pair<std::string, std::string>, Agg>> grid;
  std::set<std::pair<std::string, std::string>> columns;
  for (const CellResult& c : cells) {
    std::string condition =
        e2_mode ? std::to_string(c.trace_count) : c.train_source;
    auto key = std::make_pair(condition, c.test_source);
    columns.insert(key);
    Agg& a = grid[to_string(c.learner)][key];
    if (!c.error.empty()) {
      ++a.failed;
      continue;
    }
    a.ba_sum += c.report.balanced_accuracy;
    ++a.count;
    if (c.report.perfectly_solved) ++a.solved;
  }

  std::ostringstream out;
  const char* kind = e2_mode ? "traces" : "train";
  out << std::left << std::setw(10) << "learner";
  for (const auto& [cond, test] : columns)
    out << std::setw(22) << (std::string(kind) + "=" + cond + "/test=" + test);
  out << "\n";
  for (const auto& [learner, row] : grid) {
    out << std::left << std::setw(10) << learner;
    for (const auto& col : columns) {
      auto it = row.find(col);
      std::ostringstream cell;
      if (it == row.end() || (it->second.count == 0 && it->second.failed == 0)) {
        cell << "-";
      } else if (it->second.count == 0) {
        cell << "failed";
      } else {
        cell << std::fixed << std::setprecision(1)
             << (it->second.ba_sum / it->second.count) << " ba, "
             << it->second.solved << " solved";
        if (it->second.failed) cell << " (" << it->second.failed << " failed)";
      }
      out << std::setw(22) << cell.str();
    }
    out << "\n";
  }
  return out.str();
}

void write_experiment_report(const ExperimentResult& result,
                             const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream table(dir / "report.txt", std::ios::binary);
    if (!table) throw Error("cannot write " + (dir / "report.txt").string());
    table << result.render_table();
  }
  // one aggregate stream plus per-(game,target) files, so names encode the
  // condition they hold
  std::map<std::string, std::ofstream> per_cell;
  std::ofstream records(dir / "records.jsonl", std::ios::binary);
  if (!records) throw Error("cannot write " + (dir / "records.jsonl").string());
  for (const CellResult& c : result.cells) {
    nlohmann::json j;
    j["game"] = c.game;
    j["target"] = to_string(c.target);
    j["learner"] = to_string(c.learner);
    j["train_source"] = c.train_source;
    j["test_source"] = c.test_source;
    j["trace_count"] = c.trace_count;
    if (c.error.empty()) {
      j["learned"] = c.learned;
      j["p"] = c.report.p;
      j["n"] = c.report.n;
      j["tp"] = c.report.tp;
      j["tn"] = c.report.tn;
      j["balanced_accuracy"] = c.report.balanced_accuracy;
      j["perfectly_solved"] = c.report.perfectly_solved;
    } else {
      j["error"] = c.error;
    }
    records << j.dump() << "\n";
    std::string name = c.game + "_" + to_string(c.target) + ".jsonl";
    auto it = per_cell.find(name);
    if (it == per_cell.end())
      it = per_cell.emplace(name, std::ofstream(dir / name, std::ios::binary))
               .first;
    it->second << j.dump() << "\n";
  }
}

}  // namespace iggp
