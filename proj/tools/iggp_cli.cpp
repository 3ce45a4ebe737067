// Command-line entry point: validate games, play matches, build induction
// tasks, learn, evaluate, and run experiment grids.
#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "iggp/eval.hpp"

namespace fs = std::filesystem;
using namespace iggp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFinding = 1;
constexpr int kExitUsage = 2;

int cmd_validate(const std::string& game_path) {
  Program program = parse_program_file(game_path);
  Program flat = flatten(program);
  std::vector<Violation> findings = validate(flat);
  for (const Violation& v : findings) {
    std::cout << "finding";
    if (v.rule_index >= 0) std::cout << " (rule " << v.rule_index << ")";
    std::cout << ": " << v.message << "\n";
  }
  if (!findings.empty()) return kExitFinding;
  try {
    stratify(flat);
  } catch (const UnstratifiableError& e) {
    std::cout << "finding: " << e.what() << "\n";
    return kExitFinding;
  }
  std::cerr << game_path << ": ok\n";
  return kExitOk;
}

int cmd_trace(const std::string& game_path, const std::string& players,
              int count, int cap, uint64_t seed, uint64_t playouts,
              uint64_t clock_millis, const std::string& out_dir, int jobs) {
  Machine machine = Machine::from_file(game_path);
  PlayerSpec spec;
  spec.kind = parse_player_kind(players);
  spec.mcts_playouts = playouts;
  fs::create_directories(out_dir);

  std::vector<MatchTrace> traces(count);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= count) return;
      MatchConfig config;
      config.move_cap = cap;
      config.seed = mix_seed(seed, static_cast<uint64_t>(i));
      config.clock_millis = clock_millis;
      std::vector<PlayerSpec> assignment(machine.roles().size(), spec);
      traces[i] = run_match(machine, assignment, config);
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(jobs, std::max(count, 1)); ++t)
      pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (int i = 0; i < count; ++i) {
    fs::path file = fs::path(out_dir) /
                    (machine.game_id() + "_" + std::to_string(i) + ".trace");
    write_trace(traces[i], file);
    std::cerr << "wrote " << file.string() << "\n";
  }
  return kExitOk;
}

int cmd_build(const std::string& traces_dir, const std::string& game_path,
              const std::string& target, const std::string& out_dir) {
  Machine machine = Machine::from_file(game_path);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(traces_dir))
    if (entry.path().extension() == ".trace") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "error: no .trace files in " << traces_dir << "\n";
    return kExitFinding;
  }
  std::vector<MatchTrace> traces;
  for (const fs::path& f : files) traces.push_back(read_trace(f));

  std::vector<TargetKind> targets;
  if (target == "all")
    targets = {TargetKind::Next, TargetKind::Legal, TargetKind::Goal,
               TargetKind::Terminal};
  else
    targets = {parse_target(target)};
  for (TargetKind t : targets) {
    IggpTask task = build_task(machine, traces, t);
    fs::path dir = fs::path(out_dir) / (machine.game_id() + "_" + to_string(t));
    serialize_task(task, dir);
    std::cerr << "wrote task " << dir.string() << " (" << task.triples.size()
              << " triples)\n";
  }
  return kExitOk;
}

int cmd_learn(const std::string& task_dir, const std::string& learner,
              uint64_t budget_millis, const std::string& out_file) {
  IggpTask task = parse_task(task_dir);
  LearnBudget budget;
  budget.millis = budget_millis;
  Hypothesis h = learn_task(task, parse_learner(learner), budget);
  write_hypothesis(h, task.game, to_string(task.target), out_file);
  std::cerr << "wrote " << out_file << " (" << h.rules.size() << " rules"
            << (h.learned ? "" : ", default hypothesis") << ")\n";
  return h.learned ? kExitOk : kExitFinding;
}

int cmd_eval(const std::string& hypothesis_file, const std::string& task_dir,
             const std::string& out_file) {
  Hypothesis h = read_hypothesis(hypothesis_file);
  IggpTask task = parse_task(task_dir);
  EvalReport report = evaluate_hypothesis(h, task);
  std::ostringstream line;
  line << "game " << task.game << " target " << to_string(task.target) << " p "
       << report.p << " n " << report.n << " tp " << report.tp << " tn "
       << report.tn << " ba " << report.balanced_accuracy << " solved "
       << (report.perfectly_solved ? 1 : 0) << "\n";
  std::cout << line.str();
  if (!out_file.empty()) {
    std::ofstream out(out_file, std::ios::binary);
    out << line.str();
  }
  return kExitOk;
}

int cmd_experiment(const std::string& config_file, const std::string& out_dir,
                   int jobs) {
  ExperimentConfig config = parse_experiment_config(config_file);
  if (jobs > 0) config.jobs = jobs;
  ExperimentResult result = run_experiment(config, &std::cerr);
  std::cout << result.render_table();
  if (!out_dir.empty()) {
    write_experiment_report(result, out_dir);
    std::cerr << "report written to " << out_dir << "\n";
  }
  for (const CellResult& c : result.cells)
    if (!c.error.empty()) return kExitFinding;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IGGP workbench: GDL games, traces, induction tasks, learners"};
  app.require_subcommand(1);

  std::string game_path, players = "random", target = "next", traces_dir,
              task_dir, learner = "enum", hypothesis_file, config_file;
  std::string out = "out";
  std::string out_file;
  int count = 1, cap = 60, jobs = 1;
  uint64_t seed = 1, playouts = 400, clock_millis = 15000,
           budget_millis = 5000;

  CLI::App* validate = app.add_subcommand("validate", "parse and check a game");
  validate->add_option("game", game_path, "GDL file")->required();

  CLI::App* trace = app.add_subcommand("trace", "play matches and log traces");
  trace->add_option("game", game_path, "GDL file")->required();
  trace->add_option("--players", players, "random|mcts|astar|intelligent");
  trace->add_option("--count", count, "number of matches");
  trace->add_option("--cap", cap, "move cap");
  trace->add_option("--seed", seed, "root seed");
  trace->add_option("--playouts", playouts, "MCTS playouts per move");
  trace->add_option("--clock-millis", clock_millis, "per-move clock");
  trace->add_option("--out", out, "output directory")->required();
  trace->add_option("--jobs", jobs, "parallel matches");

  CLI::App* build = app.add_subcommand("build", "turn traces into IGGP tasks");
  build->add_option("traces", traces_dir, "directory of .trace files")->required();
  build->add_option("--game", game_path, "GDL file")->required();
  build->add_option("--target", target, "next|legal|goal|terminal|all");
  build->add_option("--out", out, "output directory")->required();

  CLI::App* learn = app.add_subcommand("learn", "induce rules from a task");
  learn->add_option("task", task_dir, "task directory")->required();
  learn->add_option("--learner", learner, "cover|enum");
  learn->add_option("--budget", budget_millis, "budget in milliseconds");
  learn->add_option("--out", out_file, "hypothesis file")->required();

  CLI::App* eval = app.add_subcommand("eval", "score a hypothesis on a task");
  eval->add_option("--hypothesis", hypothesis_file, "hypothesis file")->required();
  eval->add_option("task", task_dir, "task directory")->required();
  eval->add_option("--out", out_file, "also write the report line here");

  CLI::App* experiment =
      app.add_subcommand("experiment", "run an E1/E2 style grid");
  experiment->add_option("config", config_file, "experiment config file")
      ->required();
  experiment->add_option("--out", out, "report directory");
  experiment->add_option("--jobs", jobs, "parallel cells");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(game_path);
    if (trace->parsed())
      return cmd_trace(game_path, players, count, cap, seed, playouts,
                       clock_millis, out, jobs);
    if (build->parsed()) return cmd_build(traces_dir, game_path, target, out);
    if (learn->parsed())
      return cmd_learn(task_dir, learner, budget_millis, out_file);
    if (eval->parsed()) return cmd_eval(hypothesis_file, task_dir, out_file);
    if (experiment->parsed()) return cmd_experiment(config_file, out, jobs);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFinding;
  } catch (const GameFormError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFinding;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
