// Scoring hypotheses with balanced accuracy and perfectly-solved, the
// train/test split, chi-squared significance, and the experiment grids.
#pragma once

#include <iosfwd>

#include "iggp/learn.hpp"

namespace iggp {

struct EvalReport {
  int64_t p = 0, n = 0;    // positive / negative test examples
  int64_t tp = 0, tn = 0;  // correctly classified
  double balanced_accuracy = 0.0;
  bool perfectly_solved = false;
};

// tp/tn summed over the test triples, each example checked against its own
// triple's background. An unlearned hypothesis (or a default predicate)
// classifies every pool atom positive. Throws on an empty test set.
EvalReport evaluate_hypothesis(const Hypothesis& h, const IggpTask& test_task);

struct Split {
  std::vector<MatchTrace> train;
  std::vector<MatchTrace> test;
};

// Disjoint trace sets, deterministic per seed. Throws when there are not
// enough traces.
Split split_train_test(const std::vector<MatchTrace>& traces, size_t n_train,
                       size_t n_test, uint64_t seed);

// Example-level overlap: (background, positive) pairs of `test` already seen
// in `train`. drop_overlapping_positives removes them from the test task and
// returns how many were dropped.
size_t example_overlap(const IggpTask& train, const IggpTask& test);
size_t drop_overlapping_positives(const IggpTask& train, IggpTask& test);

// Pearson chi-squared with one degree of freedom, no continuity correction,
// over the 2x2 (correct, incorrect) contingency of two conditions. Throws
// on a zero marginal.
std::pair<double, double> chi_squared_counts(int64_t correct_a, int64_t wrong_a,
                                             int64_t correct_b, int64_t wrong_b);
std::pair<double, double> chi_squared(const EvalReport& a, const EvalReport& b);

struct ExperimentConfig {
  std::vector<std::string> games;  // paths to .gdl files
  std::vector<TargetKind> targets = {TargetKind::Goal, TargetKind::Next,
                                     TargetKind::Legal};
  bool include_terminal = false;
  std::vector<Provenance> train_sources = {Provenance::Random,
                                           Provenance::Intelligent};
  bool train_mixed = true;  // adds the 50/50 mixed training condition
  std::vector<Provenance> test_sources = {Provenance::Random,
                                          Provenance::Intelligent};
  std::vector<LearnerKind> learners = {LearnerKind::Cover,
                                       LearnerKind::Enumerative};
  int train_traces = 8;
  int test_traces = 4;
  std::vector<int> e2_trace_counts = {8, 16, 24};
  bool e2_mode = false;
  uint64_t learn_millis = 2000;
  uint64_t mcts_playouts = 400;
  int move_cap = 60;
  uint64_t seed = 1;
  int jobs = 1;
};

ExperimentConfig parse_experiment_config(const std::filesystem::path& file);

struct CellResult {
  std::string game;
  TargetKind target = TargetKind::Next;
  LearnerKind learner = LearnerKind::Cover;
  std::string train_source;  // random | intelligent | mixed
  std::string test_source;   // random | intelligent
  int trace_count = 0;       // training traces (varies in E2)
  bool learned = false;
  EvalReport report;
  std::string error;  // nonempty when the cell failed
};

struct ExperimentResult {
  bool e2_mode = false;
  std::vector<CellResult> cells;

  // Aggregate mean balanced accuracy / perfectly-solved counts as an
  // aligned text table shaped like the E1 (or E2) grid.
  std::string render_table() const;
};

ExperimentResult run_experiment(const ExperimentConfig& config,
                                std::ostream* progress = nullptr);

// Plain-text table plus a line-delimited JSON record per cell.
void write_experiment_report(const ExperimentResult& result,
                             const std::filesystem::path& dir);

}  // namespace iggp
