#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gebo/bfgs.hpp"
#include "gebo/bo.hpp"
#include "gebo/csv.hpp"
#include "gebo/trace.hpp"

namespace gebo {

// Dual success tolerance: objective below f_tol and optimality reduced by
// opt_orders decades from the starting point.
struct ToleranceSpec {
  double f_tol = 1e-5;
  double opt_orders = 10.0;
  double opt_ratio_tol() const { return std::pow(10.0, -opt_orders); }
};

struct ExperimentConfig {
  std::string problem_spec;
  std::vector<std::string> methods{"bo", "bfgs"};
  int n_runs = 5;
  Eigen::VectorXd box_lb;  // empty: problem default
  Eigen::VectorXd box_ub;
  std::uint64_t master_seed = 0;
  ToleranceSpec tolerance;
  std::string out_dir;       // empty: no files written
  double grad_noise = 0.0;   // sigma of the gradient perturbation
  int max_evals = 300;       // per-run evaluation budget
  BoConfig bo;
  QnConfig qn;
  int workers = 0;  // 0: hardware concurrency
};

// Per-run seed derivation, fixed so reruns are reproducible:
// mix(mix(master ^ hash(method)), run_id).
std::uint64_t run_seed(std::uint64_t master, int run_id,
                       const std::string& method);

struct RunOutcome {
  int run_id = 0;
  std::string method;
  RunTrace trace;
  int evals_to_tol = -1;  // -1: tolerance never met
};

struct ExperimentResult {
  Eigen::MatrixXd starts;  // n_runs x n_d
  std::vector<RunOutcome> runs;  // method-major, then run id

  const RunOutcome& outcome(const std::string& method, int run_id) const;
  bool all_completed() const;  // no run aborted
};

// LHS starting points, one run per method per start, optional CSV output
// (per-run traces, summary.csv, experiment.json). Run failures are recorded
// as statuses, never propagated.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SummaryRow {
  std::string method;
  std::string problem;
  int n_d = 0;
  int n_runs = 0;
  int success_count = 0;
  bool achieved = false;       // at least half the runs met both tolerances
  double median_evals = 0.0;   // lower median, meaningful when achieved
};

// Median evaluations-to-tolerance per method; non-achieving runs enter as
// infinity and the row reports "not achieved" when fewer than half succeed.
std::vector<SummaryRow> summarize(const ExperimentConfig& cfg,
                                  const ExperimentResult& result);

// Rebuild the summary from persisted traces (the report subcommand).
std::vector<SummaryRow> report_medians(
    const std::vector<std::vector<TraceRow>>& traces, const std::string& problem,
    int n_d, const ToleranceSpec& tolerance);

void write_summary_csv(const std::string& path,
                       const std::vector<SummaryRow>& rows);

// Trace conversion used for persistence.
std::vector<TraceRow> to_trace_rows(const RunTrace& trace, int run_id,
                                    const std::string& method);

}  // namespace gebo
