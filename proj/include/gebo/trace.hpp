#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace gebo {

enum class RunStatus { Running, Converged, Stalled, BudgetExhausted, Aborted };

std::string run_status_name(RunStatus status);

// One function-plus-gradient evaluation. Line-search probes of the
// quasi-Newton baseline get their own records so evaluation counts are
// comparable across optimizers.
struct EvalRecord {
  int iter = 0;     // outer iteration the evaluation belongs to
  int n_feval = 0;  // cumulative evaluations including this one
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;       // gradient the optimizer saw
  double true_grad_norm = 0.0;  // noise-free gradient when available
  double f_best = 0.0;          // running minimum objective
  double opt_best = 0.0;        // true_grad_norm at the best point so far
  double u_c = 0.0;
  double u_sigma = std::numeric_limits<double>::infinity();
  double sigma_gf_hat = 0.0;  // surrogate gradient-noise estimate (BO only)
  bool hp_fallback = false;
  bool acq_fallback = false;
  double wall_time_s = 0.0;
};

struct RunTrace {
  std::vector<EvalRecord> records;
  RunStatus status = RunStatus::Running;
  std::string message;

  bool empty() const { return records.empty(); }
  const EvalRecord& last() const { return records.back(); }
  double initial_optimality() const {
    return records.empty() ? 0.0 : records.front().true_grad_norm;
  }
  double final_f_best() const {
    return records.empty() ? std::numeric_limits<double>::infinity()
                           : records.back().f_best;
  }
  double final_opt_best() const {
    return records.empty() ? std::numeric_limits<double>::infinity()
                           : records.back().opt_best;
  }

  // First evaluation count at which f_best <= f_tol and the optimality has
  // dropped by the requested ratio; -1 when never reached.
  int evals_to_tolerance(double f_tol, double opt_ratio_tol) const;
};

}  // namespace gebo
