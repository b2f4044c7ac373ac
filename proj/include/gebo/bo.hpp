#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Core>

#include "gebo/acquisition.hpp"
#include "gebo/likelihood.hpp"
#include "gebo/local_model.hpp"
#include "gebo/problems.hpp"
#include "gebo/trace.hpp"

namespace gebo {

// Bayesian optimizer defaults: Gaussian kernel, cond_max 1e10, expected
// improvement, 20-close/3-recent data region, dual trust regions, stop on a
// 10-order optimality reduction or 20 evaluations without improvement.
struct BoConfig {
  KernelKind kernel = KernelKind::gaussian();
  double cond_max = 1e10;
  AcquisitionKind acquisition = AcquisitionKind::expected_improvement();
  int n_close = 20;
  int n_last = 3;
  TrustRegionParams tr;
  HpSearchConfig hp;
  AcqMinimizeOptions acq;
  bool noisy_mode = false;      // gradients treated as noisy
  double conv_orders = 10.0;    // optimality-reduction target, in decades
  int stall_limit = 20;         // evaluations without f_best improvement
  int max_evals = 300;          // total problem evaluations (x0 included)
  std::optional<LinearConstraints> constraints;
};

// continue (Running) | Converged | Stalled | BudgetExhausted.
RunStatus stop_check(const RunTrace& trace, const BoConfig& cfg);

// The outer loop: data region, hyperparameter fit, trust-region bounds,
// acquisition minimization, evaluation, stop rules. One function-plus-
// gradient evaluation per iteration. Identical seed, config, and problem
// give a bit-identical trace.
RunTrace bo_minimize(const Problem& problem, const Eigen::VectorXd& x0,
                     const BoConfig& cfg, std::uint64_t seed);

}  // namespace gebo
