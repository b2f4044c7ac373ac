#pragma once

#include <Eigen/Core>

#include "gebo/problems.hpp"
#include "gebo/trace.hpp"

namespace gebo {

// Quasi-Newton baseline settings: strong-Wolfe line search and tight stop
// tolerances so the optimizer converges as deeply as it can.
struct QnConfig {
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_linesearch_evals = 25;
  double grad_ratio_tol = 1e-10;  // stop once |g| <= tol * |g(x0)|
  double step_tol = 1e-16;        // relative step size stop
  int max_iters = 10000;
  int max_evals = 100000;
};

// BFGS with inverse-Hessian updates and a curvature guard. Every line-search
// probe lands in the trace, so evaluation counts are directly comparable to
// one-evaluation-per-iteration optimizers. A failed line search ends the run
// with RunStatus::Stalled.
RunTrace bfgs_minimize(const Problem& problem, const Eigen::VectorXd& x0,
                       const QnConfig& cfg = {});

}  // namespace gebo
