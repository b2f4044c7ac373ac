#include "gebo/bfgs.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gebo {

int RunTrace::evals_to_tolerance(double f_tol, double opt_ratio_tol) const {
  if (records.empty()) return -1;
  const double opt0 = records.front().true_grad_norm;
  for (const EvalRecord& rec : records) {
    const bool f_ok = rec.f_best <= f_tol;
    const bool opt_ok = rec.opt_best <= opt_ratio_tol * opt0;
    if (f_ok && opt_ok) return rec.n_feval;
  }
  return -1;
}

std::string run_status_name(RunStatus status) {
  switch (status) {
    case RunStatus::Running: return "running";
    case RunStatus::Converged: return "converged";
    case RunStatus::Stalled: return "stalled";
    case RunStatus::BudgetExhausted: return "budget_exhausted";
    case RunStatus::Aborted: return "aborted";
  }
  return "unknown";
}

namespace {

using Clock = std::chrono::steady_clock;

struct Evaluator {
  const Problem* problem;
  RunTrace* trace;
  Clock::time_point start;
  int n_feval = 0;
  int iter = 0;
  double f_best = std::numeric_limits<double>::infinity();
  double opt_best = std::numeric_limits<double>::infinity();

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const double f = problem->eval(x, grad);
    ++n_feval;
    const double true_norm =
        problem->has_true_grad() ? problem->true_grad(x).norm() : grad.norm();
    if (f < f_best) {
      f_best = f;
      opt_best = true_norm;
    }
    EvalRecord rec;
    rec.iter = iter;
    rec.n_feval = n_feval;
    rec.x = x;
    rec.f = f;
    rec.grad_norm = grad.norm();
    rec.true_grad_norm = true_norm;
    rec.f_best = f_best;
    rec.opt_best = opt_best;
    rec.u_c = 0.0;
    rec.u_sigma = std::numeric_limits<double>::infinity();
    rec.wall_time_s =
        std::chrono::duration<double>(Clock::now() - start).count();
    trace->records.push_back(std::move(rec));
    return f;
  }
};

struct LineSearchResult {
  bool ok = false;
  double alpha = 0.0;
  double f = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
};

// Strong Wolfe line search: bracketing with doubling steps, then zoom by
// bisection. All probes run through the shared evaluator.
LineSearchResult wolfe_line_search(Evaluator& eval, const Eigen::VectorXd& x0,
                                   double f0, const Eigen::VectorXd& g0,
                                   const Eigen::VectorXd& p,
                                   const QnConfig& cfg) {
  LineSearchResult out;
  const double slope0 = g0.dot(p);
  if (!(slope0 < 0.0)) return out;

  int evals = 0;
  Eigen::VectorXd grad(x0.size());
  const auto probe = [&](double alpha, double& f_out, double& slope_out) {
    out.x = x0 + alpha * p;
    f_out = eval(out.x, grad);
    slope_out = grad.dot(p);
    ++evals;
  };

  const auto wolfe_ok = [&](double f, double slope, double alpha) {
    return f <= f0 + cfg.wolfe_c1 * alpha * slope0 &&
           std::abs(slope) <= -cfg.wolfe_c2 * slope0;
  };

  const auto zoom = [&](double lo, double f_lo, double hi) {
    while (evals < cfg.max_linesearch_evals) {
      const double alpha = 0.5 * (lo + hi);
      if (std::abs(hi - lo) < 1e-18 * std::max(1.0, std::abs(lo))) break;
      double f, slope;
      probe(alpha, f, slope);
      if (!std::isfinite(f) || f > f0 + cfg.wolfe_c1 * alpha * slope0 ||
          f >= f_lo) {
        hi = alpha;
        continue;
      }
      if (wolfe_ok(f, slope, alpha)) {
        out.ok = true;
        out.alpha = alpha;
        out.f = f;
        out.grad = grad;
        return;
      }
      if (slope * (hi - lo) >= 0.0) hi = lo;
      lo = alpha;
      f_lo = f;
    }
  };

  double alpha_prev = 0.0;
  double f_prev = f0;
  double alpha = 1.0;
  while (evals < cfg.max_linesearch_evals && alpha < 1e12) {
    double f, slope;
    probe(alpha, f, slope);
    if (!std::isfinite(f) || f > f0 + cfg.wolfe_c1 * alpha * slope0 ||
        (f >= f_prev && evals > 1)) {
      zoom(alpha_prev, f_prev, alpha);
      return out;
    }
    if (wolfe_ok(f, slope, alpha)) {
      out.ok = true;
      out.alpha = alpha;
      out.f = f;
      out.grad = grad;
      return out;
    }
    if (slope >= 0.0) {
      zoom(alpha, f, alpha_prev);
      return out;
    }
    alpha_prev = alpha;
    f_prev = f;
    alpha *= 2.0;
  }
  return out;
}

}  // namespace

RunTrace bfgs_minimize(const Problem& problem, const Eigen::VectorXd& x0,
                       const QnConfig& cfg) {
  if (x0.size() != problem.dim)
    throw std::invalid_argument("bfgs_minimize: start dimension mismatch");
  if (!(cfg.wolfe_c1 > 0.0 && cfg.wolfe_c1 < cfg.wolfe_c2 && cfg.wolfe_c2 < 1.0))
    throw std::invalid_argument("bfgs_minimize: need 0 < c1 < c2 < 1");

  RunTrace trace;
  Evaluator eval{&problem, &trace, Clock::now()};

  const auto dim = x0.size();
  Eigen::VectorXd x = x0;
  Eigen::VectorXd g(dim);
  double f;
  try {
    f = eval(x, g);
  } catch (const std::exception& err) {
    trace.status = RunStatus::Aborted;
    trace.message = err.what();
    return trace;
  }
  const double g0_norm = g.norm();
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(dim, dim);
  bool h_initialized = false;

  while (true) {
    if (g.norm() <= cfg.grad_ratio_tol * g0_norm) {
      trace.status = RunStatus::Converged;
      break;
    }
    if (eval.iter >= cfg.max_iters || eval.n_feval >= cfg.max_evals) {
      trace.status = RunStatus::BudgetExhausted;
      break;
    }
    ++eval.iter;

    Eigen::VectorXd p = -(h * g);
    if (p.dot(g) >= 0.0) {
      h.setIdentity();
      h_initialized = false;
      p = -g;
    }

    LineSearchResult ls;
    try {
      ls = wolfe_line_search(eval, x, f, g, p, cfg);
    } catch (const std::exception& err) {
      trace.status = RunStatus::Aborted;
      trace.message = err.what();
      return trace;
    }
    if (!ls.ok) {
      // Expected failure mode with noisy gradients: no Wolfe point exists.
      trace.status = RunStatus::Stalled;
      trace.message = "line search failed";
      break;
    }

    const Eigen::VectorXd s = ls.x - x;
    const Eigen::VectorXd y = ls.grad - g;
    x = ls.x;
    f = ls.f;
    g = ls.grad;

    if (s.norm() <= cfg.step_tol * std::max(1.0, x.norm())) {
      trace.status = RunStatus::Stalled;
      trace.message = "step below tolerance";
      break;
    }

    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      if (!h_initialized) {
        h = (sy / y.squaredNorm()) * Eigen::MatrixXd::Identity(dim, dim);
        h_initialized = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(dim, dim);
      h = (ident - rho * s * y.transpose()) * h *
              (ident - rho * y * s.transpose()) +
          rho * s * s.transpose();
    }
  }
  return trace;
}

}  // namespace gebo
