#include <doctest.h>

#include <cmath>

#include "gebo/bfgs.hpp"
#include "gebo/problems.hpp"
#include "gebo/rng.hpp"

using namespace gebo;

namespace {

// f = (x - 1)^T A (x - 1) / 2 with a fixed SPD matrix.
Problem dense_quadratic(int n_d) { return make_quadratic(n_d); }

}  // namespace

TEST_CASE("bfgs reaches a ten-order optimality drop on a 10-d quadratic") {
  const Problem problem = dense_quadratic(10);
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(10, 5.0);
  for (int i = 0; i < 10; ++i) x0[i] += 0.3 * i;
  const RunTrace trace = bfgs_minimize(problem, x0);
  CHECK(trace.status == RunStatus::Converged);
  CHECK(trace.last().n_feval <= 100);
  CHECK(trace.final_opt_best() <= 1e-10 * trace.initial_optimality());
}

TEST_CASE("bfgs solves the classic 2-d rosenbrock start") {
  const Problem problem = make_rosenbrock(2, 100.0);
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  QnConfig cfg;
  const RunTrace trace = bfgs_minimize(problem, x0, cfg);
  REQUIRE(!trace.records.empty());
  // Locate the best point; it must sit at the (1, 1) minimum.
  Eigen::VectorXd best_x;
  double best_f = 1e300;
  for (const EvalRecord& rec : trace.records)
    if (rec.f < best_f) {
      best_f = rec.f;
      best_x = rec.x;
    }
  CHECK((best_x - Eigen::VectorXd::Ones(2)).norm() <= 1e-6);
}

TEST_CASE("line-search probes all appear in the trace") {
  const Problem problem = make_rosenbrock(2, 100.0);
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const RunTrace trace = bfgs_minimize(problem, x0);
  // Counts are contiguous from 1 and f_best is monotone.
  int expected = 1;
  double f_best = trace.records.front().f;
  for (const EvalRecord& rec : trace.records) {
    CHECK(rec.n_feval == expected++);
    f_best = std::min(f_best, rec.f);
    CHECK(rec.f_best == f_best);
  }
  // Rosenbrock needs curved steps: strictly more evals than iterations.
  CHECK(trace.last().n_feval > trace.last().iter);
}

TEST_CASE("noisy gradients stall the line search near the noise floor") {
  const Problem base = dense_quadratic(10);
  const Problem noisy = noisy_gradient_wrap(base, 1e-2, 99);
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(10, 4.0);
  QnConfig cfg;
  cfg.max_iters = 500;
  const RunTrace trace = bfgs_minimize(noisy, x0, cfg);
  CHECK(trace.status == RunStatus::Stalled);
  // The true optimality plateaus near the noise scale.
  CHECK(trace.final_opt_best() < 1.0);
  CHECK(trace.final_opt_best() > 1e-4);
}

TEST_CASE("identical inputs give identical traces") {
  const Problem problem = dense_quadratic(4);
  Eigen::VectorXd x0 = Eigen::VectorXd::Constant(4, 2.0);
  const RunTrace a = bfgs_minimize(problem, x0);
  const RunTrace b = bfgs_minimize(problem, x0);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].f == b.records[i].f);
    CHECK(a.records[i].x == b.records[i].x);
  }
}

TEST_CASE("invalid configuration is rejected") {
  const Problem problem = dense_quadratic(2);
  QnConfig cfg;
  cfg.wolfe_c1 = 0.95;  // violates c1 < c2
  CHECK_THROWS(bfgs_minimize(problem, Eigen::VectorXd::Zero(2), cfg));
  CHECK_THROWS(bfgs_minimize(problem, Eigen::VectorXd::Zero(3)));
}
