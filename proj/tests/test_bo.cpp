#include <doctest.h>

#include <cmath>

#include "gebo/bo.hpp"
#include "gebo/problems.hpp"

using namespace gebo;

namespace {

Problem one_d_quadratic() {
  Problem p;
  p.name = "parabola";
  p.dim = 1;
  p.eval = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(1);
    g[0] = 2.0 * (x[0] - 1.0);
    return (x[0] - 1.0) * (x[0] - 1.0);
  };
  return p;
}

}  // namespace

TEST_CASE("stop_check branches") {
  BoConfig cfg;
  RunTrace trace;
  SUBCASE("empty trace continues") {
    CHECK(stop_check(trace, cfg) == RunStatus::Running);
  }
  EvalRecord rec;
  rec.iter = 0;
  rec.n_feval = 1;
  rec.f = 5.0;
  rec.f_best = 5.0;
  rec.grad_norm = 10.0;
  rec.true_grad_norm = 10.0;
  rec.opt_best = 10.0;
  trace.records.push_back(rec);
  SUBCASE("first evaluation continues") {
    CHECK(stop_check(trace, cfg) == RunStatus::Running);
  }
  SUBCASE("a ten-order optimality drop converges") {
    EvalRecord good = rec;
    good.n_feval = 2;
    good.f = 4.0;
    good.f_best = 4.0;
    good.grad_norm = 10.0 * 1e-10 * 0.99;
    trace.records.push_back(good);
    CHECK(stop_check(trace, cfg) == RunStatus::Converged);
  }
  SUBCASE("twenty evaluations without improvement stall") {
    for (int k = 0; k < 20; ++k) {
      EvalRecord stale = rec;
      stale.n_feval = 2 + k;
      stale.f = 6.0;  // never improves
      trace.records.push_back(stale);
    }
    CHECK(stop_check(trace, cfg) == RunStatus::Stalled);
  }
  SUBCASE("the budget caps the run") {
    cfg.max_evals = 1;
    CHECK(stop_check(trace, cfg) == RunStatus::BudgetExhausted);
  }
}

TEST_CASE("bo drives a 1-d quadratic to deep optimality") {
  const Problem p = one_d_quadratic();
  BoConfig cfg;
  cfg.max_evals = 60;
  Eigen::VectorXd x0(1);
  x0 << 0.0;
  const RunTrace trace = bo_minimize(p, x0, cfg, 11);
  CHECK(trace.status == RunStatus::Converged);
  CHECK(trace.last().n_feval <= 60);
  // |grad| at the best point dropped ten orders from |grad(x0)| = 2.
  double best_f = 1e300;
  double best_grad = 1e300;
  for (const EvalRecord& rec : trace.records)
    if (rec.f < best_f) {
      best_f = rec.f;
      best_grad = rec.grad_norm;
    }
  CHECK(best_grad <= 1e-10 * trace.records.front().grad_norm);
}

TEST_CASE("bo traces are bit-identical across reruns") {
  const Problem p = make_rosenbrock(2, 100.0);
  BoConfig cfg;
  cfg.max_evals = 25;
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const RunTrace a = bo_minimize(p, x0, cfg, 321);
  const RunTrace b = bo_minimize(p, x0, cfg, 321);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].x == b.records[i].x);
    CHECK(a.records[i].f == b.records[i].f);
    CHECK(a.records[i].u_c == b.records[i].u_c);
    CHECK(a.records[i].u_sigma == b.records[i].u_sigma);
  }
  CHECK(a.status == b.status);
}

TEST_CASE("f_best is non-increasing and trust bounds are honored") {
  const Problem p = make_bowl(2);
  BoConfig cfg;
  cfg.max_evals = 40;
  Eigen::VectorXd x0(2);
  x0 << 4.0, -3.0;
  const RunTrace trace = bo_minimize(p, x0, cfg, 5);
  REQUIRE(trace.records.size() >= 5);

  double f_best = trace.records.front().f;
  for (const EvalRecord& rec : trace.records) {
    f_best = std::min(f_best, rec.f);
    CHECK(rec.f_best == f_best);
  }

  // Every evaluated point satisfies the circular bound recorded with it,
  // measured from the incumbent among all earlier evaluations.
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < i; ++k)
      if (trace.records[k].f < trace.records[best].f) best = k;
    const double dist2 =
        (trace.records[i].x - trace.records[best].x).squaredNorm();
    CHECK(dist2 <= trace.records[i].u_c + 1e-6);
  }
}

TEST_CASE("noisy mode reports the noise-free optimality") {
  const Problem base = make_quadratic(2);
  const Problem noisy = noisy_gradient_wrap(base, 1e-2, 77);
  BoConfig cfg;
  cfg.max_evals = 30;
  cfg.noisy_mode = true;
  Eigen::VectorXd x0(2);
  x0 << 3.0, -2.0;
  const RunTrace trace = bo_minimize(noisy, x0, cfg, 13);
  REQUIRE(!trace.records.empty());
  Eigen::VectorXd g(2);
  for (const EvalRecord& rec : trace.records) {
    base.eval(rec.x, g);
    CHECK(rec.true_grad_norm == doctest::Approx(g.norm()).epsilon(1e-12));
  }
}

TEST_CASE("aborts cleanly when the oracle keeps failing") {
  Problem p;
  p.name = "explodes";
  p.dim = 1;
  int calls = 0;
  p.eval = [&calls](const Eigen::VectorXd& x, Eigen::VectorXd& g) -> double {
    ++calls;
    if (calls > 1) throw std::runtime_error("boom");
    g.resize(1);
    g[0] = 2.0 * x[0];
    return x[0] * x[0];
  };
  BoConfig cfg;
  cfg.max_evals = 10;
  const RunTrace trace = bo_minimize(p, Eigen::VectorXd::Ones(1), cfg, 1);
  CHECK(trace.status == RunStatus::Aborted);
  CHECK(trace.records.size() == 1);  // only the initial evaluation landed
}
