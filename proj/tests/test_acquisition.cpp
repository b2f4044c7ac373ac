#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gebo/acquisition.hpp"
#include "gebo/gp.hpp"
#include "gebo/rng.hpp"
#include "test_util.hpp"

using namespace gebo;
using gebo::test::random_vector;

namespace {

// GP over samples of f(x) = (x - 1)^2 on a short 1-D stencil.
FittedSurrogate parabola_surrogate(double gamma = 1.0, double sigma_k = 1.0) {
  Eigen::MatrixXd points(3, 1);
  points << -0.5, 0.0, 0.5;
  Eigen::VectorXd values(3);
  Eigen::MatrixXd grads(3, 1);
  for (int i = 0; i < 3; ++i) {
    const double x = points(i, 0);
    values[i] = (x - 1.0) * (x - 1.0);
    grads(i, 0) = 2.0 * (x - 1.0);
  }
  Hyperparameters hp;
  hp.gamma = Eigen::VectorXd::Constant(1, gamma);
  hp.sigma_k = sigma_k;
  hp.beta = values.mean();
  return fit_surrogate(make_dataset(points, values, grads), hp,
                       KernelKind::gaussian(), 1e10);
}

}  // namespace

TEST_CASE("expected improvement limits and signs") {
  const FittedSurrogate s = parabola_surrogate();
  const AcquisitionKind ei = AcquisitionKind::expected_improvement();

  SUBCASE("degenerate sigma at a training point") {
    // At a training point sigma ~ 0 and mean ~ f; with f_best above the
    // mean the improvement is deterministic.
    Eigen::VectorXd x(1);
    x << 0.5;
    const double mean = s.posterior_mean(x);
    const AcqEval q = acq_value_grad(ei, s, x, /*f_best=*/1.0);
    CHECK(q.value == doctest::Approx(-(1.0 - mean)).epsilon(1e-6));
  }
  SUBCASE("far from data the value is -sigma_k phi(0) when mean = f_best") {
    // mean -> beta and ratio -> 1 far away; choose f_best = beta.
    Eigen::VectorXd x(1);
    x << 80.0;
    const double beta = s.hp().beta;
    const AcqEval q = acq_value_grad(ei, s, x, beta);
    CHECK(q.value ==
          doctest::Approx(-s.hp().sigma_k / std::sqrt(2.0 * std::numbers::pi))
              .epsilon(1e-9));
  }
  SUBCASE("negated expected improvement is never positive") {
    Rng rng(7);
    for (int trial = 0; trial < 300; ++trial) {
      Eigen::VectorXd x(1);
      x << rng.uniform(-5.0, 5.0);
      const AcqEval q = acq_value_grad(ei, s, x, 0.3);
      CHECK(q.value <= 0.0);
    }
  }
}

TEST_CASE("upper confidence reduces to the mean at omega zero") {
  const FittedSurrogate s = parabola_surrogate();
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(1);
    x << rng.uniform(-2.0, 2.0);
    const AcqEval q =
        acq_value_grad(AcquisitionKind::upper_confidence(0.0), s, x, 0.0);
    CHECK(q.value == s.posterior_mean(x));
  }
}

TEST_CASE("acquisition gradients match finite differences") {
  const FittedSurrogate s = parabola_surrogate(1.3);
  Rng rng(13);
  for (const AcquisitionKind kind :
       {AcquisitionKind::expected_improvement(),
        AcquisitionKind::upper_confidence(2.0)}) {
    int checked = 0;
    for (int trial = 0; trial < 120 && checked < 50; ++trial) {
      Eigen::VectorXd x(1);
      x << rng.uniform(-1.5, 1.5);
      // Keep away from the sigma -> 0 kink at training points.
      if (s.variance_ratio(x) < 1e-6) continue;
      const AcqEval q = acq_value_grad(kind, s, x, 0.3);
      const Eigen::VectorXd fd = gebo::test::fd_gradient(
          [&](const Eigen::VectorXd& xv) {
            return acq_value_grad(kind, s, xv, 0.3).value;
          },
          x);
      CHECK(gebo::test::close_rel_vec(q.grad, fd, 1e-4, 1e-9));
      ++checked;
    }
    CHECK(checked == 50);
  }
}

TEST_CASE("acquisition minimization honors the circular trust region") {
  const FittedSurrogate s = parabola_surrogate();
  Eigen::VectorXd x_best(1);
  x_best << 0.5;
  const Eigen::MatrixXd region_points = s.data().points;
  Eigen::VectorXd merits(3);
  merits << 2.25, 1.0, 0.25;
  const double u_c = 0.25;

  const AcqResult res = minimize_acquisition(
      s, AcquisitionKind::expected_improvement(), u_c,
      std::numeric_limits<double>::infinity(), x_best, 0.25, region_points,
      merits, nullptr, 42);
  CHECK(!res.fallback);
  CHECK((res.x - x_best).squaredNorm() <= u_c + 1e-8);

  SUBCASE("the returned point beats the incumbent on the true parabola") {
    const double f_new = (res.x[0] - 1.0) * (res.x[0] - 1.0);
    CHECK(f_new < 0.25);
  }
  SUBCASE("grid oracle over the feasible interval") {
    // min of q over [x_best - sqrt(u_c), x_best + sqrt(u_c)].
    double best_q = 1e300, best_x = 0.0;
    for (int i = 0; i <= 20000; ++i) {
      Eigen::VectorXd x(1);
      x << 0.0 + 1.0 * i / 20000.0;
      const double q =
          acq_value_grad(AcquisitionKind::expected_improvement(), s, x, 0.25)
              .value;
      if (q < best_q) {
        best_q = q;
        best_x = x[0];
      }
    }
    CHECK(std::abs(res.x[0] - best_x) < 1e-3);
    CHECK(res.q <= best_q + 1e-8);
  }
  SUBCASE("determinism for a fixed seed") {
    const AcqResult res2 = minimize_acquisition(
        s, AcquisitionKind::expected_improvement(), u_c,
        std::numeric_limits<double>::infinity(), x_best, 0.25, region_points,
        merits, nullptr, 42);
    CHECK(res2.x == res.x);
    CHECK(res2.q == res.q);
  }
}

TEST_CASE("sigma trust region constrains the returned point") {
  const FittedSurrogate s = parabola_surrogate();
  Eigen::VectorXd x_best(1);
  x_best << 0.5;
  Eigen::VectorXd merits(3);
  merits << 2.25, 1.0, 0.25;
  const double u_sigma = 0.04;
  const AcqResult res = minimize_acquisition(
      s, AcquisitionKind::expected_improvement(), 4.0, u_sigma, x_best, 0.25,
      s.data().points, merits, nullptr, 7);
  CHECK(!res.fallback);
  CHECK(s.variance_ratio(res.x) <= u_sigma + 1e-6);
  CHECK((res.x - x_best).squaredNorm() <= 4.0 + 1e-8);
}

TEST_CASE("linear constraints cut the feasible set") {
  const FittedSurrogate s = parabola_surrogate();
  Eigen::VectorXd x_best(1);
  x_best << 0.5;
  Eigen::VectorXd merits(3);
  merits << 2.25, 1.0, 0.25;
  LinearConstraints lin;
  lin.a.resize(1, 1);
  lin.a << 1.0;
  lin.b.resize(1);
  lin.b << 0.6;  // x <= 0.6 cuts off the parabola's pull toward 1
  const AcqResult res = minimize_acquisition(
      s, AcquisitionKind::expected_improvement(), 1.0,
      std::numeric_limits<double>::infinity(), x_best, 0.25, s.data().points,
      merits, &lin, 21);
  CHECK(res.x[0] <= 0.6 + 1e-8);
}

TEST_CASE("infeasible sigma bound falls back to a circular-clipped step") {
  // A noise-dominated surrogate keeps the variance ratio high everywhere,
  // so a small sigma bound cannot be met and the fallback engages.
  Eigen::MatrixXd points(3, 1);
  points << -0.5, 0.0, 0.5;
  Eigen::VectorXd values(3);
  Eigen::MatrixXd grads(3, 1);
  for (int i = 0; i < 3; ++i) {
    const double x = points(i, 0);
    values[i] = (x - 1.0) * (x - 1.0);
    grads(i, 0) = 2.0 * (x - 1.0);
  }
  Hyperparameters hp;
  hp.gamma = Eigen::VectorXd::Constant(1, 1.0);
  hp.sigma_k = 0.1;
  hp.sigma_f = 0.5;
  hp.sigma_gf = 0.5;
  hp.beta = values.mean();
  const FittedSurrogate s = fit_surrogate(
      make_dataset(points, values, grads), hp, KernelKind::gaussian(), 1e10);
  Eigen::VectorXd x_best(1);
  x_best << 0.5;
  REQUIRE(s.variance_ratio(x_best) > 0.05);

  Eigen::VectorXd merits(3);
  merits << 2.25, 1.0, 0.25;
  const AcqResult res = minimize_acquisition(
      s, AcquisitionKind::expected_improvement(), 0.25, 0.04, x_best, 0.25,
      s.data().points, merits, nullptr, 3);
  CHECK(res.fallback);
  CHECK((res.x - x_best).squaredNorm() <= 0.25 + 1e-8);
}

TEST_CASE("acquisition parsing") {
  CHECK(parse_acquisition("ei").type ==
        AcquisitionKind::Type::ExpectedImprovement);
  CHECK(parse_acquisition("uc:2").omega == doctest::Approx(2.0));
  CHECK(parse_acquisition("uc:0").omega == doctest::Approx(0.0));
  CHECK_THROWS(parse_acquisition("thompson"));
}
