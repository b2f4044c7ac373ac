#include <doctest.h>

#include <cmath>
#include <vector>

#include "gebo/kernels.hpp"
#include "gebo/rng.hpp"
#include "test_util.hpp"

using namespace gebo;
using gebo::test::close_rel;
using gebo::test::random_loguniform;
using gebo::test::random_vector;

namespace {

const std::vector<KernelKind> kAllKinds = {
    KernelKind::gaussian(), KernelKind::matern(),
    KernelKind::rational_quadratic(2.5)};

// Second-order mixed central difference of the kernel value.
double fd_cross(const KernelKind& kind, const Eigen::VectorXd& x,
                const Eigen::VectorXd& y, const Eigen::VectorXd& gamma,
                Eigen::Index d, Eigen::Index e) {
  const double hx = 1e-4 * std::max(1.0, std::abs(x[d]));
  const double hy = 1e-4 * std::max(1.0, std::abs(y[e]));
  Eigen::VectorXd xp = x, xm = x, yp = y, ym = y;
  xp[d] += hx;
  xm[d] -= hx;
  yp[e] += hy;
  ym[e] -= hy;
  return (kernel_value(kind, xp, yp, gamma) - kernel_value(kind, xp, ym, gamma) -
          kernel_value(kind, xm, yp, gamma) + kernel_value(kind, xm, ym, gamma)) /
         (4.0 * hx * hy);
}

}  // namespace

TEST_CASE("kernel value basics") {
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(2, 1.0);
  Rng rng(1);
  const Eigen::VectorXd x = random_vector(rng, 2, -1, 1);

  SUBCASE("k(x,x) = 1 for every kind") {
    for (const auto& kind : kAllKinds)
      CHECK(kernel_value(kind, x, x, gamma) == 1.0);
  }
  SUBCASE("gaussian at squared radius 2 is exp(-1)") {
    Eigen::VectorXd y = x;
    y[0] += std::sqrt(2.0);
    CHECK(kernel_value(KernelKind::gaussian(), x, y, gamma) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  }
  SUBCASE("matern printed form matches its formula") {
    Eigen::VectorXd y = x;
    y[1] += 0.7;
    const double u = 0.7;
    const double expected =
        (1.0 + std::sqrt(3.0) * u + u * u) * std::exp(-std::sqrt(3.0) * u);
    CHECK(kernel_value(KernelKind::matern(), x, y, gamma) ==
          doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("rational quadratic approaches the gaussian kernel for huge alpha") {
  const KernelKind rq = KernelKind::rational_quadratic(1e6);
  const KernelKind gauss = KernelKind::gaussian();
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(1, 1.0);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  for (double u = 0.0; u <= 5.0; u += 0.05) {
    Eigen::VectorXd y(1);
    y << u;
    const double kg = kernel_value(gauss, x, y, gamma);
    const double kr = kernel_value(rq, x, y, gamma);
    CHECK(std::abs(kr - kg) < 1e-4);            // absolute over [0,5]
    if (u <= 3.0) CHECK(close_rel(kr, kg, 1e-4, 0.0));  // relative near 0
  }
}

TEST_CASE("kernel bounds: 0 < k <= 1 with equality only at x = y") {
  Rng rng(5);
  for (const auto& kind : kAllKinds) {
    for (int trial = 0; trial < 50; ++trial) {
      const int n_d = 1 + static_cast<int>(rng.uniform_index(4));
      const Eigen::VectorXd gamma = random_loguniform(rng, n_d, 0.1, 10.0);
      const Eigen::VectorXd x = random_vector(rng, n_d, -2, 2);
      Eigen::VectorXd y = random_vector(rng, n_d, -2, 2);
      if ((x - y).norm() < 1e-12) y[0] += 0.5;
      const double k = kernel_value(kind, x, y, gamma);
      CHECK(k > 0.0);
      CHECK(k < 1.0);
      CHECK(kernel_value(kind, x, x, gamma) == 1.0);
    }
  }
}

TEST_CASE("first derivatives vanish at x = y and match the derived value") {
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(2, 1.0);
  Eigen::VectorXd dk_dx(2), dk_dy(2);
  for (const auto& kind : kAllKinds) {
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(2, 0.3);
    kernel_first_derivs(kind, x, x, gamma, dk_dx, dk_dy);
    CHECK(dk_dx.norm() == 0.0);
    CHECK(dk_dy.norm() == 0.0);
  }
  // Gaussian, gamma = 1, x - y = (1, 0): dk/dx = (-exp(-1/2), 0).
  Eigen::VectorXd x(2), y(2);
  x << 1.0, 0.5;
  y << 0.0, 0.5;
  kernel_first_derivs(KernelKind::gaussian(), x, y, gamma, dk_dx, dk_dy);
  CHECK(dk_dx[0] == doctest::Approx(-std::exp(-0.5)).epsilon(1e-14));
  CHECK(dk_dx[1] == doctest::Approx(0.0));
  CHECK((dk_dx + dk_dy).norm() == 0.0);
}

TEST_CASE("stationarity: dk/dx(x,y) equals dk/dy(y,x) on random pairs") {
  Rng rng(17);
  Eigen::VectorXd a1, a2, b1, b2;
  for (const auto& kind : kAllKinds) {
    for (int trial = 0; trial < 100; ++trial) {
      const int n_d = 1 + static_cast<int>(rng.uniform_index(5));
      const Eigen::VectorXd gamma = random_loguniform(rng, n_d, 0.2, 5.0);
      const Eigen::VectorXd x = random_vector(rng, n_d, -2, 2);
      const Eigen::VectorXd y = random_vector(rng, n_d, -2, 2);
      kernel_first_derivs(kind, x, y, gamma, a1, a2);
      kernel_first_derivs(kind, y, x, gamma, b1, b2);
      CHECK((a1 - b2).norm() <= 1e-14 * (1.0 + a1.norm()));
    }
  }
}

TEST_CASE("analytic first derivatives match central finite differences") {
  Rng rng(23);
  Eigen::VectorXd dk_dx, dk_dy;
  for (const auto& kind : kAllKinds) {
    for (int trial = 0; trial < 200; ++trial) {
      const int n_d = 1 + static_cast<int>(rng.uniform_index(5));
      const Eigen::VectorXd gamma = random_loguniform(rng, n_d, 0.2, 5.0);
      const Eigen::VectorXd x = random_vector(rng, n_d, -2, 2);
      const Eigen::VectorXd y = random_vector(rng, n_d, -2, 2);
      kernel_first_derivs(kind, x, y, gamma, dk_dx, dk_dy);
      const Eigen::VectorXd fd_x = gebo::test::fd_gradient(
          [&](const Eigen::VectorXd& xv) {
            return kernel_value(kind, xv, y, gamma);
          },
          x);
      const Eigen::VectorXd fd_y = gebo::test::fd_gradient(
          [&](const Eigen::VectorXd& yv) {
            return kernel_value(kind, x, yv, gamma);
          },
          y);
      CHECK(gebo::test::close_rel_vec(dk_dx, fd_x, 1e-5));
      CHECK(gebo::test::close_rel_vec(dk_dy, fd_y, 1e-5));
    }
  }
}

TEST_CASE("cross hessian at coincident points and against the FD oracle") {
  SUBCASE("diagonal gamma^2 at x = y") {
    Eigen::VectorXd gamma(2);
    gamma << 2.0, 3.0;
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    const Eigen::MatrixXd h =
        kernel_cross_hessian(KernelKind::gaussian(), x, x, gamma);
    CHECK(h(0, 0) == doctest::Approx(4.0));
    CHECK(h(1, 1) == doctest::Approx(9.0));
    CHECK(h(0, 1) == 0.0);
    CHECK(h(1, 0) == 0.0);
    for (const auto& kind : kAllKinds) {
      const Eigen::MatrixXd hs = kernel_cross_hessian(kind, x, x, gamma);
      CHECK((hs - hs.transpose()).norm() == 0.0);
    }
  }
  SUBCASE("matches mixed second-order FD of the value on random inputs") {
    Rng rng(29);
    for (const auto& kind : kAllKinds) {
      for (int trial = 0; trial < 100; ++trial) {
        const int n_d = 1 + static_cast<int>(rng.uniform_index(4));
        const Eigen::VectorXd gamma = random_loguniform(rng, n_d, 0.2, 3.0);
        const Eigen::VectorXd x = random_vector(rng, n_d, -2, 2);
        const Eigen::VectorXd y = random_vector(rng, n_d, -2, 2);
        const Eigen::MatrixXd h = kernel_cross_hessian(kind, x, y, gamma);
        Eigen::MatrixXd h_fd(n_d, n_d);
        for (Eigen::Index d = 0; d < n_d; ++d)
          for (Eigen::Index e = 0; e < n_d; ++e)
            h_fd(d, e) = fd_cross(kind, x, y, gamma, d, e);
        CHECK((h - h_fd).norm() <= 1e-4 * (1e-8 + h_fd.norm()));
      }
    }
  }
}

TEST_CASE("alpha direction derivatives match finite differences") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const double alpha = std::pow(10.0, rng.uniform(-0.5, 1.5));
    const double s = rng.uniform(0.0, 9.0);
    const KernelKind kind = KernelKind::rational_quadratic(alpha);
    const RadialAlphaDerivs ad = radial_alpha_derivs(kind, s);
    const double h = 1e-6;
    const auto at = [&](double log_alpha) {
      return radial_coeffs(
          KernelKind::rational_quadratic(std::exp(log_alpha)), s);
    };
    const double la = std::log(alpha);
    const RadialCoeffs up = at(la + h), dn = at(la - h);
    CHECK(close_rel(ad.dvalue, (up.value - dn.value) / (2 * h), 1e-5, 1e-9));
    CHECK(close_rel(ad.da, (up.a - dn.a) / (2 * h), 1e-5, 1e-9));
    CHECK(close_rel(ad.db, (up.b - dn.b) / (2 * h), 1e-5, 1e-9));
  }
}

TEST_CASE("exp underflow yields exact zeros") {
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(1, 1.0);
  Eigen::VectorXd x(1), y(1);
  x << 0.0;
  y << 1e4;
  Eigen::VectorXd dk_dx, dk_dy;
  for (const auto& kind : {KernelKind::gaussian(), KernelKind::matern()}) {
    CHECK(kernel_value(kind, x, y, gamma) == 0.0);
    kernel_first_derivs(kind, x, y, gamma, dk_dx, dk_dy);
    CHECK(dk_dx.norm() == 0.0);
    CHECK(kernel_cross_hessian(kind, x, y, gamma).norm() == 0.0);
  }
}

TEST_CASE("validation failures throw") {
  const Eigen::VectorXd gamma2 = Eigen::VectorXd::Constant(2, 1.0);
  Eigen::VectorXd bad_gamma(2);
  bad_gamma << 1.0, -1.0;
  const Eigen::VectorXd x2 = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd x3 = Eigen::VectorXd::Zero(3);
  CHECK_THROWS(kernel_value(KernelKind::gaussian(), x2, x3, gamma2));
  CHECK_THROWS(kernel_value(KernelKind::gaussian(), x2, x2, bad_gamma));
  CHECK_THROWS(kernel_value(KernelKind::rational_quadratic(-1.0), x2, x2, gamma2));
  CHECK_THROWS(parse_kernel("spline"));
  CHECK(parse_kernel("gaussian").family == KernelFamily::Gaussian);
  CHECK(parse_kernel("matern").family == KernelFamily::MaternPrinted);
  CHECK(parse_kernel("ratquad").family == KernelFamily::RationalQuadratic);
}
