#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "gebo/local_model.hpp"
#include "gebo/rng.hpp"
#include "test_util.hpp"

using namespace gebo;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::MatrixXd line_history(int n, double spacing = 1.0) {
  Eigen::MatrixXd h(n, 1);
  for (int i = 0; i < n; ++i) h(i, 0) = spacing * i;
  return h;
}

}  // namespace

TEST_CASE("small histories are used whole") {
  const Eigen::MatrixXd history = line_history(5);
  const DataRegion region = select_data_region(history, 0);
  CHECK(region.indices.size() == 5);
  CHECK(region.radius == doctest::Approx(4.0));
}

TEST_CASE("recent points can stretch the region radius") {
  // 30 points: 27 clustered near the incumbent, the last 3 far away.
  Eigen::MatrixXd history(30, 1);
  for (int i = 0; i < 27; ++i) history(i, 0) = 0.01 * i;
  history(27, 0) = 50.0;
  history(28, 0) = 52.0;
  history(29, 0) = 54.0;
  const DataRegion region = select_data_region(history, 0, 20, 3);
  CHECK(region.indices.size() == 30);
  CHECK(region.radius == doctest::Approx(54.0));
}

TEST_CASE("close points bound the region when recents are close") {
  const Eigen::MatrixXd history = line_history(40, 0.1);
  const DataRegion region = select_data_region(history, 0, 20, 3);
  // l_close = 1.9 but the most recent points sit at 3.7..3.9.
  CHECK(region.radius == doctest::Approx(3.9));
  CHECK(region.indices.size() == 40);
}

TEST_CASE("duplicates of the incumbent always belong to the region") {
  Eigen::MatrixXd history(25, 1);
  for (int i = 0; i < 25; ++i) history(i, 0) = 2.0 + i;
  history(24, 0) = history(3, 0);
  const DataRegion region = select_data_region(history, 3, 5, 1);
  CHECK(std::find(region.indices.begin(), region.indices.end(), 3) !=
        region.indices.end());
  CHECK(std::find(region.indices.begin(), region.indices.end(), 24) !=
        region.indices.end());
}

TEST_CASE("region always contains the incumbent and the recent points") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(60));
    Eigen::MatrixXd history(n, 3);
    for (int i = 0; i < n; ++i)
      history.row(i) = gebo::test::random_vector(rng, 3, -5, 5).transpose();
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (history.row(i).norm() < history.row(best).norm()) best = i;
    const DataRegion region = select_data_region(history, best, 20, 3);
    const auto has = [&](int idx) {
      return std::find(region.indices.begin(), region.indices.end(), idx) !=
             region.indices.end();
    };
    CHECK(has(best));
    for (int k = std::max(0, n - 3); k < n; ++k) CHECK(has(k));
  }
}

TEST_CASE("circular trust region value and gradient") {
  Eigen::VectorXd x(2), xb(2);
  xb << 1.0, -1.0;
  SUBCASE("zero at the incumbent") { CHECK(circular_tr_value(xb, xb) == 0.0); }
  SUBCASE("squared distance") {
    x << 4.0, 3.0;
    CHECK(circular_tr_value(x, xb) == doctest::Approx(25.0));
  }
  SUBCASE("gradient matches finite differences") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      const Eigen::VectorXd xt = gebo::test::random_vector(rng, 2, -3, 3);
      const Eigen::VectorXd grad = circular_tr_grad(xt, xb);
      const Eigen::VectorXd fd = gebo::test::fd_gradient(
          [&](const Eigen::VectorXd& xv) { return circular_tr_value(xv, xb); },
          xt, 1e-7);
      CHECK((grad - fd).norm() <= 1e-7 * (1.0 + fd.norm()));
    }
  }
}

TEST_CASE("circular bound update follows the three-branch rule") {
  const TrustRegionParams params;
  SUBCASE("first data point returns the default") {
    CHECK(update_circular_bound(params, 0.37, 1.0, 2.0, 0.5, 0.2, 1, 9.0) ==
          doctest::Approx(1.0));
  }
  SUBCASE("progress expands from the last step size") {
    CHECK(update_circular_bound(params, 0.5, 0.4, 0.7, 0.5, 0.3, 4, 100.0) ==
          doctest::Approx(0.6));
  }
  SUBCASE("progress never shrinks the bound") {
    CHECK(update_circular_bound(params, 0.5, 0.4, 0.7, 0.5, 0.01, 4, 100.0) ==
          doctest::Approx(0.5));
  }
  SUBCASE("one-step-old progress keeps the bound") {
    CHECK(update_circular_bound(params, 0.5, 0.9, 0.5, 0.5, 0.3, 4, 100.0) ==
          doctest::Approx(0.5));
  }
  SUBCASE("two stale evaluations halve the bound") {
    CHECK(update_circular_bound(params, 0.5, 0.9, 0.8, 0.5, 0.3, 4, 100.0) ==
          doctest::Approx(0.25));
  }
  SUBCASE("the data radius caps the bound once five points exist") {
    CHECK(update_circular_bound(params, 0.5, 0.4, 0.7, 0.5, 0.3, 5, 0.4) ==
          doctest::Approx(0.36));
  }
  SUBCASE("geometric contraction under consecutive stalls") {
    double u = 1.0;
    for (int k = 1; k <= 6; ++k) {
      u = update_circular_bound(params, u, 2.0, 2.0, 1.0, 0.1, 4, 100.0);
      CHECK(u == doctest::Approx(std::pow(0.5, k)));
    }
  }
}

TEST_CASE("sigma bound activation and clamping") {
  const TrustRegionParams params;
  SUBCASE("inactive below ten points") {
    CHECK(update_sigma_bound(params, 0.1, 0.4, 0.5, 0.5, 0.02, 9) == kInf);
  }
  SUBCASE("activates at the default value") {
    CHECK(update_sigma_bound(params, kInf, 0.4, 0.5, 0.5, 0.02, 10) ==
          doctest::Approx(0.04));
  }
  SUBCASE("activation also covers regions that jump past ten") {
    CHECK(update_sigma_bound(params, kInf, 0.4, 0.5, 0.5, 0.02, 14) ==
          doctest::Approx(0.04));
  }
  SUBCASE("stalls shrink but respect the lower clamp") {
    CHECK(update_sigma_bound(params, 0.01, 0.9, 0.8, 0.5, 0.02, 12) ==
          doctest::Approx(0.005));
    CHECK(update_sigma_bound(params, 0.004, 0.9, 0.8, 0.5, 0.02, 12) ==
          doctest::Approx(0.0025));
  }
  SUBCASE("progress grows but respects the upper clamp") {
    CHECK(update_sigma_bound(params, 0.04, 0.4, 0.7, 0.5, 0.1, 12) ==
          doctest::Approx(0.16));
    CHECK(update_sigma_bound(params, 0.04, 0.4, 0.7, 0.5, 0.03, 12) ==
          doctest::Approx(0.06));
  }
  SUBCASE("active bounds stay within the clamps") {
    Rng rng(5);
    double u = 0.04;
    for (int step = 0; step < 200; ++step) {
      u = update_sigma_bound(params, u, rng.uniform(0, 1),
                             rng.uniform(0, 1), rng.uniform(0, 1),
                             rng.uniform(0, 0.2), 12);
      CHECK(u >= params.us_min);
      CHECK(u <= params.us_max);
    }
  }
}

TEST_CASE("updates are pure functions of their inputs") {
  const TrustRegionParams params;
  const double a =
      update_circular_bound(params, 0.7, 1.0, 2.0, 1.5, 0.2, 6, 3.0);
  const double b =
      update_circular_bound(params, 0.7, 1.0, 2.0, 1.5, 0.2, 6, 3.0);
  CHECK(a == b);
}
