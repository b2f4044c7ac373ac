#include "gebo/local_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gebo {

DataRegion select_data_region(const Eigen::MatrixXd& history, int best_index,
                              int n_close, int n_last) {
  const auto n_x = history.rows();
  if (n_x < 1) throw std::invalid_argument("select_data_region: empty history");
  if (best_index < 0 || best_index >= n_x)
    throw std::invalid_argument("select_data_region: best index out of range");
  if (n_close < 1 || n_last < 0)
    throw std::invalid_argument("select_data_region: invalid counts");

  Eigen::VectorXd dist(n_x);
  for (Eigen::Index i = 0; i < n_x; ++i)
    dist[i] = (history.row(i) - history.row(best_index)).norm();

  DataRegion region;
  if (n_x <= n_close) {
    region.indices.resize(static_cast<std::size_t>(n_x));
    for (Eigen::Index i = 0; i < n_x; ++i)
      region.indices[static_cast<std::size_t>(i)] = static_cast<int>(i);
    region.radius = dist.maxCoeff();
    return region;
  }

  const Eigen::Index first_recent =
      std::max<Eigen::Index>(n_x - n_last, 0);
  double l_last = 0.0;
  for (Eigen::Index i = first_recent; i < n_x; ++i)
    l_last = std::max(l_last, dist[i]);

  std::vector<double> sorted(dist.data(), dist.data() + n_x);
  std::nth_element(sorted.begin(), sorted.begin() + (n_close - 1),
                   sorted.end());
  const double l_close = sorted[static_cast<std::size_t>(n_close - 1)];

  region.radius = std::max(l_last, l_close);
  for (Eigen::Index i = 0; i < n_x; ++i)
    if (dist[i] <= region.radius)
      region.indices.push_back(static_cast<int>(i));
  return region;
}

double circular_tr_value(const Eigen::VectorXd& x,
                         const Eigen::VectorXd& x_best) {
  if (x.size() != x_best.size())
    throw std::invalid_argument("circular_tr_value: dimension mismatch");
  return (x - x_best).squaredNorm();
}

Eigen::VectorXd circular_tr_grad(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& x_best) {
  return 2.0 * (x - x_best);
}

double update_circular_bound(const TrustRegionParams& params, double uc_prev,
                             double j_latest, double j_prev,
                             double j_best_prev, double g_prev, int n_data,
                             double data_radius) {
  double u_c;
  if (n_data <= 1) {
    u_c = params.uc0;
  } else if (j_latest < j_best_prev) {
    u_c = std::max(params.rho_inc * g_prev, uc_prev);
  } else if (j_prev <= j_best_prev) {
    u_c = uc_prev;
  } else {
    u_c = params.rho_dec * uc_prev;
  }
  if (n_data >= 5) u_c = std::min(u_c, params.rho_data * data_radius);
  return u_c;
}

double update_sigma_bound(const TrustRegionParams& params, double us_prev,
                          double j_latest, double j_prev, double j_best_prev,
                          double g_sigma_prev, int n_data) {
  if (n_data < params.sigma_activation)
    return std::numeric_limits<double>::infinity();
  // Activation step, including regions that jump past the threshold.
  if (n_data == params.sigma_activation || !std::isfinite(us_prev))
    return params.us0;
  if (j_latest < j_best_prev)
    return std::max(std::min(params.rho_inc * g_sigma_prev, params.us_max),
                    us_prev);
  if (j_prev <= j_best_prev) return us_prev;
  return std::max(params.rho_dec * us_prev, params.us_min);
}

}  // namespace gebo
