#pragma once

#include <vector>

#include <Eigen/Core>

namespace gebo {

// Subset of the evaluation history used for fitting: the closest points to
// the incumbent plus the most recent ones.
struct DataRegion {
  std::vector<int> indices;  // into the full history, ascending
  double radius = 0.0;       // max distance to x_best among selected
};

// history: one row per evaluated point, in evaluation order.
DataRegion select_data_region(const Eigen::MatrixXd& history, int best_index,
                              int n_close = 20, int n_last = 3);

// Trust-region constants; the sigma bounds are squared ratios.
struct TrustRegionParams {
  double rho_inc = 2.0;
  double rho_dec = 0.5;
  double rho_data = 0.9;
  double uc0 = 1.0;           // initial circular bound (squared distance)
  double us0 = 0.2 * 0.2;     // sigma bound on activation
  double us_min = 0.05 * 0.05;
  double us_max = 0.4 * 0.4;
  int sigma_activation = 10;  // data points needed before the sigma bound
};

struct TrustRegionState {
  double u_c = 1.0;
  double u_sigma = std::numeric_limits<double>::infinity();  // inactive
};

// Squared distance to the incumbent and its gradient.
double circular_tr_value(const Eigen::VectorXd& x,
                         const Eigen::VectorXd& x_best);
Eigen::VectorXd circular_tr_grad(const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& x_best);

// Bound updates. Progress grows the bound from the last accepted step size,
// one-step-old progress keeps it, two stale evaluations shrink it. The
// circular bound is additionally capped by the data-region radius once
// n_data >= 5; the sigma bound activates at sigma_activation points and is
// clamped into [us_min, us_max].
double update_circular_bound(const TrustRegionParams& params, double uc_prev,
                             double j_latest, double j_prev,
                             double j_best_prev, double g_prev, int n_data,
                             double data_radius);

double update_sigma_bound(const TrustRegionParams& params, double us_prev,
                          double j_latest, double j_prev, double j_best_prev,
                          double g_sigma_prev, int n_data);

}  // namespace gebo
