#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "gebo/gp.hpp"

namespace gebo {

struct AcquisitionKind {
  enum class Type { ExpectedImprovement, UpperConfidence };
  Type type = Type::ExpectedImprovement;
  double omega = 0.0;  // upper-confidence weight, >= 0

  static AcquisitionKind expected_improvement() { return {}; }
  static AcquisitionKind upper_confidence(double omega) {
    return {Type::UpperConfidence, omega};
  }
};

// CLI names: "ei" | "uc:<omega>".
AcquisitionKind parse_acquisition(const std::string& name);
std::string acquisition_name(const AcquisitionKind& kind);

struct AcqEval {
  double value = 0.0;
  Eigen::VectorXd grad;
};

// Acquisition value and analytic gradient. Expected improvement is negated
// so that minimizing the value maximizes improvement; below sigma = 1e-12
// the degenerate limit -max(f_best - mean, 0) is used. Upper confidence is
// mean - omega sigma.
AcqEval acq_value_grad(const AcquisitionKind& kind, const FittedSurrogate& s,
                       const Eigen::VectorXd& x, double f_best);

// Rows a x <= b.
struct LinearConstraints {
  Eigen::MatrixXd a;
  Eigen::VectorXd b;
  Eigen::Index count() const { return b.size(); }
};

struct AcqMinimizeOptions {
  int n_lhs = 5;
  int n_best = 5;
  double constraint_tol = 1e-8;
  double sigma_constraint_tol = 1e-6;
  int max_iters = 200;  // inner-solver iteration budget per start
};

struct AcqResult {
  Eigen::VectorXd x;
  double q = 0.0;
  double g_circ = 0.0;   // squared distance to x_best at the returned point
  double g_sigma = 0.0;  // variance ratio at the returned point
  bool fallback = false;  // no feasible candidate; circular-clipped step
};

// Multi-start minimization of the acquisition over the circular and sigma
// trust regions (u_sigma = inf deactivates the latter) plus optional linear
// constraints. Starts are an LHS over x_best +- sqrt(u_c) and the n_best
// lowest-merit data-region points.
AcqResult minimize_acquisition(const FittedSurrogate& s,
                               const AcquisitionKind& kind, double u_c,
                               double u_sigma, const Eigen::VectorXd& x_best,
                               double f_best,
                               const Eigen::MatrixXd& region_points,
                               const Eigen::VectorXd& region_merits,
                               const LinearConstraints* linear,
                               std::uint64_t seed,
                               const AcqMinimizeOptions& opts = {});

}  // namespace gebo
