#pragma once

#include <string>

#include <Eigen/Core>

namespace gebo {

enum class KernelFamily { Gaussian, MaternPrinted, RationalQuadratic };

// Stationary kernel selector. MaternPrinted is the sqrt(3)-based form
//   (1 + sqrt(3)|r| + |r|^2) exp(-sqrt(3)|r|)
// kept exactly as written; it is not the textbook Matern 5/2.
struct KernelKind {
  KernelFamily family = KernelFamily::Gaussian;
  double alpha = 1.0;  // rational quadratic shape, > 0; ignored otherwise

  static KernelKind gaussian() { return {KernelFamily::Gaussian, 1.0}; }
  static KernelKind matern() { return {KernelFamily::MaternPrinted, 1.0}; }
  static KernelKind rational_quadratic(double alpha) {
    return {KernelFamily::RationalQuadratic, alpha};
  }

  bool has_alpha() const { return family == KernelFamily::RationalQuadratic; }
  KernelKind with_alpha(double a) const { return {family, a}; }
};

// CLI names: "gaussian" | "matern" | "ratquad".
KernelKind parse_kernel(const std::string& name);
std::string kernel_name(const KernelKind& kind);

// Radial coefficients of a stationary kernel at squared scaled radius
// s = |r|^2 with r_d = gamma_d (x_d - y_d):
//   k(r)              = value
//   dk/dr_i           = a r_i
//   d2k/dr_i dr_j     = a delta_ij + b r_i r_j
//   c                 = b'(u)/u at u = sqrt(s)
// c enters only the length-scale derivatives of the covariance blocks.
// All coefficients are exactly 0 once the exponent underflows.
struct RadialCoeffs {
  double value = 0.0;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

RadialCoeffs radial_coeffs(const KernelKind& kind, double s);

// d/d(ln alpha) of (value, a, b); rational quadratic only.
struct RadialAlphaDerivs {
  double dvalue = 0.0;
  double da = 0.0;
  double db = 0.0;
};

RadialAlphaDerivs radial_alpha_derivs(const KernelKind& kind, double s);

// k(x, y; gamma). Validates dimensions, gamma > 0 and alpha > 0.
double kernel_value(const KernelKind& kind, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y, const Eigen::VectorXd& gamma);

// dk/dx and dk/dy; for stationary kernels dk/dx = -dk/dy.
void kernel_first_derivs(const KernelKind& kind, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y,
                         const Eigen::VectorXd& gamma, Eigen::VectorXd& dk_dx,
                         Eigen::VectorXd& dk_dy);

// Matrix of d2k/(dx_d dy_e); equals diag(gamma^2) at x = y for the Gaussian.
Eigen::MatrixXd kernel_cross_hessian(const KernelKind& kind,
                                     const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& gamma);

}  // namespace gebo
