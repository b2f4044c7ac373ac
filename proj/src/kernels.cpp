#include "gebo/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace gebo {

namespace {

// exp(x) for x below this is exactly 0 in IEEE double.
constexpr double kExpUnderflow = -745.0;

// Below this radius the c = b'(u)/u coefficient of the MaternPrinted kernel
// is replaced by 0; it only ever multiplies O(u^4) products.
constexpr double kTinyRadius = 1e-150;

void validate(const KernelKind& kind, const Eigen::VectorXd& x,
              const Eigen::VectorXd& y, const Eigen::VectorXd& gamma) {
  if (x.size() != y.size() || x.size() != gamma.size())
    throw std::invalid_argument("kernel: dimension mismatch");
  if ((gamma.array() <= 0.0).any())
    throw std::invalid_argument("kernel: gamma entries must be positive");
  if (kind.has_alpha() && !(kind.alpha > 0.0))
    throw std::invalid_argument("kernel: rational quadratic alpha must be positive");
}

double scaled_sq_radius(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& gamma) {
  return (gamma.array() * (x - y).array()).square().sum();
}

}  // namespace

KernelKind parse_kernel(const std::string& name) {
  if (name == "gaussian") return KernelKind::gaussian();
  if (name == "matern") return KernelKind::matern();
  if (name == "ratquad") return KernelKind::rational_quadratic(1.0);
  throw std::invalid_argument("unknown kernel name: " + name);
}

std::string kernel_name(const KernelKind& kind) {
  switch (kind.family) {
    case KernelFamily::Gaussian: return "gaussian";
    case KernelFamily::MaternPrinted: return "matern";
    case KernelFamily::RationalQuadratic: return "ratquad";
  }
  return "unknown";
}

RadialCoeffs radial_coeffs(const KernelKind& kind, double s) {
  if (!(s >= 0.0)) throw std::invalid_argument("radial_coeffs: s must be >= 0");
  RadialCoeffs out;
  switch (kind.family) {
    case KernelFamily::Gaussian: {
      if (-0.5 * s < kExpUnderflow) return out;
      const double k = std::exp(-0.5 * s);
      out.value = k;
      out.a = -k;
      out.b = k;
      out.c = -k;
      return out;
    }
    case KernelFamily::MaternPrinted: {
      const double u = std::sqrt(s);
      const double e = -std::sqrt(3.0) * u;
      if (e < kExpUnderflow) return out;
      const double ex = std::exp(e);
      out.value = (1.0 + std::sqrt(3.0) * u + s) * ex;
      out.a = -(1.0 + std::sqrt(3.0) * u) * ex;
      out.b = 3.0 * ex;
      out.c = (u > kTinyRadius) ? -3.0 * std::sqrt(3.0) * ex / u : 0.0;
      return out;
    }
    case KernelFamily::RationalQuadratic: {
      const double alpha = kind.alpha;
      const double w = s / (2.0 * alpha);
      const double lnt = std::log1p(w);
      if (-alpha * lnt < kExpUnderflow) return out;
      out.value = std::exp(-alpha * lnt);
      out.a = -std::exp(-(alpha + 1.0) * lnt);
      out.b = (alpha + 1.0) / alpha * std::exp(-(alpha + 2.0) * lnt);
      out.c = -(alpha + 1.0) * (alpha + 2.0) / (alpha * alpha) *
              std::exp(-(alpha + 3.0) * lnt);
      return out;
    }
  }
  return out;
}

RadialAlphaDerivs radial_alpha_derivs(const KernelKind& kind, double s) {
  if (kind.family != KernelFamily::RationalQuadratic)
    throw std::invalid_argument("radial_alpha_derivs: kernel has no alpha");
  const double alpha = kind.alpha;
  const RadialCoeffs rc = radial_coeffs(kind, s);
  const double w = s / (2.0 * alpha);
  const double t = 1.0 + w;
  const double lnt = std::log1p(w);
  RadialAlphaDerivs out;
  out.dvalue = rc.value * (-alpha * lnt + s / (2.0 * t));
  out.da = rc.a * (-alpha * lnt + (alpha + 1.0) * s / (2.0 * alpha * t));
  out.db = rc.b * (alpha / (alpha + 1.0) - 1.0 - alpha * lnt +
                   (alpha + 2.0) * s / (2.0 * alpha * t));
  return out;
}

double kernel_value(const KernelKind& kind, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& y, const Eigen::VectorXd& gamma) {
  validate(kind, x, y, gamma);
  return radial_coeffs(kind, scaled_sq_radius(x, y, gamma)).value;
}

void kernel_first_derivs(const KernelKind& kind, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y,
                         const Eigen::VectorXd& gamma, Eigen::VectorXd& dk_dx,
                         Eigen::VectorXd& dk_dy) {
  validate(kind, x, y, gamma);
  const Eigen::ArrayXd r = gamma.array() * (x - y).array();
  const RadialCoeffs rc = radial_coeffs(kind, r.square().sum());
  // dk/dx_d = gamma_d a r_d; dk/dy_d flips the sign of r.
  dk_dx = (gamma.array() * rc.a * r).matrix();
  dk_dy = -dk_dx;
}

Eigen::MatrixXd kernel_cross_hessian(const KernelKind& kind,
                                     const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& y,
                                     const Eigen::VectorXd& gamma) {
  validate(kind, x, y, gamma);
  const auto dim = x.size();
  const Eigen::ArrayXd r = gamma.array() * (x - y).array();
  const RadialCoeffs rc = radial_coeffs(kind, r.square().sum());
  Eigen::MatrixXd h(dim, dim);
  for (Eigen::Index d = 0; d < dim; ++d)
    for (Eigen::Index e = 0; e < dim; ++e) {
      const double delta = (d == e) ? rc.a : 0.0;
      h(d, e) = -gamma[d] * gamma[e] * (delta + rc.b * r[d] * r[e]);
    }
  return h;
}

}  // namespace gebo
