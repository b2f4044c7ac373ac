#pragma once

#include <optional>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gebo/kernels.hpp"

namespace gebo {

// Evaluation points with function and gradient observations. The
// observation vector keeps the block layout
//   [f_1 .. f_nx, df/dx_1 at all points, ..., df/dx_nd at all points]
// shared by every covariance and cross-covariance in the library.
struct DataSet {
  Eigen::MatrixXd points;  // n_x x n_d
  Eigen::VectorXd fgrad;   // n_x (n_d + 1)

  Eigen::Index n_points() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
  Eigen::Index size() const { return points.rows() * (points.cols() + 1); }
};

DataSet make_dataset(const Eigen::MatrixXd& points,
                     const Eigen::VectorXd& values,
                     const Eigen::MatrixXd& grads);

struct Hyperparameters {
  Eigen::VectorXd gamma;        // length-scale rates, > 0
  double sigma_k = 1.0;         // signal scale, >= 0
  double beta = 0.0;            // constant mean
  double sigma_f = 0.0;         // function-noise estimate, >= 0
  double sigma_gf = 0.0;        // gradient-noise estimate, >= 0
  std::optional<double> alpha;  // rational quadratic shape, > 0 when present
};

void validate_hyperparameters(const Hyperparameters& hp, Eigen::Index dim);

// Kernel kind with alpha overridden by the hyperparameter when present.
KernelKind effective_kind(const KernelKind& kind, const Hyperparameters& hp);

// Flat index of (derivative block d, point i); block 0 is the function.
inline Eigen::Index block_index(Eigen::Index d, Eigen::Index i,
                                Eigen::Index n_x) {
  return d * n_x + i;
}

// Gradient-enhanced kernel matrix: function block, first-derivative blocks,
// and cross-second-derivative blocks. Exactly symmetric by construction.
Eigen::MatrixXd build_grad_kernel_matrix(const Eigen::MatrixXd& points,
                                         const KernelKind& kind,
                                         const Eigen::VectorXd& gamma);

// Unit-scale covariance M = Kg + Vg / sigma_k^2 (the sigma_k^2-scaled noise
// diagonal). Requires sigma_k > 0 whenever a noise estimate is positive.
Eigen::MatrixXd unit_covariance(const DataSet& data, const Hyperparameters& hp,
                                const KernelKind& kind);

struct Preconditioned {
  Eigen::VectorXd pdiag;  // P, sqrt of the input diagonal
  Eigen::MatrixXd kdot;   // P^-1 M P^-1, exact unit diagonal
  double nugget = 0.0;    // max row sum of |kdot| / (cond_max - 1)
};

// Diagonal preconditioner and nugget sized so that
// cond(kdot + nugget I) <= cond_max for any input with positive diagonal.
Preconditioned precondition_and_nugget(const Eigen::MatrixXd& m_unit,
                                       double cond_max);

// Cholesky factorization of kdot + nugget I together with the pieces needed
// to solve against P (kdot + nugget I) P = M + nugget diag(M).
class GpFactor {
 public:
  static GpFactor compute(const Eigen::MatrixXd& m_unit, double cond_max);

  const Eigen::VectorXd& pdiag() const { return pdiag_; }
  double nugget() const { return nugget_; }
  const Eigen::MatrixXd& chol_lower() const { return chol_lower_; }
  Eigen::Index size() const { return pdiag_.size(); }

  // (P (kdot + eta I) P)^-1 v via the triangular factor.
  Eigen::VectorXd scaled_solve(const Eigen::VectorXd& v) const;
  Eigen::MatrixXd scaled_inverse() const;

  // v^T (P (kdot + eta I) P)^-1 v as a squared norm (never negative).
  double quad_form(const Eigen::VectorXd& v) const;

  // ln det(P (kdot + eta I) P).
  double logdet() const;

 private:
  Eigen::VectorXd pdiag_;
  double nugget_ = 0.0;
  Eigen::MatrixXd chol_lower_;
};

// Immutable fitted gradient-enhanced GP; posterior evaluations on a fitted
// surrogate are safe to run concurrently.
class FittedSurrogate {
 public:
  FittedSurrogate(DataSet data, Hyperparameters hp, KernelKind kind,
                  GpFactor factor);

  const DataSet& data() const { return data_; }
  const Hyperparameters& hp() const { return hp_; }
  const KernelKind& kind() const { return kind_; }
  const GpFactor& factor() const { return factor_; }

  // Cross covariance k_grad(X, x) in block order and optionally its
  // Jacobian with respect to x.
  void cross_cov(const Eigen::VectorXd& x, Eigen::VectorXd& kvec,
                 Eigen::MatrixXd* jac) const;

  double posterior_mean(const Eigen::VectorXd& x) const;
  Eigen::VectorXd posterior_mean_grad(const Eigen::VectorXd& x) const;

  // sigma^2 / sigma_k^2 in [0, 1]; tiny negatives (> -1e-10) clamp to 0,
  // anything farther outside [0, 1] reports a broken factorization.
  double variance_ratio(const Eigen::VectorXd& x) const;
  double posterior_variance(const Eigen::VectorXd& x) const;

  struct Posterior {
    double mean = 0.0;
    double ratio = 0.0;
    Eigen::VectorXd mean_grad;
    Eigen::VectorXd ratio_grad;
  };
  // Single pass sharing the cross-covariance work; gradients only when asked.
  Posterior evaluate(const Eigen::VectorXd& x, bool with_grads) const;

 private:
  DataSet data_;
  Hyperparameters hp_;
  KernelKind kind_;
  GpFactor factor_;
  Eigen::VectorXd resid_solve_;  // sigma_k^2 Sigma^-1 (fgrad - 1_mod beta)
};

FittedSurrogate fit_surrogate(const DataSet& data, const Hyperparameters& hp,
                              const KernelKind& kind, double cond_max);

// [1 .. 1, 0 .. 0]: ones on the function block, zeros on gradient blocks.
Eigen::VectorXd ones_mod(Eigen::Index n_x, Eigen::Index n_d);

}  // namespace gebo
