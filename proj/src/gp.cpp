#include "gebo/gp.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gebo {

namespace {

constexpr double kRatioSlack = 1e-10;

}  // namespace

DataSet make_dataset(const Eigen::MatrixXd& points,
                     const Eigen::VectorXd& values,
                     const Eigen::MatrixXd& grads) {
  const auto n_x = points.rows();
  const auto n_d = points.cols();
  if (values.size() != n_x || grads.rows() != n_x || grads.cols() != n_d)
    throw std::invalid_argument("make_dataset: shape mismatch");
  DataSet data;
  data.points = points;
  data.fgrad.resize(n_x * (n_d + 1));
  data.fgrad.head(n_x) = values;
  for (Eigen::Index d = 0; d < n_d; ++d)
    data.fgrad.segment((d + 1) * n_x, n_x) = grads.col(d);
  return data;
}

void validate_hyperparameters(const Hyperparameters& hp, Eigen::Index dim) {
  if (hp.gamma.size() != dim)
    throw std::invalid_argument("hyperparameters: gamma dimension mismatch");
  if ((hp.gamma.array() <= 0.0).any() || !hp.gamma.allFinite())
    throw std::invalid_argument("hyperparameters: gamma must be positive");
  if (!(hp.sigma_k >= 0.0) || !(hp.sigma_f >= 0.0) || !(hp.sigma_gf >= 0.0))
    throw std::invalid_argument("hyperparameters: scales must be nonnegative");
  if (hp.alpha && !(*hp.alpha > 0.0))
    throw std::invalid_argument("hyperparameters: alpha must be positive");
}

KernelKind effective_kind(const KernelKind& kind, const Hyperparameters& hp) {
  if (kind.has_alpha() && hp.alpha) return kind.with_alpha(*hp.alpha);
  return kind;
}

Eigen::MatrixXd build_grad_kernel_matrix(const Eigen::MatrixXd& points,
                                         const KernelKind& kind,
                                         const Eigen::VectorXd& gamma) {
  const auto n_x = points.rows();
  const auto n_d = points.cols();
  if (n_x < 1) throw std::invalid_argument("build_grad_kernel_matrix: empty data");
  if (gamma.size() != n_d)
    throw std::invalid_argument("build_grad_kernel_matrix: gamma mismatch");
  const auto n = n_x * (n_d + 1);
  Eigen::MatrixXd kg(n, n);

  Eigen::ArrayXd r(n_d);
  for (Eigen::Index i = 0; i < n_x; ++i) {
    for (Eigen::Index j = i; j < n_x; ++j) {
      r = gamma.array() * (points.row(i) - points.row(j)).transpose().array();
      const RadialCoeffs rc = radial_coeffs(kind, r.square().sum());

      kg(i, j) = rc.value;
      kg(j, i) = rc.value;
      for (Eigen::Index e = 0; e < n_d; ++e) {
        // d/dx_e on the row point, d/dy_e on the column point.
        const double first = gamma[e] * rc.a * r[e];
        const auto ge = block_index(e + 1, 0, n_x);
        kg(ge + i, j) = first;
        kg(j, ge + i) = first;
        kg(i, ge + j) = -first;
        kg(ge + j, i) = -first;
        for (Eigen::Index d = 0; d < n_d; ++d) {
          const auto gd = block_index(d + 1, 0, n_x);
          const double delta = (d == e) ? rc.a : 0.0;
          const double cross = -gamma[d] * gamma[e] * (delta + rc.b * r[d] * r[e]);
          kg(gd + i, ge + j) = cross;
          kg(ge + j, gd + i) = cross;
        }
      }
    }
  }
  return kg;
}

Eigen::MatrixXd unit_covariance(const DataSet& data, const Hyperparameters& hp,
                                const KernelKind& kind) {
  validate_hyperparameters(hp, data.dim());
  Eigen::MatrixXd m = build_grad_kernel_matrix(
      data.points, effective_kind(kind, hp), hp.gamma);
  if (hp.sigma_f > 0.0 || hp.sigma_gf > 0.0) {
    if (!(hp.sigma_k > 0.0))
      throw std::invalid_argument(
          "unit_covariance: sigma_k must be positive with noisy data");
    const double sk2 = hp.sigma_k * hp.sigma_k;
    const auto n_x = data.n_points();
    m.diagonal().head(n_x).array() += hp.sigma_f * hp.sigma_f / sk2;
    m.diagonal().tail(data.size() - n_x).array() +=
        hp.sigma_gf * hp.sigma_gf / sk2;
  }
  return m;
}

Preconditioned precondition_and_nugget(const Eigen::MatrixXd& m_unit,
                                       double cond_max) {
  if (!(cond_max > 1.0))
    throw std::invalid_argument("precondition_and_nugget: cond_max must be > 1");
  const Eigen::VectorXd diag = m_unit.diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite())
    throw std::invalid_argument(
        "precondition_and_nugget: covariance diagonal must be positive "
        "(invalid hyperparameters)");
  Preconditioned out;
  out.pdiag = diag.array().sqrt().matrix();
  const Eigen::VectorXd inv_p = out.pdiag.cwiseInverse();
  out.kdot = inv_p.asDiagonal() * m_unit * inv_p.asDiagonal();
  out.kdot.diagonal().setOnes();
  out.nugget = out.kdot.cwiseAbs().rowwise().sum().maxCoeff() / (cond_max - 1.0);
  return out;
}

GpFactor GpFactor::compute(const Eigen::MatrixXd& m_unit, double cond_max) {
  Preconditioned pre = precondition_and_nugget(m_unit, cond_max);
  GpFactor factor;
  factor.pdiag_ = std::move(pre.pdiag);
  factor.nugget_ = pre.nugget;
  pre.kdot.diagonal().array() += pre.nugget;
  Eigen::LLT<Eigen::MatrixXd> llt(pre.kdot);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "GpFactor: Cholesky failed despite conditioning bound (size="
        << m_unit.rows() << ", nugget=" << factor.nugget_
        << ", max |kdot|=" << pre.kdot.cwiseAbs().maxCoeff() << ")";
    throw std::runtime_error(msg.str());
  }
  factor.chol_lower_ = llt.matrixL();
  return factor;
}

Eigen::VectorXd GpFactor::scaled_solve(const Eigen::VectorXd& v) const {
  Eigen::VectorXd t = v.cwiseQuotient(pdiag_);
  chol_lower_.triangularView<Eigen::Lower>().solveInPlace(t);
  chol_lower_.triangularView<Eigen::Lower>().transpose().solveInPlace(t);
  return t.cwiseQuotient(pdiag_);
}

Eigen::MatrixXd GpFactor::scaled_inverse() const {
  const auto n = pdiag_.size();
  Eigen::MatrixXd inv = Eigen::MatrixXd::Identity(n, n);
  chol_lower_.triangularView<Eigen::Lower>().solveInPlace(inv);
  chol_lower_.triangularView<Eigen::Lower>().transpose().solveInPlace(inv);
  const Eigen::VectorXd inv_p = pdiag_.cwiseInverse();
  return inv_p.asDiagonal() * inv * inv_p.asDiagonal();
}

double GpFactor::quad_form(const Eigen::VectorXd& v) const {
  Eigen::VectorXd t = v.cwiseQuotient(pdiag_);
  chol_lower_.triangularView<Eigen::Lower>().solveInPlace(t);
  return t.squaredNorm();
}

double GpFactor::logdet() const {
  return 2.0 * pdiag_.array().log().sum() +
         2.0 * chol_lower_.diagonal().array().log().sum();
}

Eigen::VectorXd ones_mod(Eigen::Index n_x, Eigen::Index n_d) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n_x * (n_d + 1));
  v.head(n_x).setOnes();
  return v;
}

FittedSurrogate::FittedSurrogate(DataSet data, Hyperparameters hp,
                                 KernelKind kind, GpFactor factor)
    : data_(std::move(data)),
      hp_(std::move(hp)),
      kind_(kind),
      factor_(std::move(factor)) {
  const Eigen::VectorXd resid =
      data_.fgrad - ones_mod(data_.n_points(), data_.dim()) * hp_.beta;
  resid_solve_ = factor_.scaled_solve(resid);
}

FittedSurrogate fit_surrogate(const DataSet& data, const Hyperparameters& hp,
                              const KernelKind& kind, double cond_max) {
  if (data.n_points() < 1)
    throw std::invalid_argument("fit_surrogate: empty data");
  if (data.fgrad.size() != data.size())
    throw std::invalid_argument("fit_surrogate: observation size mismatch");
  const Eigen::MatrixXd m = unit_covariance(data, hp, kind);
  return {data, hp, kind, GpFactor::compute(m, cond_max)};
}

void FittedSurrogate::cross_cov(const Eigen::VectorXd& x,
                                Eigen::VectorXd& kvec,
                                Eigen::MatrixXd* jac) const {
  const auto n_x = data_.n_points();
  const auto n_d = data_.dim();
  if (x.size() != n_d)
    throw std::invalid_argument("cross_cov: dimension mismatch");
  const KernelKind kind = effective_kind(kind_, hp_);
  kvec.resize(data_.size());
  if (jac) jac->resize(data_.size(), n_d);

  Eigen::ArrayXd r(n_d);
  for (Eigen::Index i = 0; i < n_x; ++i) {
    r = hp_.gamma.array() * (data_.points.row(i).transpose() - x).array();
    const RadialCoeffs rc = radial_coeffs(kind, r.square().sum());
    kvec[i] = rc.value;
    for (Eigen::Index d = 0; d < n_d; ++d)
      kvec[block_index(d + 1, i, n_x)] = hp_.gamma[d] * rc.a * r[d];
    if (jac) {
      for (Eigen::Index e = 0; e < n_d; ++e) {
        // x is the second kernel argument; d/dx_e flips the radius sign.
        (*jac)(i, e) = -hp_.gamma[e] * rc.a * r[e];
        for (Eigen::Index d = 0; d < n_d; ++d) {
          const double delta = (d == e) ? rc.a : 0.0;
          (*jac)(block_index(d + 1, i, n_x), e) =
              -hp_.gamma[d] * hp_.gamma[e] * (delta + rc.b * r[d] * r[e]);
        }
      }
    }
  }
}

FittedSurrogate::Posterior FittedSurrogate::evaluate(const Eigen::VectorXd& x,
                                                     bool with_grads) const {
  Posterior post;
  Eigen::VectorXd kvec;
  Eigen::MatrixXd jac;
  cross_cov(x, kvec, with_grads ? &jac : nullptr);

  post.mean = hp_.beta + kvec.dot(resid_solve_);

  // ratio = 1 - kvec^T (P Mdot P)^-1 kvec, with z kept for the gradient.
  const Eigen::VectorXd z = factor_.scaled_solve(kvec);
  double ratio = 1.0 - kvec.dot(z);
  if (ratio < -kRatioSlack || ratio > 1.0 + kRatioSlack) {
    std::ostringstream msg;
    msg << "variance_ratio outside [0,1]: " << ratio
        << " (broken factorization)";
    throw std::runtime_error(msg.str());
  }
  post.ratio = std::min(std::max(ratio, 0.0), 1.0);

  if (with_grads) {
    post.mean_grad = jac.transpose() * resid_solve_;
    post.ratio_grad = -2.0 * (jac.transpose() * z);
  }
  return post;
}

double FittedSurrogate::posterior_mean(const Eigen::VectorXd& x) const {
  return evaluate(x, false).mean;
}

Eigen::VectorXd FittedSurrogate::posterior_mean_grad(
    const Eigen::VectorXd& x) const {
  return evaluate(x, true).mean_grad;
}

double FittedSurrogate::variance_ratio(const Eigen::VectorXd& x) const {
  return evaluate(x, false).ratio;
}

double FittedSurrogate::posterior_variance(const Eigen::VectorXd& x) const {
  return hp_.sigma_k * hp_.sigma_k * variance_ratio(x);
}

}  // namespace gebo
