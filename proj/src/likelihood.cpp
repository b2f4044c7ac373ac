#include "gebo/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace gebo {

namespace {

constexpr double kLn10 = 2.302585092994045684;
// Guards ln(sigma_k^2) for degenerate constant data.
constexpr double kSigK2Floor = 1e-300;

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Weighted sums of one pair super-block, used to contract all length-scale
// derivatives of the covariance against a weight matrix in one pass.
struct PairSums {
  double w00 = 0.0;      // function-function weight
  Eigen::VectorXd wd0;   // weights of (grad-d row, function col)
  Eigen::VectorXd w0d;   // weights of (function row, grad-d col)
  Eigen::VectorXd wdd;   // diagonal cross weights
  Eigen::VectorXd p23;   // sum_f W_df q_f + sum_e W_ed q_e
  double c0 = 0.0;       // sum_e W_e0 q_e
  double r0 = 0.0;       // sum_f W_0f q_f
  double p1 = 0.0;       // sum_ef W_ef q_e q_f
  double sdiag = 0.0;    // sum_e W_ee gamma_e^2
};

template <class Omega>
PairSums pair_sums(const Omega& omega, const Eigen::ArrayXd& q,
                   const Eigen::VectorXd& gamma) {
  const auto n_d = gamma.size();
  PairSums s;
  s.wd0.setZero(n_d);
  s.w0d.setZero(n_d);
  s.wdd.setZero(n_d);
  s.p23.setZero(n_d);
  s.w00 = omega(0, 0);
  for (Eigen::Index e = 0; e < n_d; ++e) {
    s.wd0[e] = omega(e + 1, 0);
    s.w0d[e] = omega(0, e + 1);
    s.c0 += s.wd0[e] * q[e];
    s.r0 += s.w0d[e] * q[e];
    for (Eigen::Index f = 0; f < n_d; ++f) {
      const double w = omega(e + 1, f + 1);
      if (e == f) {
        s.wdd[e] = w;
        s.sdiag += w * gamma[e] * gamma[e];
      }
      s.p23[e] += w * q[f];
      s.p23[f] += w * q[e];
      s.p1 += w * q[e] * q[f];
    }
  }
  return s;
}

// Contraction of the pair's d(ln gamma_d) covariance derivative with the
// weights captured in PairSums.
double contract_gamma(const PairSums& s, const RadialCoeffs& rc,
                      const Eigen::ArrayXd& r, const Eigen::VectorXd& gamma,
                      Eigen::Index d) {
  const double rd = r[d];
  const double rd2 = rd * rd;
  double out = rc.a * rd2 * s.w00;
  out += 2.0 * gamma[d] * rc.a * rd * (s.wd0[d] - s.w0d[d]);
  out += rc.b * rd2 * (s.c0 - s.r0);
  out -= 2.0 * rc.a * gamma[d] * gamma[d] * s.wdd[d];
  out -= 2.0 * rc.b * gamma[d] * rd * s.p23[d];
  out -= rd2 * (rc.b * s.sdiag + rc.c * s.p1);
  return out;
}

double contract_alpha(const PairSums& s, const RadialAlphaDerivs& ad) {
  return ad.dvalue * s.w00 + ad.da * (s.c0 - s.r0) - ad.da * s.sdiag -
         ad.db * s.p1;
}

// d(ln gamma_d) derivative of one covariance entry; blocks e, f with 0 the
// function block, row point first, r = gamma (x_row - x_col).
double entry_deriv_gamma(const RadialCoeffs& rc, const Eigen::ArrayXd& r,
                         const Eigen::VectorXd& gamma, Eigen::Index e,
                         Eigen::Index f, Eigen::Index d) {
  const double rd2 = r[d] * r[d];
  if (e == 0 && f == 0) return rc.a * rd2;
  if (f == 0) {
    const Eigen::Index ee = e - 1;
    double out = gamma[ee] * rc.b * r[ee] * rd2;
    if (ee == d) out += 2.0 * gamma[d] * rc.a * r[d];
    return out;
  }
  if (e == 0) {
    const Eigen::Index ff = f - 1;
    double out = gamma[ff] * rc.b * r[ff] * rd2;
    if (ff == d) out += 2.0 * gamma[d] * rc.a * r[d];
    return -out;
  }
  const Eigen::Index ee = e - 1;
  const Eigen::Index ff = f - 1;
  const double gg = gamma[ee] * gamma[ff];
  double out = -gg * rd2 *
               ((ee == ff ? rc.b : 0.0) + rc.c * r[ee] * r[ff]);
  if (ee == d || ff == d) {
    const double match = (ee == d ? 1.0 : 0.0) + (ff == d ? 1.0 : 0.0);
    out -= match * gg * ((ee == ff ? rc.a : 0.0) + 2.0 * rc.b * r[ee] * r[ff]);
  }
  return out;
}

double entry_deriv_alpha(const RadialCoeffs&, const RadialAlphaDerivs& ad,
                         const Eigen::ArrayXd& r, const Eigen::VectorXd& gamma,
                         Eigen::Index e, Eigen::Index f) {
  if (e == 0 && f == 0) return ad.dvalue;
  if (f == 0) return gamma[e - 1] * ad.da * r[e - 1];
  if (e == 0) return -gamma[f - 1] * ad.da * r[f - 1];
  return -gamma[e - 1] * gamma[f - 1] *
         ((e == f ? ad.da : 0.0) + ad.db * r[e - 1] * r[f - 1]);
}

Hyperparameters working_hp(const Hyperparameters& hp, bool noisy) {
  Hyperparameters w = hp;
  if (!noisy) {
    w.sigma_f = 0.0;
    w.sigma_gf = 0.0;
    w.sigma_k = 1.0;  // placeholder; the closed form replaces it
  }
  return w;
}

}  // namespace

HpLayout HpLayout::make(Eigen::Index n_d, bool noisy, const KernelKind& kind) {
  HpLayout layout;
  layout.n_d = n_d;
  layout.has_sigma_k = noisy;
  layout.has_sigma_gf = noisy;
  layout.has_alpha = kind.has_alpha();
  return layout;
}

Eigen::VectorXd HpLayout::pack_raw(const Hyperparameters& hp) const {
  Eigen::VectorXd v(size());
  v.head(n_d) = hp.gamma;
  Eigen::Index k = n_d;
  if (has_sigma_k) v[k++] = hp.sigma_k;
  if (has_sigma_gf) v[k++] = hp.sigma_gf;
  if (has_alpha) v[k++] = hp.alpha.value_or(1.0);
  return v;
}

Eigen::VectorXd HpLayout::pack_log10(const Hyperparameters& hp) const {
  return pack_raw(hp).array().log10().matrix();
}

Hyperparameters HpLayout::unpack_log10(const Eigen::VectorXd& v) const {
  if (v.size() != size())
    throw std::invalid_argument("HpLayout: packed size mismatch");
  Hyperparameters hp;
  hp.gamma = Eigen::pow(10.0, v.head(n_d).array()).matrix();
  Eigen::Index k = n_d;
  hp.sigma_k = has_sigma_k ? std::pow(10.0, v[k++]) : 1.0;
  hp.sigma_gf = has_sigma_gf ? std::pow(10.0, v[k++]) : 0.0;
  hp.sigma_f = 0.0;
  if (has_alpha) hp.alpha = std::pow(10.0, v[k++]);
  return hp;
}

Eigen::VectorXd HpLayout::initial_values(const HpSearchConfig& cfg) const {
  Eigen::VectorXd v(size());
  v.head(n_d).setConstant(cfg.gamma_init);
  Eigen::Index k = n_d;
  if (has_sigma_k) v[k++] = cfg.sigma_k_init;
  if (has_sigma_gf) v[k++] = cfg.sigma_gf_init;
  if (has_alpha) v[k++] = cfg.alpha_init;
  return v;
}

double beta_closed_form(const GpFactor& factor, const Eigen::VectorXd& fgrad,
                        Eigen::Index n_x, Eigen::Index n_d) {
  const Eigen::VectorXd om = ones_mod(n_x, n_d);
  const Eigen::VectorXd s1 = factor.scaled_solve(om);
  const double den = om.dot(s1);
  if (!(den > 0.0))
    throw std::runtime_error("beta_closed_form: nonpositive denominator");
  return s1.dot(fgrad) / den;
}

double sigk2_closed_form(const GpFactor& factor, const Eigen::VectorXd& fgrad,
                         double beta, Eigen::Index n_x, Eigen::Index n_d) {
  const Eigen::VectorXd resid = fgrad - ones_mod(n_x, n_d) * beta;
  return factor.quad_form(resid) / static_cast<double>(n_x * (n_d + 1));
}

MllEval mll_eval(const DataSet& data, const Hyperparameters& hp,
                 const KernelKind& kind, double cond_max, bool noisy) {
  const auto n_x = data.n_points();
  const auto n_d = data.dim();
  const double n = static_cast<double>(data.size());

  MllEval out;
  out.hp = working_hp(hp, noisy);
  const Eigen::MatrixXd m = unit_covariance(data, out.hp, kind);
  out.factor = GpFactor::compute(m, cond_max);
  out.hp.beta = beta_closed_form(out.factor, data.fgrad, n_x, n_d);

  const Eigen::VectorXd resid =
      data.fgrad - ones_mod(n_x, n_d) * out.hp.beta;
  const double quad = out.factor.quad_form(resid);

  if (!noisy) {
    const double sigk2 = quad / n;
    out.hp.sigma_k = std::sqrt(std::max(sigk2, 0.0));
    out.value = -0.5 * n * std::log(std::max(sigk2, kSigK2Floor)) -
                0.5 * out.factor.logdet();
  } else {
    if (!(out.hp.sigma_k > 0.0))
      throw std::invalid_argument("mll: sigma_k must be positive in noisy mode");
    const double sk2 = out.hp.sigma_k * out.hp.sigma_k;
    out.value =
        -0.5 * (n * std::log(sk2) + out.factor.logdet() + quad / sk2);
  }
  return out;
}

double mll(const DataSet& data, const Hyperparameters& hp,
           const KernelKind& kind, double cond_max, bool noisy) {
  return mll_eval(data, hp, kind, cond_max, noisy).value;
}

double mll_fixed_beta(const DataSet& data, const Hyperparameters& hp,
                      const KernelKind& kind, double cond_max, bool noisy) {
  Hyperparameters w = hp;
  if (!noisy) {
    w.sigma_f = 0.0;
    w.sigma_gf = 0.0;
  }
  if (!(w.sigma_k > 0.0))
    throw std::invalid_argument("mll_fixed_beta: sigma_k must be positive");
  const double n = static_cast<double>(data.size());
  const Eigen::MatrixXd m = unit_covariance(data, w, kind);
  const GpFactor factor = GpFactor::compute(m, cond_max);
  const Eigen::VectorXd resid =
      data.fgrad - ones_mod(data.n_points(), data.dim()) * w.beta;
  const double sk2 = w.sigma_k * w.sigma_k;
  return -0.5 * (n * std::log(sk2) + factor.logdet() +
                 factor.quad_form(resid) / sk2);
}

Eigen::VectorXd mll_grad_log_hp(const DataSet& data, const Hyperparameters& hp,
                                const KernelKind& kind, double cond_max,
                                bool noisy) {
  const auto n_x = data.n_points();
  const auto n_d = data.dim();
  const double n = static_cast<double>(data.size());
  const HpLayout layout = HpLayout::make(n_d, noisy, kind);

  const Hyperparameters whp = working_hp(hp, noisy);
  const KernelKind ekind = effective_kind(kind, whp);
  const Eigen::MatrixXd m = unit_covariance(data, whp, kind);
  const GpFactor factor = GpFactor::compute(m, cond_max);
  const double beta = beta_closed_form(factor, data.fgrad, n_x, n_d);
  const Eigen::VectorXd resid = data.fgrad - ones_mod(n_x, n_d) * beta;
  const double quad = factor.quad_form(resid);
  const double sk2 =
      noisy ? whp.sigma_k * whp.sigma_k
            : std::max(quad / n, kSigK2Floor);

  const Eigen::VectorXd y = factor.scaled_solve(resid);
  const Eigen::MatrixXd t_inv = factor.scaled_inverse();
  const double eta = factor.nugget();
  const Eigen::VectorXd& gamma = whp.gamma;

  Eigen::VectorXd tr_acc = Eigen::VectorXd::Zero(layout.size());
  Eigen::VectorXd quad_acc = Eigen::VectorXd::Zero(layout.size());
  const Eigen::Index alpha_slot = layout.has_alpha ? layout.size() - 1 : -1;

  Eigen::ArrayXd r(n_d);
  Eigen::ArrayXd q(n_d);
  for (Eigen::Index i = 0; i < n_x; ++i) {
    for (Eigen::Index j = i; j < n_x; ++j) {
      r = gamma.array() *
          (data.points.row(i) - data.points.row(j)).transpose().array();
      const double s_rad = r.square().sum();
      const RadialCoeffs rc = radial_coeffs(ekind, s_rad);
      q = gamma.array() * r;
      const double mult = (i == j) ? 1.0 : 2.0;

      const auto omega_t = [&](Eigen::Index e, Eigen::Index f) {
        return t_inv(e * n_x + i, f * n_x + j);
      };
      const auto omega_y = [&](Eigen::Index e, Eigen::Index f) {
        return y[e * n_x + i] * y[f * n_x + j];
      };
      const PairSums st = pair_sums(omega_t, q, gamma);
      const PairSums sy = pair_sums(omega_y, q, gamma);

      for (Eigen::Index d = 0; d < n_d; ++d) {
        tr_acc[d] += mult * contract_gamma(st, rc, r, gamma, d);
        quad_acc[d] += mult * contract_gamma(sy, rc, r, gamma, d);
      }
      if (layout.has_alpha) {
        const RadialAlphaDerivs ad = radial_alpha_derivs(ekind, s_rad);
        tr_acc[alpha_slot] += mult * contract_alpha(st, ad);
        quad_acc[alpha_slot] += mult * contract_alpha(sy, ad);
      }
    }
  }

  // Fixed-nugget correction: the factorized matrix is M + eta diag(M), so
  // global diagonal derivatives pick up an extra eta weight. Only the
  // gradient-block diagonal (gamma_d^2 scale) moves with ln gamma_d.
  const double a0 = radial_coeffs(ekind, 0.0).a;
  for (Eigen::Index d = 0; d < n_d; ++d) {
    double trd = 0.0;
    double qd = 0.0;
    for (Eigen::Index i = 0; i < n_x; ++i) {
      const auto idx = block_index(d + 1, i, n_x);
      trd += t_inv(idx, idx);
      qd += y[idx] * y[idx];
    }
    const double scale = eta * (-2.0 * a0) * gamma[d] * gamma[d];
    tr_acc[d] += scale * trd;
    quad_acc[d] += scale * qd;
  }

  Eigen::VectorXd grad(layout.size());
  for (Eigen::Index k = 0; k < layout.size(); ++k) {
    if (k < n_d || k == alpha_slot)
      grad[k] = -0.5 * (tr_acc[k] - quad_acc[k] / sk2);
  }

  const double vf = whp.sigma_f * whp.sigma_f;
  const double vg = whp.sigma_gf * whp.sigma_gf;
  if (noisy) {
    // Diagonal Vg pieces, shared by the sigma_k and sigma_gf entries.
    double tr_f = 0.0, tr_g = 0.0, q_f = 0.0, q_g = 0.0;
    for (Eigen::Index idx = 0; idx < data.size(); ++idx) {
      const bool in_function_block = idx < n_x;
      const double tii = t_inv(idx, idx);
      const double yii = y[idx] * y[idx];
      if (in_function_block) {
        tr_f += tii;
        q_f += yii;
      } else {
        tr_g += tii;
        q_g += yii;
      }
    }
    const double one_eta = 1.0 + eta;

    Eigen::Index k = n_d;
    {
      // d/d ln sigma_k of -(1/2)[n ln sk2 + lndet + quad/sk2].
      const double trv = vf * tr_f + vg * tr_g;
      const double qv = vf * q_f + vg * q_g;
      grad[k++] = -0.5 * (2.0 * n - 2.0 * one_eta * trv / sk2 +
                          2.0 * one_eta * qv / (sk2 * sk2) -
                          2.0 * quad / sk2);
    }
    {
      const double dscale = 2.0 * vg * one_eta / sk2;
      grad[k++] = -0.5 * (dscale * tr_g - dscale * q_g / sk2);
    }
  }

  // The nugget itself moves with the hyperparameters:
  // eta = max-row-sum of |kdot| / (cond_max - 1). Differentiate the
  // dominating row; this term is what keeps the gradient consistent with
  // finite differences when the covariance is nearly singular.
  {
    const Eigen::VectorXd& mdiag = m.diagonal();
    const Eigen::VectorXd p = mdiag.array().sqrt();
    Eigen::Index istar = 0;
    double rmax = -1.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      double row = 0.0;
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        row += std::abs(m(i, j)) / (p[i] * p[j]);
      if (row > rmax) {
        rmax = row;
        istar = i;
      }
    }
    const Eigen::Index estar = istar / n_x;
    const Eigen::Index iptstar = istar % n_x;

    double acoef = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      acoef += t_inv(i, i) * mdiag[i] - mdiag[i] * y[i] * y[i] / sk2;

    // (dM_jj / d ln gamma_d) / M_jj; only the matching gradient block moves.
    const auto diag_q = [&](Eigen::Index idx, Eigen::Index d) {
      if (idx / n_x != d + 1) return 0.0;
      return -2.0 * a0 * gamma[d] * gamma[d] / mdiag[idx];
    };
    // (dM_jj / d ln sigma) / M_jj for the two noise entries.
    const auto diag_q_sk = [&](Eigen::Index idx) {
      const double v = idx < n_x ? vf : vg;
      return -2.0 * v / (sk2 * mdiag[idx]);
    };
    const auto diag_q_gf = [&](Eigen::Index idx) {
      if (idx < n_x) return 0.0;
      return 2.0 * vg / (sk2 * mdiag[idx]);
    };

    Eigen::VectorXd dr = Eigen::VectorXd::Zero(layout.size());
    Eigen::ArrayXd rrow(n_d);
    for (Eigen::Index jpt = 0; jpt < n_x; ++jpt) {
      rrow = gamma.array() *
             (data.points.row(iptstar) - data.points.row(jpt))
                 .transpose()
                 .array();
      const double s_rad = rrow.square().sum();
      const RadialCoeffs rc = radial_coeffs(ekind, s_rad);
      RadialAlphaDerivs ad;
      if (layout.has_alpha) ad = radial_alpha_derivs(ekind, s_rad);
      for (Eigen::Index fb = 0; fb <= n_d; ++fb) {
        const Eigen::Index j = fb * n_x + jpt;
        const double mij = m(istar, j);
        if (mij == 0.0) continue;
        const double sgn = mij > 0.0 ? 1.0 : -1.0;
        const double pp = p[istar] * p[j];
        const double kd = mij / pp;
        for (Eigen::Index d = 0; d < n_d; ++d)
          dr[d] += sgn * (entry_deriv_gamma(rc, rrow, gamma, estar, fb, d) / pp -
                          0.5 * kd * (diag_q(istar, d) + diag_q(j, d)));
        if (layout.has_alpha)
          dr[alpha_slot] +=
              sgn * entry_deriv_alpha(rc, ad, rrow, gamma, estar, fb) / pp;
        if (noisy && j != istar) {
          // Diagonal perturbations leave the unit kdot diagonal untouched,
          // so the j == istar term vanishes identically.
          dr[n_d] += sgn * (-0.5) * kd * (diag_q_sk(istar) + diag_q_sk(j));
          dr[n_d + 1] += sgn * (-0.5) * kd * (diag_q_gf(istar) + diag_q_gf(j));
        }
      }
    }
    grad += (-0.5 * acoef / (cond_max - 1.0)) * dr;
  }
  return grad;
}

void hp_search_bounds(const std::vector<Hyperparameters>& history,
                      const HpSearchConfig& cfg, const HpLayout& layout,
                      Eigen::VectorXd& lb, Eigen::VectorXd& ub) {
  Eigen::VectorXd center_raw;
  if (history.empty()) {
    center_raw = layout.initial_values(cfg);
  } else {
    const std::size_t m = std::min<std::size_t>(
        history.size(), static_cast<std::size_t>(std::max(cfg.n_med, 1)));
    std::vector<Eigen::VectorXd> packed;
    packed.reserve(m);
    for (std::size_t k = history.size() - m; k < history.size(); ++k)
      packed.push_back(layout.pack_raw(history[k]));
    center_raw.resize(layout.size());
    std::vector<double> comp(m);
    for (Eigen::Index c = 0; c < layout.size(); ++c) {
      for (std::size_t k = 0; k < m; ++k) comp[k] = packed[k][c];
      center_raw[c] = median_of(comp);
    }
  }
  const Eigen::VectorXd center = center_raw.array().log10().matrix();
  lb = center.array() - cfg.n_log;
  ub = center.array() + cfg.n_log;
}

Eigen::MatrixXd hp_lhs_starts(const std::vector<Hyperparameters>& history,
                              const HpSearchConfig& cfg, const HpLayout& layout,
                              std::uint64_t seed) {
  if (cfg.n_lhs < 1)
    throw std::invalid_argument("hp_lhs_starts: n_lhs must be >= 1");
  Eigen::VectorXd lb, ub;
  hp_search_bounds(history, cfg, layout, lb, ub);
  Rng rng(seed);
  return latin_hypercube(rng, cfg.n_lhs, lb, ub);
}

namespace {

// Bounded local maximization of the marginal log likelihood in log10
// hyperparameter space: BFGS direction, box projection, Armijo backtracking.
Eigen::VectorXd maximize_in_box(const DataSet& data, const KernelKind& kind,
                                double cond_max, bool noisy,
                                const HpLayout& layout,
                                const Eigen::VectorXd& start,
                                const Eigen::VectorXd& lb,
                                const Eigen::VectorXd& ub,
                                const HpSearchConfig& cfg) {
  const auto clip = [&](Eigen::VectorXd v) {
    return v.cwiseMax(lb).cwiseMin(ub).eval();
  };
  const auto value = [&](const Eigen::VectorXd& v) {
    return -mll(data, layout.unpack_log10(v), kind, cond_max, noisy);
  };
  const auto grad = [&](const Eigen::VectorXd& v) {
    return (-kLn10 *
            mll_grad_log_hp(data, layout.unpack_log10(v), kind, cond_max,
                            noisy))
        .eval();
  };

  const auto dim = layout.size();
  Eigen::VectorXd v = clip(start);
  double fv = value(v);
  Eigen::VectorXd gv = grad(v);
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(dim, dim);

  // Each factorization is expensive at high dimension, so the search runs
  // under an evaluation budget on top of the iteration cap and stops once
  // accepted steps no longer move the likelihood. The local search typically
  // needs a few dozen evaluations.
  int evals_left = 120;
  int tiny_steps = 0;

  for (int it = 0; it < cfg.max_ascent_iters && evals_left > 0; ++it) {
    // Projected gradient: drop components pushing through an active bound.
    Eigen::VectorXd pg = gv;
    for (Eigen::Index k = 0; k < dim; ++k) {
      if ((v[k] <= lb[k] && gv[k] > 0.0) || (v[k] >= ub[k] && gv[k] < 0.0))
        pg[k] = 0.0;
    }
    if (pg.norm() <= cfg.ascent_grad_tol) break;

    Eigen::VectorXd p = -(h * gv);
    if (p.dot(gv) >= -1e-14 * p.norm() * gv.norm()) {
      p = -pg;
      h.setIdentity();
    }

    double step = 1.0;
    Eigen::VectorXd v_new;
    double f_new = fv;
    bool accepted = false;
    for (int ls = 0; ls < 15 && evals_left > 0; ++ls) {
      v_new = clip(v + step * p);
      const Eigen::VectorXd dv = v_new - v;
      if (dv.norm() < 1e-14) break;
      f_new = value(v_new);
      --evals_left;
      if (std::isfinite(f_new) && f_new <= fv + 1e-4 * gv.dot(dv)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    if (fv - f_new <= 1e-7 * (1.0 + std::abs(fv))) {
      if (++tiny_steps >= 1) {
        fv = f_new;
        v = v_new;
        break;
      }
    } else {
      tiny_steps = 0;
    }

    Eigen::VectorXd g_new = grad(v_new);
    const Eigen::VectorXd s = v_new - v;
    const Eigen::VectorXd yv = g_new - gv;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(dim, dim);
      h = (ident - rho * s * yv.transpose()) * h *
              (ident - rho * yv * s.transpose()) +
          rho * s * s.transpose();
    } else {
      h.setIdentity();
    }
    v = v_new;
    fv = f_new;
    gv = g_new;
  }
  return v;
}

}  // namespace

HpSelection select_hyperparameters(const DataSet& data,
                                   const std::vector<Hyperparameters>& history,
                                   const HpSearchConfig& cfg,
                                   const KernelKind& kind, double cond_max,
                                   std::uint64_t seed) {
  if (data.n_points() < 1)
    throw std::invalid_argument("select_hyperparameters: empty data");
  const HpLayout layout = HpLayout::make(data.dim(), cfg.noisy, kind);

  HpSearchConfig lhs_cfg = cfg;
  if (cfg.multistart) lhs_cfg.n_lhs = cfg.multistart_n_lhs;
  const Eigen::MatrixXd starts =
      hp_lhs_starts(history, lhs_cfg, layout, derive_seed(seed, "hp_lhs"));
  Eigen::VectorXd lb, ub;
  hp_search_bounds(history, cfg, layout, lb, ub);

  const auto evaluate = [&](const Eigen::VectorXd& v) -> double {
    try {
      return mll(data, layout.unpack_log10(v), kind, cond_max, cfg.noisy);
    } catch (const std::exception&) {
      return -std::numeric_limits<double>::infinity();
    }
  };

  int best_row = -1;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int row = 0; row < starts.rows(); ++row) {
    const double val = evaluate(starts.row(row).transpose());
    if (std::isfinite(val) && val > best_value) {
      best_value = val;
      best_row = row;
    }
  }

  HpSelection out;
  if (best_row < 0) {
    // Every sample failed; fall back to the configured initial values.
    out.fallback = true;
    const Eigen::VectorXd v0 =
        layout.initial_values(cfg).array().log10().matrix();
    const MllEval eval = mll_eval(data, layout.unpack_log10(v0), kind,
                                  cond_max, cfg.noisy);
    out.hp = eval.hp;
    out.mll = eval.value;
    return out;
  }

  Eigen::VectorXd best_v;
  if (cfg.multistart) {
    double best_final = -std::numeric_limits<double>::infinity();
    for (int row = 0; row < starts.rows(); ++row) {
      const Eigen::VectorXd cand =
          maximize_in_box(data, kind, cond_max, cfg.noisy, layout,
                          starts.row(row).transpose(), lb, ub, cfg);
      const double val = evaluate(cand);
      if (std::isfinite(val) && val > best_final) {
        best_final = val;
        best_v = cand;
      }
    }
    if (best_v.size() == 0) best_v = starts.row(best_row).transpose();
  } else {
    best_v = maximize_in_box(data, kind, cond_max, cfg.noisy, layout,
                             starts.row(best_row).transpose(), lb, ub, cfg);
    if (evaluate(best_v) < best_value) best_v = starts.row(best_row).transpose();
  }

  const MllEval eval =
      mll_eval(data, layout.unpack_log10(best_v), kind, cond_max, cfg.noisy);
  out.hp = eval.hp;
  out.mll = eval.value;
  return out;
}

}  // namespace gebo
