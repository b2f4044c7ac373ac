#include "gebo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "gebo/local_model.hpp"
#include "gebo/rng.hpp"

namespace gebo {

namespace {

constexpr double kSigmaFloor = 1e-12;

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Expected improvement collapses to zero in double precision once the mean
// sits tens of posterior deviations above the incumbent, which flattens the
// minimization landscape completely. The inner solver therefore works on
// -log EI: same minimizers, useful gradients everywhere. h(z) = z cdf + pdf.
struct LogEi {
  double value = 0.0;  // log EI
  Eigen::VectorXd grad_neg;  // gradient of -log EI
};

LogEi log_ei_smoothed(const FittedSurrogate& s, const Eigen::VectorXd& x,
                      double f_best) {
  const auto post = s.evaluate(x, true);
  const double sigma_k = std::max(s.hp().sigma_k, 1e-150);
  // Smooth the ratio floor so data points are a steep hill, not a kink.
  const double ratio = std::max(post.ratio, 1e-16);
  const double sigma = sigma_k * std::sqrt(ratio);
  const Eigen::VectorXd sigma_grad =
      sigma_k * sigma_k * post.ratio_grad / (2.0 * sigma);
  const double z = (f_best - post.mean) / sigma;
  const Eigen::VectorXd z_grad = (-post.mean_grad - z * sigma_grad) / sigma;

  double log_h;
  double h_ratio;  // h'(z) / h(z) = cdf / h
  if (z > -20.0) {
    const double h = z * normal_cdf(z) + normal_pdf(z);
    log_h = std::log(std::max(h, 1e-300));
    h_ratio = normal_cdf(z) / std::max(h, 1e-300);
  } else {
    // Asymptotics: h(z) ~ pdf(z) / z^2 (1 - 3/z^2 + ...), cdf/h ~ -z.
    const double z2 = z * z;
    log_h = -0.5 * z2 - 0.5 * std::log(2.0 * std::numbers::pi) -
            std::log(z2) + std::log1p(-3.0 / z2 + 15.0 / (z2 * z2));
    h_ratio = -z * (1.0 + 2.0 / z2);
  }
  LogEi out;
  out.value = std::log(sigma) + log_h;
  out.grad_neg = -(sigma_grad / sigma) - h_ratio * z_grad;
  return out;
}

struct Constraints {
  double u_c = 0.0;
  double u_sigma = std::numeric_limits<double>::infinity();
  const Eigen::VectorXd* x_best = nullptr;
  const LinearConstraints* linear = nullptr;

  bool sigma_active() const { return std::isfinite(u_sigma); }
};

// Pull x toward x_best until the ball, linear, and sigma constraints hold;
// x_best itself is assumed ball/linear feasible.
Eigen::VectorXd make_feasible(const FittedSurrogate& s, const Constraints& c,
                              Eigen::VectorXd x) {
  const Eigen::VectorXd& xb = *c.x_best;
  const double g = (x - xb).squaredNorm();
  if (g > c.u_c)
    x = xb + (x - xb) * std::sqrt(c.u_c / g) * (1.0 - 1e-12);
  if (c.linear && c.linear->count() > 0) {
    const Eigen::VectorXd step = x - xb;
    double t = 1.0;
    for (Eigen::Index k = 0; k < c.linear->count(); ++k) {
      const double slope = c.linear->a.row(k).dot(step);
      const double slack = c.linear->b[k] - c.linear->a.row(k).dot(xb);
      if (slope > 0.0 && slope * t > slack)
        t = std::max(0.0, slack / slope * (1.0 - 1e-12));
    }
    x = xb + t * step;
  }
  if (c.sigma_active() && s.variance_ratio(x) > c.u_sigma) {
    if (s.variance_ratio(xb) > c.u_sigma) return x;  // nowhere to go
    double lo = 0.0, hi = 1.0;
    const Eigen::VectorXd step = x - xb;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (s.variance_ratio(xb + mid * step) <= c.u_sigma)
        lo = mid;
      else
        hi = mid;
    }
    x = xb + lo * step;
  }
  return x;
}

bool is_feasible(const FittedSurrogate& s, const Constraints& c,
                 const AcqMinimizeOptions& opts, const Eigen::VectorXd& x,
                 double* g_circ, double* g_sigma) {
  const double gc = (x - *c.x_best).squaredNorm();
  const double gs = c.sigma_active() ? s.variance_ratio(x) : 0.0;
  if (g_circ) *g_circ = gc;
  if (g_sigma) *g_sigma = c.sigma_active() ? gs : s.variance_ratio(x);
  if (gc > c.u_c + opts.constraint_tol) return false;
  if (c.sigma_active() && gs > c.u_sigma + opts.sigma_constraint_tol)
    return false;
  if (c.linear) {
    for (Eigen::Index k = 0; k < c.linear->count(); ++k)
      if (c.linear->a.row(k).dot(x) > c.linear->b[k] + opts.constraint_tol)
        return false;
  }
  return true;
}

// Quadratic-penalty objective for one penalty weight. Expected improvement
// runs through the -log EI transform.
struct PenaltyObjective {
  const FittedSurrogate* s;
  const AcquisitionKind* kind;
  const Constraints* c;
  double f_best;
  double penalty;

  double operator()(const Eigen::VectorXd& x, Eigen::VectorXd& grad) const {
    double value;
    if (kind->type == AcquisitionKind::Type::ExpectedImprovement) {
      const LogEi ei = log_ei_smoothed(*s, x, f_best);
      value = -ei.value;
      grad = ei.grad_neg;
    } else {
      const AcqEval acq = acq_value_grad(*kind, *s, x, f_best);
      value = acq.value;
      grad = acq.grad;
    }

    const double gc = (x - *c->x_best).squaredNorm();
    if (gc > c->u_c) {
      const double v = gc - c->u_c;
      value += 0.5 * penalty * v * v;
      grad += penalty * v * circular_tr_grad(x, *c->x_best);
    }
    if (c->sigma_active()) {
      const auto post = s->evaluate(x, true);
      if (post.ratio > c->u_sigma) {
        const double v = post.ratio - c->u_sigma;
        value += 0.5 * penalty * v * v;
        grad += penalty * v * post.ratio_grad;
      }
    }
    if (c->linear) {
      for (Eigen::Index k = 0; k < c->linear->count(); ++k) {
        const double v = c->linear->a.row(k).dot(x) - c->linear->b[k];
        if (v > 0.0) {
          value += 0.5 * penalty * v * v;
          grad += penalty * v * c->linear->a.row(k).transpose();
        }
      }
    }
    return value;
  }
};

// Compact BFGS with Armijo backtracking for the smooth penalty stages.
template <class F>
Eigen::VectorXd minimize_smooth(const F& fn, Eigen::VectorXd x, int max_iters,
                                double grad_tol) {
  const auto dim = x.size();
  Eigen::VectorXd g(dim), g_new(dim);
  double fx = fn(x, g);
  Eigen::MatrixXd h = Eigen::MatrixXd::Identity(dim, dim);

  for (int it = 0; it < max_iters; ++it) {
    if (g.norm() <= grad_tol) break;
    Eigen::VectorXd p = -(h * g);
    double slope = p.dot(g);
    if (slope >= 0.0) {
      p = -g;
      slope = -g.squaredNorm();
      h.setIdentity();
    }
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new;
    double f_new = fx;
    for (int ls = 0; ls < 30; ++ls) {
      x_new = x + step * p;
      f_new = fn(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(dim, dim);
      h = (ident - rho * s * y.transpose()) * h *
              (ident - rho * y * s.transpose()) +
          rho * s * s.transpose();
    } else {
      h.setIdentity();
    }
    x = x_new;
    fx = f_new;
    g = g_new;
    if (s.norm() < 1e-14 * std::max(1.0, x.norm())) break;
  }
  return x;
}

}  // namespace

AcquisitionKind parse_acquisition(const std::string& name) {
  if (name == "ei") return AcquisitionKind::expected_improvement();
  if (name.rfind("uc:", 0) == 0) {
    const double omega = std::stod(name.substr(3));
    if (omega < 0.0)
      throw std::invalid_argument("acquisition: omega must be >= 0");
    return AcquisitionKind::upper_confidence(omega);
  }
  if (name == "uc") return AcquisitionKind::upper_confidence(2.0);
  throw std::invalid_argument("unknown acquisition name: " + name);
}

std::string acquisition_name(const AcquisitionKind& kind) {
  if (kind.type == AcquisitionKind::Type::ExpectedImprovement) return "ei";
  return "uc:" + std::to_string(kind.omega);
}

AcqEval acq_value_grad(const AcquisitionKind& kind, const FittedSurrogate& s,
                       const Eigen::VectorXd& x, double f_best) {
  const auto post = s.evaluate(x, true);
  const double sigma_k = s.hp().sigma_k;
  const double sigma = sigma_k * std::sqrt(post.ratio);

  AcqEval out;
  if (kind.type == AcquisitionKind::Type::UpperConfidence) {
    out.value = post.mean - kind.omega * sigma;
    out.grad = post.mean_grad;
    if (kind.omega > 0.0 && sigma > kSigmaFloor) {
      const Eigen::VectorXd sigma_grad =
          sigma_k * sigma_k * post.ratio_grad / (2.0 * sigma);
      out.grad -= kind.omega * sigma_grad;
    }
    return out;
  }

  // Negated expected improvement.
  if (sigma <= kSigmaFloor) {
    if (post.mean < f_best) {
      out.value = -(f_best - post.mean);
      out.grad = post.mean_grad;
    } else {
      out.value = 0.0;
      out.grad = Eigen::VectorXd::Zero(x.size());
    }
    return out;
  }
  const double z = (f_best - post.mean) / sigma;
  const double cdf = normal_cdf(z);
  const double pdf = normal_pdf(z);
  out.value = -((f_best - post.mean) * cdf + sigma * pdf);
  const Eigen::VectorXd sigma_grad =
      sigma_k * sigma_k * post.ratio_grad / (2.0 * sigma);
  out.grad = cdf * post.mean_grad - pdf * sigma_grad;
  return out;
}

AcqResult minimize_acquisition(const FittedSurrogate& s,
                               const AcquisitionKind& kind, double u_c,
                               double u_sigma, const Eigen::VectorXd& x_best,
                               double f_best,
                               const Eigen::MatrixXd& region_points,
                               const Eigen::VectorXd& region_merits,
                               const LinearConstraints* linear,
                               std::uint64_t seed,
                               const AcqMinimizeOptions& opts) {
  if (!(u_c > 0.0))
    throw std::invalid_argument("minimize_acquisition: u_c must be positive");

  Constraints cons;
  cons.u_c = u_c;
  cons.u_sigma = u_sigma;
  cons.x_best = &x_best;
  cons.linear = (linear && linear->count() > 0) ? linear : nullptr;

  // Starting candidates: LHS box of half-width sqrt(u_c), then the n_best
  // lowest-merit data-region points, each nudged off its zero-variance kink.
  const double half = std::sqrt(u_c);
  Rng rng(seed);
  std::vector<Eigen::VectorXd> starts;
  {
    const Eigen::VectorXd lb = x_best.array() - half;
    const Eigen::VectorXd ub = x_best.array() + half;
    const Eigen::MatrixXd lhs = latin_hypercube(rng, opts.n_lhs, lb, ub);
    for (Eigen::Index i = 0; i < lhs.rows(); ++i)
      starts.push_back(lhs.row(i).transpose());
  }
  {
    std::vector<int> order(static_cast<std::size_t>(region_merits.size()));
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return region_merits[a] < region_merits[b];
    });
    const int take =
        std::min<int>(opts.n_best, static_cast<int>(order.size()));
    for (int i = 0; i < take; ++i) {
      Eigen::VectorXd x =
          region_points.row(order[static_cast<std::size_t>(i)]).transpose();
      for (Eigen::Index d = 0; d < x.size(); ++d)
        x[d] += 1e-3 * half * rng.uniform(-1.0, 1.0);
      starts.push_back(std::move(x));
    }
  }

  const auto q_at = [&](const Eigen::VectorXd& x) {
    return acq_value_grad(kind, s, x, f_best).value;
  };
  // Candidate ranking score; the log transform keeps underflowed EI values
  // comparable.
  const auto score_at = [&](const Eigen::VectorXd& x) {
    if (kind.type == AcquisitionKind::Type::ExpectedImprovement)
      return -log_ei_smoothed(s, x, f_best).value;
    return q_at(x);
  };

  struct Candidate {
    Eigen::VectorXd x;
    double q;
    double score;
    double g_circ;
    double g_sigma;
    bool feasible;
  };
  std::vector<Candidate> results;
  results.reserve(starts.size());

  // The solver works in trust-region units xi = (x - x_best) / sqrt(u_c):
  // near convergence the feasible ball shrinks by many orders of magnitude
  // and unit-scale line searches would never land inside it otherwise.
  const int stage_iters = std::max(opts.max_iters / 3, 10);
  for (const Eigen::VectorXd& start : starts) {
    Eigen::VectorXd x = make_feasible(s, cons, start);
    for (const double penalty : {1e4, 1e6, 1e8}) {
      PenaltyObjective obj{&s, &kind, &cons, f_best, penalty};
      Eigen::VectorXd xi = (x - x_best) / half;
      xi = minimize_smooth(
          [&](const Eigen::VectorXd& xi_in, Eigen::VectorXd& grad) {
            const double value = obj(x_best + half * xi_in, grad);
            grad *= half;
            return value;
          },
          xi, stage_iters, 1e-10);
      x = x_best + half * xi;
    }
    x = make_feasible(s, cons, x);
    Candidate cand;
    cand.x = x;
    cand.q = q_at(x);
    cand.score = score_at(x);
    cand.feasible =
        is_feasible(s, cons, opts, x, &cand.g_circ, &cand.g_sigma);
    results.push_back(std::move(cand));
  }

  const Candidate* best_feasible = nullptr;
  const Candidate* best_any = nullptr;
  for (const Candidate& cand : results) {
    if (!best_any || cand.score < best_any->score) best_any = &cand;
    if (cand.feasible && (!best_feasible || cand.score < best_feasible->score))
      best_feasible = &cand;
  }

  AcqResult out;
  if (best_feasible) {
    out.x = best_feasible->x;
    out.q = best_feasible->q;
    out.g_circ = best_feasible->g_circ;
    out.g_sigma = best_feasible->g_sigma;
    return out;
  }

  // No feasible candidate: step toward the best infeasible one, rescaled
  // onto the circular bound (and the linear cut when present).
  out.fallback = true;
  Eigen::VectorXd x = best_any ? best_any->x : x_best;
  const double g = (x - x_best).squaredNorm();
  if (g > u_c) x = x_best + (x - x_best) * std::sqrt(u_c / g) * (1.0 - 1e-9);
  if (cons.linear) {
    Constraints ball_only = cons;
    ball_only.u_sigma = std::numeric_limits<double>::infinity();
    x = make_feasible(s, ball_only, x);
  }
  out.x = x;
  out.q = q_at(x);
  out.g_circ = (x - x_best).squaredNorm();
  out.g_sigma = s.variance_ratio(x);
  return out;
}

}  // namespace gebo
