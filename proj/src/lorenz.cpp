#include "gebo/lorenz.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace gebo {

namespace {

constexpr double kSigma = 10.0;
constexpr double kTargetZ = 35.0;

int step_count(double t, double dt) {
  return static_cast<int>(std::lround(t / dt));
}

void validate_config(double beta, const LorenzConfig& cfg) {
  if (!(beta > 0.0))
    throw std::domain_error("lorenz: beta must be positive");
  if (!(cfg.dt > 0.0)) throw std::invalid_argument("lorenz: dt must be positive");
  if (!(cfg.t_window > 0.0))
    throw std::invalid_argument("lorenz: objective window must be positive");
}

}  // namespace

Eigen::Vector3d lorenz_rhs(const Eigen::Vector3d& u, double rho, double beta) {
  return {kSigma * (u[1] - u[0]), u[0] * (rho - u[2]) - u[1],
          u[0] * u[1] - beta * u[2]};
}

Eigen::Matrix3d lorenz_jacobian(const Eigen::Vector3d& u, double rho,
                                double beta) {
  Eigen::Matrix3d jac;
  jac << -kSigma, kSigma, 0.0,            //
      rho - u[2], -1.0, -u[0],            //
      u[1], u[0], -beta;
  return jac;
}

Eigen::Matrix<double, 3, 2> lorenz_param_sens(const Eigen::Vector3d& u,
                                              double /*rho*/, double /*beta*/) {
  Eigen::Matrix<double, 3, 2> sens;
  sens << 0.0, 0.0,  //
      u[0], 0.0,     //
      0.0, -u[2];
  return sens;
}

std::vector<Eigen::VectorXd> trapezoidal_integrate(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rhs,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
    const Eigen::VectorXd& u0, double dt, double t_end,
    const TrapezoidOptions& opts) {
  if (!(dt > 0.0))
    throw std::invalid_argument("trapezoidal: dt must be positive");
  const int n_steps = step_count(t_end, dt);
  const auto dim = u0.size();
  std::vector<Eigen::VectorXd> states;
  states.reserve(static_cast<std::size_t>(n_steps) + 1);
  states.push_back(u0);
  const Eigen::MatrixXd ident = Eigen::MatrixXd::Identity(dim, dim);
  for (int k = 0; k < n_steps; ++k) {
    const Eigen::VectorXd& u = states.back();
    const Eigen::VectorXd rhs_n = rhs(u);
    Eigen::VectorXd w = u + dt * rhs_n;  // explicit predictor
    bool converged = false;
    for (int it = 0; it <= opts.newton_max_iters; ++it) {
      const Eigen::VectorXd residual = w - u - 0.5 * dt * (rhs_n + rhs(w));
      if (residual.norm() <= opts.newton_tol) {
        converged = true;
        break;
      }
      if (it == opts.newton_max_iters) break;
      const Eigen::MatrixXd jac = ident - 0.5 * dt * jacobian(w);
      w -= jac.partialPivLu().solve(residual);
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "trapezoidal step " << k << ": Newton stalled (|u|=" << u.norm()
          << ", dt=" << dt << ")";
      throw std::runtime_error(msg.str());
    }
    states.push_back(std::move(w));
  }
  return states;
}

std::vector<Eigen::Vector3d> lorenz_trajectory(double rho, double beta,
                                               const Eigen::Vector3d& u0,
                                               double dt, double t_end,
                                               const TrapezoidOptions& opts) {
  const auto states = trapezoidal_integrate(
      [rho, beta](const Eigen::VectorXd& u) -> Eigen::VectorXd {
        return lorenz_rhs(u, rho, beta);
      },
      [rho, beta](const Eigen::VectorXd& u) -> Eigen::MatrixXd {
        return lorenz_jacobian(u, rho, beta);
      },
      u0, dt, t_end, opts);
  std::vector<Eigen::Vector3d> out;
  out.reserve(states.size());
  for (const Eigen::VectorXd& u : states) out.emplace_back(u);
  return out;
}

double lorenz_objective_from_samples(const std::vector<double>& z_window,
                                     double beta) {
  if (!(beta > 0.0)) throw std::domain_error("lorenz: beta must be positive");
  if (z_window.empty())
    throw std::invalid_argument("lorenz: empty objective window");
  double sum = 0.0;
  for (const double z : z_window) sum += (z - kTargetZ) * (z - kTargetZ);
  return sum / static_cast<double>(z_window.size()) + 20.0 / beta;
}

double lorenz_objective(double rho, double beta, const LorenzConfig& cfg) {
  validate_config(beta, cfg);
  const int n_spin = step_count(cfg.t_spinup, cfg.dt);
  const int n_win = step_count(cfg.t_window, cfg.dt);
  const auto states = lorenz_trajectory(
      rho, beta, cfg.u0, cfg.dt, (n_spin + n_win) * cfg.dt, cfg.integrator);
  std::vector<double> z_window;
  z_window.reserve(static_cast<std::size_t>(n_win));
  for (int k = n_spin + 1; k <= n_spin + n_win; ++k)
    z_window.push_back(states[static_cast<std::size_t>(k)][2]);
  return lorenz_objective_from_samples(z_window, beta);
}

Eigen::Matrix3d energy_clip(const Eigen::Matrix3d& jacobian) {
  const Eigen::Matrix3d sym = jacobian + jacobian.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig;
  eig.computeDirect(sym);
  const Eigen::Vector3d lam_minus = eig.eigenvalues().cwiseMin(0.0);
  return -(eig.eigenvectors() * lam_minus.asDiagonal() *
           eig.eigenvectors().transpose());
}

namespace {

// Tangent dynamics dv/dt = G v + b with G = J_rhs - energy_clip(-J_rhs)
// (clipped) or G = J_rhs (raw), stepped with the same trapezoidal scheme.
struct TangentStepper {
  double rho, beta, dt;
  bool clipped;

  Eigen::Matrix3d dynamics(const Eigen::Vector3d& u) const {
    const Eigen::Matrix3d jac = lorenz_jacobian(u, rho, beta);
    if (!clipped) return jac;
    return jac - energy_clip(-jac);
  }

  template <class Rhs>
  void advance(const Eigen::Vector3d& u_old, const Eigen::Vector3d& u_new,
               Rhs& v, const Rhs& b_old, const Rhs& b_new) const {
    const Eigen::Matrix3d g_old = dynamics(u_old);
    const Eigen::Matrix3d g_new = dynamics(u_new);
    const Eigen::Matrix3d lhs =
        Eigen::Matrix3d::Identity() - 0.5 * dt * g_new;
    const Rhs rhs = v + 0.5 * dt * (g_old * v + b_old + b_new);
    v = lhs.inverse() * rhs;
  }
};

}  // namespace

Eigen::Vector2d lorenz_gradient_energy(double rho, double beta,
                                       const LorenzConfig& cfg) {
  validate_config(beta, cfg);
  const int n_spin = step_count(cfg.t_spinup, cfg.dt);
  const int n_win = step_count(cfg.t_window, cfg.dt);
  const auto states = lorenz_trajectory(
      rho, beta, cfg.u0, cfg.dt, (n_spin + n_win) * cfg.dt, cfg.integrator);

  const TangentStepper stepper{rho, beta, cfg.dt, true};
  Eigen::Matrix<double, 3, 2> v = Eigen::Matrix<double, 3, 2>::Zero();
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();
  for (int k = 1; k <= n_spin + n_win; ++k) {
    const Eigen::Vector3d& u_old = states[static_cast<std::size_t>(k - 1)];
    const Eigen::Vector3d& u_new = states[static_cast<std::size_t>(k)];
    const Eigen::Matrix<double, 3, 2> b_old =
        lorenz_param_sens(u_old, rho, beta);
    const Eigen::Matrix<double, 3, 2> b_new =
        lorenz_param_sens(u_new, rho, beta);
    stepper.advance(u_old, u_new, v, b_old, b_new);
    if (k > n_spin) {
      const double miss = u_new[2] - kTargetZ;
      grad[0] += 2.0 * miss * v(2, 0);
      grad[1] += 2.0 * miss * v(2, 1);
    }
  }
  grad /= n_win;
  grad[1] += -20.0 / (beta * beta);
  return grad;
}

std::vector<double> lorenz_tangent_norms(double rho, double beta,
                                         const LorenzConfig& cfg, double t_end,
                                         bool clipped) {
  validate_config(beta, cfg);
  const int n_steps = step_count(t_end, cfg.dt);
  const auto states = lorenz_trajectory(rho, beta, cfg.u0, cfg.dt,
                                        n_steps * cfg.dt, cfg.integrator);
  const TangentStepper stepper{rho, beta, cfg.dt, clipped};
  Eigen::Vector3d v = Eigen::Vector3d::Constant(1.0 / std::sqrt(3.0));
  std::vector<double> norms;
  norms.reserve(static_cast<std::size_t>(n_steps) + 1);
  norms.push_back(v.norm());
  for (int k = 1; k <= n_steps; ++k) {
    const Eigen::Vector3d& u_old = states[static_cast<std::size_t>(k - 1)];
    const Eigen::Vector3d& u_new = states[static_cast<std::size_t>(k)];
    const Eigen::Vector3d b_old = lorenz_param_sens(u_old, rho, beta).col(0);
    const Eigen::Vector3d b_new = lorenz_param_sens(u_new, rho, beta).col(0);
    stepper.advance(u_old, u_new, v, b_old, b_new);
    norms.push_back(v.norm());
  }
  return norms;
}

Problem make_lorenz_problem(const LorenzConfig& cfg) {
  Problem p;
  std::ostringstream name;
  name << "lorenz:" << cfg.t_window;
  p.name = name.str();
  p.dim = 2;
  p.eval = [cfg](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    if (x.size() != 2)
      throw std::invalid_argument("lorenz problem expects (rho, beta)");
    const double rho = x[0];
    const double beta = x[1];
    const double f = lorenz_objective(rho, beta, cfg);
    grad = lorenz_gradient_energy(rho, beta, cfg);
    return f;
  };
  return p;
}

}  // namespace gebo
