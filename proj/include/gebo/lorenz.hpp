#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "gebo/problems.hpp"

namespace gebo {

// Lorenz 63 with sigma = 10 fixed; (rho, beta) are the design variables.
// The residual convention du/dt + r_x(u) = 0 has r_x = -rhs.
Eigen::Vector3d lorenz_rhs(const Eigen::Vector3d& u, double rho, double beta);
Eigen::Matrix3d lorenz_jacobian(const Eigen::Vector3d& u, double rho,
                                double beta);
// Columns: d rhs / d rho, d rhs / d beta.
Eigen::Matrix<double, 3, 2> lorenz_param_sens(const Eigen::Vector3d& u,
                                              double rho, double beta);

struct TrapezoidOptions {
  double newton_tol = 1e-12;
  int newton_max_iters = 20;
};

// Implicit trapezoidal trajectory of du/dt = rhs(u); states at t = 0, dt,
// 2 dt, ..., with a Newton solve on each step. Throws on Newton failure.
std::vector<Eigen::VectorXd> trapezoidal_integrate(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rhs,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& jacobian,
    const Eigen::VectorXd& u0, double dt, double t_end,
    const TrapezoidOptions& opts = {});

std::vector<Eigen::Vector3d> lorenz_trajectory(double rho, double beta,
                                               const Eigen::Vector3d& u0,
                                               double dt, double t_end,
                                               const TrapezoidOptions& opts = {});

struct LorenzConfig {
  double dt = 0.01;
  double t_spinup = 20.0;  // objective ignores t <= t_spinup
  double t_window = 10.0;  // objective window length t_J
  Eigen::Vector3d u0{1.0, 1.0, 1.0};
  TrapezoidOptions integrator;
};

// J = mean of (z_i - 35)^2 over the window samples plus 20 / beta.
double lorenz_objective_from_samples(const std::vector<double>& z_window,
                                     double beta);
double lorenz_objective(double rho, double beta, const LorenzConfig& cfg);

// Stabilizing matrix of the energy method: eigendecompose J + J^T, keep the
// non-positive eigenvalues, A = -E Lambda^- E^T; then v^T (J + A) v >= 0.
Eigen::Matrix3d energy_clip(const Eigen::Matrix3d& jacobian);

// Tangent-equation gradient of the Lorenz objective over (rho, beta), with
// the energy-method clipping applied to the residual Jacobian at every
// step. Inexact by construction for chaotic trajectories.
Eigen::Vector2d lorenz_gradient_energy(double rho, double beta,
                                       const LorenzConfig& cfg);

// Norm history |v(t)| of the rho-tangent from v(0) = 0 over [0, t_end],
// with or without clipping; used to check boundedness.
std::vector<double> lorenz_tangent_norms(double rho, double beta,
                                         const LorenzConfig& cfg, double t_end,
                                         bool clipped);

// Objective + energy-method gradient as an optimization problem over
// (rho, beta).
Problem make_lorenz_problem(const LorenzConfig& cfg);

}  // namespace gebo
