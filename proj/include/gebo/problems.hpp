#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include <Eigen/Core>

namespace gebo {

// Objective with analytic gradient. eval may be stateful (noise streams);
// one Problem instance belongs to one optimization run. true_grad, when
// set, reports the noise-free gradient and is used for reporting only.
struct Problem {
  std::string name;
  int dim = 0;
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)> eval;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> true_grad;

  bool has_true_grad() const { return static_cast<bool>(true_grad); }
};

// Coupling matrix of the quadratic and bowl functions:
// a_ij = exp(-(i-j)^2/2) / 10.
Eigen::MatrixXd coupling_matrix(int n_d);

// f = (x-1)^T A (x-1) / 2, minimum 0 at x = 1.
Problem make_quadratic(int n_d);

// f = 1 - exp(-(x-1)^T A (x-1)/2) + |x-1|_2^2/100 + |x-1|_4^4/1000.
Problem make_bowl(int n_d);

// f = sum_i [a (x_{i+1} - x_i^2)^2 + (1 - x_i)^2].
Problem make_rosenbrock(int n_d, double a);

// Adds an independent N(0, sigma^2) draw to every gradient entry at each
// evaluation; the objective stays exact and the clean gradient is kept for
// reporting.
Problem noisy_gradient_wrap(const Problem& base, double sigma,
                            std::uint64_t seed);

// "quad:<n_d>" | "bowl:<n_d>" | "rosen:<n_d>:<a>" | "lorenz:<t_J>".
Problem parse_problem(const std::string& spec);

// Default experiment start box for a problem ([-10, 10]^n_d for the
// analytic functions, the (rho, beta) domain for the Lorenz case).
void default_start_box(const std::string& problem_name, int n_d,
                       Eigen::VectorXd& lb, Eigen::VectorXd& ub);

}  // namespace gebo
