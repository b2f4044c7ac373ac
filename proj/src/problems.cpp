#include "gebo/problems.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "gebo/lorenz.hpp"
#include "gebo/rng.hpp"

namespace gebo {

Eigen::MatrixXd coupling_matrix(int n_d) {
  Eigen::MatrixXd a(n_d, n_d);
  for (int i = 0; i < n_d; ++i)
    for (int j = 0; j < n_d; ++j)
      a(i, j) = 0.1 * std::exp(-0.5 * (i - j) * (i - j));
  return a;
}

Problem make_quadratic(int n_d) {
  if (n_d < 1) throw std::invalid_argument("quadratic: n_d must be >= 1");
  auto a = std::make_shared<Eigen::MatrixXd>(coupling_matrix(n_d));
  Problem p;
  p.name = "quad:" + std::to_string(n_d);
  p.dim = n_d;
  p.eval = [a](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const Eigen::VectorXd t = x.array() - 1.0;
    grad = (*a) * t;
    return 0.5 * t.dot(grad);
  };
  return p;
}

Problem make_bowl(int n_d) {
  if (n_d < 1) throw std::invalid_argument("bowl: n_d must be >= 1");
  auto a = std::make_shared<Eigen::MatrixXd>(coupling_matrix(n_d));
  Problem p;
  p.name = "bowl:" + std::to_string(n_d);
  p.dim = n_d;
  p.eval = [a](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    const Eigen::ArrayXd t = x.array() - 1.0;
    const Eigen::VectorXd at = (*a) * t.matrix();
    const double quad = t.matrix().dot(at);
    const double expo = std::exp(-0.5 * quad);
    grad = expo * at + (2.0 / 100.0) * t.matrix() +
           (4.0 / 1000.0) * t.cube().matrix();
    return 1.0 - expo + t.square().sum() / 100.0 +
           t.square().square().sum() / 1000.0;
  };
  return p;
}

Problem make_rosenbrock(int n_d, double a) {
  if (n_d < 2) throw std::invalid_argument("rosenbrock: n_d must be >= 2");
  if (!(a > 0.0)) throw std::invalid_argument("rosenbrock: a must be > 0");
  Problem p;
  p.name = "rosen:" + std::to_string(n_d) + ":" + std::to_string(a);
  p.dim = n_d;
  p.eval = [a, n_d](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    double f = 0.0;
    grad.setZero(n_d);
    for (int i = 0; i + 1 < n_d; ++i) {
      const double gap = x[i + 1] - x[i] * x[i];
      const double miss = 1.0 - x[i];
      f += a * gap * gap + miss * miss;
      grad[i] += -4.0 * a * gap * x[i] - 2.0 * miss;
      grad[i + 1] += 2.0 * a * gap;
    }
    return f;
  };
  return p;
}

Problem noisy_gradient_wrap(const Problem& base, double sigma,
                            std::uint64_t seed) {
  if (!(sigma >= 0.0))
    throw std::invalid_argument("noisy_gradient_wrap: sigma must be >= 0");
  Problem p;
  p.name = base.name + "+noise";
  p.dim = base.dim;
  auto rng = std::make_shared<Rng>(seed);
  auto base_eval = base.eval;
  p.eval = [base_eval, sigma, rng](const Eigen::VectorXd& x,
                                   Eigen::VectorXd& grad) {
    const double f = base_eval(x, grad);
    if (sigma > 0.0)
      for (Eigen::Index d = 0; d < grad.size(); ++d)
        grad[d] += sigma * rng->normal();
    return f;
  };
  // Reporting keeps the exact gradient of the base problem.
  if (base.has_true_grad()) {
    p.true_grad = base.true_grad;
  } else {
    p.true_grad = [base_eval](const Eigen::VectorXd& x) {
      Eigen::VectorXd grad(x.size());
      base_eval(x, grad);
      return grad;
    };
  }
  return p;
}

namespace {

std::vector<std::string> split_spec(const std::string& spec) {
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (begin <= spec.size()) {
    const std::size_t end = spec.find(':', begin);
    if (end == std::string::npos) {
      parts.push_back(spec.substr(begin));
      break;
    }
    parts.push_back(spec.substr(begin, end - begin));
    begin = end + 1;
  }
  return parts;
}

}  // namespace

Problem parse_problem(const std::string& spec) {
  const auto parts = split_spec(spec);
  if (parts.empty()) throw std::invalid_argument("empty problem spec");
  const std::string& kind = parts[0];
  if (kind == "quad" || kind == "bowl") {
    if (parts.size() != 2)
      throw std::invalid_argument("expected " + kind + ":<n_d>");
    const int n_d = std::stoi(parts[1]);
    return kind == "quad" ? make_quadratic(n_d) : make_bowl(n_d);
  }
  if (kind == "rosen") {
    if (parts.size() != 3)
      throw std::invalid_argument("expected rosen:<n_d>:<a>");
    return make_rosenbrock(std::stoi(parts[1]), std::stod(parts[2]));
  }
  if (kind == "lorenz") {
    if (parts.size() != 2)
      throw std::invalid_argument("expected lorenz:<t_J>");
    LorenzConfig cfg;
    cfg.t_window = std::stod(parts[1]);
    if (!(cfg.t_window > 0.0))
      throw std::invalid_argument("lorenz: t_J must be positive");
    return make_lorenz_problem(cfg);
  }
  throw std::invalid_argument("unknown problem spec: " + spec);
}

void default_start_box(const std::string& problem_name, int n_d,
                       Eigen::VectorXd& lb, Eigen::VectorXd& ub) {
  if (problem_name.rfind("lorenz", 0) == 0) {
    lb.resize(2);
    ub.resize(2);
    lb << 25.0, 1.5;
    ub << 35.0, 3.5;
    return;
  }
  lb = Eigen::VectorXd::Constant(n_d, -10.0);
  ub = Eigen::VectorXd::Constant(n_d, 10.0);
}

}  // namespace gebo
