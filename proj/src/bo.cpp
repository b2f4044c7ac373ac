#include "gebo/bo.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "gebo/gp.hpp"
#include "gebo/rng.hpp"

namespace gebo {

namespace {

using Clock = std::chrono::steady_clock;

struct History {
  Eigen::MatrixXd points;  // n x n_d, row per evaluation
  Eigen::MatrixXd grads;   // n x n_d
  Eigen::VectorXd values;  // n
  int count = 0;

  void reserve(int capacity, int n_d) {
    points.resize(capacity, n_d);
    grads.resize(capacity, n_d);
    values.resize(capacity);
  }
  void push(const Eigen::VectorXd& x, double f, const Eigen::VectorXd& g) {
    points.row(count) = x.transpose();
    grads.row(count) = g.transpose();
    values[count] = f;
    ++count;
  }
  int best_index() const {
    int best = 0;
    for (int i = 1; i < count; ++i)
      if (values[i] < values[best]) best = i;
    return best;
  }
};

}  // namespace

RunStatus stop_check(const RunTrace& trace, const BoConfig& cfg) {
  if (trace.records.empty()) return RunStatus::Running;

  // Optimality of the incumbent, as seen by the optimizer.
  std::size_t best = 0;
  for (std::size_t i = 1; i < trace.records.size(); ++i)
    if (trace.records[i].f < trace.records[best].f) best = i;
  const double g0 = trace.records.front().grad_norm;
  if (trace.records[best].grad_norm <=
      std::pow(10.0, -cfg.conv_orders) * g0)
    return RunStatus::Converged;

  int since_improvement = 0;
  double best_f = trace.records.front().f;
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    if (trace.records[i].f < best_f) {
      best_f = trace.records[i].f;
      since_improvement = 0;
    } else {
      ++since_improvement;
    }
  }
  if (since_improvement >= cfg.stall_limit) return RunStatus::Stalled;

  if (trace.records.back().n_feval >= cfg.max_evals)
    return RunStatus::BudgetExhausted;
  return RunStatus::Running;
}

RunTrace bo_minimize(const Problem& problem, const Eigen::VectorXd& x0,
                     const BoConfig& cfg, std::uint64_t seed) {
  if (x0.size() != problem.dim)
    throw std::invalid_argument("bo_minimize: start dimension mismatch");
  const int n_d = problem.dim;

  HpSearchConfig hp_cfg = cfg.hp;
  hp_cfg.noisy = cfg.noisy_mode;

  RunTrace trace;
  const auto start_time = Clock::now();
  History history;
  history.reserve(cfg.max_evals + 2, n_d);
  std::vector<Hyperparameters> hp_history;

  double f_best = std::numeric_limits<double>::infinity();
  double opt_best = std::numeric_limits<double>::infinity();

  const auto record = [&](const Eigen::VectorXd& x, double f,
                          const Eigen::VectorXd& g, double u_c,
                          double u_sigma, double sigma_gf_hat,
                          bool hp_fallback, bool acq_fallback) {
    const double true_norm =
        problem.has_true_grad() ? problem.true_grad(x).norm() : g.norm();
    if (f < f_best) {
      f_best = f;
      opt_best = true_norm;
    }
    EvalRecord rec;
    rec.iter = history.count - 1;
    rec.n_feval = history.count;
    rec.x = x;
    rec.f = f;
    rec.grad_norm = g.norm();
    rec.true_grad_norm = true_norm;
    rec.f_best = f_best;
    rec.opt_best = opt_best;
    rec.u_c = u_c;
    rec.u_sigma = u_sigma;
    rec.sigma_gf_hat = sigma_gf_hat;
    rec.hp_fallback = hp_fallback;
    rec.acq_fallback = acq_fallback;
    rec.wall_time_s =
        std::chrono::duration<double>(Clock::now() - start_time).count();
    trace.records.push_back(std::move(rec));
  };

  // Initial evaluation.
  {
    Eigen::VectorXd g(n_d);
    double f;
    try {
      f = problem.eval(x0, g);
    } catch (const std::exception& err) {
      trace.status = RunStatus::Aborted;
      trace.message = std::string("initial evaluation failed: ") + err.what();
      return trace;
    }
    if (!std::isfinite(f) || !g.allFinite()) {
      trace.status = RunStatus::Aborted;
      trace.message = "initial evaluation not finite";
      return trace;
    }
    history.push(x0, f, g);
    record(x0, f, g, 0.0, std::numeric_limits<double>::infinity(), 0.0, false,
           false);
  }

  double u_c = cfg.tr.uc0;
  double u_sigma = std::numeric_limits<double>::infinity();
  double g_circ_prev = 0.0;
  double g_sigma_prev = 0.0;

  for (int iter = 1;; ++iter) {
    trace.status = stop_check(trace, cfg);
    if (trace.status != RunStatus::Running) break;

    const int best_index = history.best_index();
    const Eigen::VectorXd x_best =
        history.points.row(best_index).transpose();

    const Eigen::MatrixXd all_points = history.points.topRows(history.count);
    const DataRegion region =
        select_data_region(all_points, best_index, cfg.n_close, cfg.n_last);
    const int n_data = static_cast<int>(region.indices.size());

    Eigen::MatrixXd region_points(n_data, n_d);
    Eigen::MatrixXd region_grads(n_data, n_d);
    Eigen::VectorXd region_values(n_data);
    for (int k = 0; k < n_data; ++k) {
      const int idx = region.indices[static_cast<std::size_t>(k)];
      region_points.row(k) = history.points.row(idx);
      region_grads.row(k) = history.grads.row(idx);
      region_values[k] = history.values[idx];
    }
    const DataSet data =
        make_dataset(region_points, region_values, region_grads);

    HpSelection hp_sel;
    FittedSurrogate* surrogate_ptr = nullptr;
    std::optional<FittedSurrogate> surrogate;
    try {
      hp_sel = select_hyperparameters(
          data, hp_history, hp_cfg, cfg.kernel, cfg.cond_max,
          derive_seed(derive_seed(seed, "hp"), static_cast<std::uint64_t>(iter)));
      hp_history.push_back(hp_sel.hp);
      surrogate.emplace(
          fit_surrogate(data, hp_sel.hp, cfg.kernel, cfg.cond_max));
      surrogate_ptr = &*surrogate;
    } catch (const std::exception& err) {
      trace.status = RunStatus::Aborted;
      trace.message = std::string("surrogate fit failed: ") + err.what();
      break;
    }

    // Trust-region bounds from the latest merit outcomes.
    {
      const int n = history.count;
      const double j_latest = history.values[n - 1];
      double j_prev = j_latest;
      double j_best_prev = j_latest;
      if (n >= 2) {
        j_prev = history.values[n - 2];
        j_best_prev = history.values.head(n - 1).minCoeff();
      }
      u_c = update_circular_bound(cfg.tr, u_c, j_latest, j_prev, j_best_prev,
                                  g_circ_prev, n_data, region.radius);
      u_sigma = update_sigma_bound(cfg.tr, u_sigma, j_latest, j_prev,
                                   j_best_prev, g_sigma_prev, n_data);
    }

    double f_best_acq = history.values[best_index];
    if (cfg.noisy_mode) {
      // With noisy data the improvement reference is the lowest posterior
      // mean over the data region.
      f_best_acq = std::numeric_limits<double>::infinity();
      for (int k = 0; k < n_data; ++k)
        f_best_acq =
            std::min(f_best_acq, surrogate_ptr->posterior_mean(
                                     region_points.row(k).transpose()));
    }

    bool evaluated = false;
    bool acq_fallback = false;
    Eigen::VectorXd x_new;
    Eigen::VectorXd g_new(n_d);
    double f_new = 0.0;
    for (int attempt = 0; attempt < 2 && !evaluated; ++attempt) {
      AcqResult acq;
      try {
        acq = minimize_acquisition(
            *surrogate_ptr, cfg.acquisition, u_c, u_sigma, x_best, f_best_acq,
            region_points, region_values,
            cfg.constraints ? &*cfg.constraints : nullptr,
            derive_seed(derive_seed(seed, "acq"),
                        static_cast<std::uint64_t>(iter * 2 + attempt)),
            cfg.acq);
      } catch (const std::exception& err) {
        trace.status = RunStatus::Aborted;
        trace.message = std::string("acquisition failed: ") + err.what();
        return trace;
      }
      acq_fallback = acq.fallback;
      try {
        f_new = problem.eval(acq.x, g_new);
        if (!std::isfinite(f_new) || !g_new.allFinite())
          throw std::runtime_error("non-finite evaluation");
        x_new = acq.x;
        g_circ_prev = acq.g_circ;
        g_sigma_prev = acq.g_sigma;
        evaluated = true;
      } catch (const std::exception&) {
        // Oracle failure: shrink the step bound and retry once.
        u_c *= cfg.tr.rho_dec;
      }
    }
    if (!evaluated) {
      trace.status = RunStatus::Aborted;
      trace.message = "two consecutive oracle failures";
      break;
    }

    history.push(x_new, f_new, g_new);
    record(x_new, f_new, g_new, u_c, u_sigma, hp_sel.hp.sigma_gf,
           hp_sel.fallback, acq_fallback);
  }
  return trace;
}

}  // namespace gebo
