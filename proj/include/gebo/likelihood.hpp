#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "gebo/gp.hpp"
#include "gebo/kernels.hpp"
#include "gebo/rng.hpp"

namespace gebo {

// Hyperparameter search settings; defaults follow the LHS-around-the-median
// scheme with 50 starting samples and a single local maximization.
struct HpSearchConfig {
  int n_lhs = 50;
  int n_med = 5;
  double n_log = 3.0;  // half-width of the LHS box, in decades
  double gamma_init = 1e-2;
  double sigma_f_init = 1e-5;
  double sigma_gf_init = 1e-5;
  double sigma_k_init = 1.0;
  double alpha_init = 1.0;
  // Noisy gradients: sigma_k and sigma_gf join the numerically selected set.
  bool noisy = false;
  // Five independent local maximizations instead of one from the best sample.
  bool multistart = false;
  int multistart_n_lhs = 5;
  int max_ascent_iters = 100;
  double ascent_grad_tol = 1e-6;
};

// Ordered set of numerically selected hyperparameters: gamma entries, then
// sigma_k and sigma_gf in noisy mode, then alpha for the rational quadratic.
// Search variables are log10 of the raw values.
struct HpLayout {
  Eigen::Index n_d = 0;
  bool has_sigma_k = false;
  bool has_sigma_gf = false;
  bool has_alpha = false;

  static HpLayout make(Eigen::Index n_d, bool noisy, const KernelKind& kind);

  Eigen::Index size() const {
    return n_d + (has_sigma_k ? 1 : 0) + (has_sigma_gf ? 1 : 0) +
           (has_alpha ? 1 : 0);
  }
  Eigen::VectorXd pack_raw(const Hyperparameters& hp) const;
  Eigen::VectorXd pack_log10(const Hyperparameters& hp) const;
  Hyperparameters unpack_log10(const Eigen::VectorXd& v) const;
  Eigen::VectorXd initial_values(const HpSearchConfig& cfg) const;  // raw
};

// beta maximizing the marginal log likelihood:
//   (1m^T Sigma^-1 fgrad) / (1m^T Sigma^-1 1m); the sigma_k^2 scale cancels.
double beta_closed_form(const GpFactor& factor, const Eigen::VectorXd& fgrad,
                        Eigen::Index n_x, Eigen::Index n_d);

// Noise-free closed form: residual quadratic form over n_x (n_d + 1).
double sigk2_closed_form(const GpFactor& factor, const Eigen::VectorXd& fgrad,
                         double beta, Eigen::Index n_x, Eigen::Index n_d);

struct MllEval {
  double value = 0.0;
  Hyperparameters hp;  // beta (and sigma_k when noise-free) resolved
  GpFactor factor;
};

// Marginal log likelihood with constants dropped. Noise-free mode profiles
// beta and sigma_k^2 out with the closed forms; noisy mode substitutes the
// closed-form beta only.
MllEval mll_eval(const DataSet& data, const Hyperparameters& hp,
                 const KernelKind& kind, double cond_max, bool noisy);
double mll(const DataSet& data, const Hyperparameters& hp,
           const KernelKind& kind, double cond_max, bool noisy);

// As mll, but with beta held at the supplied value (no closed-form
// substitution); noisy-mode evaluation of the raw likelihood expression.
double mll_fixed_beta(const DataSet& data, const Hyperparameters& hp,
                      const KernelKind& kind, double cond_max, bool noisy);

// Analytic gradient of mll with respect to the natural logs of the active
// hyperparameters (HpLayout order). The nugget is treated as locally
// constant; its derivative contribution is O(nugget).
Eigen::VectorXd mll_grad_log_hp(const DataSet& data, const Hyperparameters& hp,
                                const KernelKind& kind, double cond_max,
                                bool noisy);

// log10 search box: centre is the elementwise median of the last n_med
// selected vectors (initial values when the history is empty), half-width
// n_log decades.
void hp_search_bounds(const std::vector<Hyperparameters>& history,
                      const HpSearchConfig& cfg, const HpLayout& layout,
                      Eigen::VectorXd& lb, Eigen::VectorXd& ub);

// Latin hypercube of log10 hyperparameter samples over the search box.
Eigen::MatrixXd hp_lhs_starts(const std::vector<Hyperparameters>& history,
                              const HpSearchConfig& cfg, const HpLayout& layout,
                              std::uint64_t seed);

struct HpSelection {
  Hyperparameters hp;
  double mll = 0.0;
  bool fallback = false;  // every LHS evaluation was non-finite
};

// Evaluate the LHS samples, run bounded local maximization from the best
// (or from each of 5 samples in multistart mode), resolve the closed forms.
HpSelection select_hyperparameters(const DataSet& data,
                                   const std::vector<Hyperparameters>& history,
                                   const HpSearchConfig& cfg,
                                   const KernelKind& kind, double cond_max,
                                   std::uint64_t seed);

}  // namespace gebo
