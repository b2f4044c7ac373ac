#include "gebo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <limits>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gebo/problems.hpp"
#include "gebo/rng.hpp"

namespace gebo {

std::uint64_t run_seed(std::uint64_t master, int run_id,
                       const std::string& method) {
  return derive_seed(derive_seed(master, method),
                     static_cast<std::uint64_t>(run_id));
}

const RunOutcome& ExperimentResult::outcome(const std::string& method,
                                            int run_id) const {
  for (const RunOutcome& run : runs)
    if (run.method == method && run.run_id == run_id) return run;
  throw std::out_of_range("no such run: " + method + " #" +
                          std::to_string(run_id));
}

bool ExperimentResult::all_completed() const {
  return std::all_of(runs.begin(), runs.end(), [](const RunOutcome& run) {
    return run.trace.status != RunStatus::Aborted;
  });
}

std::vector<TraceRow> to_trace_rows(const RunTrace& trace, int run_id,
                                    const std::string& method) {
  std::vector<TraceRow> rows;
  rows.reserve(trace.records.size());
  const double opt0 = trace.initial_optimality();
  for (const EvalRecord& rec : trace.records) {
    TraceRow row;
    row.run_id = run_id;
    row.method = method;
    row.iter = rec.iter;
    row.n_feval = rec.n_feval;
    row.f = rec.f;
    row.f_best = rec.f_best;
    row.opt_norm = rec.true_grad_norm;
    row.opt_ratio = (opt0 > 0.0)
                        ? rec.opt_best / opt0
                        : (rec.opt_best > 0.0
                               ? std::numeric_limits<double>::infinity()
                               : 0.0);
    row.u_c = rec.u_c;
    row.u_sigma = rec.u_sigma;
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

RunOutcome execute_run(const ExperimentConfig& cfg, const std::string& method,
                       int run_id, const Eigen::VectorXd& start) {
  RunOutcome outcome;
  outcome.run_id = run_id;
  outcome.method = method;
  const std::uint64_t seed = run_seed(cfg.master_seed, run_id, method);
  try {
    Problem problem = parse_problem(cfg.problem_spec);
    if (cfg.grad_noise > 0.0)
      problem = noisy_gradient_wrap(problem, cfg.grad_noise,
                                    derive_seed(seed, "noise"));
    if (method == "bo") {
      BoConfig bo = cfg.bo;
      bo.max_evals = cfg.max_evals;
      bo.noisy_mode = cfg.bo.noisy_mode || cfg.grad_noise > 0.0;
      outcome.trace = bo_minimize(problem, start, bo, seed);
    } else if (method == "bfgs") {
      QnConfig qn = cfg.qn;
      qn.max_evals = cfg.max_evals;
      outcome.trace = bfgs_minimize(problem, start, qn);
    } else {
      throw std::invalid_argument("unknown method: " + method);
    }
  } catch (const std::exception& err) {
    outcome.trace.status = RunStatus::Aborted;
    outcome.trace.message = err.what();
  }
  outcome.evals_to_tol = outcome.trace.evals_to_tolerance(
      cfg.tolerance.f_tol, cfg.tolerance.opt_ratio_tol());
  return outcome;
}

double lower_median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.n_runs < 1)
    throw std::invalid_argument("run_experiment: n_runs must be >= 1");
  const Problem prototype = parse_problem(cfg.problem_spec);

  Eigen::VectorXd lb = cfg.box_lb;
  Eigen::VectorXd ub = cfg.box_ub;
  if (lb.size() == 0 || ub.size() == 0)
    default_start_box(prototype.name, prototype.dim, lb, ub);
  if (lb.size() != prototype.dim || ub.size() != prototype.dim)
    throw std::invalid_argument("run_experiment: start box dimension mismatch");
  if (!lb.allFinite() || !ub.allFinite())
    throw std::invalid_argument("run_experiment: start box must be finite");

  ExperimentResult result;
  {
    Rng rng(derive_seed(cfg.master_seed, "starts"));
    result.starts = latin_hypercube(rng, cfg.n_runs, lb, ub);
  }

  struct Job {
    std::string method;
    int run_id;
  };
  std::vector<Job> jobs;
  for (const std::string& method : cfg.methods)
    for (int run = 0; run < cfg.n_runs; ++run) jobs.push_back({method, run});

  result.runs.resize(jobs.size());
  const int workers =
      cfg.workers > 0
          ? cfg.workers
          : std::max(1u, std::thread::hardware_concurrency());
  for (std::size_t begin = 0; begin < jobs.size();
       begin += static_cast<std::size_t>(workers)) {
    const std::size_t end =
        std::min(jobs.size(), begin + static_cast<std::size_t>(workers));
    std::vector<std::future<RunOutcome>> batch;
    for (std::size_t k = begin; k < end; ++k) {
      const Job& job = jobs[k];
      batch.push_back(std::async(
          std::launch::async, [&cfg, &result, job]() {
            return execute_run(cfg, job.method, job.run_id,
                               result.starts.row(job.run_id).transpose());
          }));
    }
    for (std::size_t k = begin; k < end; ++k)
      result.runs[k] = batch[k - begin].get();
  }

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    for (const RunOutcome& run : result.runs) {
      const std::string path = cfg.out_dir + "/trace_" + run.method + "_run" +
                               std::to_string(run.run_id) + ".csv";
      write_trace_csv(path, to_trace_rows(run.trace, run.run_id, run.method));
    }
    write_summary_csv(cfg.out_dir + "/summary.csv", summarize(cfg, result));

    nlohmann::json meta;
    meta["problem"] = cfg.problem_spec;
    meta["n_d"] = prototype.dim;
    meta["methods"] = cfg.methods;
    meta["n_runs"] = cfg.n_runs;
    meta["seed"] = cfg.master_seed;
    meta["grad_noise"] = cfg.grad_noise;
    meta["max_evals"] = cfg.max_evals;
    meta["f_tol"] = cfg.tolerance.f_tol;
    meta["opt_orders"] = cfg.tolerance.opt_orders;
    meta["box_lb"] = std::vector<double>(lb.data(), lb.data() + lb.size());
    meta["box_ub"] = std::vector<double>(ub.data(), ub.data() + ub.size());
    std::vector<std::string> statuses;
    for (const RunOutcome& run : result.runs)
      statuses.push_back(run.method + ":" + std::to_string(run.run_id) + ":" +
                         run_status_name(run.trace.status));
    meta["run_status"] = statuses;
    std::ofstream out(cfg.out_dir + "/experiment.json", std::ios::binary);
    out << meta.dump(2) << '\n';
  }
  return result;
}

std::vector<SummaryRow> summarize(const ExperimentConfig& cfg,
                                  const ExperimentResult& result) {
  const Problem prototype = parse_problem(cfg.problem_spec);
  std::vector<SummaryRow> rows;
  for (const std::string& method : cfg.methods) {
    SummaryRow row;
    row.method = method;
    row.problem = cfg.problem_spec;
    row.n_d = prototype.dim;
    row.n_runs = cfg.n_runs;
    std::vector<double> evals;
    for (const RunOutcome& run : result.runs) {
      if (run.method != method) continue;
      if (run.evals_to_tol >= 0) {
        ++row.success_count;
        evals.push_back(run.evals_to_tol);
      } else {
        evals.push_back(std::numeric_limits<double>::infinity());
      }
    }
    row.achieved = 2 * row.success_count >= cfg.n_runs;
    row.median_evals = row.achieved && !evals.empty() ? lower_median(evals)
                                                      : 0.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SummaryRow> report_medians(
    const std::vector<std::vector<TraceRow>>& traces,
    const std::string& problem, int n_d, const ToleranceSpec& tolerance) {
  if (traces.empty()) throw std::invalid_argument("report_medians: no traces");
  struct PerRun {
    std::string method;
    double evals = std::numeric_limits<double>::infinity();
  };
  std::vector<PerRun> per_run;
  std::vector<std::string> methods;
  const double ratio_tol = tolerance.opt_ratio_tol();
  for (const auto& rows : traces) {
    if (rows.empty()) continue;
    PerRun run;
    run.method = rows.front().method;
    if (std::find(methods.begin(), methods.end(), run.method) == methods.end())
      methods.push_back(run.method);
    for (const TraceRow& row : rows) {
      if (row.f_best <= tolerance.f_tol && row.opt_ratio <= ratio_tol) {
        run.evals = row.n_feval;
        break;
      }
    }
    per_run.push_back(std::move(run));
  }

  std::vector<SummaryRow> out;
  for (const std::string& method : methods) {
    SummaryRow row;
    row.method = method;
    row.problem = problem;
    row.n_d = n_d;
    std::vector<double> evals;
    for (const PerRun& run : per_run) {
      if (run.method != method) continue;
      ++row.n_runs;
      if (std::isfinite(run.evals)) ++row.success_count;
      evals.push_back(run.evals);
    }
    row.achieved = 2 * row.success_count >= row.n_runs && row.n_runs > 0;
    row.median_evals = row.achieved ? lower_median(evals) : 0.0;
    out.push_back(std::move(row));
  }
  return out;
}

void write_summary_csv(const std::string& path,
                       const std::vector<SummaryRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << "method,problem,n_d,n_runs,success_count,median_evals_to_tol\n";
  for (const SummaryRow& row : rows) {
    out << row.method << ',' << row.problem << ',' << row.n_d << ','
        << row.n_runs << ',' << row.success_count << ',';
    if (row.achieved)
      out << format_double(row.median_evals);
    else
      out << "not_achieved";
    out << '\n';
  }
}

}  // namespace gebo
