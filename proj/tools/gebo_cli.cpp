#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gebo/harness.hpp"
#include "gebo/problems.hpp"

namespace {

using nlohmann::json;

void apply_bo_overrides(const json& j, gebo::BoConfig& bo) {
  if (j.contains("kernel")) bo.kernel = gebo::parse_kernel(j["kernel"]);
  if (j.contains("cond_max")) bo.cond_max = j["cond_max"];
  if (j.contains("acquisition"))
    bo.acquisition = gebo::parse_acquisition(j["acquisition"]);
  if (j.contains("n_close")) bo.n_close = j["n_close"];
  if (j.contains("n_last")) bo.n_last = j["n_last"];
  if (j.contains("noisy_mode")) bo.noisy_mode = j["noisy_mode"];
  if (j.contains("conv_orders")) bo.conv_orders = j["conv_orders"];
  if (j.contains("stall_limit")) bo.stall_limit = j["stall_limit"];
  if (j.contains("rho_inc")) bo.tr.rho_inc = j["rho_inc"];
  if (j.contains("rho_dec")) bo.tr.rho_dec = j["rho_dec"];
  if (j.contains("rho_data")) bo.tr.rho_data = j["rho_data"];
  if (j.contains("uc0")) bo.tr.uc0 = j["uc0"];
  if (j.contains("us0")) bo.tr.us0 = j["us0"];
  if (j.contains("us_min")) bo.tr.us_min = j["us_min"];
  if (j.contains("us_max")) bo.tr.us_max = j["us_max"];
  if (j.contains("sigma_activation")) bo.tr.sigma_activation = j["sigma_activation"];
  if (j.contains("n_lhs")) bo.hp.n_lhs = j["n_lhs"];
  if (j.contains("n_med")) bo.hp.n_med = j["n_med"];
  if (j.contains("n_log")) bo.hp.n_log = j["n_log"];
  if (j.contains("gamma_init")) bo.hp.gamma_init = j["gamma_init"];
  if (j.contains("sigma_k_init")) bo.hp.sigma_k_init = j["sigma_k_init"];
  if (j.contains("sigma_gf_init")) bo.hp.sigma_gf_init = j["sigma_gf_init"];
  if (j.contains("hp_multistart")) bo.hp.multistart = j["hp_multistart"];
  if (j.contains("acq_n_lhs")) bo.acq.n_lhs = j["acq_n_lhs"];
  if (j.contains("acq_n_best")) bo.acq.n_best = j["acq_n_best"];
  if (j.contains("constraints")) {
    gebo::LinearConstraints lin;
    const auto& jc = j["constraints"];
    const auto rows = jc["a"].size();
    const auto cols = rows ? jc["a"][0].size() : 0;
    lin.a.resize(rows, cols);
    lin.b.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) lin.a(r, c) = jc["a"][r][c];
      lin.b(r) = jc["b"][r];
    }
    bo.constraints = lin;
  }
}

void apply_qn_overrides(const json& j, gebo::QnConfig& qn) {
  if (j.contains("wolfe_c1")) qn.wolfe_c1 = j["wolfe_c1"];
  if (j.contains("wolfe_c2")) qn.wolfe_c2 = j["wolfe_c2"];
  if (j.contains("max_linesearch_evals"))
    qn.max_linesearch_evals = j["max_linesearch_evals"];
  if (j.contains("grad_ratio_tol")) qn.grad_ratio_tol = j["grad_ratio_tol"];
  if (j.contains("step_tol")) qn.step_tol = j["step_tol"];
}

void print_summary(const std::vector<gebo::SummaryRow>& rows) {
  std::cout << "method      problem            n_d  runs  success  median_evals\n";
  for (const gebo::SummaryRow& row : rows) {
    std::ostringstream med;
    if (row.achieved)
      med << row.median_evals;
    else
      med << "not_achieved";
    std::printf("%-10s  %-17s  %3d  %4d  %7d  %s\n", row.method.c_str(),
                row.problem.c_str(), row.n_d, row.n_runs, row.success_count,
                med.str().c_str());
  }
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-enhanced local Bayesian optimization benchmark"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Run an experiment");
  std::string problem, methods = "bo,bfgs", out_dir, config_path, box_spec;
  int runs = 5, budget = 300, workers = 0;
  std::uint64_t seed = 0;
  double grad_noise = 0.0, f_tol = 1e-5, opt_orders = 10.0;
  run_cmd->add_option("--problem", problem,
                      "quad:<n> | bowl:<n> | rosen:<n>:<a> | lorenz:<tJ>")
      ->required();
  run_cmd->add_option("--method", methods, "comma list of bo,bfgs");
  run_cmd->add_option("--runs", runs, "independent runs (LHS starts)");
  run_cmd->add_option("--seed", seed, "master seed");
  run_cmd->add_option("--out", out_dir, "output directory for CSV traces");
  run_cmd->add_option("--grad-noise", grad_noise,
                      "stddev of gradient noise added per entry");
  run_cmd->add_option("--budget", budget, "evaluation budget per run");
  run_cmd->add_option("--f-tol", f_tol, "objective success tolerance");
  run_cmd->add_option("--opt-orders", opt_orders,
                      "optimality reduction target, decades");
  run_cmd->add_option("--box", box_spec,
                      "start box lo:hi applied to every coordinate");
  run_cmd->add_option("--config", config_path,
                      "JSON file with bo/qn key overrides");
  run_cmd->add_option("--workers", workers, "parallel runs (0 = cores)");

  // report
  auto* report_cmd = app.add_subcommand("report", "Summarize written traces");
  std::string in_dir;
  report_cmd->add_option("--in", in_dir, "experiment output directory")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      gebo::ExperimentConfig cfg;
      cfg.problem_spec = problem;
      cfg.methods = split_csv_list(methods);
      cfg.n_runs = runs;
      cfg.master_seed = seed;
      cfg.out_dir = out_dir;
      cfg.grad_noise = grad_noise;
      cfg.max_evals = budget;
      cfg.tolerance.f_tol = f_tol;
      cfg.tolerance.opt_orders = opt_orders;
      cfg.workers = workers;
      if (!box_spec.empty()) {
        const auto colon = box_spec.find(':');
        if (colon == std::string::npos)
          throw std::invalid_argument("--box expects lo:hi");
        const double lo = std::stod(box_spec.substr(0, colon));
        const double hi = std::stod(box_spec.substr(colon + 1));
        const int dim = gebo::parse_problem(problem).dim;
        cfg.box_lb = Eigen::VectorXd::Constant(dim, lo);
        cfg.box_ub = Eigen::VectorXd::Constant(dim, hi);
      }
      if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot read " + config_path);
        json j;
        in >> j;
        if (j.contains("bo")) apply_bo_overrides(j["bo"], cfg.bo);
        if (j.contains("qn")) apply_qn_overrides(j["qn"], cfg.qn);
      }

      const gebo::ExperimentResult result = gebo::run_experiment(cfg);
      print_summary(gebo::summarize(cfg, result));
      for (const gebo::RunOutcome& run : result.runs) {
        std::printf("%-10s run %d: %s, f_best=%s, evals=%d%s\n",
                    run.method.c_str(), run.run_id,
                    gebo::run_status_name(run.trace.status).c_str(),
                    gebo::format_double(run.trace.final_f_best()).c_str(),
                    run.trace.records.empty() ? 0
                                              : run.trace.last().n_feval,
                    run.trace.status == gebo::RunStatus::Aborted
                        ? (" (" + run.trace.message + ")").c_str()
                        : "");
      }
      return result.all_completed() ? 0 : 1;
    }

    if (report_cmd->parsed()) {
      std::ifstream meta_in(in_dir + "/experiment.json");
      if (!meta_in)
        throw std::runtime_error("missing experiment.json in " + in_dir);
      json meta;
      meta_in >> meta;
      gebo::ToleranceSpec tol;
      tol.f_tol = meta["f_tol"];
      tol.opt_orders = meta["opt_orders"];

      std::vector<std::vector<gebo::TraceRow>> traces;
      std::vector<std::filesystem::path> paths;
      for (const auto& entry : std::filesystem::directory_iterator(in_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("trace_", 0) == 0 && entry.path().extension() == ".csv")
          paths.push_back(entry.path());
      }
      std::sort(paths.begin(), paths.end());
      for (const auto& path : paths)
        traces.push_back(gebo::read_trace_csv(path.string()));
      print_summary(gebo::report_medians(traces, meta["problem"], meta["n_d"],
                                         tol));
      return 0;
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
