// koow: weights / curve / simulate driver around the core library.
//
// Exit codes: 0 success, 1 usage or input error, 2 numerical non-convergence.
// Every command is a pure function of (input files, flags, seed); identical
// invocations produce byte-identical outputs.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "koow/bootstrap.hpp"
#include "koow/dataset.hpp"
#include "koow/diagnostics.hpp"
#include "koow/pipeline.hpp"
#include "koow/reports.hpp"
#include "koow/simulation.hpp"

namespace {

using koow::Error;
using koow::ErrorCode;

void log_stage(const std::string& message) { std::cerr << "[koow] " << message << "\n"; }

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

koow::EstimatorSpec parse_estimator(const std::string& text, double span) {
  const auto colon = text.find(':');
  if (colon == std::string::npos)
    throw Error(ErrorCode::InvalidArgument, "estimator must be poly:k or local:p");
  const std::string kind = text.substr(0, colon);
  int degree = 0;
  try {
    degree = std::stoi(text.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "estimator degree must be an integer");
  }
  koow::EstimatorSpec spec;
  if (kind == "poly") {
    spec.kind = koow::EstimatorKind::parametric;
  } else if (kind == "local") {
    spec.kind = koow::EstimatorKind::local_poly;
  } else {
    throw Error(ErrorCode::InvalidArgument, "estimator must be poly:k or local:p");
  }
  spec.degree = degree;
  spec.span = span;
  koow::validate(spec);
  return spec;
}

koow::GridSpec parse_grid(const std::string& text) {
  // min:max:count with a possibly negative min/max
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, "grid must be min:max:count");
  koow::GridSpec spec;
  try {
    spec.min_a = std::stod(parts[0]);
    spec.max_a = std::stod(parts[1]);
    spec.count = std::stoi(parts[2]);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "grid must be min:max:count with numeric fields");
  }
  if (spec.count < 2) throw Error(ErrorCode::InvalidArgument, "--grid count must be >= 2");
  if (!(spec.min_a < spec.max_a))
    throw Error(ErrorCode::InvalidArgument, "--grid needs min < max");
  return spec;
}

koow::KernelFamily parse_family(const std::string& name) {
  if (name == "poly" || name == "polynomial") return koow::KernelFamily::polynomial;
  if (name == "gaussian") return koow::KernelFamily::gaussian;
  throw Error(ErrorCode::InvalidArgument, "kernel family must be poly or gaussian");
}

// Shared flag block for the weights/curve commands.
struct CommonArgs {
  std::string data_path;
  std::string treatment;
  std::string confounders;
  std::string outcome;
  std::string out_prefix;
  std::string config_path;
  double lambda = 1.0;
  int degree_x = 1;
  int degree_a = 1;
  double theta_x = 1.0;
  double theta_a = 1.0;
  double gamma = 1.0;
  bool tune = false;
  std::string kernel_x = "poly";
  std::string kernel_a = "poly";
  double lengthscale_x = 1.0;
  double lengthscale_a = 1.0;
  double ridge_fraction = 1e-6;
  double tol = 1e-7;
  int max_iter = 50000;
  std::uint64_t seed = 0;
  bool dump_grams = false;

  CLI::Option* theta_x_opt = nullptr;
  CLI::Option* theta_a_opt = nullptr;
  CLI::Option* gamma_opt = nullptr;
};

void add_common_options(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--data", args.data_path, "input CSV file")->required();
  cmd->add_option("--treatment", args.treatment, "treatment column name")->required();
  cmd->add_option("--confounders", args.confounders, "comma-separated confounder columns")
      ->required();
  cmd->add_option("--outcome", args.outcome, "outcome column name");
  cmd->add_option("--out", args.out_prefix, "output file prefix")->required();
  cmd->add_option("--config", args.config_path, "JSON config file; flags override its values");
  cmd->add_option("--lambda", args.lambda, "penalization lambda (>= 0)");
  cmd->add_option("--degree-x", args.degree_x, "confounder kernel degree");
  cmd->add_option("--degree-a", args.degree_a, "treatment kernel degree");
  args.theta_x_opt = cmd->add_option("--theta-x", args.theta_x, "confounder kernel theta");
  args.theta_a_opt = cmd->add_option("--theta-a", args.theta_a, "treatment kernel theta");
  args.gamma_opt = cmd->add_option("--gamma", args.gamma, "overall kernel scale");
  cmd->add_flag("--tune", args.tune, "tune theta/gamma/sigma^2 by GP marginal likelihood");
  cmd->add_option("--kernel-x", args.kernel_x, "confounder kernel family: poly|gaussian");
  cmd->add_option("--kernel-a", args.kernel_a, "treatment kernel family: poly|gaussian");
  cmd->add_option("--lengthscale-x", args.lengthscale_x, "gaussian lengthscale (confounders)");
  cmd->add_option("--lengthscale-a", args.lengthscale_a, "gaussian lengthscale (treatment)");
  cmd->add_option("--ridge-fraction", args.ridge_fraction, "covariance diagonal ridge fraction");
  cmd->add_option("--tol", args.tol, "solver tolerance");
  cmd->add_option("--max-iter", args.max_iter, "solver iteration cap");
  cmd->add_option("--seed", args.seed, "random seed");
  cmd->add_flag("--dump-grams", args.dump_grams, "write Gram matrices as CSV for debugging");
}

// Values from --config apply only where the flag was not given on the
// command line.
void apply_config_file(const CLI::App* cmd, CommonArgs& args) {
  if (args.config_path.empty()) return;
  std::ifstream in(args.config_path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + args.config_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config parse error: ") + e.what());
  }

  auto unset = [&](const std::string& flag) {
    const CLI::Option* opt = cmd->get_option_no_throw(flag);
    return opt != nullptr && opt->count() == 0;
  };
  auto load_double = [&](const char* key, const std::string& flag, double& dst) {
    if (j.contains(key) && unset(flag)) dst = j.at(key).get<double>();
  };
  auto load_int = [&](const char* key, const std::string& flag, int& dst) {
    if (j.contains(key) && unset(flag)) dst = j.at(key).get<int>();
  };
  auto load_string = [&](const char* key, const std::string& flag, std::string& dst) {
    if (j.contains(key) && unset(flag)) dst = j.at(key).get<std::string>();
  };

  load_double("lambda", "--lambda", args.lambda);
  load_int("degree_x", "--degree-x", args.degree_x);
  load_int("degree_a", "--degree-a", args.degree_a);
  load_double("theta_x", "--theta-x", args.theta_x);
  load_double("theta_a", "--theta-a", args.theta_a);
  load_double("gamma", "--gamma", args.gamma);
  load_string("kernel_x", "--kernel-x", args.kernel_x);
  load_string("kernel_a", "--kernel-a", args.kernel_a);
  load_double("lengthscale_x", "--lengthscale-x", args.lengthscale_x);
  load_double("lengthscale_a", "--lengthscale-a", args.lengthscale_a);
  load_double("ridge_fraction", "--ridge-fraction", args.ridge_fraction);
  load_double("tol", "--tol", args.tol);
  load_int("max_iter", "--max-iter", args.max_iter);
  if (j.contains("tune") && unset("--tune")) args.tune = j.at("tune").get<bool>();
  if (j.contains("seed") && unset("--seed")) args.seed = j.at("seed").get<std::uint64_t>();
  // count-based override detection also marks values passed via config
  if (j.contains("theta_x")) args.theta_x_opt = nullptr;
  if (j.contains("theta_a")) args.theta_a_opt = nullptr;
  if (j.contains("gamma")) args.gamma_opt = nullptr;
}

koow::PipelineConfig build_pipeline_config(const CommonArgs& args) {
  if (args.lambda < 0.0)
    throw Error(ErrorCode::NegativeLambda, "--lambda must be >= 0");
  koow::PipelineConfig config;
  config.kernel_x.family = parse_family(args.kernel_x);
  config.kernel_x.degree = args.degree_x;
  config.kernel_x.theta = args.theta_x;
  config.kernel_x.lengthscale = args.lengthscale_x;
  config.kernel_a.family = parse_family(args.kernel_a);
  config.kernel_a.degree = args.degree_a;
  config.kernel_a.theta = args.theta_a;
  config.kernel_a.lengthscale = args.lengthscale_a;
  config.gamma = args.gamma;
  config.tune = args.tune;
  config.lambda = args.lambda;
  config.ridge_fraction = args.ridge_fraction;
  config.solver_tol = args.tol;
  config.solver_max_iter = args.max_iter;
  config.seed = args.seed;
  koow::validate(config);
  return config;
}

koow::Dataset load_data(const CommonArgs& args) {
  std::optional<std::string> outcome;
  if (!args.outcome.empty()) outcome = args.outcome;
  koow::Dataset ds =
      koow::load_csv(args.data_path, args.treatment, outcome, split_list(args.confounders));
  log_stage("loaded " + std::to_string(ds.n()) + " rows, " + std::to_string(ds.p()) +
            " confounders from " + args.data_path);
  return ds;
}

void require_tunable(const CommonArgs& args, const koow::Dataset& ds) {
  if (args.tune && !ds.Y)
    throw Error(ErrorCode::MissingOutcome, "tuning requires an outcome column (--outcome)");
  if (!args.tune && !ds.Y) {
    const bool any_given = (args.theta_x_opt == nullptr || args.theta_x_opt->count() > 0) ||
                           (args.theta_a_opt == nullptr || args.theta_a_opt->count() > 0) ||
                           (args.gamma_opt == nullptr || args.gamma_opt->count() > 0);
    if (!any_given)
      throw Error(ErrorCode::InvalidArgument,
                  "no outcome column: pass explicit --theta-x/--theta-a/--gamma, or add "
                  "--outcome to enable --tune");
  }
}

// Weight/solver/balance outputs shared by `weights` and `curve`.
struct WeightsRun {
  koow::PipelineConfig config;
  koow::WeightSolution solution;
};

WeightsRun run_weights_stage(const koow::Dataset& ds, const CommonArgs& args,
                             koow::PipelineConfig config) {
  std::optional<koow::TuneResult> tuned;
  config = koow::resolve_hyperparameters(ds, config, &tuned);
  if (tuned) {
    log_stage("tuned hyperparameters: lml=" + koow::format_double(tuned->lml));
    koow::write_text_file(args.out_prefix + "_tuned.json", koow::tune_result_json(*tuned));
  }

  const koow::FittedKernels kernels = koow::fit_kernels(ds, config);
  const koow::GramPair grams = koow::compute_grams(ds, kernels);
  if (args.dump_grams) {
    koow::write_text_file(args.out_prefix + "_gram_x.csv", koow::gram_csv(grams.Kx));
    koow::write_text_file(args.out_prefix + "_gram_a.csv", koow::gram_csv(grams.Ka));
  }
  const koow::BalanceObjective objective =
      koow::build_objective(grams.Kx, grams.Ka, config.lambda);
  log_stage("solving QP: n=" + std::to_string(ds.n()) +
            " lambda=" + koow::format_double(config.lambda));
  koow::WeightSolution solution =
      koow::solve(objective, koow::SolverOptions{config.solver_tol, config.solver_max_iter});
  log_stage(solution.converged
                ? "solver converged in " + std::to_string(solution.iterations) + " iterations"
                : "solver did NOT converge within " + std::to_string(solution.iterations) +
                      " iterations");

  koow::write_text_file(args.out_prefix + "_weights.csv", koow::weights_csv(solution.w));
  koow::write_text_file(args.out_prefix + "_solver.json",
                        koow::solver_report_json(solution, config.lambda));
  const koow::BalanceReport report = koow::balance_table(ds, solution.w);
  koow::write_text_file(args.out_prefix + "_balance.json", koow::balance_report_json(report));
  std::cout << koow::balance_report_text(report);

  return WeightsRun{std::move(config), std::move(solution)};
}

int cmd_weights(const CLI::App* cmd, CommonArgs& args) {
  apply_config_file(cmd, args);
  koow::PipelineConfig config = build_pipeline_config(args);
  koow::Dataset ds = load_data(args);
  require_tunable(args, ds);
  WeightsRun run = run_weights_stage(ds, args, std::move(config));
  return run.solution.converged ? 0 : 2;
}

struct CurveArgs {
  std::string estimator = "local:2";
  double span = 0.75;
  std::string grid = "-3:3:1000";
  int bootstrap_B = 0;
  bool retune = false;
  int workers = 1;
};

int cmd_curve(const CLI::App* cmd, CommonArgs& args, CurveArgs& curve_args) {
  apply_config_file(cmd, args);
  koow::PipelineConfig config = build_pipeline_config(args);
  config.estimator = parse_estimator(curve_args.estimator, curve_args.span);
  config.grid = parse_grid(curve_args.grid);
  if (curve_args.bootstrap_B < 0)
    throw Error(ErrorCode::InvalidArgument, "--bootstrap must be >= 0");
  if (curve_args.workers < 1)
    throw Error(ErrorCode::InvalidArgument, "--workers must be >= 1");

  koow::Dataset ds = load_data(args);
  require_tunable(args, ds);
  if (!ds.Y)
    throw Error(ErrorCode::MissingOutcome, "curve estimation requires --outcome");

  WeightsRun run = run_weights_stage(ds, args, std::move(config));

  if (curve_args.bootstrap_B > 0) {
    log_stage("bootstrapping " + std::to_string(curve_args.bootstrap_B) + " replicates");
    koow::BootstrapOptions options;
    options.B = curve_args.bootstrap_B;
    options.seed = args.seed;
    options.retune = curve_args.retune;
    options.workers = curve_args.workers;
    // the full-sample weights stage already resolved hyperparameters unless
    // the user asked for per-replicate retuning
    koow::PipelineConfig boot_config = run.config;
    boot_config.tune = curve_args.retune && args.tune;
    koow::BootstrapCurve result = koow::bootstrap_curve(ds, boot_config, options);
    koow::write_text_file(args.out_prefix + "_curve.csv", koow::curve_csv(result.curve));
    koow::write_text_file(args.out_prefix + "_bootstrap.json",
                          koow::bootstrap_info_json(result.info));
    log_stage("excluded " + std::to_string(result.info.excluded) + " replicates");
  } else {
    koow::CurveEstimate curve = koow::compute_curve(ds, run.config, run.solution.w);
    koow::write_text_file(args.out_prefix + "_curve.csv", koow::curve_csv(curve));
  }
  return run.solution.converged ? 0 : 2;
}

struct SimulateArgs {
  std::string scenarios = "linear";
  int replications = 10;
  int n = 500;
  std::string methods = "koow,stable_ipw,unweighted";
  std::string lambdas = "0,1,10";
  double span = 0.75;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out_path;
  int degree_x = 1;
  int degree_a = 1;
};

int cmd_simulate(const SimulateArgs& args) {
  koow::StudyConfig config;
  config.scenarios = split_list(args.scenarios);
  if (config.scenarios.empty())
    throw Error(ErrorCode::InvalidArgument, "--scenario list is empty");
  for (const auto& name : config.scenarios) (void)koow::scenario_by_name(name, 10);

  const std::vector<std::string> methods = split_list(args.methods);
  config.lambdas.clear();
  config.include_ipw = false;
  config.include_unweighted = false;
  for (const auto& m : methods) {
    if (m == "koow") {
      for (const auto& l : split_list(args.lambdas)) {
        try {
          config.lambdas.push_back(std::stod(l));
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidArgument, "--lambdas must be numeric");
        }
      }
    } else if (m == "stable_ipw") {
      config.include_ipw = true;
    } else if (m == "unweighted") {
      config.include_unweighted = true;
    } else {
      throw Error(ErrorCode::InvalidArgument, "unknown method '" + m + "'");
    }
  }
  for (double l : config.lambdas)
    if (l < 0.0) throw Error(ErrorCode::NegativeLambda, "--lambdas must be >= 0");

  config.replications = args.replications;
  config.n = args.n;
  config.seed = args.seed;
  config.workers = args.workers;
  config.local_span = args.span;
  config.base.kernel_x.degree = args.degree_x;
  config.base.kernel_a.degree = args.degree_a;
  if (config.replications < 1)
    throw Error(ErrorCode::InvalidArgument, "--R must be >= 1");
  if (config.n < 10) throw Error(ErrorCode::InvalidArgument, "--n must be >= 10");

  log_stage("running study: scenarios=" + args.scenarios + " R=" +
            std::to_string(config.replications) + " n=" + std::to_string(config.n));
  const std::vector<koow::StudyCell> cells = koow::run_study(config);
  const std::string csv = koow::study_csv(cells);
  if (args.out_path.empty()) {
    std::cout << csv;
  } else {
    koow::write_text_file(args.out_path, csv);
    log_stage("wrote " + args.out_path);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel optimal orthogonality weights for continuous treatments"};
  app.require_subcommand(1);

  CommonArgs weights_args;
  CLI::App* weights_cmd = app.add_subcommand("weights", "solve for balancing weights");
  add_common_options(weights_cmd, weights_args);

  CommonArgs curve_common;
  CurveArgs curve_args;
  CLI::App* curve_cmd = app.add_subcommand("curve", "estimate the dose-response curve");
  add_common_options(curve_cmd, curve_common);
  curve_cmd->add_option("--estimator", curve_args.estimator, "poly:k or local:p");
  curve_cmd->add_option("--span", curve_args.span, "local polynomial span in (0,1]");
  curve_cmd->add_option("--grid", curve_args.grid, "evaluation grid min:max:count");
  curve_cmd->add_option("--bootstrap", curve_args.bootstrap_B, "bootstrap replicates (0 = none)");
  curve_cmd->add_flag("--retune", curve_args.retune, "re-tune hyperparameters per replicate");
  curve_cmd->add_option("--workers", curve_args.workers, "bootstrap worker threads");

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run the simulation study");
  sim_cmd->add_option("--scenario", sim_args.scenarios, "comma list: linear,quadratic,cubic");
  sim_cmd->add_option("--R", sim_args.replications, "replications");
  sim_cmd->add_option("--n", sim_args.n, "sample size per replicate");
  sim_cmd->add_option("--methods", sim_args.methods, "comma list: koow,stable_ipw,unweighted");
  sim_cmd->add_option("--lambdas", sim_args.lambdas, "comma list of koow lambdas");
  sim_cmd->add_option("--span", sim_args.span, "local polynomial span");
  sim_cmd->add_option("--seed", sim_args.seed, "random seed");
  sim_cmd->add_option("--workers", sim_args.workers, "replicate worker threads");
  sim_cmd->add_option("--out", sim_args.out_path, "results CSV path (default: stdout)");
  sim_cmd->add_option("--degree-x", sim_args.degree_x, "confounder kernel degree");
  sim_cmd->add_option("--degree-a", sim_args.degree_a, "treatment kernel degree");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (weights_cmd->parsed()) return cmd_weights(weights_cmd, weights_args);
    if (curve_cmd->parsed()) return cmd_curve(curve_cmd, curve_common, curve_args);
    if (sim_cmd->parsed()) return cmd_simulate(sim_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return koow::is_input_error(e.code()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
