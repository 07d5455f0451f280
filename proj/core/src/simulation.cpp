#include "koow/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "koow/balance.hpp"
#include "koow/bootstrap.hpp"
#include "koow/rng.hpp"

namespace koow {

ScenarioSpec scenario_by_name(const std::string& name, int n) {
  ScenarioSpec spec;
  spec.name = name;
  spec.n = n;
  if (name == "linear") {
    spec.beta0 = 0.0;
    spec.beta1 = 1.0;
    spec.d = 1;
  } else if (name == "quadratic") {
    spec.beta0 = -3.0;
    spec.beta1 = 0.25;
    spec.d = 2;
  } else if (name == "cubic") {
    spec.beta0 = -2.5;
    spec.beta1 = 0.05;
    spec.d = 3;
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + name + "'");
  }
  return spec;
}

std::pair<Dataset, Eigen::VectorXd> generate(const ScenarioSpec& spec, std::uint64_t seed) {
  if (spec.n < 2) throw Error(ErrorCode::TooFewRows, "scenario n must be >= 2");
  Rng rng(seed);
  const int n = spec.n;
  const int p = spec.confounders;
  const double x_sd = std::sqrt(spec.confounder_variance);
  const double noise_sd = std::sqrt(spec.treatment_noise_variance);

  Eigen::MatrixXd X(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = x_sd * rng.normal();

  Eigen::VectorXd S = X.rowwise().sum();
  Eigen::VectorXd A(n);
  for (int i = 0; i < n; ++i) {
    double sd = S(i);
    double powered = 1.0;
    for (int k = 0; k < spec.d; ++k) powered *= sd;
    A(i) = spec.beta0 + spec.beta1 * powered + noise_sd * rng.normal();
  }

  Eigen::VectorXd Y(n);
  for (int i = 0; i < n; ++i) {
    const double a = A(i);
    Y(i) = 0.75 * a + 0.05 * a * a + 0.01 * a * a * a + 1.5 * S(i) + 1.125 * a * S(i);
    if (spec.outcome_noise_sd > 0.0) Y(i) += spec.outcome_noise_sd * rng.normal();
  }

  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(p));
  for (int j = 1; j <= p; ++j) names.push_back("x" + std::to_string(j));

  Eigen::VectorXd truth(4);
  truth << 0.0, 0.75, 0.05, 0.01;
  return {make_dataset(std::move(X), std::move(A), std::move(Y), std::move(names), "a", "y"),
          truth};
}

IpwWeights stable_ipw_weights(const Dataset& ds) {
  const Eigen::Index n = ds.n();
  const Eigen::Index p = ds.p();
  if (n <= p + 2)
    throw Error(ErrorCode::SingularDesign, "stable IPW needs n > p + 2");

  Eigen::MatrixXd D(n, p + 1);
  D.col(0).setOnes();
  D.rightCols(p) = ds.X;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  if (qr.rank() < p + 1)
    throw Error(ErrorCode::SingularDesign, "confounder design is rank deficient");
  const Eigen::VectorXd beta = qr.solve(ds.A);
  const Eigen::VectorXd fitted = D * beta;
  const double cond_var = (ds.A - fitted).squaredNorm() / static_cast<double>(n);
  if (!(cond_var > 0.0))
    throw Error(ErrorCode::SingularDesign, "GPS residual variance is zero");

  const double marg_mean = ds.A.mean();
  const double marg_var = (ds.A.array() - marg_mean).square().mean();

  auto normal_pdf = [](double value, double mean, double var) {
    const double z = value - mean;
    return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * M_PI * var);
  };

  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double num = normal_pdf(ds.A(i), marg_mean, marg_var);
    const double den = normal_pdf(ds.A(i), fitted(i), cond_var);
    w(i) = den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
  }
  if (!w.allFinite())
    throw Error(ErrorCode::SingularDesign, "non-finite IPW weight (degenerate GPS)");

  std::vector<double> values(w.data(), w.data() + n);
  const double cap = quantile_type7(values, 0.99);
  int truncated = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w(i) > cap) {
      w(i) = cap;
      ++truncated;
    }
  }
  w *= static_cast<double>(n) / w.sum();
  return IpwWeights{std::move(w), truncated};
}

std::pair<double, double> iab_irmse(const Eigen::MatrixXd& estimates,
                                    const Eigen::VectorXd& truth) {
  if (estimates.rows() < 1) throw Error(ErrorCode::InvalidArgument, "need at least one replicate");
  if (estimates.cols() != truth.size())
    throw Error(ErrorCode::GridMismatch, "estimates and truth use different grids");

  const Eigen::Index G = truth.size();
  const double R = static_cast<double>(estimates.rows());
  double iab = 0.0;
  double irmse = 0.0;
  for (Eigen::Index g = 0; g < G; ++g) {
    const Eigen::ArrayXd err = estimates.col(g).array() - truth(g);
    iab += std::abs(err.mean());
    irmse += std::sqrt(err.square().sum() / R);
  }
  return {iab / static_cast<double>(G), irmse / static_cast<double>(G)};
}

namespace {

struct MethodSpec {
  std::string name;
  double lambda = 0.0;
};

}  // namespace

std::vector<StudyCell> run_study(const StudyConfig& config) {
  if (config.replications < 1)
    throw Error(ErrorCode::InvalidArgument, "replications must be >= 1");

  std::vector<MethodSpec> methods;
  for (double lambda : config.lambdas) methods.push_back({"koow", lambda});
  if (config.include_ipw) methods.push_back({"stable_ipw", 0.0});
  if (config.include_unweighted) methods.push_back({"unweighted", 0.0});

  const std::vector<EstimatorSpec> estimators = {
      EstimatorSpec{EstimatorKind::local_poly, 2, config.local_span},
      EstimatorSpec{EstimatorKind::parametric, 3, 0.0}};

  const int R = config.replications;
  const Eigen::VectorXd grid = make_grid(config.base.grid);
  const Eigen::Index G = grid.size();

  std::vector<StudyCell> cells;
  for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
    const ScenarioSpec scenario = scenario_by_name(config.scenarios[s], config.n);
    Eigen::VectorXd truth_coeffs(4);
    truth_coeffs << 0.0, 0.75, 0.05, 0.01;
    const Eigen::VectorXd truth = evaluate_parametric(truth_coeffs, grid).theta_hat;

    // replicate-major storage: curve per (replicate, method, estimator)
    const std::size_t n_cells = methods.size() * estimators.size();
    std::vector<Eigen::MatrixXd> curves(n_cells, Eigen::MatrixXd::Zero(R, G));
    std::vector<std::vector<char>> success(n_cells, std::vector<char>(static_cast<std::size_t>(R), 0));

    auto run_replicate = [&](int r) {
      const std::uint64_t rep_seed =
          Rng::derive(config.seed, (static_cast<std::uint64_t>(s) << 32) |
                                       static_cast<std::uint64_t>(r))
              .next_u64();
      auto [data, coeffs] = generate(scenario, rep_seed);
      (void)coeffs;

      // weights per method; objective terms shared across lambdas
      std::vector<Eigen::VectorXd> weights(methods.size());
      std::vector<char> have_weights(methods.size(), 0);
      BalanceObjective base_obj;
      bool have_obj = false;
      for (std::size_t m = 0; m < methods.size(); ++m) {
        try {
          if (methods[m].name == "koow") {
            if (!have_obj) {
              const FittedKernels kernels = fit_kernels(data, config.base);
              const GramPair grams = compute_grams(data, kernels);
              base_obj = build_objective(grams.Kx, grams.Ka, 0.0);
              have_obj = true;
            }
            WeightSolution sol = solve(with_lambda(base_obj, methods[m].lambda),
                                       SolverOptions{config.base.solver_tol,
                                                     config.base.solver_max_iter});
            if (!sol.converged) continue;
            weights[m] = std::move(sol.w);
          } else if (methods[m].name == "stable_ipw") {
            weights[m] = stable_ipw_weights(data).w;
          } else {
            weights[m] = Eigen::VectorXd::Ones(data.n());
          }
          have_weights[m] = 1;
        } catch (const Error&) {
          // cell failure counted below
        }
      }

      for (std::size_t m = 0; m < methods.size(); ++m) {
        if (!have_weights[m]) continue;
        for (std::size_t e = 0; e < estimators.size(); ++e) {
          const std::size_t cell = m * estimators.size() + e;
          try {
            CurveEstimate curve = estimate_curve(data.A, *data.Y, weights[m], estimators[e], grid);
            curves[cell].row(r) = curve.theta_hat.transpose();
            success[cell][static_cast<std::size_t>(r)] = 1;
          } catch (const Error&) {
          }
        }
      }
    };

    const int workers = std::max(1, config.workers);
    if (workers == 1) {
      for (int r = 0; r < R; ++r) run_replicate(r);
    } else {
      std::atomic<int> next{0};
      std::vector<std::thread> pool;
      for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
          for (int r = next.fetch_add(1); r < R; r = next.fetch_add(1)) run_replicate(r);
        });
      for (auto& th : pool) th.join();
    }

    for (std::size_t m = 0; m < methods.size(); ++m) {
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        const std::size_t cell = m * estimators.size() + e;
        StudyCell out;
        out.scenario = scenario.name;
        out.method = methods[m].name;
        out.lambda = methods[m].lambda;
        out.estimator = estimators[e].label();

        int ok = 0;
        for (int r = 0; r < R; ++r)
          if (success[cell][static_cast<std::size_t>(r)]) ++ok;
        out.failures = R - ok;
        if (ok == 0) {
          out.defined = false;
        } else {
          Eigen::MatrixXd kept(ok, G);
          int row = 0;
          for (int r = 0; r < R; ++r)
            if (success[cell][static_cast<std::size_t>(r)]) kept.row(row++) = curves[cell].row(r);
          std::tie(out.iab, out.irmse) = iab_irmse(kept, truth);
        }
        cells.push_back(std::move(out));
      }
    }
  }
  return cells;
}

}  // namespace koow
