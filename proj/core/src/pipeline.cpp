#include "koow/pipeline.hpp"

namespace koow {

void validate(const PipelineConfig& config) {
  if (config.lambda < 0.0) throw Error(ErrorCode::NegativeLambda, "lambda must be >= 0");
  if (config.grid.count < 2) throw Error(ErrorCode::InvalidArgument, "grid count must be >= 2");
  if (!(config.grid.min_a < config.grid.max_a))
    throw Error(ErrorCode::InvalidArgument, "grid min must be < max");
  validate(config.estimator);
  if (config.ridge_fraction < 0.0)
    throw Error(ErrorCode::InvalidArgument, "ridge_fraction must be >= 0");
  if (config.solver_tol <= 0.0) throw Error(ErrorCode::InvalidArgument, "solver tol must be > 0");
  if (config.solver_max_iter < 1)
    throw Error(ErrorCode::InvalidArgument, "solver max_iter must be >= 1");
  for (const auto* block : {&config.kernel_x, &config.kernel_a}) {
    if (block->family == KernelFamily::polynomial) {
      if (block->degree < 1) throw Error(ErrorCode::InvalidArgument, "kernel degree must be >= 1");
      if (block->theta < 0.0) throw Error(ErrorCode::InvalidArgument, "theta must be >= 0");
    } else if (!(block->lengthscale > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "lengthscale must be > 0");
    }
  }
  if (!(config.gamma > 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be > 0");
  if (config.tune) {
    if (config.kernel_x.family != KernelFamily::polynomial ||
        config.kernel_a.family != KernelFamily::polynomial)
      throw Error(ErrorCode::InvalidArgument, "tuning is defined for polynomial kernels only");
  }
}

namespace {

Kernel build_kernel(const KernelBlockConfig& block, double gamma, Moments moments) {
  if (block.family == KernelFamily::polynomial) {
    PolynomialMahalanobisKernel k;
    k.gamma = gamma;
    k.theta = block.theta;
    k.degree = block.degree;
    k.moments = std::move(moments);
    return k;
  }
  GaussianKernel k;
  k.gamma = gamma;
  k.lengthscale = block.lengthscale;
  k.moments = std::move(moments);
  return k;
}

}  // namespace

FittedKernels fit_kernels(const Dataset& ds, const PipelineConfig& config) {
  Moments mx = fit_moments(ds.X, config.ridge_fraction);
  Moments ma = fit_moments(ds.A, config.ridge_fraction);
  return FittedKernels{build_kernel(config.kernel_x, config.gamma, std::move(mx)),
                       build_kernel(config.kernel_a, 1.0, std::move(ma))};
}

GramPair compute_grams(const Dataset& ds, const FittedKernels& kernels) {
  return GramPair{gram(kernels.kx, ds.X), gram(kernels.ka, ds.A)};
}

PipelineConfig resolve_hyperparameters(const Dataset& ds, PipelineConfig config,
                                       std::optional<TuneResult>* tune_out) {
  validate(config);
  if (!config.tune) return config;
  TuneOptions options;
  options.ridge_fraction = config.ridge_fraction;
  TuneResult result = tune(ds, config.kernel_x.degree, config.kernel_a.degree, options, config.seed);
  config.kernel_x.theta = result.params.theta_x;
  config.kernel_a.theta = result.params.theta_a;
  config.gamma = result.params.gamma;
  config.tune = false;
  if (tune_out) *tune_out = result;
  return config;
}

WeightSolution compute_weights(const Dataset& ds, const PipelineConfig& config) {
  const FittedKernels kernels = fit_kernels(ds, config);
  const GramPair grams = compute_grams(ds, kernels);
  const BalanceObjective obj = build_objective(grams.Kx, grams.Ka, config.lambda);
  return solve(obj, SolverOptions{config.solver_tol, config.solver_max_iter});
}

CurveEstimate compute_curve(const Dataset& ds, const PipelineConfig& config,
                            const Eigen::VectorXd& w) {
  if (!ds.Y) throw Error(ErrorCode::MissingOutcome, "curve estimation requires an outcome");
  return estimate_curve(ds.A, *ds.Y, w, config.estimator, make_grid(config.grid));
}

}  // namespace koow
