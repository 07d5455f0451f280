#pragma once

#include <cstdint>
#include <optional>

#include "koow/balance.hpp"
#include "koow/dataset.hpp"
#include "koow/dose_response.hpp"
#include "koow/gp_tuner.hpp"
#include "koow/kernels.hpp"

namespace koow {

enum class KernelFamily { polynomial, gaussian };

struct KernelBlockConfig {
  KernelFamily family = KernelFamily::polynomial;
  int degree = 1;           // polynomial only
  double theta = 1.0;       // polynomial only
  double lengthscale = 1.0; // gaussian only
};

/// Everything a reproducible run needs. `tune` replaces theta/gamma/sigma by
/// marginal-likelihood optimization (polynomial kernels, outcome required).
struct PipelineConfig {
  KernelBlockConfig kernel_x;
  KernelBlockConfig kernel_a;
  double gamma = 1.0;  // overall scale, applied to the confounder block
  bool tune = false;
  double lambda = 1.0;
  EstimatorSpec estimator{};
  GridSpec grid{};
  double ridge_fraction = 1e-6;
  double solver_tol = 1e-7;
  int solver_max_iter = 50000;
  std::uint64_t seed = 0;
};

void validate(const PipelineConfig& config);

struct FittedKernels {
  Kernel kx;
  Kernel ka;
};

/// Fits block moments on the dataset and assembles the configured kernels.
/// The overall gamma multiplies the confounder block; the treatment block
/// scale stays 1 so the product carries a single scale.
FittedKernels fit_kernels(const Dataset& ds, const PipelineConfig& config);

GramPair compute_grams(const Dataset& ds, const FittedKernels& kernels);

/// Runs GP tuning when config.tune is set and returns the config with theta,
/// gamma (and degrees) resolved; no-op otherwise.
PipelineConfig resolve_hyperparameters(const Dataset& ds, PipelineConfig config,
                                       std::optional<TuneResult>* tune_out = nullptr);

/// moments -> Grams -> objective -> solve, at config.lambda.
WeightSolution compute_weights(const Dataset& ds, const PipelineConfig& config);

/// Dose-response curve of Y on A under the given weights.
CurveEstimate compute_curve(const Dataset& ds, const PipelineConfig& config,
                            const Eigen::VectorXd& w);

}  // namespace koow
