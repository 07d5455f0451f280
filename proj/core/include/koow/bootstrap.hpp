#pragma once

#include <cstdint>

#include "koow/dataset.hpp"
#include "koow/dose_response.hpp"
#include "koow/pipeline.hpp"

namespace koow {

struct BootstrapOptions {
  int B = 200;
  std::uint64_t seed = 0;
  bool retune = false;  // re-run GP tuning inside every replicate
  int workers = 1;
};

struct BootstrapInfo {
  int B = 0;
  int excluded = 0;
  std::uint64_t seed = 0;
  bool retune = false;
};

struct BootstrapCurve {
  CurveEstimate curve;  // point estimate with percentile bands attached
  BootstrapInfo info;
};

/// Resamples units with replacement and re-runs the whole pipeline (moments,
/// Grams, optionally tuning, weights, curve) per replicate. Replicate b draws
/// from Rng::derive(seed, b), so bands are byte-identical for any worker
/// count. Bands are pointwise type-7 percentile quantiles at 2.5%/97.5%.
/// Replicates whose solver fails to converge are excluded and counted;
/// more than 20% exclusions raises TooManyFailures.
BootstrapCurve bootstrap_curve(const Dataset& ds, const PipelineConfig& config,
                               const BootstrapOptions& options);

/// Type-7 quantile (linear interpolation) of the values, p in [0, 1].
double quantile_type7(std::vector<double> values, double p);

}  // namespace koow
