#include "koow/bootstrap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>
#include <vector>

#include "koow/rng.hpp"

namespace koow {

double quantile_type7(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size();
  const double h = (static_cast<double>(m) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, m - 1);
  const double frac = h - std::floor(h);
  return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {

Dataset resample(const Dataset& ds, Rng& rng) {
  const Eigen::Index n = ds.n();
  Dataset out;
  out.X.resize(n, ds.p());
  out.A.resize(n);
  if (ds.Y) out.Y = Eigen::VectorXd(n);
  out.confounder_names = ds.confounder_names;
  out.treatment_name = ds.treatment_name;
  out.outcome_name = ds.outcome_name;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index j = static_cast<Eigen::Index>(rng.uniform_below(static_cast<std::uint64_t>(n)));
    out.X.row(i) = ds.X.row(j);
    out.A(i) = ds.A(j);
    if (ds.Y) (*out.Y)(i) = (*ds.Y)(j);
  }
  return out;
}

}  // namespace

BootstrapCurve bootstrap_curve(const Dataset& ds, const PipelineConfig& config,
                               const BootstrapOptions& options) {
  if (options.B < 1) throw Error(ErrorCode::InvalidArgument, "B must be >= 1");
  if (!ds.Y) throw Error(ErrorCode::MissingOutcome, "bootstrap requires an outcome");
  validate(config);

  // Hyperparameters fixed at their full-sample values unless retune is set.
  PipelineConfig resolved = resolve_hyperparameters(ds, config);

  const WeightSolution full = compute_weights(ds, resolved);
  CurveEstimate point = compute_curve(ds, resolved, full.w);

  const Eigen::Index G = point.grid.size();
  const int B = options.B;
  std::vector<Eigen::VectorXd> curves(static_cast<std::size_t>(B));
  std::vector<char> ok(static_cast<std::size_t>(B), 0);

  auto run_replicate = [&](int b) {
    Rng rng = Rng::derive(options.seed, static_cast<std::uint64_t>(b));
    Dataset sample = resample(ds, rng);
    try {
      PipelineConfig rep_config = resolved;
      if (options.retune) {
        rep_config = config;  // restart from the unresolved config
        rep_config.seed = Rng::derive(options.seed, static_cast<std::uint64_t>(b)).next_u64();
        rep_config = resolve_hyperparameters(sample, rep_config);
      }
      WeightSolution sol = compute_weights(sample, rep_config);
      if (!sol.converged) return;
      CurveEstimate curve = compute_curve(sample, rep_config, sol.w);
      curves[static_cast<std::size_t>(b)] = std::move(curve.theta_hat);
      ok[static_cast<std::size_t>(b)] = 1;
    } catch (const Error&) {
      // excluded with accounting below
    }
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1) {
    for (int b = 0; b < B; ++b) run_replicate(b);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (int b = next.fetch_add(1); b < B; b = next.fetch_add(1)) run_replicate(b);
      });
    }
    for (auto& th : pool) th.join();
  }

  int excluded = 0;
  for (int b = 0; b < B; ++b)
    if (!ok[static_cast<std::size_t>(b)]) ++excluded;
  if (excluded > B / 5)
    throw Error(ErrorCode::TooManyFailures, std::to_string(excluded) + " of " + std::to_string(B) +
                                                " bootstrap replicates failed");

  Eigen::VectorXd lower(G), upper(G);
  std::vector<double> column;
  column.reserve(static_cast<std::size_t>(B));
  for (Eigen::Index g = 0; g < G; ++g) {
    column.clear();
    for (int b = 0; b < B; ++b)
      if (ok[static_cast<std::size_t>(b)]) column.push_back(curves[static_cast<std::size_t>(b)](g));
    lower(g) = quantile_type7(column, 0.025);
    upper(g) = quantile_type7(column, 0.975);
  }

  point.lower = std::move(lower);
  point.upper = std::move(upper);
  return BootstrapCurve{std::move(point),
                        BootstrapInfo{B, excluded, options.seed, options.retune}};
}

}  // namespace koow
