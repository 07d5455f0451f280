#include "koow/gp_tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "koow/kernels.hpp"
#include "koow/rng.hpp"

namespace koow {

double log_marginal_likelihood(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                               double sigma_sq) {
  const Eigen::Index n = K.rows();
  if (K.cols() != n || y.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "K must be square with y matching");
  if (sigma_sq <= 0.0) throw Error(ErrorCode::InvalidArgument, "sigma_sq must be > 0");

  Eigen::MatrixXd C = K + sigma_sq * Eigen::MatrixXd::Identity(n, n);
  const double trace_scale = C.trace() / static_cast<double>(n);

  Eigen::LLT<Eigen::MatrixXd> llt(C);
  double jitter = 1e-10 * trace_scale;
  while (llt.info() != Eigen::Success) {
    if (jitter > 1e-4 * trace_scale)
      throw Error(ErrorCode::FactorizationFailure, "covariance not PSD after jitter escalation");
    llt.compute(C + jitter * Eigen::MatrixXd::Identity(n, n));
    jitter *= 10.0;
  }

  const Eigen::VectorXd alpha = llt.solve(y);
  const double quad = y.dot(alpha);
  double logdet = 0.0;
  const auto& L = llt.matrixLLT();
  for (Eigen::Index i = 0; i < n; ++i) logdet += std::log(L(i, i));
  logdet *= 2.0;

  constexpr double kLog2Pi = 1.8378770664093454835606594728112;
  return -0.5 * quad - 0.5 * logdet - 0.5 * static_cast<double>(n) * kLog2Pi;
}

namespace {

double halton(std::uint64_t index, std::uint64_t base) {
  double f = 1.0;
  double r = 0.0;
  while (index > 0) {
    f /= static_cast<double>(base);
    r += f * static_cast<double>(index % base);
    index /= base;
  }
  return r;
}

struct NelderMeadResult {
  Eigen::Vector4d x;
  double f = std::numeric_limits<double>::infinity();
};

// Minimizes f over the box [lo, hi]^4 with candidates clamped to the box.
// Deterministic: ties in the vertex ordering break by index.
template <typename F>
NelderMeadResult nelder_mead(F&& f, const Eigen::Vector4d& x0, double lo, double hi,
                             int max_iters) {
  constexpr int kDim = 4;
  const auto clamp = [&](Eigen::Vector4d x) {
    for (int i = 0; i < kDim; ++i) x(i) = std::clamp(x(i), lo, hi);
    return x;
  };

  std::vector<Eigen::Vector4d> xs(kDim + 1);
  std::vector<double> fs(kDim + 1);
  xs[0] = clamp(x0);
  fs[0] = f(xs[0]);
  for (int i = 0; i < kDim; ++i) {
    Eigen::Vector4d x = xs[0];
    const double step = (x(i) + 0.5 <= hi) ? 0.5 : -0.5;
    x(i) += step;
    xs[static_cast<std::size_t>(i) + 1] = clamp(x);
    fs[static_cast<std::size_t>(i) + 1] = f(xs[static_cast<std::size_t>(i) + 1]);
  }

  std::vector<int> order(kDim + 1);
  for (int it = 0; it < max_iters; ++it) {
    for (int i = 0; i <= kDim; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fs[static_cast<std::size_t>(a)] < fs[static_cast<std::size_t>(b)]; });
    const int best = order[0], worst = order[kDim], second_worst = order[kDim - 1];

    const double f_spread = fs[static_cast<std::size_t>(worst)] - fs[static_cast<std::size_t>(best)];
    if (f_spread <= 1e-10 * (1.0 + std::abs(fs[static_cast<std::size_t>(best)]))) break;

    Eigen::Vector4d centroid = Eigen::Vector4d::Zero();
    for (int i = 0; i <= kDim; ++i)
      if (i != worst) centroid += xs[static_cast<std::size_t>(i)];
    centroid /= static_cast<double>(kDim);

    const Eigen::Vector4d xw = xs[static_cast<std::size_t>(worst)];
    Eigen::Vector4d xr = clamp(centroid + (centroid - xw));
    const double fr = f(xr);

    if (fr < fs[static_cast<std::size_t>(best)]) {
      Eigen::Vector4d xe = clamp(centroid + 2.0 * (centroid - xw));
      const double fe = f(xe);
      if (fe < fr) {
        xs[static_cast<std::size_t>(worst)] = xe;
        fs[static_cast<std::size_t>(worst)] = fe;
      } else {
        xs[static_cast<std::size_t>(worst)] = xr;
        fs[static_cast<std::size_t>(worst)] = fr;
      }
    } else if (fr < fs[static_cast<std::size_t>(second_worst)]) {
      xs[static_cast<std::size_t>(worst)] = xr;
      fs[static_cast<std::size_t>(worst)] = fr;
    } else {
      const bool outside = fr < fs[static_cast<std::size_t>(worst)];
      Eigen::Vector4d xc = outside ? clamp(centroid + 0.5 * (xr - centroid))
                                   : clamp(centroid - 0.5 * (centroid - xw));
      const double fc = f(xc);
      if (fc < std::min(fr, fs[static_cast<std::size_t>(worst)])) {
        xs[static_cast<std::size_t>(worst)] = xc;
        fs[static_cast<std::size_t>(worst)] = fc;
      } else {
        // shrink toward the best vertex
        for (int i = 0; i <= kDim; ++i) {
          if (i == best) continue;
          xs[static_cast<std::size_t>(i)] =
              clamp(xs[static_cast<std::size_t>(best)] +
                    0.5 * (xs[static_cast<std::size_t>(i)] - xs[static_cast<std::size_t>(best)]));
          fs[static_cast<std::size_t>(i)] = f(xs[static_cast<std::size_t>(i)]);
        }
      }
    }
  }

  NelderMeadResult out;
  for (int i = 0; i <= kDim; ++i) {
    if (fs[static_cast<std::size_t>(i)] < out.f) {
      out.f = fs[static_cast<std::size_t>(i)];
      out.x = xs[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

}  // namespace

TuneResult tune(const Dataset& ds, int degree_x, int degree_a, const TuneOptions& options,
                std::uint64_t seed) {
  if (!ds.Y) throw Error(ErrorCode::MissingOutcome, "tuning requires an outcome column");
  if (ds.n() < 5) throw Error(ErrorCode::InvalidArgument, "tuning needs n >= 5");
  if (degree_x < 1 || degree_a < 1)
    throw Error(ErrorCode::InvalidArgument, "kernel degrees must be >= 1");

  const Eigen::VectorXd& y = *ds.Y;
  const Eigen::Index n = ds.n();

  // Whitened inner products are fixed across hyperparameter candidates.
  const Moments mx = fit_moments(ds.X, options.ridge_fraction);
  const Moments ma = fit_moments(ds.A, options.ridge_fraction);
  const Eigen::MatrixXd Gx = whiten(mx, ds.X);
  const Eigen::MatrixXd Ga = whiten(ma, ds.A);
  Eigen::MatrixXd Bx = Eigen::MatrixXd::Zero(n, n);
  Bx.selfadjointView<Eigen::Lower>().rankUpdate(Gx);
  Bx.triangularView<Eigen::StrictlyUpper>() = Bx.transpose();
  Eigen::MatrixXd Ba = Eigen::MatrixXd::Zero(n, n);
  Ba.selfadjointView<Eigen::Lower>().rankUpdate(Ga);
  Ba.triangularView<Eigen::StrictlyUpper>() = Ba.transpose();

  auto joint_gram = [&](double theta_x, double theta_a, double gamma) {
    Eigen::MatrixXd Kx = (theta_x * Bx).array() + 1.0;
    Eigen::MatrixXd base_x = Kx;
    for (int k = 1; k < degree_x; ++k) Kx = Kx.cwiseProduct(base_x);
    Eigen::MatrixXd Ka = (theta_a * Ba).array() + 1.0;
    Eigen::MatrixXd base_a = Ka;
    for (int k = 1; k < degree_a; ++k) Ka = Ka.cwiseProduct(base_a);
    return (gamma * Kx.cwiseProduct(Ka)).eval();
  };

  // negative LML over log-parameters; failures count as +inf
  auto objective = [&](const Eigen::Vector4d& log_params) -> double {
    const double theta_x = std::exp(log_params(0));
    const double theta_a = std::exp(log_params(1));
    const double gamma = std::exp(log_params(2));
    const double sigma_sq = std::exp(log_params(3));
    try {
      return -log_marginal_likelihood(joint_gram(theta_x, theta_a, gamma), y, sigma_sq);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const double lo = std::log(options.lower_bound);
  const double hi = std::log(options.upper_bound);

  // Halton points rotated by a seed-derived offset, mapped into the log box.
  Rng rng(seed);
  Eigen::Vector4d rotation;
  for (int i = 0; i < 4; ++i) rotation(i) = rng.uniform01();
  constexpr std::uint64_t kBases[4] = {2, 3, 5, 7};

  NelderMeadResult best;
  int best_start = -1;
  for (int s = 0; s < options.starts; ++s) {
    Eigen::Vector4d x0;
    for (int i = 0; i < 4; ++i) {
      double u = halton(static_cast<std::uint64_t>(s) + 1, kBases[i]) + rotation(i);
      u -= std::floor(u);
      x0(i) = lo + u * (hi - lo);
    }
    NelderMeadResult r = nelder_mead(objective, x0, lo, hi, options.max_nm_iters);
    if (r.f < best.f) {
      best = r;
      best_start = s;
    }
  }
  if (best_start < 0 || !std::isfinite(best.f))
    throw Error(ErrorCode::AllStartsFailed, "no tuning start produced a finite marginal likelihood");

  TuneResult result;
  result.params.theta_x = std::exp(best.x(0));
  result.params.theta_a = std::exp(best.x(1));
  result.params.gamma = std::exp(best.x(2));
  result.params.sigma_sq = std::exp(best.x(3));
  result.params.degree_x = degree_x;
  result.params.degree_a = degree_a;
  result.lml = -best.f;
  result.starts = options.starts;
  return result;
}

}  // namespace koow
