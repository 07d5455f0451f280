#include "koow/balance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "koow/kernels.hpp"

namespace koow {

namespace {

void check_weights_size(const BalanceObjective& obj, const Eigen::VectorXd& w) {
  if (w.size() != obj.n)
    throw Error(ErrorCode::DimensionMismatch, "weight vector length does not match objective");
}

// Largest eigenvalue of the symmetric PSD matrix B by power iteration:
// 30 iterations or 1e-6 relative change.
double power_iteration_lambda_max(const Eigen::MatrixXd& B) {
  const Eigen::Index n = B.rows();
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) b(i) = 1.0 + static_cast<double>(i) / static_cast<double>(n);
  b.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd Bb = B.selfadjointView<Eigen::Lower>() * b;
    const double norm = Bb.norm();
    if (norm == 0.0) return 0.0;
    const double next = b.dot(Bb);
    b = Bb / norm;
    if (it > 0 && std::abs(next - lambda) <= 1e-6 * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::max(lambda, 0.0);
}

// Exact equality-constrained KKT solve restricted to support set S:
//   (2/n^2) B_S w_S - mu 1 = (2/n^3) v_S,   1^T w_S = n.
// Returns false when the system is singular or the solution leaves the simplex.
bool active_set_solve(const BalanceObjective& obj, const std::vector<int>& support,
                      Eigen::VectorXd& out) {
  const Eigen::Index m = static_cast<Eigen::Index>(support.size());
  const double nd = static_cast<double>(obj.n);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m + 1, m + 1);
  Eigen::VectorXd rhs(m + 1);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) {
      double b = obj.M(support[static_cast<std::size_t>(r)], support[static_cast<std::size_t>(c)]);
      if (r == c) b += obj.lambda;
      A(r, c) = (2.0 / (nd * nd)) * b;
    }
    A(r, m) = -1.0;
    A(m, r) = 1.0;
    rhs(r) = (2.0 / (nd * nd * nd)) * obj.v(support[static_cast<std::size_t>(r)]);
  }
  rhs(m) = nd;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) return false;
  const Eigen::VectorXd sol = lu.solve(rhs);
  out = Eigen::VectorXd::Zero(obj.n);
  for (Eigen::Index r = 0; r < m; ++r) {
    const double wi = sol(r);
    if (wi < -1e-10) return false;
    out(support[static_cast<std::size_t>(r)]) = std::max(wi, 0.0);
  }
  const double s = out.sum();
  if (s <= 0.0) return false;
  out *= nd / s;
  return true;
}

// Dual feasibility and complementarity at tolerance tol, with the multiplier
// estimated as the mean gradient over the support {w_i > 1e-8}.
bool kkt_certificate(const Eigen::VectorXd& grad, const Eigen::VectorXd& w, double tol) {
  double mu = 0.0;
  Eigen::Index support = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) > 1e-8) {
      mu += grad(i);
      ++support;
    }
  }
  if (support == 0) return false;
  mu /= static_cast<double>(support);
  const double comp_tol = tol * (1.0 + std::abs(mu));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double slack = grad(i) - mu;
    if (slack < -tol) return false;
    if (std::abs(slack * w(i)) > comp_tol) return false;
  }
  return true;
}

}  // namespace

BalanceObjective build_objective(const Eigen::MatrixXd& Kx, const Eigen::MatrixXd& Ka,
                                 double lambda) {
  if (Kx.rows() != Kx.cols() || Ka.rows() != Ka.cols() || Kx.rows() != Ka.rows())
    throw Error(ErrorCode::DimensionMismatch, "Gram matrices must be square and equal-sized");
  if (lambda < 0.0) throw Error(ErrorCode::NegativeLambda, "lambda must be >= 0");

  BalanceObjective obj;
  obj.n = Kx.rows();
  obj.M = hadamard(Kx, Ka);
  obj.v = (Kx.rowwise().sum().array() * Ka.rowwise().sum().array()).matrix();
  obj.s_x = Kx.sum();
  obj.s_a = Ka.sum();
  obj.lambda = lambda;
  return obj;
}

BalanceObjective with_lambda(BalanceObjective obj, double lambda) {
  if (lambda < 0.0) throw Error(ErrorCode::NegativeLambda, "lambda must be >= 0");
  obj.lambda = lambda;
  return obj;
}

double delta_squared(const BalanceObjective& obj, const Eigen::VectorXd& w) {
  check_weights_size(obj, w);
  const double n = static_cast<double>(obj.n);
  const double quad = w.dot(obj.M.selfadjointView<Eigen::Lower>() * w);
  return quad / (n * n) - 2.0 * obj.v.dot(w) / (n * n * n) + obj.s_x * obj.s_a / (n * n * n * n);
}

double objective_value(const BalanceObjective& obj, const Eigen::VectorXd& w) {
  const double n = static_cast<double>(obj.n);
  return delta_squared(obj, w) + obj.lambda * w.squaredNorm() / (n * n);
}

Eigen::VectorXd objective_gradient(const BalanceObjective& obj, const Eigen::VectorXd& w) {
  check_weights_size(obj, w);
  const double n = static_cast<double>(obj.n);
  Eigen::VectorXd Mw = obj.M.selfadjointView<Eigen::Lower>() * w;
  return (2.0 / (n * n)) * (Mw + obj.lambda * w - obj.v / n);
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& z, double total) {
  const Eigen::Index n = z.size();
  if (n == 0) return z;
  if (!z.allFinite()) throw Error(ErrorCode::InvalidArgument, "projection input must be finite");

  std::vector<double> sorted(z.data(), z.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double prefix = 0.0;
  double tau = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    prefix += sorted[static_cast<std::size_t>(k)];
    const double candidate = (prefix - total) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) {
      tau = candidate;
    } else {
      break;
    }
  }
  return (z.array() - tau).cwiseMax(0.0);
}

WeightSolution solve(const BalanceObjective& obj, const SolverOptions& options) {
  if (options.tol <= 0.0) throw Error(ErrorCode::InvalidArgument, "tol must be > 0");
  const Eigen::Index n = obj.n;
  const double nd = static_cast<double>(n);

  WeightSolution sol;
  sol.w = Eigen::VectorXd::Ones(n);

  // All-zero kernels: every feasible point is optimal.
  if (nd * obj.M.trace() == 0.0 && obj.lambda == 0.0) {
    sol.objective = objective_value(obj, sol.w);
    sol.delta_sq = delta_squared(obj, sol.w);
    sol.converged = true;
    return sol;
  }

  Eigen::MatrixXd B = obj.M + obj.lambda * Eigen::MatrixXd::Identity(n, n);
  const double lambda_max = power_iteration_lambda_max(B);
  const double L = std::max(lambda_max * 2.0 / (nd * nd), 1e-300) * 1.02;
  const double step = 1.0 / L;

  const double lin = 2.0 / (nd * nd * nd);
  const double constant = obj.s_x * obj.s_a / (nd * nd * nd * nd);
  // c(w) = (1/n^2) w^T B w - (2/n^3) v^T w + const, with B = M + lambda I
  auto value_of = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& Bw) {
    return w.dot(Bw) / (nd * nd) - lin * obj.v.dot(w) + constant;
  };
  auto grad_of = [&](const Eigen::VectorXd& Bw) {
    return ((2.0 / (nd * nd)) * (Bw - obj.v / nd)).eval();
  };
  auto matvec = [&](const Eigen::VectorXd& x) {
    return (B.selfadjointView<Eigen::Lower>() * x).eval();
  };

  Eigen::VectorXd w = sol.w;
  Eigen::VectorXd Bw = matvec(w);
  double fw = value_of(w, Bw);
  Eigen::VectorXd y = w;
  Eigen::VectorXd By = Bw;
  double t = 1.0;
  double residual = std::numeric_limits<double>::infinity();
  int it = 0;
  bool converged = false;

  {
    // the cold start may already be optimal (e.g. uninformative treatment Gram)
    Eigen::VectorXd grad_w = grad_of(Bw);
    residual = (w - project_simplex(w - grad_w, nd)).cwiseAbs().maxCoeff();
    if (residual <= options.tol && kkt_certificate(grad_w, w, options.tol)) converged = true;
  }

  while (it < options.max_iter && !converged) {
    ++it;
    Eigen::VectorXd grad_y = grad_of(By);
    Eigen::VectorXd z = project_simplex(y - step * grad_y, nd);
    Eigen::VectorXd Bz = matvec(z);
    const double fz = value_of(z, Bz);
    if (!std::isfinite(fz))
      throw Error(ErrorCode::NonFiniteObjective, "objective became non-finite during solve");

    // monotone up to the floating-point resolution of the objective; a strict
    // comparison stalls once per-step improvements drop below rounding noise
    const double accept_slack = 1e-15 * (1.0 + std::abs(fw));
    if (fz <= fw + accept_slack) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = z + ((t - 1.0) / t_next) * (z - w);
      w = std::move(z);
      Bw = std::move(Bz);
      fw = std::min(fw, fz);
      By = matvec(y);
      t = t_next;
    } else {
      // restart: drop momentum, take a plain projected-gradient step from w
      Eigen::VectorXd zr = project_simplex(w - step * grad_of(Bw), nd);
      Eigen::VectorXd Bzr = matvec(zr);
      const double fzr = value_of(zr, Bzr);
      if (fzr <= fw + accept_slack) {
        w = std::move(zr);
        Bw = std::move(Bzr);
        fw = std::min(fw, fzr);
      }
      y = w;
      By = Bw;
      t = 1.0;
    }

    Eigen::VectorXd grad_w = grad_of(Bw);
    residual = (w - project_simplex(w - grad_w, nd)).cwiseAbs().maxCoeff();
    if (residual <= options.tol) {
      if (kkt_certificate(grad_w, w, options.tol)) {
        converged = true;
      } else {
        // the active set is identified; finish with an exact KKT solve on it
        std::vector<int> support;
        for (Eigen::Index i = 0; i < n; ++i)
          if (w(i) > 1e-8) support.push_back(static_cast<int>(i));
        Eigen::VectorXd polished;
        if (!support.empty() && active_set_solve(obj, support, polished)) {
          Eigen::VectorXd Bp = matvec(polished);
          const double fp = value_of(polished, Bp);
          if (fp <= fw + 1e-15 * (1.0 + std::abs(fw))) {
            Eigen::VectorXd grad_p = grad_of(Bp);
            const double resid_p =
                (polished - project_simplex(polished - grad_p, nd)).cwiseAbs().maxCoeff();
            if (resid_p <= options.tol && kkt_certificate(grad_p, polished, options.tol)) {
              w = std::move(polished);
              Bw = std::move(Bp);
              fw = std::min(fw, fp);
              residual = resid_p;
              converged = true;
            }
          }
        }
      }
    }
  }

  sol.w = w;
  sol.converged = converged;
  sol.kkt_residual = residual;
  sol.iterations = it;
  Eigen::VectorXd Mw = Bw - obj.lambda * w;
  sol.delta_sq = w.dot(Mw) / (nd * nd) - lin * obj.v.dot(w) + constant;
  sol.objective = sol.delta_sq + obj.lambda * w.squaredNorm() / (nd * nd);
  return sol;
}

namespace {

struct OracleCandidate {
  Eigen::VectorXd w;
  double value = std::numeric_limits<double>::infinity();
};

void consider(const BalanceObjective& obj, const Eigen::VectorXd& w, OracleCandidate& best) {
  const double value = objective_value(obj, w);
  if (value < best.value) {
    best.value = value;
    best.w = w;
  }
}

}  // namespace

Eigen::VectorXd solve_oracle(const BalanceObjective& obj) {
  const Eigen::Index n = obj.n;
  if (n > 4) throw Error(ErrorCode::TooLarge, "oracle supports n <= 4");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "empty objective");

  constexpr int kResolution = 400;
  const double nd = static_cast<double>(n);
  const double unit = nd / static_cast<double>(kResolution);

  OracleCandidate best;
  Eigen::VectorXd w(n);
  auto eval_point = [&](const Eigen::VectorXi& k) {
    for (Eigen::Index i = 0; i < n; ++i) w(i) = unit * static_cast<double>(k(i));
    consider(obj, w, best);
  };

  Eigen::VectorXi k = Eigen::VectorXi::Zero(n);
  if (n == 1) {
    k(0) = kResolution;
    eval_point(k);
  } else {
    // Barycentric grid sweep. For fixed leading coordinates, the last two are
    // a 1-D convex quadratic in the split index, so only the clipped vertex
    // and the two endpoints need evaluation.
    const Eigen::Index last = n - 1;
    const Eigen::Index prev = n - 2;
    std::vector<int> outer(static_cast<std::size_t>(n) - 2, 0);
    std::vector<int> candidates;
    bool done = false;
    while (!done) {
      int used = 0;
      for (std::size_t i = 0; i < outer.size(); ++i) {
        k(static_cast<Eigen::Index>(i)) = outer[i];
        used += outer[i];
      }
      const int remaining = kResolution - used;
      if (remaining >= 0) {
        candidates.clear();
        candidates.push_back(0);
        if (remaining > 0) candidates.push_back(remaining);

        Eigen::VectorXd w0 = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i + 2 < n; ++i) w0(i) = unit * k(i);
        w0(last) = unit * remaining;
        Eigen::VectorXd dir = Eigen::VectorXd::Zero(n);
        dir(prev) = unit;
        dir(last) = -unit;

        const double nd2 = nd * nd;
        Eigen::VectorXd Mdir = obj.M.selfadjointView<Eigen::Lower>() * dir;
        const double alpha = (dir.dot(Mdir) + obj.lambda * dir.squaredNorm()) / nd2;
        Eigen::VectorXd Mw0 = obj.M.selfadjointView<Eigen::Lower>() * w0;
        const double beta = 2.0 * (dir.dot(Mw0) + obj.lambda * dir.dot(w0)) / nd2 -
                            2.0 * obj.v.dot(dir) / (nd2 * nd);
        if (alpha > 0.0) {
          const double j_star = -beta / (2.0 * alpha);
          const int jf = static_cast<int>(std::floor(j_star));
          for (int j : {jf, jf + 1})
            if (j > 0 && j < remaining) candidates.push_back(j);
        }
        for (int j : candidates) {
          k(prev) = j;
          k(last) = remaining - j;
          eval_point(k);
        }
      }
      done = outer.empty();
      for (std::size_t i = 0; i < outer.size(); ++i) {
        if (++outer[i] <= kResolution) break;
        outer[i] = 0;
        if (i + 1 == outer.size()) done = true;
      }
    }
  }

  // Exact refinement: KKT solve on every support set (at most 2^4 - 1).
  std::vector<int> support;
  for (int mask = 1; mask < (1 << n); ++mask) {
    support.clear();
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) support.push_back(i);
    Eigen::VectorXd candidate;
    if (active_set_solve(obj, support, candidate)) consider(obj, candidate, best);
  }

  return best.w;
}

}  // namespace koow
