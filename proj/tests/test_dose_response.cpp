#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "koow/dose_response.hpp"
#include "koow/rng.hpp"

using namespace koow;

namespace {

Eigen::VectorXd linspace(double lo, double hi, int count) {
  return make_grid(GridSpec{lo, hi, count});
}

}  // namespace

TEST_CASE("make_grid endpoints and monotonicity") {
  Eigen::VectorXd grid = linspace(-3.0, 3.0, 1000);
  CHECK(grid.size() == 1000);
  CHECK(grid(0) == -3.0);
  CHECK(grid(999) == 3.0);
  for (int g = 1; g < 1000; ++g) CHECK(grid(g) > grid(g - 1));
}

TEST_CASE("weighted_polyfit recovers a noiseless cubic for any valid weights") {
  Rng rng(3);
  const int n = 60;
  Eigen::VectorXd A(n), Y(n), w(n);
  for (int i = 0; i < n; ++i) {
    A(i) = 6.0 * rng.uniform01() - 3.0;
    Y(i) = 0.75 * A(i) + 0.05 * A(i) * A(i) + 0.01 * A(i) * A(i) * A(i);
    w(i) = 0.2 + 2.0 * rng.uniform01();
  }
  Eigen::VectorXd beta = weighted_polyfit(A, Y, w, 3);
  CHECK(std::abs(beta(0) - 0.0) < 1e-9);
  CHECK(std::abs(beta(1) - 0.75) < 1e-9);
  CHECK(std::abs(beta(2) - 0.05) < 1e-9);
  CHECK(std::abs(beta(3) - 0.01) < 1e-9);
}

TEST_CASE("uniform weights reduce to ordinary least squares") {
  Rng rng(7);
  const int n = 25;
  Eigen::VectorXd A(n), Y(n);
  for (int i = 0; i < n; ++i) {
    A(i) = rng.normal();
    Y(i) = rng.normal();
  }
  Eigen::VectorXd weighted = weighted_polyfit(A, Y, Eigen::VectorXd::Ones(n), 2);

  // textbook OLS via the normal equations, built independently
  Eigen::MatrixXd V(n, 3);
  for (int i = 0; i < n; ++i) {
    V(i, 0) = 1.0;
    V(i, 1) = A(i);
    V(i, 2) = A(i) * A(i);
  }
  Eigen::VectorXd ols = (V.transpose() * V).ldlt().solve(V.transpose() * Y);
  CHECK((weighted - ols).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("hand-computed weighted least squares line") {
  // slope = sum w (A - Abar)(Y - Ybar) / sum w (A - Abar)^2 with
  // Abar = 1.25, Ybar = 0.25 -> slope = -0.25/2.75 = -1/11, intercept = 4/11.
  Eigen::VectorXd A(3), Y(3), w(3);
  A << 0.0, 1.0, 2.0;
  Y << 0.0, 1.0, 0.0;
  w << 1.0, 1.0, 2.0;
  Eigen::VectorXd beta = weighted_polyfit(A, Y, w, 1);
  CHECK(beta(1) == doctest::Approx(-1.0 / 11.0).epsilon(1e-12));
  CHECK(beta(0) == doctest::Approx(4.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("weighted_polyfit error paths") {
  Eigen::VectorXd A(4), Y(4), w(4);
  A << 1, 1, 1, 1;  // a single distinct support point
  Y << 1, 2, 3, 4;
  w << 1, 1, 1, 1;
  try {
    weighted_polyfit(A, Y, w, 1);
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
  }

  // zero weights remove support points from the count
  Eigen::VectorXd A2(4), w2(4);
  A2 << 0, 1, 2, 3;
  w2 << 1, 0, 0, 0;
  CHECK_THROWS_AS(weighted_polyfit(A2, Y, w2, 1), Error);
}

TEST_CASE("weight-scale invariance") {
  Rng rng(13);
  const int n = 40;
  Eigen::VectorXd A(n), Y(n), w(n);
  for (int i = 0; i < n; ++i) {
    A(i) = rng.normal();
    Y(i) = std::sin(A(i)) + 0.1 * rng.normal();
    w(i) = 0.5 + rng.uniform01();
  }
  Eigen::VectorXd beta1 = weighted_polyfit(A, Y, w, 3);
  Eigen::VectorXd beta2 = weighted_polyfit(A, Y, 37.5 * w, 3);
  CHECK((beta1 - beta2).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::VectorXd grid = linspace(-2.0, 2.0, 50);
  CurveEstimate c1 = weighted_local_poly(A, Y, w, 1, 0.6, grid);
  CurveEstimate c2 = weighted_local_poly(A, Y, 37.5 * w, 1, 0.6, grid);
  CHECK((c1.theta_hat - c2.theta_hat).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("local linear reproduces linear functions exactly") {
  Rng rng(17);
  const int n = 50;
  Eigen::VectorXd A(n), Y(n), w(n);
  for (int i = 0; i < n; ++i) {
    A(i) = 4.0 * rng.uniform01() - 2.0;
    Y(i) = 2.0 + 3.0 * A(i);
    w(i) = 0.1 + rng.uniform01();
  }
  Eigen::VectorXd grid = linspace(-1.5, 1.5, 40);
  for (double span : {0.3, 0.75, 1.0}) {
    CurveEstimate curve = weighted_local_poly(A, Y, w, 1, span, grid);
    for (int g = 0; g < grid.size(); ++g)
      CHECK(std::abs(curve.theta_hat(g) - (2.0 + 3.0 * grid(g))) < 1e-9);
  }
}

TEST_CASE("local degree-2 reproduces quadratics") {
  Rng rng(19);
  const int n = 60;
  Eigen::VectorXd A(n), Y(n), w(n);
  for (int i = 0; i < n; ++i) {
    A(i) = 4.0 * rng.uniform01() - 2.0;
    Y(i) = 1.0 - 0.5 * A(i) + 0.25 * A(i) * A(i);
    w(i) = 0.2 + rng.uniform01();
  }
  Eigen::VectorXd grid = linspace(-1.0, 1.0, 25);
  CurveEstimate curve = weighted_local_poly(A, Y, w, 2, 0.5, grid);
  for (int g = 0; g < grid.size(); ++g) {
    const double truth = 1.0 - 0.5 * grid(g) + 0.25 * grid(g) * grid(g);
    CHECK(std::abs(curve.theta_hat(g) - truth) < 1e-8);
  }
}

TEST_CASE("local mean stays inside the outcome range") {
  Rng rng(23);
  const int n = 30;
  Eigen::VectorXd A(n), Y(n);
  for (int i = 0; i < n; ++i) {
    A(i) = rng.normal();
    Y(i) = rng.normal();
  }
  Eigen::VectorXd grid = linspace(-2.5, 2.5, 60);
  CurveEstimate curve =
      weighted_local_poly(A, Y, Eigen::VectorXd::Ones(n), 0, 1.0, grid);
  const double lo = Y.minCoeff(), hi = Y.maxCoeff();
  for (int g = 0; g < grid.size(); ++g) {
    CHECK(curve.theta_hat(g) >= lo - 1e-12);
    CHECK(curve.theta_hat(g) <= hi + 1e-12);
  }
}

TEST_CASE("five-point tricube weighted mean, computed by hand") {
  Eigen::VectorXd A(5), Y(5), w(5);
  A << 0.0, 1.0, 2.0, 3.0, 4.0;
  Y << 5.0, 3.0, 4.0, 1.0, 2.0;
  w << 1.0, 2.0, 1.0, 1.0, 3.0;
  Eigen::VectorXd grid(1);
  grid << 2.0;

  SUBCASE("span 1.0: all five neighbors, h = 2") {
    // u = (1, .5, 0, .5, 1): tricube gives (0, 0.669921875, 1, 0.669921875, 0)
    const double k1 = 0.669921875;  // (1 - 0.125)^3
    const double num = 2.0 * k1 * 3.0 + 1.0 * 4.0 + 1.0 * k1 * 1.0;
    const double den = 2.0 * k1 + 1.0 + 1.0 * k1;
    CurveEstimate curve = weighted_local_poly(A, Y, w, 0, 1.0, grid);
    CHECK(curve.theta_hat(0) == doctest::Approx(num / den).epsilon(1e-14));
  }

  SUBCASE("span 0.6: h = 1, only the center point survives the strict support") {
    CurveEstimate curve = weighted_local_poly(A, Y, w, 0, 0.6, grid);
    CHECK(curve.theta_hat(0) == doctest::Approx(4.0).epsilon(1e-14));
  }
}

TEST_CASE("rank-deficient local designs fall back to a lower degree") {
  // only two distinct A values: a local quadratic cannot be identified, the
  // linear fallback still reproduces a linear outcome exactly
  Eigen::VectorXd A(8), Y(8), w(8);
  for (int i = 0; i < 8; ++i) {
    A(i) = (i < 4) ? 0.0 : 1.0;
    Y(i) = 3.0 + 2.0 * A(i);
    w(i) = 1.0;
  }
  Eigen::VectorXd grid(3);
  grid << 0.0, 0.5, 1.0;
  CurveEstimate curve = weighted_local_poly(A, Y, w, 2, 1.0, grid);
  for (int g = 0; g < 3; ++g)
    CHECK(curve.theta_hat(g) == doctest::Approx(3.0 + 2.0 * grid(g)).epsilon(1e-9));
}

TEST_CASE("invalid span rejected") {
  Eigen::VectorXd A(5), Y(5), w(5);
  A << 1, 2, 3, 4, 5;
  Y.setOnes();
  w.setOnes();
  Eigen::VectorXd grid(2);
  grid << 1.0, 2.0;
  for (double span : {0.0, -0.5, 1.5}) {
    try {
      weighted_local_poly(A, Y, w, 1, span, grid);
      FAIL("expected InvalidSpan");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::InvalidSpan);
    }
  }
}

TEST_CASE("evaluate_parametric") {
  Eigen::VectorXd grid = linspace(-3.0, 3.0, 7);

  SUBCASE("zero coefficients give the zero curve") {
    CurveEstimate curve = evaluate_parametric(Eigen::VectorXd::Zero(4), grid);
    CHECK(curve.theta_hat.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("constant polynomial") {
    Eigen::VectorXd c(4);
    c << 1.0, 0.0, 0.0, 0.0;
    CurveEstimate curve = evaluate_parametric(c, grid);
    for (int g = 0; g < 7; ++g) CHECK(curve.theta_hat(g) == 1.0);
  }

  SUBCASE("outcome polynomial at a = 2") {
    Eigen::VectorXd c(4);
    c << 0.0, 0.75, 0.05, 0.01;
    Eigen::VectorXd at(1);
    at << 2.0;
    CurveEstimate curve = evaluate_parametric(c, at);
    CHECK(curve.theta_hat(0) == doctest::Approx(1.78).epsilon(1e-14));
  }
}

TEST_CASE("estimate_curve dispatches and validates") {
  Rng rng(29);
  const int n = 30;
  Eigen::VectorXd A(n), Y(n);
  for (int i = 0; i < n; ++i) {
    A(i) = rng.normal();
    Y(i) = 0.5 * A(i);
  }
  Eigen::VectorXd grid = linspace(-1.0, 1.0, 10);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);

  CurveEstimate para = estimate_curve(A, Y, w, EstimatorSpec{EstimatorKind::parametric, 1, 0.0}, grid);
  CHECK(para.theta_hat(0) == doctest::Approx(-0.5).epsilon(1e-9));

  EstimatorSpec bad{EstimatorKind::parametric, 7, 0.0};
  CHECK_THROWS_AS(estimate_curve(A, Y, w, bad, grid), Error);
}
