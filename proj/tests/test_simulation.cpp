#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "koow/diagnostics.hpp"
#include "koow/reports.hpp"
#include "koow/rng.hpp"
#include "koow/simulation.hpp"

using namespace koow;

TEST_CASE("scenario parameters") {
  ScenarioSpec lin = scenario_by_name("linear", 100);
  CHECK(lin.beta0 == 0.0);
  CHECK(lin.beta1 == 1.0);
  CHECK(lin.d == 1);
  ScenarioSpec quad = scenario_by_name("quadratic", 100);
  CHECK(quad.beta0 == -3.0);
  CHECK(quad.beta1 == 0.25);
  CHECK(quad.d == 2);
  ScenarioSpec cub = scenario_by_name("cubic", 100);
  CHECK(cub.beta0 == -2.5);
  CHECK(cub.beta1 == 0.05);
  CHECK(cub.d == 3);
  CHECK_THROWS_AS(scenario_by_name("quartic", 100), Error);
}

TEST_CASE("generate is deterministic and consistent with the outcome model") {
  ScenarioSpec spec = scenario_by_name("quadratic", 200);
  auto [ds1, c1] = generate(spec, 123);
  auto [ds2, c2] = generate(spec, 123);
  CHECK((ds1.X - ds2.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((ds1.A - ds2.A).cwiseAbs().maxCoeff() == 0.0);
  CHECK((*ds1.Y - *ds2.Y).cwiseAbs().maxCoeff() == 0.0);
  CHECK((c1 - c2).cwiseAbs().maxCoeff() == 0.0);

  auto [ds3, c3] = generate(spec, 124);
  (void)c3;
  CHECK((ds1.A - ds3.A).cwiseAbs().maxCoeff() > 0.0);

  // Y is an exact function of (A, S) with no outcome noise
  for (int i = 0; i < 200; ++i) {
    const double a = ds1.A(i);
    const double s = ds1.X.row(i).sum();
    const double expected = 0.75 * a + 0.05 * a * a + 0.01 * a * a * a + 1.5 * s + 1.125 * a * s;
    CHECK((*ds1.Y)(i) == doctest::Approx(expected).epsilon(1e-14));
  }
}

TEST_CASE("true curve identity") {
  auto [ds, coeffs] = generate(scenario_by_name("linear", 50), 7);
  (void)ds;
  Eigen::VectorXd grid = make_grid(GridSpec{-3.0, 3.0, 1000});
  CurveEstimate curve = evaluate_parametric(coeffs, grid);
  CHECK(curve.theta_hat(0) == doctest::Approx(0.75 * -3.0 + 0.05 * 9.0 + 0.01 * -27.0)
                                  .epsilon(1e-12));
  for (int g = 0; g < 1000; ++g) {
    const double a = grid(g);
    const double direct = 0.75 * a + 0.05 * a * a + 0.01 * a * a * a;
    CHECK(std::abs(curve.theta_hat(g) - direct) <= 1e-12 * (1.0 + std::abs(direct)));
  }
  // theta(0) = 0 and theta(2) = 1.78
  Eigen::VectorXd at(2);
  at << 0.0, 2.0;
  CurveEstimate two = evaluate_parametric(coeffs, at);
  CHECK(two.theta_hat(0) == 0.0);
  CHECK(two.theta_hat(1) == doctest::Approx(1.78).epsilon(1e-14));
}

TEST_CASE("confounder and noise scales match the generating spec") {
  ScenarioSpec spec = scenario_by_name("linear", 4000);
  auto [ds, coeffs] = generate(spec, 31);
  (void)coeffs;
  // X variance ~ 5
  const double var_x =
      (ds.X.col(0).array() - ds.X.col(0).mean()).square().sum() / (ds.n() - 1.0);
  CHECK(var_x == doctest::Approx(5.0).epsilon(0.15));
  // A = S + noise: variance ~ 25 + 5
  const double var_a = (ds.A.array() - ds.A.mean()).square().sum() / (ds.n() - 1.0);
  CHECK(var_a == doctest::Approx(30.0).epsilon(0.15));
}

TEST_CASE("stable ipw weights under independence are nearly uniform") {
  // A independent of X: numerator and denominator densities agree up to
  // sampling noise, so weights hug 1.
  const int n = 1000;
  Rng rng(55);
  Eigen::MatrixXd X(n, 3);
  Eigen::VectorXd A(n);
  for (int i = 0; i < n; ++i) {
    A(i) = rng.normal();
    for (int j = 0; j < 3; ++j) X(i, j) = rng.normal();
  }
  Dataset ds = make_dataset(X, A, std::nullopt, {"x1", "x2", "x3"}, "a");
  IpwWeights ipw = stable_ipw_weights(ds);
  CHECK(ipw.w.sum() == doctest::Approx(static_cast<double>(n)).epsilon(1e-12));
  const double mean = ipw.w.mean();
  const double cv = std::sqrt((ipw.w.array() - mean).square().mean()) / mean;
  CHECK(cv < 0.2);
}

TEST_CASE("stable ipw improves balance in the linear scenario") {
  int improved = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    auto [ds, coeffs] = generate(scenario_by_name("linear", 500), 9000 + s);
    (void)coeffs;
    IpwWeights ipw = stable_ipw_weights(ds);
    BalanceReport report = balance_table(ds, ipw.w);
    if (report.mean_abs_corr_weighted < report.mean_abs_corr_unweighted) ++improved;
  }
  CHECK(improved >= 90);
}

TEST_CASE("stable ipw requires enough rows and full rank") {
  Eigen::MatrixXd X(4, 2);
  X << 1, 2, 3, 4, 5, 6, 7, 8;
  Eigen::VectorXd A(4);
  A << 1, 2, 3, 4;
  Dataset tiny{X, A, std::nullopt, {"x1", "x2"}, "a", ""};
  try {
    stable_ipw_weights(tiny);
    FAIL("expected SingularDesign");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularDesign);
  }
}

TEST_CASE("iab_irmse identities") {
  Eigen::VectorXd truth(5);
  truth << 0.0, 1.0, 2.0, 3.0, 4.0;

  SUBCASE("exact estimates give zero") {
    Eigen::MatrixXd est(3, 5);
    est.row(0) = truth.transpose();
    est.row(1) = truth.transpose();
    est.row(2) = truth.transpose();
    auto [iab, irmse] = iab_irmse(est, truth);
    CHECK(iab == 0.0);
    CHECK(irmse == 0.0);
  }

  SUBCASE("constant offset moves both by the offset") {
    Eigen::MatrixXd est(1, 5);
    est.row(0) = (truth.array() + 1.0).transpose();
    auto [iab, irmse] = iab_irmse(est, truth);
    CHECK(iab == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(irmse == doctest::Approx(1.0).epsilon(1e-14));
  }

  SUBCASE("symmetric errors cancel in bias but not rmse") {
    Eigen::MatrixXd est(2, 5);
    est.row(0) = (truth.array() + 1.0).transpose();
    est.row(1) = (truth.array() - 1.0).transpose();
    auto [iab, irmse] = iab_irmse(est, truth);
    CHECK(iab == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(irmse == doctest::Approx(1.0).epsilon(1e-14));
  }

  SUBCASE("grid mismatch") {
    Eigen::MatrixXd est(1, 4);
    est.setZero();
    CHECK_THROWS_AS(iab_irmse(est, truth), Error);
  }
}

TEST_CASE("run_study is deterministic and produces the full cell grid") {
  StudyConfig config;
  config.scenarios = {"linear"};
  config.lambdas = {0.0, 1.0};
  config.replications = 3;
  config.n = 80;
  config.seed = 17;
  config.base.grid = GridSpec{-2.0, 2.0, 50};
  config.workers = 1;

  std::vector<StudyCell> a = run_study(config);
  config.workers = 3;
  std::vector<StudyCell> b = run_study(config);

  // 4 methods (koow x2, ipw, unweighted) x 2 estimators
  CHECK(a.size() == 8);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].method == b[i].method);
    CHECK(a[i].estimator == b[i].estimator);
    CHECK(a[i].iab == b[i].iab);
    CHECK(a[i].irmse == b[i].irmse);
    CHECK(a[i].failures == b[i].failures);
  }

  const std::string csv1 = study_csv(a);
  const std::string csv2 = study_csv(b);
  CHECK(csv1 == csv2);
}

TEST_CASE("disabling the confounding term makes the unweighted cubic fit exact") {
  // with the S coefficients zeroed, Y is exactly the cubic in A
  ScenarioSpec spec = scenario_by_name("linear", 150);
  auto [ds, coeffs] = generate(spec, 3);
  Eigen::VectorXd S = ds.X.rowwise().sum();
  Eigen::VectorXd y_clean(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    const double a = ds.A(i);
    y_clean(i) = 0.75 * a + 0.05 * a * a + 0.01 * a * a * a;
  }
  Eigen::VectorXd beta = weighted_polyfit(ds.A, y_clean, Eigen::VectorXd::Ones(ds.n()), 3);
  Eigen::VectorXd grid = make_grid(GridSpec{-3.0, 3.0, 200});
  CurveEstimate fit = evaluate_parametric(beta, grid);
  CurveEstimate truth = evaluate_parametric(coeffs, grid);
  Eigen::MatrixXd est(1, 200);
  est.row(0) = fit.theta_hat.transpose();
  auto [iab, irmse] = iab_irmse(est, truth.theta_hat);
  CHECK(iab < 1e-9);
  CHECK(irmse < 1e-9);
}
