#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "bregsmooth/varcoef.hpp"
#include "test_util.hpp"

using namespace bregsmooth;

namespace {

LocalFitConfig cfg_for(double h, double ridge = 0.0) {
  LocalFitConfig cfg;
  cfg.degree = 1;
  cfg.bandwidth = h;
  cfg.ridge = ridge;
  return cfg;
}

// intercept-only wrapper around a univariate dataset
VCDataset as_vc(const Dataset& data) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(data.n(), 1);
  return VCDataset::from_parts(data.x, X, data.y,
                               std::make_pair(data.support_lo, data.support_hi));
}

// two-coefficient gaussian test bed: y = a1(u) + a2(u) x2 + noise
VCDataset vc_gaussian(int n, std::uint64_t seed, double sd = 0.2) {
  CounterRng rng(seed);
  std::vector<double> u(n), y(n);
  Eigen::MatrixXd X(n, 2);
  for (int i = 0; i < n; ++i) {
    u[i] = rng.uniform01();
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    double theta = std::sin(2 * u[i]) + (1.0 + u[i]) * X(i, 1);
    y[i] = theta + rng.normal(0.0, sd);
  }
  return VCDataset::from_parts(u, X, y, std::make_pair(0.0, 1.0));
}

VCDataset vc_poisson(int n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> u(n), y(n);
  Eigen::MatrixXd X(n, 2);
  for (int i = 0; i < n; ++i) {
    u[i] = rng.uniform01();
    X(i, 0) = 1.0;
    X(i, 1) = rng.normal();
    double theta = 1.0 + 0.5 * u[i] + 0.4 * u[i] * X(i, 1);
    y[i] = rng.poisson(std::exp(theta));
  }
  return VCDataset::from_parts(u, X, y, std::make_pair(0.0, 1.0));
}

}  // namespace

TEST_CASE("intercept-only varying coefficients nest the univariate smoother") {
  Dataset uni = testutil::gaussian_data(100, 33, [](double x) { return std::sin(4 * x); });
  VCDataset vc = as_vc(uni);
  ExponentialFamily fam(FamilyKind::gaussian);
  LocalFitConfig cfg = cfg_for(0.25);
  std::vector<double> at = {0.2, 0.5, 0.8};
  VCFitResult vres = fit_vc(vc, fam, cfg, at);
  LocalFitResult ures = fit_curve(uni, fam, cfg, at);
  for (size_t j = 0; j < at.size(); ++j) {
    REQUIRE_FALSE(vres.failed[j]);
    CHECK(vres.A_hat(j, 0) == doctest::Approx(ures.theta_hat[j]).epsilon(1e-9));
  }
}

TEST_CASE("intercept-only nesting carries over to poisson and the diagnostics") {
  Dataset uni = testutil::poisson_data(150, 37, [](double x) { return 1.0 + std::sin(3 * x); });
  VCDataset vc = as_vc(uni);
  ExponentialFamily fam(FamilyKind::poisson);
  LocalFitConfig cfg = cfg_for(0.3);
  VCFitResult vres = fit_vc_observations(vc, fam, cfg);
  LocalFitResult ures = fit_observations(uni, fam, cfg);
  REQUIRE(vres.n() == ures.n());
  for (int i = 0; i < vres.n(); ++i) {
    REQUIRE_FALSE(vres.failed[i]);
    CHECK(vres.theta_hat[i] == doctest::Approx(ures.theta_hat[i]).epsilon(1e-8));
    CHECK(vres.H_star[i] == doctest::Approx(ures.H[i]).epsilon(1e-7));
    CHECK(vres.S_star[i] == doctest::Approx(ures.S_diag[i]).epsilon(1e-7));
  }
}

TEST_CASE("gaussian varying-coefficient fit matches the dense kronecker solve") {
  VCDataset data = vc_gaussian(120, 3);
  ExponentialFamily fam(FamilyKind::gaussian);
  LocalFitConfig cfg = cfg_for(0.3);
  double at = 0.5;
  VCFitResult res = fit_vc(data, fam, cfg, {at});
  REQUIRE_FALSE(res.failed[0]);
  // oracle: rows (X_i, t_i X_i), kernel weights, plain weighted least squares
  const int n = data.n();
  Eigen::MatrixXd Z(n, 4);
  Eigen::VectorXd w(n), y(n);
  for (int i = 0; i < n; ++i) {
    double t = data.u[i] - at;
    Z(i, 0) = data.X(i, 0);
    Z(i, 1) = data.X(i, 1);
    Z(i, 2) = t * data.X(i, 0);
    Z(i, 3) = t * data.X(i, 1);
    w(i) = cfg.kernel(t / cfg.bandwidth) / cfg.bandwidth;
    y(i) = data.y[i];
  }
  Eigen::MatrixXd S = Z.transpose() * w.asDiagonal() * Z;
  Eigen::VectorXd beta = S.ldlt().solve(Z.transpose() * (w.array() * y.array()).matrix());
  CHECK(res.A_hat(0, 0) == doctest::Approx(beta(0)).epsilon(1e-8));
  CHECK(res.A_hat(0, 1) == doctest::Approx(beta(1)).epsilon(1e-8));
}

TEST_CASE("coefficient recovery on a smooth gaussian design") {
  VCDataset data = vc_gaussian(800, 11, 0.1);
  ExponentialFamily fam(FamilyKind::gaussian);
  VCFitResult res = fit_vc(data, fam, cfg_for(0.2), {0.3, 0.6});
  for (int j = 0; j < 2; ++j) {
    double u = res.eval_points[j];
    CHECK(std::abs(res.A_hat(j, 0) - std::sin(2 * u)) < 0.1);
    CHECK(std::abs(res.A_hat(j, 1) - (1.0 + u)) < 0.1);
    CHECK(res.A_se(j, 0) > 0.0);
    CHECK(res.A_se(j, 0) < 0.1);
  }
}

TEST_CASE("sandwich standard errors shrink like root n") {
  VCFitResult small = fit_vc(vc_gaussian(200, 5), ExponentialFamily(FamilyKind::gaussian),
                             cfg_for(0.35), {0.5});
  VCFitResult big = fit_vc(vc_gaussian(3200, 5), ExponentialFamily(FamilyKind::gaussian),
                           cfg_for(0.35), {0.5});
  // same bandwidth, 16x the data: se should drop by about 4
  double shrink = small.A_se(0, 0) / big.A_se(0, 0);
  CHECK(shrink > 2.0);
  CHECK(shrink < 8.0);
}

TEST_CASE("hat diagonals follow the leverage identity on the kronecker design") {
  VCDataset data = vc_gaussian(150, 7);
  ExponentialFamily fam(FamilyKind::gaussian);
  LocalFitConfig cfg = cfg_for(0.3);
  VCFitResult res = fit_vc_observations(vc_gaussian(150, 7), fam, cfg);
  // gaussian: exact deletion identity per observation
  for (int i : {10, 75, 140}) {
    REQUIRE_FALSE(res.failed[i]);
    LooApprox approx = loo_approx_vc(res, fam, i, LooVariant::newton);
    LooApprox exact = loo_exact_vc(data, fam, cfg, i);
    CHECK(approx.m == doctest::Approx(exact.m).epsilon(1e-8));
  }
}

TEST_CASE("vc degrees of freedom law scales the univariate form by d") {
  Kernel epan(KernelKind::epanechnikov);
  DFConstants c{0.70, 1.03};
  double uni = empirical_df(1, 400, 0.1, epan, 1.0, c);
  double vc1 = empirical_df_vc(1, 1, 400, 0.1, epan, 1.0, c);
  // d = 1 differs only in the n/(n-d) factor, identical here
  CHECK(vc1 == doctest::Approx(uni).epsilon(1e-12));
  double vc3 = empirical_df_vc(3, 1, 400, 0.1, epan, 1.0, c);
  double want = 3.0 * (1.3 + 1.03 * (400.0 / 397.0) * 0.75 * 10.0);
  CHECK(vc3 == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("vc criteria mirror the univariate ones on the intercept embedding") {
  Dataset uni = testutil::poisson_data(120, 41, [](double x) { return 1.0 + x; });
  VCDataset vc = as_vc(uni);
  ExponentialFamily fam(FamilyKind::poisson);
  BregmanDivergence div = BregmanDivergence::deviance(fam);
  LocalFitConfig cfg = cfg_for(0.3);
  PredictionErrorEstimate vacv =
      err_acv_vc(fit_vc_observations(vc, fam, cfg), fam, div, LooVariant::newton);
  PredictionErrorEstimate uacv = err_acv(fit_observations(uni, fam, cfg), fam, div);
  CHECK(vacv.value == doctest::Approx(uacv.value).epsilon(1e-6));
  PredictionErrorEstimate vdisp = err_criteria_vc(vc, fam, div, Criterion::acv, cfg);
  CHECK(vdisp.value == doctest::Approx(vacv.value).epsilon(1e-12));
}

TEST_CASE("exact vc cross validation agrees with the approximation on gaussian data") {
  VCDataset data = vc_gaussian(100, 13);
  ExponentialFamily fam(FamilyKind::gaussian);
  BregmanDivergence quad = BregmanDivergence::quadratic();
  LocalFitConfig cfg = cfg_for(0.35);
  PredictionErrorEstimate exact = err_criteria_vc(data, fam, quad, Criterion::cv_exact, cfg);
  PredictionErrorEstimate acv = err_criteria_vc(data, fam, quad, Criterion::acv, cfg);
  CHECK(exact.excluded == 0);
  CHECK(testutil::rel_err(acv.value, exact.value) < 1e-6);
}

TEST_CASE("vc bandwidth grid uses the u spacing statistic") {
  VCDataset data = vc_gaussian(100, 17);
  double h0 = spacing_statistic_vc(data);
  CHECK(h0 >= 5.0 * data.support_length() / 100);
  std::string rule;
  GridSpec spec;
  auto grid = bandwidth_grid_vc(data, spec, &rule);
  REQUIRE(grid.size() == 30);
  CHECK(grid.front() == doctest::Approx(3.0 * h0));
  CHECK(grid.back() == doctest::Approx(0.5 * data.support_length()));
  CHECK(rule.find("3.000000*h0") != std::string::npos);
}

TEST_CASE("vc bandwidth selection runs end to end on poisson data") {
  VCDataset data = vc_poisson(200, 19);
  ExponentialFamily fam(FamilyKind::poisson);
  BregmanDivergence div = BregmanDivergence::deviance(fam);
  LocalFitConfig base = cfg_for(0.0, 1e-8);
  GridSpec spec;
  spec.npoints = 8;
  BandwidthSelection sel =
      select_bandwidth_vc(data, fam, div, Criterion::ecv, base, spec, 2);
  REQUIRE(sel.selected_index >= 0);
  CHECK(sel.selected_h > 0.0);
  for (size_t i = 0; i < sel.grid.size(); ++i)
    CHECK(sel.criterion_values[sel.selected_index] <= sel.criterion_values[i] + 1e-12);
  // refit at the winner reproduces the stored criterion value
  VCFitResult fit = fit_vc_observations(data, fam, base.with_bandwidth(sel.selected_h));
  Kernel epan(KernelKind::epanechnikov);
  PredictionErrorEstimate est = err_ecv_vc(fit, fam, div, epan, data.support_length(),
                                           default_hat_constants(FamilyKind::poisson, 1));
  CHECK(est.value == doctest::Approx(sel.criterion_values[sel.selected_index]).epsilon(1e-9));
}

TEST_CASE("insufficient local data surfaces as a failure flag") {
  VCDataset data = vc_gaussian(30, 23);
  ExponentialFamily fam(FamilyKind::gaussian);
  VCFitResult res = fit_vc(data, fam, cfg_for(0.005), {0.5});
  CHECK(res.failed[0]);
  CHECK_FALSE(res.messages[0].empty());
}
