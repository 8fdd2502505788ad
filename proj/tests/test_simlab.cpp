#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bregsmooth/simlab.hpp"
#include "test_util.hpp"

using namespace bregsmooth;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("model names round trip") {
  for (auto m : {SimModel::uni_poisson_1, SimModel::uni_poisson_2, SimModel::uni_poisson_3,
                 SimModel::uni_bernoulli_1, SimModel::uni_bernoulli_2,
                 SimModel::uni_bernoulli_3, SimModel::vc_poisson_1, SimModel::vc_poisson_2,
                 SimModel::vc_bernoulli_1, SimModel::vc_bernoulli_2}) {
    CHECK(parse_sim_model(sim_model_name(m)) == m);
  }
  CHECK_THROWS_AS(parse_sim_model("uni_gamma_1"), std::invalid_argument);
  CHECK(is_vc_model(SimModel::vc_poisson_2));
  CHECK_FALSE(is_vc_model(SimModel::uni_bernoulli_3));
  CHECK(sim_family(SimModel::uni_poisson_1) == FamilyKind::poisson);
  CHECK(sim_family(SimModel::vc_bernoulli_2) == FamilyKind::bernoulli);
  CHECK(sim_dimension(SimModel::uni_poisson_1) == 1);
  CHECK(sim_dimension(SimModel::vc_poisson_1) == 2);
  CHECK(sim_dimension(SimModel::vc_poisson_2) == 3);
  CHECK(sim_dimension(SimModel::vc_bernoulli_2) == 3);
}

TEST_CASE("curve formulas at pinned points") {
  // two-bump design: 3.5[e^{-(4x-1)^2} + e^{-(4x-3)^2}] - 1.5
  double x = 0.25;  // first exponent vanishes
  double want = 3.5 * (1.0 + std::exp(-4.0)) - 1.5;
  CHECK(sim_theta(SimModel::uni_poisson_1, x) == doctest::Approx(want).epsilon(1e-12));
  CHECK(sim_theta(SimModel::uni_poisson_2, 0.5) == doctest::Approx(1.0));  // sin 0 + 1
  CHECK(sim_theta(SimModel::uni_poisson_3, 0.5) == doctest::Approx(2.0));
  CHECK(sim_theta(SimModel::uni_bernoulli_1, 0.25) ==
        doctest::Approx(7.0 * (1.0 + std::exp(-4.0)) - 5.5).epsilon(1e-12));
  CHECK(sim_theta(SimModel::uni_bernoulli_2, 0.25) == doctest::Approx(2.5));
  CHECK(sim_theta(SimModel::uni_bernoulli_3, 0.75) == doctest::Approx(1.0));

  CHECK(sim_coefficient(SimModel::vc_poisson_1, 0, 0.5) ==
        doctest::Approx(5.5 + 0.1 * std::exp(0.0)));
  CHECK(sim_coefficient(SimModel::vc_poisson_1, 1, 0.5) == doctest::Approx(0.2));
  CHECK(sim_coefficient(SimModel::vc_poisson_2, 2, 0.25) ==
        doctest::Approx(0.2 * 1.0));  // sin^2(pi/2)
  CHECK(sim_coefficient(SimModel::vc_bernoulli_1, 0, 0.5) ==
        doctest::Approx(1.3 * (1.0 - 1.5)));
  CHECK(sim_coefficient(SimModel::vc_bernoulli_2, 2, 0.5) ==
        doctest::Approx(0.9 * (2.0 * std::sin(kPi * 0.5) - 1.0)));
  CHECK_THROWS_AS(sim_coefficient(SimModel::uni_poisson_1, 0, 0.5), std::invalid_argument);
}

TEST_CASE("curvature formulas differentiate the curves") {
  for (auto m : {SimModel::uni_poisson_1, SimModel::uni_poisson_2, SimModel::uni_poisson_3,
                 SimModel::uni_bernoulli_1, SimModel::uni_bernoulli_2,
                 SimModel::uni_bernoulli_3}) {
    for (double x : {0.2, 0.5, 0.77}) {
      double fd = testutil::fd2([&](double t) { return sim_theta(m, t); }, x, 1e-4);
      CHECK(std::abs(sim_theta_second(m, x) - fd) < 1e-4 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("vc truth combines the coefficients linearly") {
  Eigen::VectorXd xrow(2);
  xrow << 1.0, 2.0;
  double want = sim_coefficient(SimModel::vc_poisson_1, 0, 0.3) +
                2.0 * sim_coefficient(SimModel::vc_poisson_1, 1, 0.3);
  CHECK(sim_theta_vc(SimModel::vc_poisson_1, 0.3, xrow) == doctest::Approx(want));
}

TEST_CASE("generation is deterministic and stream-separated") {
  SimDesign design;
  design.model = SimModel::uni_bernoulli_2;
  design.n = 200;
  design.seed = 42;
  SimData a = generate(design, 3);
  SimData b = generate(design, 3);
  CHECK(a.data.x == b.data.x);
  CHECK(a.data.y == b.data.y);
  CHECK(a.theta_truth == b.theta_truth);
  SimData c = generate(design, 4);
  CHECK(a.data.x != c.data.x);
  SimDesign other = design;
  other.seed = 43;
  SimData d = generate(other, 3);
  CHECK(a.data.x != d.data.x);
}

TEST_CASE("generated rows are sorted with matching truth") {
  SimDesign design;
  design.model = SimModel::uni_poisson_1;
  design.n = 300;
  design.seed = 9;
  SimData s = generate(design);
  REQUIRE(s.n() == 300);
  CHECK_FALSE(s.vc);
  for (int i = 1; i < s.n(); ++i) CHECK(s.data.x[i] >= s.data.x[i - 1]);
  for (int i = 0; i < s.n(); i += 71) {
    CHECK(s.theta_truth[i] == doctest::Approx(sim_theta(design.model, s.data.x[i])));
    CHECK(s.data.y[i] >= 0.0);
    CHECK(s.data.y[i] == std::floor(s.data.y[i]));
  }
  CHECK(s.data.support_lo == 0.0);
  CHECK(s.data.support_hi == 1.0);
}

TEST_CASE("binary designs emit zero-one responses") {
  SimDesign design;
  design.model = SimModel::uni_bernoulli_1;
  design.n = 400;
  design.seed = 1;
  SimData s = generate(design);
  for (double v : s.data.y) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("poisson responses average to the integrated mean") {
  SimDesign design;
  design.model = SimModel::uni_poisson_2;
  design.n = 100000;
  design.seed = 17;
  SimData s = generate(design);
  double mean = 0.0, var = 0.0;
  for (double v : s.data.y) mean += v;
  mean /= s.n();
  for (double v : s.data.y) var += (v - mean) * (v - mean);
  var /= s.n();
  double want = testutil::simpson(
      [](double x) { return std::exp(sim_theta(SimModel::uni_poisson_2, x)); }, 0.0, 1.0);
  CHECK(std::abs(mean - want) < 3.0 * std::sqrt(var / s.n()));
}

TEST_CASE("vc covariates carry the designed correlation") {
  SimDesign design;
  design.model = SimModel::vc_poisson_1;
  design.n = 10000;
  design.seed = 23;
  SimData s = generate(design);
  REQUIRE(s.vc);
  REQUIRE(s.vcdata.d() == 2);
  for (int i = 0; i < s.n(); ++i) CHECK(s.vcdata.X(i, 0) == 1.0);

  SimDesign d3 = design;
  d3.model = SimModel::vc_poisson_2;
  SimData s3 = generate(d3);
  REQUIRE(s3.vcdata.d() == 3);
  auto corr = [&](int a, int b) {
    double ma = s3.vcdata.X.col(a).mean(), mb = s3.vcdata.X.col(b).mean();
    double num = 0.0, va = 0.0, vb = 0.0;
    for (int i = 0; i < s3.n(); ++i) {
      double da = s3.vcdata.X(i, a) - ma, db = s3.vcdata.X(i, b) - mb;
      num += da * db;
      va += da * da;
      vb += db * db;
    }
    return num / std::sqrt(va * vb);
  };
  CHECK(std::abs(corr(1, 2) - 1.0 / std::sqrt(2.0)) < 0.05);

  SimDesign bd = design;
  bd.model = SimModel::vc_bernoulli_2;
  SimData sb = generate(bd);
  REQUIRE(sb.vcdata.d() == 3);
  auto corrb = [&](int a, int b) {
    double num = 0.0, va = 0.0, vb = 0.0;
    for (int i = 0; i < sb.n(); ++i) {
      double da = sb.vcdata.X(i, a), db = sb.vcdata.X(i, b);
      num += da * db;
      va += da * da;
      vb += db * db;
    }
    return num / std::sqrt(va * vb);
  };
  CHECK(std::abs(corrb(1, 2)) < 0.05);  // independent for the binary designs
}

TEST_CASE("average squared error basics") {
  CHECK(ase({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}) == 0.0);
  CHECK(ase({2.0, 3.0}, {1.0, 2.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(ase({1.0}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("study settings follow the family") {
  StudyConfig pc = study_config(SimModel::uni_poisson_1);
  CHECK(pc.fit.degree == 1);
  CHECK(pc.fit.algorithm == FitAlgorithm::newton_raphson);
  CHECK(pc.criterion == Criterion::ecv);
  CHECK(pc.grid.h_min_multiplier == doctest::Approx(3.0));
  CHECK(pc.fit.kernel.kind() == KernelKind::epanechnikov);

  StudyConfig b1 = study_config(SimModel::uni_bernoulli_1);
  CHECK(b1.fit.algorithm == FitAlgorithm::lower_bound);
  CHECK(b1.criterion == Criterion::hybrid_ecv);
  CHECK(b1.grid.h_min_multiplier == doctest::Approx(5.0));

  StudyConfig b2 = study_config(SimModel::uni_bernoulli_2);
  CHECK(b2.grid.lo == doctest::Approx(0.1));

  StudyConfig vb = study_config(SimModel::vc_bernoulli_1);
  CHECK(vb.fit.algorithm == FitAlgorithm::lower_bound);
  CHECK(vb.grid.lo == doctest::Approx(0.1));
}

TEST_CASE("asymptotic spec mirrors the design") {
  ModelSpec spec = asymptotic_spec(SimModel::uni_poisson_2, 400);
  CHECK(spec.family.kind() == FamilyKind::poisson);
  CHECK(spec.n == 400);
  CHECK(spec.theta(0.5) == doctest::Approx(sim_theta(SimModel::uni_poisson_2, 0.5)));
  CHECK(spec.theta_deriv(0.3) ==
        doctest::Approx(sim_theta_second(SimModel::uni_poisson_2, 0.3)));
  CHECK(spec.density(0.7) == 1.0);
  CHECK_THROWS_AS(asymptotic_spec(SimModel::vc_poisson_1, 400), std::invalid_argument);
}

TEST_CASE("replication summary bookkeeping on a tiny run") {
  SimDesign design;
  design.model = SimModel::uni_poisson_1;
  design.n = 150;
  design.seed = 5;
  ReplicateSummary sum = replicate(design, 3, 3);
  CHECK(sum.reps == 3);
  CHECK(sum.failures == 0);
  REQUIRE(sum.ase_values.size() == 3);
  REQUIRE(sum.selected_h.size() == 3);
  for (double h : sum.selected_h) CHECK(h > 0.0);
  for (double a : sum.ase_values) CHECK(a >= 0.0);
  CHECK(sum.h_ampec > 0.0);
  CHECK(sum.h_amise > 0.0);
  REQUIRE(sum.rel_err_ampec.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(sum.rel_err_ampec[i] ==
          doctest::Approx((sum.selected_h[i] - sum.h_ampec) / sum.h_ampec));
  }
  // quartile positions point at the sorted ase order
  double a25 = sum.ase_values[sum.idx25];
  double a50 = sum.ase_values[sum.idx50];
  double a75 = sum.ase_values[sum.idx75];
  CHECK(a25 <= a50);
  CHECK(a50 <= a75);
  // single replication: all three collapse onto it
  ReplicateSummary one = replicate(design, 1, 1);
  CHECK(one.idx25 == 0);
  CHECK(one.idx50 == 0);
  CHECK(one.idx75 == 0);
}

TEST_CASE("replication is reproducible and threading does not change it") {
  SimDesign design;
  design.model = SimModel::uni_poisson_1;
  design.n = 120;
  design.seed = 31;
  ReplicateSummary a = replicate(design, 4, 1);
  ReplicateSummary b = replicate(design, 4, 4);
  CHECK(a.selected_h == b.selected_h);
  CHECK(a.ase_values == b.ase_values);
}

TEST_CASE("published bandwidth table reproduces within tolerance") {
  auto rows = table1_rows(400);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    CAPTURE(r.family);
    CAPTURE(r.example);
    CHECK(std::abs(r.h_ampec - r.published_h_ampec) < 0.002);
    CHECK(std::abs(r.h_amise - r.published_h_amise) < 0.002);
  }
  // the published columns themselves
  CHECK(rows[0].published_h_ampec == doctest::Approx(0.070));
  CHECK(rows[0].published_h_amise == doctest::Approx(0.079));
  CHECK(rows[5].published_h_ampec == doctest::Approx(0.184));
  CHECK(rows[5].published_h_amise == doctest::Approx(0.188));
}

TEST_CASE("design validation") {
  SimDesign d;
  d.n = 10;
  CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  d.n = 50;
  CHECK_NOTHROW(d.validate());
}
