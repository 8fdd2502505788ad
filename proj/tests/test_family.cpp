#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "bregsmooth/family.hpp"
#include "test_util.hpp"

using namespace bregsmooth;

TEST_CASE("cumulant derivatives match finite differences of b") {
  for (auto kind : {FamilyKind::gaussian, FamilyKind::poisson, FamilyKind::bernoulli}) {
    ExponentialFamily fam(kind);
    auto b = [&](double t) { return fam.cumulant(t).b; };
    for (double theta : {-2.0, -0.3, 0.0, 0.7, 2.5}) {
      Cumulant c = fam.cumulant(theta);
      CHECK(std::abs(c.b1 - testutil::fd1(b, theta)) < 1e-7);
      CHECK(std::abs(c.b2 - testutil::fd2(b, theta)) < 1e-5);
      CHECK(c.b1 == fam.mean(theta));
      CHECK(c.b2 == fam.variance_function(theta));
    }
  }
}

TEST_CASE("closed forms at a few points") {
  ExponentialFamily g(FamilyKind::gaussian), p(FamilyKind::poisson), b(FamilyKind::bernoulli);
  CHECK(g.cumulant(1.5).b == doctest::Approx(1.125));  // theta^2/2
  CHECK(g.mean(1.5) == 1.5);
  CHECK(g.variance_function(-7.0) == 1.0);
  CHECK(p.cumulant(1.0).b == doctest::Approx(std::exp(1.0)));
  CHECK(p.mean(2.0) == doctest::Approx(std::exp(2.0)));
  CHECK(b.cumulant(0.0).b == doctest::Approx(std::log(2.0)));
  CHECK(b.mean(0.0) == doctest::Approx(0.5));
  CHECK(b.variance_function(0.0) == doctest::Approx(0.25));
}

TEST_CASE("canonical link inverts the mean") {
  for (auto kind : {FamilyKind::gaussian, FamilyKind::poisson, FamilyKind::bernoulli}) {
    ExponentialFamily fam(kind);
    for (double theta : {-3.0, -1.0, 0.2, 2.0}) {
      CHECK(fam.canonical_link(fam.mean(theta)) == doctest::Approx(theta).epsilon(1e-10));
    }
  }
  ExponentialFamily p(FamilyKind::poisson);
  CHECK_THROWS_AS(p.canonical_link(-1.0), std::domain_error);
  ExponentialFamily b(FamilyKind::bernoulli);
  CHECK_THROWS_AS(b.canonical_link(1.2), std::domain_error);
}

TEST_CASE("log likelihood drops the c term but keeps the shape") {
  ExponentialFamily p(FamilyKind::poisson);
  // maximized over theta at theta = log y
  double y = 4.0;
  double at_mode = p.log_likelihood(y, std::log(y));
  CHECK(p.log_likelihood(y, std::log(y) + 0.3) < at_mode);
  CHECK(p.log_likelihood(y, std::log(y) - 0.3) < at_mode);

  ExponentialFamily g(FamilyKind::gaussian);
  CHECK(g.log_likelihood(2.0, 2.0) - g.log_likelihood(2.0, 1.0) ==
        doctest::Approx(0.5));  // (y*t - t^2/2) difference
}

TEST_CASE("dispersion scales the gaussian likelihood") {
  ExponentialFamily g1(FamilyKind::gaussian, 1.0), g4(FamilyKind::gaussian, 4.0);
  CHECK(g4.dispersion() == 4.0);
  CHECK(g1.log_likelihood(2.0, 1.0) == doctest::Approx(4.0 * g4.log_likelihood(2.0, 1.0)));
  CHECK_THROWS_AS(ExponentialFamily(FamilyKind::gaussian, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(ExponentialFamily(FamilyKind::poisson, 2.0), std::invalid_argument);
}

TEST_CASE("support checks per family") {
  ExponentialFamily g(FamilyKind::gaussian), p(FamilyKind::poisson), b(FamilyKind::bernoulli);
  CHECK(g.in_support(-3.7));
  CHECK(p.in_support(0.0));
  CHECK(p.in_support(12.0));
  CHECK_FALSE(p.in_support(-1.0));
  CHECK_FALSE(p.in_support(2.5));  // counts only
  CHECK(b.in_support(0.0));
  CHECK(b.in_support(1.0));
  CHECK_FALSE(b.in_support(0.5));
  CHECK_THROWS_AS(b.check_response(0.5), std::domain_error);
  CHECK_NOTHROW(g.check_response(0.5));
}

TEST_CASE("theta clamp reports movement") {
  ExponentialFamily p(FamilyKind::poisson);
  auto [t1, moved1] = p.clamp_theta(5.0);
  CHECK(t1 == 5.0);
  CHECK_FALSE(moved1);
  auto [t2, moved2] = p.clamp_theta(100.0);
  CHECK(t2 == ExponentialFamily::theta_bound);
  CHECK(moved2);
  auto [t3, moved3] = p.clamp_theta(-100.0);
  CHECK(t3 == -ExponentialFamily::theta_bound);
  CHECK(moved3);
}

TEST_CASE("bernoulli cumulant is stable for extreme theta") {
  ExponentialFamily b(FamilyKind::bernoulli);
  Cumulant c = b.cumulant(30.0);
  CHECK(std::isfinite(c.b));
  CHECK(c.b1 == doctest::Approx(1.0));
  CHECK(c.b2 >= 0.0);
  Cumulant cm = b.cumulant(-30.0);
  CHECK(std::isfinite(cm.b));
  CHECK(cm.b1 == doctest::Approx(0.0));
}

TEST_CASE("family parse tokens") {
  CHECK(ExponentialFamily::parse("gaussian").kind() == FamilyKind::gaussian);
  CHECK(ExponentialFamily::parse("poisson").kind() == FamilyKind::poisson);
  CHECK(ExponentialFamily::parse("bernoulli").kind() == FamilyKind::bernoulli);
  CHECK_THROWS_AS(ExponentialFamily::parse("gamma"), std::invalid_argument);
}
