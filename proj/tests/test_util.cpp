#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bregsmooth/dataset.hpp"
#include "bregsmooth/rng.hpp"
#include "test_util.hpp"

using namespace bregsmooth;

TEST_CASE("counter rng is a pure function of seed and stream") {
  CounterRng a(42, 0), b(42, 0), c(42, 1), d(7, 0);
  for (int i = 0; i < 100; ++i) {
    auto va = a.next_u64();
    CHECK(va == b.next_u64());
  }
  // different stream or seed diverges immediately
  CounterRng a2(42, 0);
  CHECK(a2.next_u64() != c.next_u64());
  CounterRng a3(42, 0);
  CHECK(a3.next_u64() != d.next_u64());
}

TEST_CASE("rng draw index does not depend on call history") {
  // normal() consumes exactly two draws, so interleaving is reproducible
  CounterRng a(5), b(5);
  a.normal();
  b.uniform01();
  b.uniform01();
  CHECK(a.uniform01() == b.uniform01());
}

TEST_CASE("uniform01 stays in [0,1) and has the right mean") {
  CounterRng rng(1);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("normal moments") {
  CounterRng rng(9);
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = rng.normal();
    s1 += z;
    s2 += z * z;
  }
  CHECK(std::abs(s1 / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("poisson mean and variance, including the large-mean split") {
  CounterRng rng(3);
  for (double lambda : {2.5, 40.0, 1200.0}) {
    const int n = 20000;
    double s1 = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      double k = rng.poisson(lambda);
      s1 += k;
      s2 += k * k;
    }
    double mean = s1 / n;
    double var = s2 / n - mean * mean;
    CHECK(std::abs(mean - lambda) < 4.0 * std::sqrt(lambda / n) + 1e-9);
    CHECK(std::abs(var / lambda - 1.0) < 0.1);
  }
  CHECK_THROWS_AS(rng.poisson(-1.0), std::domain_error);
}

TEST_CASE("bernoulli frequencies and domain check") {
  CounterRng rng(11);
  int ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) ones += rng.bernoulli(0.3);
  CHECK(std::abs(ones / double(n) - 0.3) < 0.01);
  CHECK_THROWS_AS(rng.bernoulli(1.5), std::domain_error);
}

TEST_CASE("dataset sorts jointly by x and defaults support to the range") {
  Dataset d = Dataset::from_xy({0.9, 0.1, 0.5}, {3.0, 1.0, 2.0});
  CHECK(d.x == std::vector<double>{0.1, 0.5, 0.9});
  CHECK(d.y == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(d.support_lo == 0.1);
  CHECK(d.support_hi == 0.9);
  Dataset e = Dataset::from_xy({0.9, 0.1, 0.5}, {3.0, 1.0, 2.0}, std::make_pair(0.0, 1.0));
  CHECK(e.support_length() == 1.0);
}

TEST_CASE("dataset rejects mismatched and degenerate input") {
  CHECK_THROWS_AS(Dataset::from_xy({0.1, 0.2}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(Dataset::from_xy({}, {}), std::invalid_argument);
  // support must contain the data
  CHECK_THROWS_AS(Dataset::from_xy({0.1, 0.9, 0.5}, {1, 2, 3}, std::make_pair(0.2, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("check_family flags out-of-support responses") {
  Dataset d = Dataset::from_xy({0.1, 0.5, 0.9}, {1.0, -2.0, 3.0});
  CHECK_NOTHROW(d.check_family(ExponentialFamily(FamilyKind::gaussian)));
  CHECK_THROWS_AS(d.check_family(ExponentialFamily(FamilyKind::poisson)), std::domain_error);
  Dataset b = Dataset::from_xy({0.1, 0.5, 0.9}, {0.0, 1.0, 0.5});
  CHECK_THROWS_AS(b.check_family(ExponentialFamily(FamilyKind::bernoulli)), std::domain_error);
}

TEST_CASE("vc dataset keeps rows aligned under the sort") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 10, 1, 20, 1, 30;
  VCDataset d = VCDataset::from_parts({0.9, 0.1, 0.5}, X, {9.0, 1.0, 5.0});
  CHECK(d.u == std::vector<double>{0.1, 0.5, 0.9});
  CHECK(d.X(0, 1) == 20.0);
  CHECK(d.X(2, 1) == 10.0);
  CHECK(d.y == std::vector<double>{1.0, 5.0, 9.0});
}

TEST_CASE("pl dataset accepts an empty parametric part") {
  Eigen::MatrixXd Z(4, 0);
  PLDataset d = PLDataset::from_parts({0.4, 0.2, 0.8, 0.6}, Z, {1, 2, 3, 4});
  CHECK(d.q() == 0);
  CHECK(d.n() == 4);
  // but needs more rows than columns plus one
  Eigen::MatrixXd Z2(3, 2);
  Z2.setRandom();
  CHECK_THROWS_AS(PLDataset::from_parts({0.1, 0.2, 0.3}, Z2, {1, 2, 3}),
                  std::invalid_argument);
}

TEST_CASE("csv readers skip headers and comment lines") {
  auto dir = testutil::scratch_dir();
  auto p = dir / "uni.csv";
  testutil::spit(p, "# a comment\nx,y\n0.5,2.0\n0.1,1.0\n# mid comment\n0.9,3.0\n");
  Dataset d = read_dataset_csv(p.string());
  CHECK(d.n() == 3);
  CHECK(d.x[0] == 0.1);
  CHECK(d.y[2] == 3.0);

  auto pv = dir / "vc.csv";
  testutil::spit(pv, "u,x1,x2,y\n0.5,1,2,7\n0.1,1,3,8\n0.9,1.0,4.5,9\n");
  VCDataset v = read_vc_csv(pv.string());
  CHECK(v.d() == 2);
  CHECK(v.u[0] == 0.1);
  CHECK(v.X(0, 1) == 3.0);

  auto pp = dir / "pl.csv";
  testutil::spit(pp, "u,z1,y\n0.5,1,7\n0.1,2,8\n0.9,3,9\n0.3,4,10\n");
  PLDataset pl = read_pl_csv(pp.string());
  CHECK(pl.q() == 1);
  CHECK(pl.u[0] == 0.1);
}

TEST_CASE("csv reader rejects malformed rows") {
  auto p = testutil::scratch_dir() / "bad.csv";
  testutil::spit(p, "x,y\n0.5,2.0\n0.1\n");
  CHECK_THROWS_AS(read_dataset_csv(p.string()), std::invalid_argument);
  CHECK_THROWS(read_dataset_csv((testutil::scratch_dir() / "missing.csv").string()));
}
