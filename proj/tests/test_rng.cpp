#include <doctest.h>

#include <cmath>
#include <vector>

#include "gcomp/errors.hpp"
#include "gcomp/rng.hpp"
#include "test_helpers.hpp"

using gcomp::RandomStream;

TEST_CASE("identical (seed, substream) reproduces identical sequences") {
  RandomStream a(42, 7);
  RandomStream b(42, 7);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  RandomStream c(42, 8);
  bool all_equal = true;
  RandomStream a2(42, 7);
  for (int i = 0; i < 64; ++i) {
    if (a2.next_u64() != c.next_u64()) all_equal = false;
  }
  CHECK_FALSE(all_equal);
}

TEST_CASE("child streams are reproducible and distinct") {
  RandomStream parent(9, 3);
  RandomStream c1 = parent.child(0);
  RandomStream c2 = parent.child(0);
  CHECK(c1.next_u64() == c2.next_u64());
  RandomStream c3 = parent.child(1);
  CHECK(parent.child(1).next_u64() == c3.next_u64());
  CHECK(parent.child(0).next_u64() != parent.child(1).next_u64());
}

TEST_CASE("uniform lies in [0,1) with mean near 1/2") {
  RandomStream rng(1, 0);
  const int n = 100000;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    total += u;
  }
  const double se = std::sqrt(1.0 / 12.0 / n);
  CHECK(std::abs(total / n - 0.5) < 4.0 * se);
}

TEST_CASE("normal has mean 0 and variance 1") {
  RandomStream rng(2, 0);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("gamma matches its first two moments") {
  RandomStream rng(3, 0);
  for (const double shape : {0.3, 1.0, 2.5, 17.0}) {
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double g = rng.gamma(shape);
      REQUIRE(g >= 0.0);
      sum += g;
      sum2 += g * g;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    // SE of the mean is sqrt(shape/n); variance gets a loose 10% band.
    CHECK(std::abs(mean - shape) < 5.0 * std::sqrt(shape / n));
    CHECK(std::abs(var - shape) < 0.1 * shape + 5.0 * std::sqrt(shape / n));
  }
  CHECK_THROWS_AS(rng.gamma(0.0), gcomp::DataError);
}

TEST_CASE("log-space gamma stays finite for tiny shapes") {
  RandomStream rng(4, 0);
  for (int i = 0; i < 10000; ++i) {
    const double lg = rng.log_gamma_variate(1e-4);
    REQUIRE(std::isfinite(lg));
  }
}

TEST_CASE("Beta(1,1) draws pass a KS test against uniform") {
  RandomStream rng(5, 0);
  const int n = 100000;
  std::vector<double> draws(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    draws[i] = gcomp::sample_beta(1.0, 1.0, rng);
    total += draws[i];
  }
  // 1% critical value for the two-sided KS statistic.
  const double critical = 1.628 / std::sqrt(double(n));
  CHECK(testutil::ks_statistic_uniform(draws) < critical);
  const double se = std::sqrt(1.0 / 12.0 / n);
  CHECK(std::abs(total / n - 0.5) < 3.0 * se);
}

TEST_CASE("Beta(2,2) sample variance matches 1/20") {
  RandomStream rng(6, 0);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double b = gcomp::sample_beta(2.0, 2.0, rng);
    sum += b;
    sum2 += b * b;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  // SE of the sample variance from the fourth central moment of Beta(2,2):
  // mu4 = (3 + excess kurtosis) sigma^4 with excess kurtosis -6/7.
  const double sigma2 = 0.05;
  const double mu4 = (3.0 - 6.0 / 7.0) * sigma2 * sigma2;
  const double se = std::sqrt((mu4 - sigma2 * sigma2) / n);
  CHECK(std::abs(var - sigma2) < 3.0 * se);
}

TEST_CASE("beta draws remain defined for extreme shapes") {
  RandomStream rng(7, 0);
  for (int i = 0; i < 20000; ++i) {
    const double b = gcomp::sample_beta(1.2e-4, 3.4e-4, rng);
    REQUIRE(std::isfinite(b));
    REQUIRE(b >= 0.0);
    REQUIRE(b <= 1.0);
  }
  CHECK_THROWS_AS(gcomp::sample_beta(0.0, 1.0, rng), gcomp::DataError);
}

TEST_CASE("dirichlet draws normalize and match their means") {
  RandomStream rng(8, 0);
  const std::vector<double> alpha{2.0, 3.0, 5.0};
  const int n = 100000;
  std::vector<double> mean(3, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto draw = gcomp::sample_dirichlet(alpha, rng);
    double total = 0.0;
    for (const double w : draw) total += w;
    REQUIRE(std::abs(total - 1.0) <= 1e-12);
    for (int j = 0; j < 3; ++j) mean[j] += draw[j];
  }
  const double a0 = 10.0;
  for (int j = 0; j < 3; ++j) {
    const double m = alpha[j] / a0;
    const double se = std::sqrt(m * (1.0 - m) / (a0 + 1.0) / n);
    CHECK(std::abs(mean[j] / n - m) < 4.0 * se);
  }
}

TEST_CASE("dirichlet handles tiny concentrations") {
  RandomStream rng(9, 0);
  const std::vector<double> alpha(6, 1.2e-4);
  for (int i = 0; i < 2000; ++i) {
    const auto draw = gcomp::sample_dirichlet(alpha, rng);
    double total = 0.0;
    for (const double w : draw) {
      REQUIRE(std::isfinite(w));
      total += w;
    }
    REQUIRE(std::abs(total - 1.0) <= 1e-12);
  }
}

TEST_CASE("uniform_below covers its range without bias") {
  RandomStream rng(10, 0);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.uniform_below(7);
    REQUIRE(v < 7);
    ++counts[static_cast<std::size_t>(v)];
  }
  for (const int c : counts) {
    CHECK(std::abs(c - n / 7.0) < 5.0 * std::sqrt(n * (1.0 / 7.0) * (6.0 / 7.0)));
  }
}
