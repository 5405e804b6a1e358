#include <catch2/catch.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "cfi/stats.hpp"

namespace {

// closed-form Student t CDF for 2 degrees of freedom
double t_cdf_df2(double t) { return 0.5 + t / (2.0 * std::sqrt(2.0) * std::sqrt(1.0 + t * t / 2.0)); }

// closed-form Student t CDF for 1 degree of freedom (Cauchy)
double t_cdf_df1(double t) { return 0.5 + std::atan(t) / M_PI; }

}  // namespace

TEST_CASE("incomplete beta matches closed forms") {
  // I_x(1, 1) is the uniform CDF
  for (double x : {0.0, 0.2, 0.5, 0.9, 1.0}) {
    REQUIRE(cfi::incomplete_beta(1.0, 1.0, x) == Approx(x).margin(1e-12));
  }
  // symmetry I_x(a, b) = 1 - I_{1-x}(b, a)
  REQUIRE(cfi::incomplete_beta(2.5, 1.5, 0.3) ==
          Approx(1.0 - cfi::incomplete_beta(1.5, 2.5, 0.7)).margin(1e-12));
  REQUIRE_THROWS_AS(cfi::incomplete_beta(1.0, 1.0, 1.5), cfi::NumericError);
  REQUIRE_THROWS_AS(cfi::incomplete_beta(-1.0, 1.0, 0.5), cfi::NumericError);
}

TEST_CASE("student t cdf agrees with df=1 and df=2 closed forms") {
  for (double t : {-4.0, -1.3, 0.0, 0.7, 2.5, 6.0}) {
    REQUIRE(cfi::student_t_cdf(t, 1.0) == Approx(t_cdf_df1(t)).margin(1e-10));
    REQUIRE(cfi::student_t_cdf(t, 2.0) == Approx(t_cdf_df2(t)).margin(1e-10));
  }
  // large nu approaches the standard normal: Phi(1.96) ~ 0.975
  REQUIRE(cfi::student_t_cdf(1.96, 1e6) == Approx(0.975).margin(1e-3));
}

TEST_CASE("student t quantile inverts the cdf") {
  for (double nu : {2.0, 5.0, 30.0}) {
    for (double p : {0.05, 0.5, 0.95, 0.999}) {
      const double q = cfi::student_t_quantile(p, nu);
      REQUIRE(cfi::student_t_cdf(q, nu) == Approx(p).margin(1e-9));
    }
  }
  REQUIRE_THROWS_AS(cfi::student_t_quantile(0.0, 2.0), cfi::NumericError);
}

TEST_CASE("paired t test on [1,2,3]") {
  const auto res = cfi::paired_t_test_one_sided({1.0, 2.0, 3.0});
  // mean 2, sd 1, se 1/sqrt(3)
  const double expected_t = 2.0 * std::sqrt(3.0);
  REQUIRE(res.t == Approx(expected_t).margin(1e-10));
  const double expected_p = 1.0 - t_cdf_df2(expected_t);
  REQUIRE(expected_p == Approx(0.0371).margin(5e-4));  // frozen from the df-2 closed form
  REQUIRE(res.p_one_sided == Approx(expected_p).margin(1e-9));
  REQUIRE(res.n == 3);
  // one-sided lower bound: mean - t_{0.95,2} * se
  const double t95 = cfi::student_t_quantile(0.95, 2.0);
  REQUIRE(res.ci_lower == Approx(2.0 - t95 / std::sqrt(3.0)).margin(1e-9));
}

TEST_CASE("paired t test degenerate and edge cases") {
  const auto zeros = cfi::paired_t_test_one_sided({0.0, 0.0, 0.0, 0.0});
  REQUIRE(zeros.p_one_sided == 1.0);
  REQUIRE(zeros.t == 0.0);

  const auto pos = cfi::paired_t_test_one_sided({2.0, 2.0, 2.0});
  REQUIRE(pos.p_one_sided == 0.0);
  REQUIRE(pos.ci_lower == Approx(2.0));

  const auto neg = cfi::paired_t_test_one_sided({-1.0, -1.0});
  REQUIRE(neg.p_one_sided == 1.0);

  REQUIRE_THROWS_AS(cfi::paired_t_test_one_sided({1.0}), cfi::DataError);
}

TEST_CASE("t test calibration under the null") {
  // 10 000 tests on iid N(0,1) samples: rejection rate at alpha 0.05 within
  // the 0.05 +- 0.007 Monte Carlo band
  cfi::Rng rng(20240817u);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n_tests = 10000;
  const int n = 30;
  int rejections = 0;
  for (int t = 0; t < n_tests; ++t) {
    std::vector<double> delta(n);
    for (auto& d : delta) d = normal(rng);
    if (cfi::paired_t_test_one_sided(delta).p_one_sided <= 0.05) ++rejections;
  }
  const double rate = static_cast<double>(rejections) / n_tests;
  REQUIRE(rate == Approx(0.05).margin(0.007));
}

TEST_CASE("holm adjustment") {
  // hand step-down: sorted (0.01, 0.03, 0.04) -> (0.03, 0.06, 0.06 via monotone max)
  const auto adj = cfi::holm_adjust({0.01, 0.04, 0.03});
  REQUIRE(adj[0] == Approx(0.03).margin(1e-12));
  REQUIRE(adj[1] == Approx(0.06).margin(1e-12));
  REQUIRE(adj[2] == Approx(0.06).margin(1e-12));

  const auto ones = cfi::holm_adjust({1.0, 1.0});
  REQUIRE(ones[0] == 1.0);
  REQUIRE(ones[1] == 1.0);

  const auto single = cfi::holm_adjust({0.2});
  REQUIRE(single[0] == Approx(0.2));

  REQUIRE(cfi::holm_adjust({}).empty());
  REQUIRE_THROWS_AS(cfi::holm_adjust({1.2}), cfi::DataError);
}

TEST_CASE("holm adjustment properties") {
  cfi::Rng rng(7u);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> p(8);
    for (auto& v : p) v = uniform(rng);
    const auto adj = cfi::holm_adjust(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      REQUIRE(adj[i] >= p[i]);  // adjusted never below raw
      REQUIRE(adj[i] <= 1.0);
    }
    // order preservation: smaller raw p never gets a larger adjusted p
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = 0; j < p.size(); ++j) {
        if (p[i] < p[j]) REQUIRE(adj[i] <= adj[j]);
      }
    }
  }
}
