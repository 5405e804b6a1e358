#include <catch2/catch.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "cfi/knockoffs.hpp"
#include "cfi/stats.hpp"
#include "cfi/tabular.hpp"

namespace {

cfi::Dataset continuous_dataset(const Eigen::MatrixXd& x) {
  std::vector<cfi::ColumnSchema> schema;
  std::vector<std::vector<double>> cols;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    schema.push_back({"X" + std::to_string(j + 1), cfi::ColumnKind::continuous, {}});
    cols.emplace_back(x.col(j).data(), x.col(j).data() + x.rows());
  }
  return cfi::Dataset(std::move(schema), std::move(cols));
}

// two exactly orthonormal, mean-zero columns with sample variance 1 (n = 4)
Eigen::MatrixXd orthonormal_pair() {
  Eigen::MatrixXd base(4, 2);
  base << 1, 1, -1, 1, 1, -1, -1, -1;
  return base * (std::sqrt(3.0) / 2.0);
}

Eigen::MatrixXd mvn_pair_block(std::size_t n, double rho, cfi::Rng& rng, std::size_t pairs = 1) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * pairs));
  const double c = std::sqrt(1.0 - rho * rho);
  for (std::size_t b = 0; b < pairs; ++b) {
    for (std::size_t i = 0; i < n; ++i) {
      const double z1 = normal(rng), z2 = normal(rng);
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * b)) = z1;
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * b + 1)) = rho * z1 + c * z2;
    }
  }
  return x;
}

Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& x) {
  const Eigen::RowVectorXd m = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - m;
  return (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

}  // namespace

TEST_CASE("gaussian params on exactly orthonormal data give s = 1") {
  const Eigen::MatrixXd base = orthonormal_pair();
  const auto params = cfi::estimate_gaussian_params(cfi::one_hot_encode(continuous_dataset(base)));
  REQUIRE(params.shrinkage == 0.0);
  REQUIRE(params.s(0) == Approx(1.0).margin(1e-10));
  REQUIRE(params.s(1) == Approx(1.0).margin(1e-10));
}

TEST_CASE("gaussian params with correlation 0.8 give s = 0.4") {
  // eigenvalues of the 2x2 correlation matrix are 1 +- rho
  const Eigen::MatrixXd base = orthonormal_pair();
  Eigen::MatrixXd x(4, 2);
  x.col(0) = base.col(0);
  x.col(1) = 0.8 * base.col(0) + 0.6 * base.col(1);
  const auto params = cfi::estimate_gaussian_params(cfi::one_hot_encode(continuous_dataset(x)));
  REQUIRE(params.sigma(0, 1) == Approx(0.8).margin(1e-10));
  REQUIRE(params.s(0) == Approx(0.4).margin(1e-10));
  REQUIRE(params.s(1) == Approx(0.4).margin(1e-10));
}

TEST_CASE("duplicate columns engage shrinkage") {
  cfi::Rng rng(5u);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(50, 2);
  for (int i = 0; i < 50; ++i) {
    x(i, 0) = normal(rng);
    x(i, 1) = x(i, 0);  // exact duplicate
  }
  const auto params = cfi::estimate_gaussian_params(cfi::one_hot_encode(continuous_dataset(x)));
  REQUIRE(params.shrinkage > 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(params.sigma, Eigen::EigenvaluesOnly);
  REQUIRE(es.eigenvalues().minCoeff() >= 1e-8);
}

TEST_CASE("gaussian params reject tiny samples") {
  Eigen::MatrixXd x(2, 1);
  x << 1.0, 2.0;
  REQUIRE_THROWS_AS(cfi::estimate_gaussian_params(cfi::one_hot_encode(continuous_dataset(x))),
                    cfi::DataError);
}

TEST_CASE("identity covariance with s = 1 yields fresh standard normals") {
  cfi::Rng data_rng(17u);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 20000;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    x(static_cast<Eigen::Index>(i), 0) = normal(data_rng);
    x(static_cast<Eigen::Index>(i), 1) = normal(data_rng);
  }
  cfi::GaussianKnockoffParams params;
  params.mu = Eigen::VectorXd::Zero(2);
  params.sigma = Eigen::MatrixXd::Identity(2, 2);
  params.s = Eigen::VectorXd::Ones(2);

  cfi::Rng rng(1u);
  const auto ds = continuous_dataset(x);
  const auto ko = cfi::sample_gaussian_knockoffs(ds, params, rng);
  const auto enc = cfi::one_hot_encode(ko.features);
  REQUIRE(enc.values.colwise().mean().cwiseAbs().maxCoeff() < 0.05);
  const Eigen::MatrixXd cov = sample_cov(enc.values);
  REQUIRE(std::fabs(cov(0, 0) - 1.0) < 0.05);
  REQUIRE(std::fabs(cov(0, 1)) < 0.05);
  // independence from the originals: cov(X, Xk) ~ 0
  const Eigen::MatrixXd cx = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd ck = enc.values.rowwise() - enc.values.colwise().mean();
  const Eigen::MatrixXd cross = (cx.transpose() * ck) / static_cast<double>(n - 1);
  REQUIRE(cross.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("zero s vector reproduces the originals exactly") {
  cfi::Rng data_rng(23u);
  const Eigen::MatrixXd x = mvn_pair_block(200, 0.5, data_rng);
  auto params = cfi::estimate_gaussian_params(cfi::one_hot_encode(continuous_dataset(x)));
  params.s.setZero();
  cfi::Rng rng(2u);
  const auto ko = cfi::sample_gaussian_knockoffs(continuous_dataset(x), params, rng);
  const auto enc = cfi::one_hot_encode(ko.features);
  REQUIRE((enc.values - x).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("gaussian knockoffs reproduce second moments on a big MVN sample") {
  cfi::Rng data_rng(31u);
  const Eigen::MatrixXd x = mvn_pair_block(50000, 0.8, data_rng);
  const auto ds = continuous_dataset(x);
  cfi::Rng rng(3u);
  const auto ko = cfi::sample_gaussian_knockoffs(ds, rng);
  const auto report = cfi::knockoff_diagnostics(ds, ko.features);
  REQUIRE(report.max_mean_diff < 0.02);
  REQUIRE(report.max_cov_diff < 0.02);
  REQUIRE(report.max_cross_cov_diff < 0.02);
}

TEST_CASE("sequential knockoffs, single continuous column") {
  cfi::Rng data_rng(41u);
  std::normal_distribution<double> normal(2.0, 3.0);
  std::vector<double> col(4000);
  for (auto& v : col) v = normal(data_rng);
  cfi::Dataset ds({{"x", cfi::ColumnKind::continuous, {}}}, {col});
  cfi::Rng rng(4u);
  const auto ko = cfi::sample_sequential_knockoffs(ds, {}, rng);
  REQUIRE(ko.kind == cfi::KnockoffKind::sequential);
  const auto& kcol = ko.features.column(0);
  REQUIRE(cfi::mean(kcol) == Approx(2.0).margin(0.2));
  REQUIRE(cfi::sample_sd(kcol) == Approx(3.0).margin(0.2));
}

TEST_CASE("sequential knockoffs, single categorical column") {
  cfi::Rng data_rng(43u);
  std::discrete_distribution<int> pick({0.6, 0.3, 0.1});
  std::vector<double> col(3000);
  for (auto& v : col) v = pick(data_rng);
  cfi::Dataset ds({{"c", cfi::ColumnKind::categorical, {"a", "b", "c"}}}, {col});
  cfi::Rng rng(5u);
  const auto ko = cfi::sample_sequential_knockoffs(ds, {}, rng);
  const auto report = cfi::knockoff_diagnostics(ds, ko.features);
  REQUIRE(report.max_level_tv < 0.05);
  for (double v : ko.features.column(0)) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 2.0);
  }
}

TEST_CASE("sequential knockoffs carry pairwise correlation on DAG data") {
  // X3 = beta X2 + noise with beta = 0.9: corr(Xk2, X3) should match corr(X2, X3)
  cfi::Rng data_rng(47u);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 5000;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 4);
  const double beta = 0.9;
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = normal(data_rng);
    x(r, 1) = normal(data_rng);
    x(r, 2) = beta * x(r, 1) + normal(data_rng);
    x(r, 3) = beta * x(r, 0) + normal(data_rng);
  }
  const auto ds = continuous_dataset(x);
  cfi::Rng rng(6u);
  const auto ko = cfi::sample_sequential_knockoffs(ds, {}, rng);

  auto corr = [](const std::vector<double>& a, const std::vector<double>& b) {
    const double ma = cfi::mean(a), mb = cfi::mean(b);
    double num = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num += (a[i] - ma) * (b[i] - mb);
      va += (a[i] - ma) * (a[i] - ma);
      vb += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(va * vb);
  };
  const double corr_orig = corr(ds.column(1), ds.column(2));
  const double corr_ko = corr(ko.features.column(1), ds.column(2));
  REQUIRE(corr_ko == Approx(corr_orig).margin(0.05));
}

TEST_CASE("sequential sampler honors a custom column order") {
  cfi::Rng data_rng(71u);
  const Eigen::MatrixXd x = mvn_pair_block(300, 0.5, data_rng);
  const auto ds = continuous_dataset(x);

  cfi::SequentialKnockoffConfig config;
  config.order = {1, 0};
  cfi::Rng rng_a(1u), rng_b(1u);
  const auto ko_a = cfi::sample_sequential_knockoffs(ds, config, rng_a);
  const auto ko_b = cfi::sample_sequential_knockoffs(ds, config, rng_b);
  REQUIRE(ko_a.features.column(0) == ko_b.features.column(0));
  REQUIRE(ko_a.features.schema_fingerprint() == ds.schema_fingerprint());

  config.order = {0, 0};  // not a permutation
  cfi::Rng rng_c(1u);
  REQUIRE_THROWS_AS(cfi::sample_sequential_knockoffs(ds, config, rng_c), cfi::DataError);
}

TEST_CASE("sequential sampler enforces the rare-level guard") {
  std::vector<double> c(100, 0.0);
  c[0] = 1.0;  // level "b" appears once
  std::vector<double> x(100);
  std::iota(x.begin(), x.end(), 0.0);
  cfi::Dataset ds({{"x", cfi::ColumnKind::continuous, {}},
                   {"c", cfi::ColumnKind::categorical, {"a", "b"}}},
                  {x, c});
  cfi::Rng rng(7u);
  REQUIRE_THROWS_WITH(cfi::sample_sequential_knockoffs(ds, {}, rng),
                      Catch::Contains("'c'") && Catch::Contains("occurs only"));
}

TEST_CASE("samplers are seed-deterministic and never read the target") {
  cfi::Rng data_rng(53u);
  const Eigen::MatrixXd x = mvn_pair_block(400, 0.5, data_rng);
  auto ds = continuous_dataset(x);

  cfi::TargetColumn y1{"y", false, std::vector<double>(400, 1.0)};
  cfi::TargetColumn y2{"y", false, std::vector<double>(400, -7.0)};
  const auto with_y1 = ds.with_target(y1);
  const auto with_y2 = ds.with_target(y2);

  cfi::Rng rng_a(99u), rng_b(99u);
  const auto ko_a = cfi::sample_sequential_knockoffs(with_y1, {}, rng_a);
  const auto ko_b = cfi::sample_sequential_knockoffs(with_y2, {}, rng_b);
  for (std::size_t j = 0; j < 2; ++j) {
    REQUIRE(ko_a.features.column(j) == ko_b.features.column(j));  // bitwise
  }

  cfi::Rng rng_c(99u);
  const auto ko_c = cfi::sample_sequential_knockoffs(with_y1, {}, rng_c);
  REQUIRE(ko_a.features.column(0) == ko_c.features.column(0));

  cfi::Rng g_a(123u), g_b(123u);
  const auto gko_a = cfi::sample_gaussian_knockoffs(with_y1.features_only(), g_a);
  const auto gko_b = cfi::sample_gaussian_knockoffs(with_y2.features_only(), g_b);
  REQUIRE(gko_a.features.column(0) == gko_b.features.column(0));
}

TEST_CASE("sequential output schema equals input schema") {
  cfi::Rng data_rng(59u);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(300), c(300);
  for (std::size_t i = 0; i < 300; ++i) {
    x[i] = normal(data_rng);
    c[i] = static_cast<double>(i % 3);
  }
  cfi::Dataset ds({{"x", cfi::ColumnKind::continuous, {}},
                   {"c", cfi::ColumnKind::categorical, {"p", "q", "r"}}},
                  {x, c});
  cfi::Rng rng(8u);
  const auto ko = cfi::sample_sequential_knockoffs(ds, {}, rng);
  REQUIRE(ko.features.schema_fingerprint() == ds.schema_fingerprint());
  for (double v : ko.features.column(1)) {
    REQUIRE((v == 0.0 || v == 1.0 || v == 2.0));
  }
}

TEST_CASE("diagnostics flag an independently permuted copy") {
  cfi::Rng data_rng(61u);
  const Eigen::MatrixXd x = mvn_pair_block(5000, 0.8, data_rng);
  const auto ds = continuous_dataset(x);

  // identical copy: all discrepancies zero
  const auto self_report = cfi::knockoff_diagnostics(ds, ds.features_only());
  REQUIRE(self_report.max_mean_diff == 0.0);
  REQUIRE(self_report.max_cov_diff == 0.0);
  REQUIRE(self_report.max_level_tv == 0.0);

  // independent permutation preserves marginals but destroys cross-covariance
  std::vector<std::size_t> perm(5000);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  cfi::Rng rng(9u);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<double>> cols(2);
  for (std::size_t j = 0; j < 2; ++j) {
    cols[j].resize(5000);
    for (std::size_t i = 0; i < 5000; ++i) cols[j][i] = ds.column(j)[perm[i]];
  }
  const cfi::Dataset permuted(ds.schema(), cols);
  const auto report = cfi::knockoff_diagnostics(ds, permuted);
  REQUIRE(report.max_cov_diff < 0.1);              // marginal structure survives
  REQUIRE(report.max_cross_cov_diff == Approx(0.8).margin(0.1));  // |Sigma_12| exposed
}

TEST_CASE("diagnostics reject mismatched schemas") {
  cfi::Dataset a({{"x", cfi::ColumnKind::continuous, {}}}, {{1.0, 2.0, 3.0}});
  cfi::Dataset b({{"z", cfi::ColumnKind::continuous, {}}}, {{1.0, 2.0, 3.0}});
  REQUIRE_THROWS_AS(cfi::knockoff_diagnostics(a, b), cfi::DataError);
}
