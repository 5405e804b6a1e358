#include <catch2/catch.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "cfi/evalmetrics.hpp"

TEST_CASE("rejection rate") {
  REQUIRE(cfi::rejection_rate(std::vector<double>(20, 0.01), 0.05) == 1.0);
  REQUIRE(cfi::rejection_rate(std::vector<double>(20, 1.0), 0.05) == 0.0);
  REQUIRE_THROWS_AS(cfi::rejection_rate({}, 0.05), cfi::DataError);
  REQUIRE_THROWS_AS(cfi::rejection_rate({1.5}, 0.05), cfi::DataError);

  cfi::Rng rng(1u);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> p(10000);
  for (auto& v : p) v = uniform(rng);
  REQUIRE(cfi::rejection_rate(p, 0.05) == Approx(0.05).margin(0.007));
}

TEST_CASE("top-k detection") {
  // 6 relevant strictly first
  std::vector<double> scores{12, 11, 10, 9, 8, 7, 6, 5, 4, 3, 2, 1};
  std::vector<bool> rel{true, true, true, true, true, true,
                        false, false, false, false, false, false};
  auto r = cfi::top_k_detection(scores, rel, 6);
  REQUIRE(r.sensitivity == 1.0);
  REQUIRE(r.one_minus_specificity == 0.0);

  // reversed ordering
  std::vector<double> reversed(scores.rbegin(), scores.rend());
  r = cfi::top_k_detection(reversed, rel, 6);
  REQUIRE(r.sensitivity == 0.0);
  REQUIRE(r.one_minus_specificity == 1.0);

  // 3 of 6 relevant in the top 6 forces symmetry
  std::vector<double> mixed{12, 11, 10, 3, 2, 1, 9, 8, 7, 4, 5, 6};
  r = cfi::top_k_detection(mixed, rel, 6);
  REQUIRE(r.sensitivity == Approx(0.5));
  REQUIRE(r.one_minus_specificity == Approx(0.5));

  REQUIRE_THROWS_AS(cfi::top_k_detection(scores, rel, 12), cfi::DataError);
}

TEST_CASE("top-k splits exact ties by feature index") {
  // all equal scores: the first k indices win
  std::vector<double> flat(4, 1.0);
  std::vector<bool> rel{false, true, false, true};
  const auto r = cfi::top_k_detection(flat, rel, 2);
  REQUIRE(r.in_top_k == std::vector<bool>{true, true, false, false});
}

TEST_CASE("rank AUC on the worked example") {
  // scores [3,1,2,0], flags [1,1,0,0]: pairs (3>2),(3>0),(1<2),(1>0) -> 0.75
  REQUIRE(cfi::auc_rank({3, 1, 2, 0}, {true, true, false, false}) == Approx(0.75));
  REQUIRE(cfi::auc_rank({5, 4, 1, 0}, {true, true, false, false}) == 1.0);
  REQUIRE(cfi::auc_rank({1, 1, 1, 1}, {true, true, false, false}) == Approx(0.5));
  REQUIRE_THROWS_AS(cfi::auc_rank({1, 2}, {true, true}), cfi::DataError);
}

TEST_CASE("rank AUC is invariant under monotone transforms") {
  cfi::Rng rng(2u);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> scores(10);
  for (auto& s : scores) s = normal(rng);
  std::vector<bool> rel(10);
  for (std::size_t i = 0; i < 10; ++i) rel[i] = i % 2 == 0;
  const double base = cfi::auc_rank(scores, rel);
  std::vector<double> warped(10);
  for (std::size_t i = 0; i < 10; ++i) warped[i] = std::exp(3.0 * scores[i]) + 5.0;
  REQUIRE(cfi::auc_rank(warped, rel) == Approx(base));
}

TEST_CASE("model validation discrepancy") {
  REQUIRE(cfi::validate_model(0.6, 2.0 / 3.0) == Approx(-0.0667).margin(5e-4));
  REQUIRE(cfi::validate_model(0.8, 0.8) == 0.0);
}

TEST_CASE("aggregation across replicates") {
  cfi::ReplicateOutcome a;
  a.replicate = 0;
  a.features = {"X1", "X2", "X3", "X4"};
  a.scores = {3, 1, 2, 0};
  a.relevant = {true, true, false, false};
  a.p_values = std::vector<double>{0.01, 0.2, 0.7, 0.9};
  a.model_value = 0.5;
  a.oracle_value = 0.6;

  cfi::ReplicateOutcome b = a;
  b.replicate = 1;
  b.scores = {5, 4, 1, 0};
  b.p_values = std::vector<double>{0.03, 0.04, 0.5, 0.2};
  b.model_value = 0.7;

  const auto summary = cfi::aggregate({a, b}, 0.05, 2);
  REQUIRE(summary.n_replicates == 2);
  // AUC 0.75 and 1.0 -> mean 0.875, sd ~ 0.1768
  REQUIRE(summary.auc_mean == Approx(0.875));
  REQUIRE(summary.auc_sd == Approx(std::sqrt(0.03125)).margin(1e-10));
  REQUIRE(summary.per_feature[0].mean_score == Approx(4.0));
  REQUIRE(summary.per_feature[0].rejection == Approx(1.0));
  REQUIRE(summary.per_feature[1].rejection == Approx(0.5));
  REQUIRE(summary.discrepancy.has_value());
  REQUIRE(summary.discrepancy->mean == Approx(0.0).margin(1e-12));
  REQUIRE(summary.discrepancy->sd == Approx(0.1414).margin(5e-4));

  // single replicate reports sd 0
  const auto single = cfi::aggregate({a}, 0.05, 2);
  REQUIRE(single.auc_sd == 0.0);
  REQUIRE(single.per_feature[0].sd_score == 0.0);

  cfi::ReplicateOutcome empty;
  REQUIRE_THROWS_AS(cfi::aggregate({empty}), cfi::DataError);
  REQUIRE_THROWS_AS(cfi::aggregate({}), cfi::DataError);
}

TEST_CASE("aggregate mean/sd worked example") {
  // two replicates with AUC 1.0 and 0.8 -> mean 0.9, sd ~ 0.1414
  cfi::ReplicateOutcome a;
  a.features = {"r", "i1", "i2", "i3", "i4", "i5"};
  a.relevant = {true, false, false, false, false, false};
  a.scores = {10, 1, 2, 3, 4, 5};  // above all five irrelevant: AUC 1.0
  cfi::ReplicateOutcome b = a;
  b.scores = {4.5, 1, 2, 3, 4, 5};  // above four of five: AUC 0.8
  const auto summary = cfi::aggregate({a, b}, 0.05, 1);
  REQUIRE(summary.auc_mean == Approx(0.9));
  REQUIRE(summary.auc_sd == Approx(0.1414).margin(5e-4));
}
