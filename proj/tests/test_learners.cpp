#include <catch2/catch.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "cfi/learners.hpp"
#include "cfi/tabular.hpp"

namespace {

cfi::Dataset make_ds(std::vector<cfi::ColumnSchema> schema,
                     std::vector<std::vector<double>> cols, std::vector<double> y,
                     bool binary = false) {
  return cfi::Dataset(std::move(schema), std::move(cols),
                      cfi::TargetColumn{"y", binary, std::move(y)});
}

}  // namespace

TEST_CASE("learner spec parsing") {
  REQUIRE(cfi::parse_learner_spec("linear").kind == cfi::LearnerKind::linear);
  REQUIRE(cfi::parse_learner_spec("logistic").kind == cfi::LearnerKind::logistic);
  const auto rf = cfi::parse_learner_spec("rf(trees=100, mtry=3, min_node=2)");
  REQUIRE(rf.kind == cfi::LearnerKind::random_forest);
  REQUIRE(rf.n_trees == 100);
  REQUIRE(rf.mtry == 3);
  REQUIRE(rf.min_node_size == 2);
  REQUIRE(cfi::parse_learner_spec("rf").n_trees == 500);
  REQUIRE_THROWS_AS(cfi::parse_learner_spec("svm"), cfi::DataError);
  REQUIRE_THROWS_AS(cfi::parse_learner_spec("rf(bogus=1)"), cfi::DataError);
}

TEST_CASE("linear learner recovers a noiseless line") {
  std::vector<double> x{-2, -1, 0, 1, 2, 5};
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 3.0 + 2.0 * x[i];
  const auto ds = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {x}, y);
  cfi::Rng rng(1u);
  const auto model = cfi::fit(cfi::parse_learner_spec("linear"), ds, rng);

  cfi::Dataset probe({{"x", cfi::ColumnKind::continuous, {}}}, {{1.0}});
  REQUIRE(model->predict(probe)[0] == Approx(5.0).margin(1e-8));
  const auto back = model->predict(ds.features_only());
  for (std::size_t i = 0; i < y.size(); ++i) REQUIRE(back[i] == Approx(y[i]).margin(1e-8));
}

TEST_CASE("duplicated constant feature leaves linear predictions unchanged") {
  cfi::Rng rng_data(3u);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(40), y(40);
  for (std::size_t i = 0; i < 40; ++i) {
    x[i] = normal(rng_data);
    y[i] = 1.5 * x[i] + 0.1 * normal(rng_data);
  }
  const auto base = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {x}, y);
  const auto padded = make_ds({{"x", cfi::ColumnKind::continuous, {}},
                               {"k", cfi::ColumnKind::continuous, {}},
                               {"k2", cfi::ColumnKind::continuous, {}}},
                              {x, std::vector<double>(40, 1.0), std::vector<double>(40, 1.0)}, y);
  cfi::Rng r1(1u), r2(1u);
  const auto m1 = cfi::fit(cfi::parse_learner_spec("linear"), base, r1);
  const auto m2 = cfi::fit(cfi::parse_learner_spec("linear"), padded, r2);
  const auto p1 = m1->predict(base.features_only());
  const auto p2 = m2->predict(padded.features_only());
  for (std::size_t i = 0; i < 40; ++i) REQUIRE(p1[i] == Approx(p2[i]).margin(1e-8));
}

TEST_CASE("constant regression target is fit without error") {
  const auto ds = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {{1.0, 2.0, 3.0}},
                          {7.0, 7.0, 7.0});
  cfi::Rng rng(1u);
  const auto model = cfi::fit(cfi::parse_learner_spec("linear"), ds, rng);
  for (double p : model->predict(ds.features_only())) REQUIRE(p == Approx(7.0).margin(1e-9));
  cfi::Rng rng2(1u);
  const auto forest = cfi::fit(cfi::parse_learner_spec("rf(trees=20)"), ds, rng2);
  for (double p : forest->predict(ds.features_only())) REQUIRE(p == Approx(7.0).margin(1e-12));
}

TEST_CASE("logistic learner, intercept-only balanced labels") {
  std::vector<double> x(20, 0.0);
  std::vector<double> y(20);
  for (std::size_t i = 0; i < 20; ++i) y[i] = static_cast<double>(i % 2);
  const auto ds = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {x}, y, true);
  cfi::Rng rng(1u);
  const auto model = cfi::fit(cfi::parse_learner_spec("logistic"), ds, rng);
  for (double p : model->predict(ds.features_only())) REQUIRE(p == Approx(0.5).margin(1e-6));
  REQUIRE(model->task() == cfi::Task::classification);
}

TEST_CASE("logistic learner rejects non-binary targets") {
  const auto ds = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {{1.0, 2.0}}, {0.3, 1.7});
  cfi::Rng rng(1u);
  REQUIRE_THROWS_AS(cfi::fit(cfi::parse_learner_spec("logistic"), ds, rng), cfi::DataError);
}

TEST_CASE("random forest learns the XOR parity structure") {
  cfi::Rng data_rng(11u);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 2000;
  std::vector<double> x1(n), x2(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x1[i] = normal(data_rng);
    x2[i] = normal(data_rng);
    y[i] = (x1[i] > 0) == (x2[i] > 0) ? 1.0 : 0.0;
  }
  auto full = make_ds({{"x1", cfi::ColumnKind::continuous, {}},
                       {"x2", cfi::ColumnKind::continuous, {}}},
                      {x1, x2}, y, true);
  cfi::Rng split_rng(2u);
  const auto [train, test] = cfi::split(full, 2.0 / 3.0, split_rng);
  cfi::Rng rng(3u);
  const auto model = cfi::fit(cfi::parse_learner_spec("rf(trees=500)"), train, rng);
  REQUIRE(model->task() == cfi::Task::classification);
  REQUIRE(cfi::evaluate(*model, test) >= 0.9);
}

TEST_CASE("random forest memorizes a noiseless surface in-bag") {
  cfi::Rng data_rng(13u);
  std::uniform_real_distribution<double> uniform(-2.0, 2.0);
  const std::size_t n = 600;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = uniform(data_rng);
    y[i] = std::sin(3.0 * x[i]) + 2.0 * x[i];
  }
  const auto ds = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {x}, y);
  cfi::Rng rng(4u);
  const auto model = cfi::fit(cfi::parse_learner_spec("rf(trees=200,min_node=1)"), ds, rng);
  REQUIRE(cfi::evaluate(*model, ds) >= 0.9);
}

TEST_CASE("random forest predictions are invariant to level relabeling") {
  cfi::Rng data_rng(17u);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 3);
  const std::size_t n = 400;
  std::vector<double> c(n), y(n);
  const double effect[] = {-1.0, 2.0, 0.5, -0.25};
  for (std::size_t i = 0; i < n; ++i) {
    const int l = pick(data_rng);
    c[i] = l;
    y[i] = effect[l] + 0.3 * normal(data_rng);
  }
  const auto ds = make_ds({{"c", cfi::ColumnKind::categorical, {"a", "b", "c", "d"}}}, {c}, y);

  // relabel by a permutation of the level order, remapping cells to match
  const std::size_t perm[] = {2, 0, 3, 1};  // new index of old level
  std::vector<double> c2(n);
  for (std::size_t i = 0; i < n; ++i) c2[i] = static_cast<double>(perm[static_cast<std::size_t>(c[i])]);
  const auto ds2 = make_ds({{"c", cfi::ColumnKind::categorical, {"b", "d", "a", "c"}}}, {c2}, y);

  cfi::Rng r1(5u), r2(5u);
  const auto m1 = cfi::fit(cfi::parse_learner_spec("rf(trees=50)"), ds, r1);
  const auto m2 = cfi::fit(cfi::parse_learner_spec("rf(trees=50)"), ds2, r2);
  const auto p1 = m1->predict(ds.features_only());
  const auto p2 = m2->predict(ds2.features_only());
  for (std::size_t i = 0; i < n; ++i) REQUIRE(p1[i] == Approx(p2[i]).margin(1e-12));
}

TEST_CASE("random forest is seed-deterministic") {
  cfi::Rng data_rng(19u);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 200;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = normal(data_rng);
    y[i] = x[i] * x[i] + 0.1 * normal(data_rng);
  }
  const auto ds = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {x}, y);
  cfi::Rng r1(6u), r2(6u), r3(7u);
  const auto p1 = cfi::fit(cfi::parse_learner_spec("rf(trees=30)"), ds, r1)->predict(ds.features_only());
  const auto p2 = cfi::fit(cfi::parse_learner_spec("rf(trees=30)"), ds, r2)->predict(ds.features_only());
  const auto p3 = cfi::fit(cfi::parse_learner_spec("rf(trees=30)"), ds, r3)->predict(ds.features_only());
  REQUIRE(p1 == p2);  // bitwise
  REQUIRE(p1 != p3);
}

TEST_CASE("predict rejects mismatched schemas") {
  const auto ds = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {{1.0, 2.0, 3.0}},
                          {1.0, 2.0, 3.0});
  cfi::Rng rng(1u);
  const auto model = cfi::fit(cfi::parse_learner_spec("linear"), ds, rng);
  cfi::Dataset other({{"z", cfi::ColumnKind::continuous, {}}}, {{1.0}});
  REQUIRE_THROWS_AS(model->predict(other), cfi::DataError);
}

TEST_CASE("instance losses") {
  const auto mse = cfi::instance_loss(cfi::LossKind::mse, {0.5}, {1.0});
  REQUIRE(mse[0] == Approx(0.25));

  const auto ll = cfi::instance_loss(cfi::LossKind::log_loss, {0.5, 0.5}, {0.0, 1.0});
  REQUIRE(ll[0] == Approx(std::log(2.0)).margin(1e-12));
  REQUIRE(ll[1] == Approx(std::log(2.0)).margin(1e-12));

  const auto clipped = cfi::instance_loss(cfi::LossKind::log_loss, {0.0}, {1.0});
  REQUIRE(std::isfinite(clipped[0]));
  REQUIRE(clipped[0] == Approx(-std::log(1e-12)));

  REQUIRE_THROWS_AS(cfi::instance_loss(cfi::LossKind::mse, {1.0}, {1.0, 2.0}), cfi::DataError);
}

TEST_CASE("evaluate: R2 and accuracy contracts") {
  std::vector<double> x{1, 2, 3, 4};
  std::vector<double> y{2, 4, 6, 8};
  const auto ds = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {x}, y);
  cfi::Rng rng(1u);
  const auto model = cfi::fit(cfi::parse_learner_spec("linear"), ds, rng);
  REQUIRE(cfi::evaluate(*model, ds) == Approx(1.0).margin(1e-12));

  // a model that predicts the mean scores R2 = 0
  const auto flat = make_ds({{"x", cfi::ColumnKind::continuous, {}}},
                            {{0.0, 0.0, 0.0, 0.0}}, y);
  cfi::Rng rng2(1u);
  const auto mean_model = cfi::fit(cfi::parse_learner_spec("linear"), flat, rng2);
  REQUIRE(cfi::evaluate(*mean_model, flat) == Approx(0.0).margin(1e-12));

  // random guessing on balanced binary labels sits near 0.5
  cfi::Rng data_rng(23u);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = 2000;
  std::vector<double> noise(n), labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    noise[i] = normal(data_rng);
    labels[i] = static_cast<double>(i % 2);
  }
  const auto coin = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {noise}, labels, true);
  cfi::Rng split_rng(9u);
  const auto [coin_train, coin_test] = cfi::split(coin, 2.0 / 3.0, split_rng);
  cfi::Rng rng3(2u);
  const auto guess = cfi::fit(cfi::parse_learner_spec("rf(trees=50)"), coin_train, rng3);
  REQUIRE(cfi::evaluate(*guess, coin_test) == Approx(0.5).margin(0.08));

  const auto constant_y = make_ds({{"x", cfi::ColumnKind::continuous, {}}}, {x},
                                  {3.0, 3.0, 3.0, 3.0});
  cfi::Rng rng4(1u);
  const auto cm = cfi::fit(cfi::parse_learner_spec("linear"), constant_y, rng4);
  REQUIRE_THROWS_AS(cfi::evaluate(*cm, constant_y), cfi::DataError);
}
