#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "cfi/core.hpp"
#include "cfi/stats.hpp"
#include "cfi/tabular.hpp"

namespace cfi {

enum class LearnerKind { linear, logistic, random_forest };
enum class Task { regression, classification };
enum class LossKind { mse, log_loss };

struct LearnerSpec {
  LearnerKind kind = LearnerKind::linear;
  int n_trees = 500;
  int mtry = 0;           // 0: floor(sqrt(q)) classification, floor(q/3) regression, min 1
  int min_node_size = 0;  // 0: 5 regression, 1 classification

  std::string to_string() const {
    switch (kind) {
      case LearnerKind::linear: return "linear";
      case LearnerKind::logistic: return "logistic";
      default: break;
    }
    std::string s = "rf(trees=" + std::to_string(n_trees);
    if (mtry > 0) s += ",mtry=" + std::to_string(mtry);
    if (min_node_size > 0) s += ",min_node=" + std::to_string(min_node_size);
    return s + ")";
  }
};

// Accepts "linear", "logistic", "rf", and "rf(trees=500,mtry=3,min_node=5)".
inline LearnerSpec parse_learner_spec(const std::string& text) {
  LearnerSpec spec;
  std::string s = text;
  s.erase(std::remove_if(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); }),
          s.end());
  if (s == "linear") {
    spec.kind = LearnerKind::linear;
    return spec;
  }
  if (s == "logistic") {
    spec.kind = LearnerKind::logistic;
    return spec;
  }
  if (s.rfind("rf", 0) != 0 && s.rfind("random_forest", 0) != 0)
    throw DataError("unknown learner spec '" + text + "'");
  spec.kind = LearnerKind::random_forest;
  const auto open = s.find('(');
  if (open == std::string::npos) return spec;
  if (s.back() != ')') throw DataError("malformed learner spec '" + text + "'");
  std::string args = s.substr(open + 1, s.size() - open - 2);
  std::size_t pos = 0;
  while (pos < args.size()) {
    auto comma = args.find(',', pos);
    if (comma == std::string::npos) comma = args.size();
    const std::string kv = args.substr(pos, comma - pos);
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw DataError("malformed learner spec '" + text + "'");
    const std::string key = kv.substr(0, eq);
    const int value = std::stoi(kv.substr(eq + 1));
    if (key == "trees") {
      spec.n_trees = value;
    } else if (key == "mtry") {
      spec.mtry = value;
    } else if (key == "min_node") {
      spec.min_node_size = value;
    } else {
      throw DataError("unknown learner option '" + key + "'");
    }
    pos = comma + 1;
  }
  if (spec.n_trees < 1) throw DataError("learner spec: trees must be >= 1");
  return spec;
}

// Trained predictor. Classification models predict P(Y = 1).
class Model {
 public:
  virtual ~Model() = default;

  Task task() const { return task_; }
  const LearnerSpec& spec() const { return spec_; }

  std::vector<double> predict(const Dataset& features) const {
    if (features.schema_fingerprint() != fingerprint_)
      throw DataError("predict: dataset schema does not match the training schema");
    return predict_impl(features);
  }

 protected:
  Model(Task task, LearnerSpec spec, std::uint64_t fingerprint)
      : task_(task), spec_(spec), fingerprint_(fingerprint) {}
  virtual std::vector<double> predict_impl(const Dataset& features) const = 0;

 private:
  Task task_;
  LearnerSpec spec_;
  std::uint64_t fingerprint_;
};

using ModelPtr = std::shared_ptr<const Model>;

namespace detail {

inline Eigen::MatrixXd design_with_intercept(const Dataset& ds) {
  const EncodedMatrix enc = one_hot_encode(ds.features_only());
  Eigen::MatrixXd x(enc.values.rows(), enc.values.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(enc.values.cols()) = enc.values;
  return x;
}

class LinearModel final : public Model {
 public:
  LinearModel(LearnerSpec spec, const Dataset& train)
      : Model(Task::regression, spec, train.features_only().schema_fingerprint()) {
    const auto& y = train.target().values;
    const Eigen::MatrixXd x = design_with_intercept(train);
    const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    // minimal-norm least squares; rank deficiency (duplicated or constant
    // one-hot columns) resolves through the pseudoinverse
    coef_ = x.completeOrthogonalDecomposition().solve(yv);
  }

 protected:
  std::vector<double> predict_impl(const Dataset& features) const override {
    const Eigen::MatrixXd x = design_with_intercept(features);
    const Eigen::VectorXd pred = x * coef_;
    return {pred.data(), pred.data() + pred.size()};
  }

 private:
  Eigen::VectorXd coef_;
};

class LogisticModel final : public Model {
 public:
  LogisticModel(LearnerSpec spec, const Dataset& train)
      : Model(Task::classification, spec, train.features_only().schema_fingerprint()) {
    const auto& target = train.target();
    if (!target.binary) throw DataError("logistic learner requires a binary {0,1} target");
    const Eigen::MatrixXd x = design_with_intercept(train);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
        target.values.data(), static_cast<Eigen::Index>(target.values.size()));
    const auto n = x.rows();
    const auto q = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    coef_ = Eigen::VectorXd::Zero(q);
    // IRLS with a small ridge against separation
    for (int it = 0; it < 100; ++it) {
      const Eigen::VectorXd eta = x * coef_;
      const Eigen::VectorXd p = eta.unaryExpr([](double e) { return 1.0 / (1.0 + std::exp(-e)); });
      const Eigen::VectorXd grad = inv_n * x.transpose() * (y - p);
      if (grad.lpNorm<Eigen::Infinity>() <= 1e-8) break;
      const Eigen::VectorXd w = p.array() * (1.0 - p.array());
      Eigen::MatrixXd h = inv_n * x.transpose() * w.asDiagonal() * x;
      h.diagonal().array() += 1e-6;
      coef_ += h.ldlt().solve(grad);
    }
  }

 protected:
  std::vector<double> predict_impl(const Dataset& features) const override {
    const Eigen::MatrixXd x = design_with_intercept(features);
    const Eigen::VectorXd eta = x * coef_;
    std::vector<double> out(static_cast<std::size_t>(eta.size()));
    for (Eigen::Index i = 0; i < eta.size(); ++i) out[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-eta(i)));
    return out;
  }

 private:
  Eigen::VectorXd coef_;
};

struct RfNode {
  int feature = -1;                // -1: leaf
  bool categorical = false;
  double threshold = 0.0;          // continuous: go left if x <= threshold
  std::uint64_t left_levels = 0;   // categorical: bitmask of levels going left
  int left = -1;
  int right = -1;
  double value = 0.0;              // leaf: mean target / class-1 fraction
};

struct RfSplit {
  bool found = false;
  int feature = -1;
  bool categorical = false;
  double threshold = 0.0;
  std::uint64_t left_levels = 0;
  double score = std::numeric_limits<double>::infinity();  // lower is better
};

// CART regression/probability trees with bootstrap rows and mtry feature
// subsampling. Categorical splits order levels by the node's target mean
// (exact for squared error and Gini with binary targets); levels absent from
// the node inherit the node mean and sort deterministically by index.
class RandomForestModel final : public Model {
 public:
  RandomForestModel(LearnerSpec spec, Task task, const Dataset& train, Rng& rng)
      : Model(task, spec, train.features_only().schema_fingerprint()) {
    const std::size_t p = train.n_features();
    if (p == 0) throw DataError("random forest: no features");
    for (std::size_t j = 0; j < p; ++j) {
      if (train.schema(j).is_categorical() && train.schema(j).n_levels() > 64)
        throw DataError("random forest: categorical columns above 64 levels are not supported");
    }
    mtry_ = spec.mtry > 0 ? spec.mtry
                          : std::max(1, task == Task::classification
                                            ? static_cast<int>(std::sqrt(static_cast<double>(p)))
                                            : static_cast<int>(p) / 3);
    mtry_ = std::min<int>(mtry_, static_cast<int>(p));
    min_node_ = spec.min_node_size > 0 ? spec.min_node_size
                                       : (task == Task::classification ? 1 : 5);
    const auto& y = train.target().values;
    if (task == Task::classification && !train.target().binary)
      throw DataError("classification forest requires a binary {0,1} target");

    const std::uint64_t forest_seed = rng();
    trees_.resize(static_cast<std::size_t>(spec.n_trees));
    for (int t = 0; t < spec.n_trees; ++t) {
      Rng tree_rng = make_rng(derive_seed(forest_seed, static_cast<std::uint64_t>(t)));
      trees_[static_cast<std::size_t>(t)] = grow_tree(train, y, tree_rng);
    }
  }

 protected:
  std::vector<double> predict_impl(const Dataset& features) const override {
    const std::size_t n = features.n_rows();
    std::vector<double> out(n, 0.0);
    for (const auto& tree : trees_) {
      for (std::size_t i = 0; i < n; ++i) out[i] += predict_row(tree, features, i);
    }
    const double inv = 1.0 / static_cast<double>(trees_.size());
    for (double& v : out) v *= inv;
    return out;
  }

 private:
  std::vector<std::vector<RfNode>> trees_;
  int mtry_ = 1;
  int min_node_ = 5;

  static double predict_row(const std::vector<RfNode>& tree, const Dataset& ds, std::size_t row) {
    int node = 0;
    while (tree[static_cast<std::size_t>(node)].feature >= 0) {
      const auto& nd = tree[static_cast<std::size_t>(node)];
      const double x = ds.column(static_cast<std::size_t>(nd.feature))[row];
      const bool go_left = nd.categorical
                               ? ((nd.left_levels >> static_cast<std::uint64_t>(x)) & 1ULL) != 0
                               : x <= nd.threshold;
      node = go_left ? nd.left : nd.right;
    }
    return tree[static_cast<std::size_t>(node)].value;
  }

  std::vector<RfNode> grow_tree(const Dataset& train, const std::vector<double>& y,
                                Rng& rng) const {
    const std::size_t n = train.n_rows();
    std::vector<std::size_t> rows(n);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) rows[i] = pick(rng);

    std::vector<RfNode> tree;
    tree.reserve(2 * n / static_cast<std::size_t>(std::max(1, min_node_)) + 16);
    build_node(train, y, rows, 0, rows.size(), tree, rng);
    return tree;
  }

  // rows[begin, end) is the node's bootstrap sample; partitioned in place
  int build_node(const Dataset& train, const std::vector<double>& y, std::vector<std::size_t>& rows,
                 std::size_t begin, std::size_t end, std::vector<RfNode>& tree, Rng& rng) const {
    const std::size_t node_id = tree.size();
    tree.emplace_back();
    const std::size_t n_node = end - begin;

    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      sum += y[rows[i]];
      sum_sq += y[rows[i]] * y[rows[i]];
    }
    const double node_mean = sum / static_cast<double>(n_node);
    tree[node_id].value = node_mean;
    const bool pure = sum_sq - sum * node_mean <= 1e-12 * static_cast<double>(n_node);
    if (n_node <= static_cast<std::size_t>(min_node_) || pure) return static_cast<int>(node_id);

    const RfSplit split = best_split(train, y, rows, begin, end, node_mean, rng);
    if (!split.found) return static_cast<int>(node_id);

    const auto mid = static_cast<std::size_t>(
        std::partition(rows.begin() + static_cast<std::ptrdiff_t>(begin),
                       rows.begin() + static_cast<std::ptrdiff_t>(end),
                       [&](std::size_t r) {
                         const double x = train.column(static_cast<std::size_t>(split.feature))[r];
                         return split.categorical
                                    ? ((split.left_levels >> static_cast<std::uint64_t>(x)) & 1ULL) != 0
                                    : x <= split.threshold;
                       }) -
        rows.begin());
    if (mid == begin || mid == end) return static_cast<int>(node_id);  // degenerate partition

    tree[node_id].feature = split.feature;
    tree[node_id].categorical = split.categorical;
    tree[node_id].threshold = split.threshold;
    tree[node_id].left_levels = split.left_levels;
    const int left = build_node(train, y, rows, begin, mid, tree, rng);
    const int right = build_node(train, y, rows, mid, end, tree, rng);
    tree[node_id].left = left;
    tree[node_id].right = right;
    return static_cast<int>(node_id);
  }

  RfSplit best_split(const Dataset& train, const std::vector<double>& y,
                     const std::vector<std::size_t>& rows, std::size_t begin, std::size_t end,
                     double node_mean, Rng& rng) const {
    const std::size_t p = train.n_features();
    std::vector<std::size_t> candidates(p);
    std::iota(candidates.begin(), candidates.end(), std::size_t{0});
    // partial Fisher-Yates for the first mtry entries
    for (int k = 0; k < mtry_; ++k) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), p - 1);
      std::swap(candidates[static_cast<std::size_t>(k)], candidates[pick(rng)]);
    }

    RfSplit best;
    for (int k = 0; k < mtry_; ++k) {
      const std::size_t j = candidates[static_cast<std::size_t>(k)];
      if (train.schema(j).is_categorical()) {
        split_categorical(train, y, rows, begin, end, j, node_mean, best);
      } else {
        split_continuous(train, y, rows, begin, end, j, best);
      }
    }
    return best;
  }

  // minimizes SSE_left + SSE_right == -(S_L^2/n_L + S_R^2/n_R) + const;
  // for binary y this is equivalent to the weighted Gini criterion
  static void split_continuous(const Dataset& train, const std::vector<double>& y,
                               const std::vector<std::size_t>& rows, std::size_t begin,
                               std::size_t end, std::size_t j, RfSplit& best) {
    const auto& col = train.column(j);
    std::vector<std::pair<double, double>> xy;
    xy.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) xy.emplace_back(col[rows[i]], y[rows[i]]);
    std::sort(xy.begin(), xy.end());
    const std::size_t n = xy.size();
    double total = 0.0;
    for (const auto& [x, v] : xy) total += v;
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += xy[i].second;
      if (xy[i].first == xy[i + 1].first) continue;
      const double left_n = static_cast<double>(i + 1);
      const double right_sum = total - left_sum;
      const double right_n = static_cast<double>(n - i - 1);
      const double score = -(left_sum * left_sum / left_n + right_sum * right_sum / right_n);
      if (score < best.score) {
        best.found = true;
        best.feature = static_cast<int>(j);
        best.categorical = false;
        best.threshold = 0.5 * (xy[i].first + xy[i + 1].first);
        best.score = score;
      }
    }
  }

  static void split_categorical(const Dataset& train, const std::vector<double>& y,
                                const std::vector<std::size_t>& rows, std::size_t begin,
                                std::size_t end, std::size_t j, double node_mean, RfSplit& best) {
    const auto& col = train.column(j);
    const std::size_t n_levels = train.schema(j).n_levels();
    std::vector<double> level_sum(n_levels, 0.0), level_count(n_levels, 0.0);
    for (std::size_t i = begin; i < end; ++i) {
      const auto l = static_cast<std::size_t>(col[rows[i]]);
      level_sum[l] += y[rows[i]];
      level_count[l] += 1.0;
    }
    // target-mean ordering; absent levels take the node mean
    std::vector<std::pair<double, std::size_t>> ordered(n_levels);
    for (std::size_t l = 0; l < n_levels; ++l) {
      const double m = level_count[l] > 0.0 ? level_sum[l] / level_count[l] : node_mean;
      ordered[l] = {m, l};
    }
    std::sort(ordered.begin(), ordered.end());

    // prefix splits along the ordering; the criterion needs only sums/counts
    double total = 0.0, n_node = 0.0;
    for (std::size_t l = 0; l < n_levels; ++l) {
      total += level_sum[l];
      n_node += level_count[l];
    }
    std::uint64_t mask = 0;
    double left_sum = 0.0, left_n = 0.0;
    for (std::size_t idx = 0; idx + 1 < n_levels; ++idx) {
      const std::size_t l = ordered[idx].second;
      mask |= 1ULL << l;
      left_sum += level_sum[l];
      left_n += level_count[l];
      if (left_n == 0.0 || left_n == n_node) continue;
      const double right_sum = total - left_sum;
      const double right_n = n_node - left_n;
      const double score = -(left_sum * left_sum / left_n + right_sum * right_sum / right_n);
      if (score < best.score) {
        best.found = true;
        best.feature = static_cast<int>(j);
        best.categorical = true;
        best.left_levels = mask;
        best.score = score;
      }
    }
  }
};

}  // namespace detail

// Trains a predictor. Deterministic given the rng state.
inline ModelPtr fit(const LearnerSpec& spec, const Dataset& train, Rng& rng) {
  if (!train.has_target()) throw DataError("fit: training data has no target column");
  if (train.n_rows() == 0) throw DataError("fit: empty training data");
  switch (spec.kind) {
    case LearnerKind::linear:
      return std::make_shared<detail::LinearModel>(spec, train);
    case LearnerKind::logistic:
      return std::make_shared<detail::LogisticModel>(spec, train);
    case LearnerKind::random_forest: {
      const Task task = train.target().binary ? Task::classification : Task::regression;
      return std::make_shared<detail::RandomForestModel>(spec, task, train, rng);
    }
  }
  throw DataError("fit: unknown learner kind");
}

// Per-instance losses. log_loss clips probabilities to [1e-12, 1 - 1e-12].
inline std::vector<double> instance_loss(LossKind loss, const std::vector<double>& pred,
                                         const std::vector<double>& truth) {
  if (pred.size() != truth.size()) throw DataError("instance_loss: length mismatch");
  constexpr double eps = 1e-12;
  std::vector<double> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (loss == LossKind::mse) {
      const double d = pred[i] - truth[i];
      out[i] = d * d;
    } else {
      const double p = std::clamp(pred[i], eps, 1.0 - eps);
      out[i] = -(truth[i] * std::log(p) + (1.0 - truth[i]) * std::log1p(-p));
    }
  }
  return out;
}

inline LossKind default_loss(Task task) {
  return task == Task::classification ? LossKind::log_loss : LossKind::mse;
}

// R^2 for regression models, accuracy at threshold 0.5 for classification.
inline double evaluate(const Model& model, const Dataset& test) {
  const auto& target = test.target();
  const auto pred = model.predict(test.features_only());
  if (model.task() == Task::classification) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double label = pred[i] >= 0.5 ? 1.0 : 0.0;
      if (label == target.values[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(pred.size());
  }
  const double y_mean = mean(target.values);
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sse += (target.values[i] - pred[i]) * (target.values[i] - pred[i]);
    sst += (target.values[i] - y_mean) * (target.values[i] - y_mean);
  }
  if (sst == 0.0) throw DataError("evaluate: constant test target (SST = 0)");
  return 1.0 - sse / sst;
}

}  // namespace cfi
