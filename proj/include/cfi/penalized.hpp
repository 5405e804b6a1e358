#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "cfi/core.hpp"

namespace cfi {

struct PenalizedConfig {
  double alpha = 0.5;             // l1/l2 mixing weight
  int n_lambda = 20;              // log grid size between lambda_max and ratio*lambda_max
  double lambda_min_ratio = 1e-3;
  int n_folds = 5;                // cross-validation folds for lambda selection
  double sd_floor = 1e-6;         // floor on the residual sd of linear fits
  int min_level_count = 5;        // required occurrences per multinomial class
  double tol = 1e-6;              // KKT tolerance, coordinate descent
  int max_sweeps = 10000;
  double tol_multinomial = 1e-7;  // absolute objective-change tolerance
  int max_iter_multinomial = 500;
};

struct ElasticNetFit {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;  // original scale
  double alpha = 0.5;
  double lambda = 0.0;
  double residual_sd = 0.0;

  double predict_mean(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (row.size() != coefficients.size())
      throw DataError("elastic net predict: row width mismatch");
    return intercept + row.dot(coefficients.transpose());
  }
};

struct MultinomialFit {
  std::size_t n_classes = 0;
  Eigen::VectorXd intercepts;  // one per class, mean-centered
  Eigen::MatrixXd coef;        // classes x q, original scale
  double alpha = 0.5;
  double lambda = 0.0;

  Eigen::VectorXd predict_proba(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
    if (row.size() != coef.cols()) throw DataError("multinomial predict: row width mismatch");
    Eigen::VectorXd scores = intercepts + coef * row.transpose();
    const double m = scores.maxCoeff();
    Eigen::VectorXd p = (scores.array() - m).exp();
    p /= p.sum();
    return p;
  }
};

struct GaussianPredictive {
  double mu = 0.0;
  double sigma = 0.0;
};

namespace detail {

struct StandardizedDesign {
  Eigen::MatrixXd z;           // standardized columns (zero-variance columns zeroed)
  Eigen::VectorXd center;
  Eigen::VectorXd scale;       // 1 for zero-variance columns
  std::vector<bool> active;    // false for zero-variance columns
};

inline StandardizedDesign standardize_design(const Eigen::MatrixXd& x) {
  const auto n = x.rows();
  const auto q = x.cols();
  StandardizedDesign d{Eigen::MatrixXd(n, q), Eigen::VectorXd(q), Eigen::VectorXd::Ones(q),
                       std::vector<bool>(static_cast<std::size_t>(q), true)};
  for (Eigen::Index j = 0; j < q; ++j) {
    const double c = x.col(j).mean();
    d.center(j) = c;
    const double var = (x.col(j).array() - c).square().mean();  // population variance
    if (var > 0.0) {
      d.scale(j) = std::sqrt(var);
      d.z.col(j) = (x.col(j).array() - c) / d.scale(j);
    } else {
      d.active[static_cast<std::size_t>(j)] = false;
      d.z.col(j).setZero();
    }
  }
  return d;
}

inline double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Cyclic coordinate descent on standardized columns (unit population variance),
// centered response held in the residual. Minimizes
// (1/2n)||y - Z b||^2 + lambda (a |b|_1 + (1-a)/2 |b|_2^2). Warm-startable.
inline void coordinate_descent(const Eigen::MatrixXd& z, const std::vector<bool>& active,
                               double alpha, double lambda, Eigen::VectorXd& beta,
                               Eigen::VectorXd& residual, const PenalizedConfig& cfg) {
  const auto n = z.rows();
  const auto q = z.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double l1 = lambda * alpha;
  const double l2 = lambda * (1.0 - alpha);
  for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < q; ++j) {
      if (!active[static_cast<std::size_t>(j)]) continue;
      const double old = beta(j);
      const double rho = inv_n * z.col(j).dot(residual) + old;  // unit-variance columns
      const double updated = soft_threshold(rho, l1) / (1.0 + l2);
      if (updated != old) {
        residual -= (updated - old) * z.col(j);
        beta(j) = updated;
        max_delta = std::max(max_delta, std::fabs(updated - old));
      }
    }
    if (max_delta < 1e-4 * cfg.tol) break;
    if (max_delta < cfg.tol) {
      // subgradient optimality check
      double violation = 0.0;
      for (Eigen::Index j = 0; j < q; ++j) {
        if (!active[static_cast<std::size_t>(j)]) continue;
        const double g = inv_n * z.col(j).dot(residual);
        if (beta(j) != 0.0) {
          violation = std::max(
              violation, std::fabs(g - l2 * beta(j) - l1 * (beta(j) > 0.0 ? 1.0 : -1.0)));
        } else {
          violation = std::max(violation, std::max(0.0, std::fabs(g) - l1));
        }
      }
      if (violation <= cfg.tol) break;
    }
  }
}

inline void check_finite(const Eigen::MatrixXd& x, const char* what) {
  if (!x.allFinite()) throw NumericError(std::string(what) + ": non-finite values");
}

}  // namespace detail

// Elastic-net linear regression by cyclic coordinate descent. Columns are
// standardized internally; coefficients are reported on the original scale and
// the intercept is unpenalized. residual_sd is floored at cfg.sd_floor so the
// fit always defines a proper sampling distribution.
inline ElasticNetFit fit_elastic_net(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     double alpha, double lambda,
                                     const PenalizedConfig& cfg = {}) {
  if (x.rows() != y.size()) throw DataError("fit_elastic_net: X/y length mismatch");
  if (x.rows() < 2) throw DataError("fit_elastic_net: need at least 2 rows");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DataError("fit_elastic_net: alpha outside [0, 1]");
  if (!(lambda >= 0.0)) throw DataError("fit_elastic_net: negative lambda");
  detail::check_finite(x, "fit_elastic_net");
  detail::check_finite(y, "fit_elastic_net");

  const auto d = detail::standardize_design(x);
  const double y_mean = y.mean();
  const Eigen::VectorXd yc = y.array() - y_mean;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  Eigen::VectorXd residual = yc;
  detail::coordinate_descent(d.z, d.active, alpha, lambda, beta, residual, cfg);

  ElasticNetFit fit;
  fit.alpha = alpha;
  fit.lambda = lambda;
  fit.coefficients = Eigen::VectorXd::Zero(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (d.active[static_cast<std::size_t>(j)]) fit.coefficients(j) = beta(j) / d.scale(j);
  }
  fit.intercept = y_mean - fit.coefficients.dot(d.center);
  const double rss = residual.squaredNorm();
  fit.residual_sd = std::max(std::sqrt(rss / static_cast<double>(x.rows())), cfg.sd_floor);
  return fit;
}

namespace detail {

inline std::vector<int> cv_fold_assignment(std::size_t n, int n_folds, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<int> fold(n);
  for (std::size_t i = 0; i < n; ++i) fold[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
  return fold;
}

// classes dealt round-robin to folds after a within-class shuffle
inline std::vector<int> stratified_fold_assignment(const std::vector<int>& labels,
                                                   std::size_t n_classes, int n_folds, Rng& rng) {
  std::vector<int> fold(labels.size(), 0);
  for (std::size_t k = 0; k < n_classes; ++k) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == static_cast<int>(k)) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < members.size(); ++i) {
      fold[members[i]] = static_cast<int>(i % static_cast<std::size_t>(n_folds));
    }
  }
  return fold;
}

inline std::vector<double> lambda_grid(double lambda_max, const PenalizedConfig& cfg) {
  std::vector<double> grid;
  if (!(lambda_max > 0.0)) return grid;
  const double lo = std::log(lambda_max * cfg.lambda_min_ratio);
  const double hi = std::log(lambda_max);
  for (int k = 0; k < cfg.n_lambda; ++k) {
    const double t = cfg.n_lambda == 1
                         ? 0.0
                         : static_cast<double>(k) / static_cast<double>(cfg.n_lambda - 1);
    grid.push_back(std::exp(hi + t * (lo - hi)));
  }
  return grid;
}

}  // namespace detail

// Lambda chosen by k-fold cross-validated squared-error deviance over a log
// grid from lambda_max down to lambda_min_ratio * lambda_max, warm-started.
// Ties resolve toward the stronger penalty.
inline ElasticNetFit fit_elastic_net_cv(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        double alpha, Rng& rng,
                                        const PenalizedConfig& cfg = {}) {
  if (x.rows() != y.size()) throw DataError("fit_elastic_net_cv: X/y length mismatch");
  if (x.rows() < 2) throw DataError("fit_elastic_net_cv: need at least 2 rows");
  detail::check_finite(x, "fit_elastic_net_cv");
  detail::check_finite(y, "fit_elastic_net_cv");
  const auto n = x.rows();

  const auto d = detail::standardize_design(x);
  const Eigen::VectorXd yc = y.array() - y.mean();
  double lambda_max = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (d.active[static_cast<std::size_t>(j)])
      lambda_max = std::max(lambda_max, std::fabs(d.z.col(j).dot(yc)) / static_cast<double>(n));
  }
  lambda_max /= std::max(alpha, 1e-3);
  if (!(lambda_max > 0.0)) {
    // response uncorrelated with every usable column: intercept-only fit
    return fit_elastic_net(x, y, alpha, 1.0, cfg);
  }
  const auto grid = detail::lambda_grid(lambda_max, cfg);

  const int n_folds = std::min<int>(cfg.n_folds, static_cast<int>(n));
  std::vector<double> cv_error(grid.size(), 0.0);
  if (n_folds >= 2) {
    const auto fold = detail::cv_fold_assignment(static_cast<std::size_t>(n), n_folds, rng);
    for (int f = 0; f < n_folds; ++f) {
      std::vector<Eigen::Index> tr, te;
      for (Eigen::Index i = 0; i < n; ++i) {
        (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
      }
      if (tr.size() < 2 || te.empty()) continue;
      Eigen::MatrixXd xtr(tr.size(), x.cols());
      Eigen::VectorXd ytr(tr.size());
      for (std::size_t i = 0; i < tr.size(); ++i) {
        xtr.row(static_cast<Eigen::Index>(i)) = x.row(tr[i]);
        ytr(static_cast<Eigen::Index>(i)) = y(tr[i]);
      }
      const auto dtr = detail::standardize_design(xtr);
      const Eigen::VectorXd ytr_c = ytr.array() - ytr.mean();
      Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
      Eigen::VectorXd residual = ytr_c;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        detail::coordinate_descent(dtr.z, dtr.active, alpha, grid[g], beta, residual, cfg);
        // held-out squared error on the original scale
        double err = 0.0;
        for (Eigen::Index i : te) {
          double pred = ytr.mean();
          for (Eigen::Index j = 0; j < x.cols(); ++j) {
            if (dtr.active[static_cast<std::size_t>(j)] && beta(j) != 0.0)
              pred += beta(j) * (x(i, j) - dtr.center(j)) / dtr.scale(j);
          }
          err += (y(i) - pred) * (y(i) - pred);
        }
        cv_error[g] += err;
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (cv_error[g] < cv_error[best]) best = g;
  }
  return fit_elastic_net(x, y, alpha, grid[best], cfg);
}

namespace detail {

struct MultinomialState {
  Eigen::VectorXd intercepts;  // c
  Eigen::MatrixXd coef;        // c x q, standardized scale
};

inline double multinomial_objective(const Eigen::MatrixXd& z, const std::vector<int>& labels,
                                    const MultinomialState& s, double alpha, double lambda) {
  const auto n = z.rows();
  Eigen::MatrixXd scores = (z * s.coef.transpose()).rowwise() + s.intercepts.transpose();
  double nll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = scores.row(i).maxCoeff();
    const double lse = m + std::log((scores.row(i).array() - m).exp().sum());
    nll += lse - scores(i, labels[static_cast<std::size_t>(i)]);
  }
  nll /= static_cast<double>(n);
  const double l1 = s.coef.array().abs().sum();
  const double l2 = s.coef.array().square().sum();
  return nll + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2);
}

// softmax probabilities for each row
inline Eigen::MatrixXd multinomial_proba(const Eigen::MatrixXd& z, const MultinomialState& s) {
  Eigen::MatrixXd scores = (z * s.coef.transpose()).rowwise() + s.intercepts.transpose();
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const double m = scores.row(i).maxCoeff();
    scores.row(i) = (scores.row(i).array() - m).exp();
    scores.row(i) /= scores.row(i).sum();
  }
  return scores;
}

inline double spectral_norm_sq(const Eigen::MatrixXd& z) {
  // power iteration on Z^T Z; a loose upper estimate is fine for step sizing
  if (z.cols() == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Ones(z.cols()).normalized();
  double norm = 0.0;
  for (int it = 0; it < 50; ++it) {
    Eigen::VectorXd w = z.transpose() * (z * v);
    norm = w.norm();
    if (norm <= 0.0) return 0.0;
    v = w / norm;
  }
  return norm;
}

// FISTA with adaptive restart on the smooth multinomial likelihood plus ridge,
// proximal step for the l1 part. Symmetric (all-class) parameterization;
// intercepts unpenalized.
inline MultinomialState multinomial_prox_gradient(const Eigen::MatrixXd& z,
                                                  const std::vector<int>& labels,
                                                  std::size_t n_classes, double alpha,
                                                  double lambda, MultinomialState state,
                                                  const PenalizedConfig& cfg) {
  const auto n = z.rows();
  const auto q = z.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  // Lipschitz bound for the softmax gradient: 1/2 * ||[1 Z]||_2^2 / n, plus ridge
  Eigen::MatrixXd z1(n, q + 1);
  z1.col(0).setOnes();
  if (q > 0) z1.rightCols(q) = z;
  const double lips = 0.5 * spectral_norm_sq(z1) * inv_n + lambda * (1.0 - alpha) + 1e-12;
  const double step = 1.0 / lips;
  const double l1_thresh = step * lambda * alpha;
  const double ridge_shrink = 1.0 / (1.0 + step * lambda * (1.0 - alpha));

  Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(n_classes));
  for (Eigen::Index i = 0; i < n; ++i) onehot(i, labels[static_cast<std::size_t>(i)]) = 1.0;

  auto prox_step = [&](const MultinomialState& at) {
    const Eigen::MatrixXd p = multinomial_proba(z, at);
    const Eigen::MatrixXd resid = p - onehot;  // n x c
    MultinomialState next;
    next.intercepts = at.intercepts - step * inv_n * resid.colwise().sum().transpose();
    next.coef = at.coef - step * inv_n * resid.transpose() * z;
    for (Eigen::Index r = 0; r < next.coef.rows(); ++r) {
      for (Eigen::Index c = 0; c < next.coef.cols(); ++c) {
        next.coef(r, c) = soft_threshold(next.coef(r, c), l1_thresh) * ridge_shrink;
      }
    }
    return next;
  };

  MultinomialState y = state;  // extrapolated point
  double t_momentum = 1.0;
  double obj_prev = multinomial_objective(z, labels, state, alpha, lambda);
  for (int it = 0; it < cfg.max_iter_multinomial; ++it) {
    MultinomialState next = prox_step(y);
    double obj = multinomial_objective(z, labels, next, alpha, lambda);
    if (obj > obj_prev) {
      // adaptive restart: plain proximal step from the last accepted iterate
      t_momentum = 1.0;
      next = prox_step(state);
      obj = multinomial_objective(z, labels, next, alpha, lambda);
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    const double mom = (t_momentum - 1.0) / t_next;
    y.intercepts = next.intercepts + mom * (next.intercepts - state.intercepts);
    y.coef = next.coef + mom * (next.coef - state.coef);
    t_momentum = t_next;
    state = std::move(next);
    if (std::fabs(obj_prev - obj) < cfg.tol_multinomial) break;
    obj_prev = obj;
  }
  return state;
}

inline void check_class_counts(const std::vector<int>& labels, std::size_t n_classes,
                               const PenalizedConfig& cfg) {
  std::vector<std::size_t> counts(n_classes, 0);
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= n_classes)
      throw DataError("fit_multinomial_enet: label out of range");
    ++counts[static_cast<std::size_t>(l)];
  }
  for (std::size_t k = 0; k < n_classes; ++k) {
    if (counts[k] < static_cast<std::size_t>(cfg.min_level_count))
      throw DataError("fit_multinomial_enet: class " + std::to_string(k) + " occurs only " +
                      std::to_string(counts[k]) + " times (< " +
                      std::to_string(cfg.min_level_count) + ")");
  }
}

inline MultinomialFit multinomial_fit_from_state(const StandardizedDesign& d,
                                                 const MultinomialState& s, std::size_t n_classes,
                                                 double alpha, double lambda) {
  MultinomialFit fit;
  fit.n_classes = n_classes;
  fit.alpha = alpha;
  fit.lambda = lambda;
  fit.coef = Eigen::MatrixXd::Zero(s.coef.rows(), s.coef.cols());
  for (Eigen::Index j = 0; j < s.coef.cols(); ++j) {
    if (d.active[static_cast<std::size_t>(j)]) fit.coef.col(j) = s.coef.col(j) / d.scale(j);
  }
  fit.intercepts = s.intercepts - fit.coef * d.center;
  fit.intercepts.array() -= fit.intercepts.mean();  // symmetric gauge
  return fit;
}

}  // namespace detail

// Penalized multinomial logistic regression, symmetric parameterization.
// labels are class indices in [0, n_classes).
inline MultinomialFit fit_multinomial_enet(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                           std::size_t n_classes, double alpha, double lambda,
                                           const PenalizedConfig& cfg = {}) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw DataError("fit_multinomial_enet: X/label length mismatch");
  if (n_classes < 1) throw DataError("fit_multinomial_enet: need at least one class");
  detail::check_finite(x, "fit_multinomial_enet");
  detail::check_class_counts(labels, n_classes, cfg);

  const auto d = detail::standardize_design(x);
  detail::MultinomialState s;
  s.intercepts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes));
  s.coef = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_classes), x.cols());
  s = detail::multinomial_prox_gradient(d.z, labels, n_classes, alpha, lambda, std::move(s), cfg);
  return detail::multinomial_fit_from_state(d, s, n_classes, alpha, lambda);
}

// Lambda by stratified k-fold cross-validated multinomial deviance.
inline MultinomialFit fit_multinomial_enet_cv(const Eigen::MatrixXd& x,
                                              const std::vector<int>& labels,
                                              std::size_t n_classes, double alpha, Rng& rng,
                                              const PenalizedConfig& cfg = {}) {
  if (static_cast<std::size_t>(x.rows()) != labels.size())
    throw DataError("fit_multinomial_enet_cv: X/label length mismatch");
  detail::check_finite(x, "fit_multinomial_enet_cv");
  detail::check_class_counts(labels, n_classes, cfg);
  const auto n = x.rows();

  const auto d = detail::standardize_design(x);
  Eigen::VectorXd class_freq = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes));
  for (int l : labels) class_freq(l) += 1.0;
  class_freq /= static_cast<double>(n);
  // gradient at the intercept-only null gives the top of the grid
  double lambda_max = 0.0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if (!d.active[static_cast<std::size_t>(j)]) continue;
    for (std::size_t k = 0; k < n_classes; ++k) {
      double g = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double ind = labels[static_cast<std::size_t>(i)] == static_cast<int>(k) ? 1.0 : 0.0;
        g += d.z(i, j) * (class_freq(static_cast<Eigen::Index>(k)) - ind);
      }
      lambda_max = std::max(lambda_max, std::fabs(g) / static_cast<double>(n));
    }
  }
  lambda_max /= std::max(alpha, 1e-3);
  if (!(lambda_max > 0.0)) return fit_multinomial_enet(x, labels, n_classes, alpha, 1.0, cfg);
  const auto grid = detail::lambda_grid(lambda_max, cfg);

  const int n_folds = std::min<int>(cfg.n_folds, static_cast<int>(n));
  std::vector<double> cv_dev(grid.size(), 0.0);
  PenalizedConfig path_cfg = cfg;
  path_cfg.min_level_count = 0;  // fold training sets may thin out rare classes
  if (n_folds >= 2) {
    const auto fold = detail::stratified_fold_assignment(labels, n_classes, n_folds, rng);
    for (int f = 0; f < n_folds; ++f) {
      std::vector<Eigen::Index> tr, te;
      for (Eigen::Index i = 0; i < n; ++i) {
        (fold[static_cast<std::size_t>(i)] == f ? te : tr).push_back(i);
      }
      if (tr.size() < 2 || te.empty()) continue;
      Eigen::MatrixXd xtr(tr.size(), x.cols());
      std::vector<int> ltr(tr.size());
      for (std::size_t i = 0; i < tr.size(); ++i) {
        xtr.row(static_cast<Eigen::Index>(i)) = x.row(tr[i]);
        ltr[i] = labels[static_cast<std::size_t>(tr[i])];
      }
      const auto dtr = detail::standardize_design(xtr);
      detail::MultinomialState s;
      s.intercepts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_classes));
      s.coef = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_classes), x.cols());
      for (std::size_t g = 0; g < grid.size(); ++g) {
        s = detail::multinomial_prox_gradient(dtr.z, ltr, n_classes, alpha, grid[g], std::move(s),
                                              path_cfg);
        const auto fit = detail::multinomial_fit_from_state(dtr, s, n_classes, alpha, grid[g]);
        double dev = 0.0;
        for (Eigen::Index i : te) {
          const Eigen::VectorXd p = fit.predict_proba(x.row(i));
          const double pi = std::max(p(labels[static_cast<std::size_t>(i)]), 1e-12);
          dev += -2.0 * std::log(pi);
        }
        cv_dev[g] += dev;
      }
    }
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g) {
    if (cv_dev[g] < cv_dev[best]) best = g;
  }
  return fit_multinomial_enet(x, labels, n_classes, alpha, grid[best], cfg);
}

// Per-row sampling distributions used by the sequential knockoff sampler.
inline GaussianPredictive predict_conditional(const ElasticNetFit& fit,
                                              const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  return {fit.predict_mean(row), fit.residual_sd};
}

inline Eigen::VectorXd predict_conditional(const MultinomialFit& fit,
                                           const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  return fit.predict_proba(row);
}

}  // namespace cfi
