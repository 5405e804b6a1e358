#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfi/core.hpp"
#include "cfi/penalized.hpp"
#include "cfi/tabular.hpp"

namespace cfi {

enum class KnockoffKind { gaussian, sequential };

inline const char* to_string(KnockoffKind k) {
  return k == KnockoffKind::gaussian ? "gaussian" : "sequential";
}

// Synthetic copy of a feature matrix with the schema of its source.
struct KnockoffMatrix {
  Dataset features;
  KnockoffKind kind = KnockoffKind::gaussian;
  std::uint64_t seed = 0;
};

struct GaussianKnockoffParams {
  Eigen::VectorXd mu;     // column means
  Eigen::MatrixXd sigma;  // covariance after diagonal shrinkage
  Eigen::VectorXd s;      // equicorrelated decorrelation vector
  double shrinkage = 0.0; // applied gamma
};

// Second-order parameters: sample covariance shrunk toward its diagonal by the
// smallest gamma in {0, .01, .05, .1, .25, .5} giving lambda_min >= 1e-8, and
// the equicorrelated rule s_j = min(2 lambda_min(R), 1) * Sigma_jj.
inline GaussianKnockoffParams estimate_gaussian_params(const EncodedMatrix& x) {
  const auto n = x.values.rows();
  const auto q = x.values.cols();
  if (n <= 2) throw DataError("estimate_gaussian_params: need more than 2 rows");

  GaussianKnockoffParams params;
  params.mu = x.values.colwise().mean();
  Eigen::MatrixXd centered = x.values.rowwise() - params.mu.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  cov = 0.5 * (cov + cov.transpose());

  const Eigen::MatrixXd diag = cov.diagonal().asDiagonal();
  constexpr double min_eig = 1e-8;
  const double gammas[] = {0.0, 0.01, 0.05, 0.1, 0.25, 0.5};
  bool ok = false;
  for (double gamma : gammas) {
    Eigen::MatrixXd candidate = (1.0 - gamma) * cov + gamma * diag;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(candidate, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() >= min_eig) {
      params.sigma = std::move(candidate);
      params.shrinkage = gamma;
      ok = true;
      break;
    }
  }
  if (!ok)
    throw NumericError("estimate_gaussian_params: covariance not positive definite after shrinkage");

  Eigen::VectorXd sd = params.sigma.diagonal().array().sqrt();
  Eigen::MatrixXd corr(q, q);
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) corr(i, j) = params.sigma(i, j) / (sd(i) * sd(j));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(corr, Eigen::EigenvaluesOnly);
  const double lambda_min = es.eigenvalues().minCoeff();
  const double s_unit = std::min(2.0 * lambda_min, 1.0);
  params.s = s_unit * params.sigma.diagonal();
  return params;
}

namespace detail {

// Conditional Gaussian knockoff draw:
//   mean  M = X - (X - mu) Sigma^{-1} diag{s}
//   cov   V = 2 diag{s} - diag{s} Sigma^{-1} diag{s}
// V is symmetrized and eigenvalue-clipped at zero before factoring.
inline Eigen::MatrixXd gaussian_knockoff_values(const Eigen::MatrixXd& x,
                                                const GaussianKnockoffParams& params, Rng& rng) {
  const auto n = x.rows();
  const auto q = x.cols();
  if (params.mu.size() != q) throw DataError("sample_gaussian_knockoffs: dimension mismatch");

  const Eigen::LDLT<Eigen::MatrixXd> solver(params.sigma);
  const Eigen::MatrixXd sigma_inv_s = solver.solve(Eigen::MatrixXd(params.s.asDiagonal()));
  const Eigen::MatrixXd centered = x.rowwise() - params.mu.transpose();
  const Eigen::MatrixXd mean = x - centered * sigma_inv_s;

  Eigen::MatrixXd v = 2.0 * Eigen::MatrixXd(params.s.asDiagonal()) -
                      params.s.asDiagonal() * sigma_inv_s;
  v = 0.5 * (v + v.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
  Eigen::VectorXd eig = es.eigenvalues().cwiseMax(0.0);
  const Eigen::MatrixXd root = es.eigenvectors() * eig.cwiseSqrt().asDiagonal();

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd noise(n, q);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) noise(i, j) = normal(rng);
  }
  return mean + noise * root.transpose();
}

}  // namespace detail

// Gaussian knockoffs on an encoded (all-continuous) feature matrix. The
// returned features carry the encoded dataset's schema.
inline KnockoffMatrix sample_gaussian_knockoffs(const Dataset& features,
                                                const GaussianKnockoffParams& params, Rng& rng,
                                                std::uint64_t seed = 0) {
  for (const auto& col : features.schema()) {
    if (col.is_categorical())
      throw DataError("sample_gaussian_knockoffs: requires encoded (all-continuous) data");
  }
  const EncodedMatrix enc = one_hot_encode(features.features_only());
  const Eigen::MatrixXd values = detail::gaussian_knockoff_values(enc.values, params, rng);
  std::vector<std::vector<double>> cols(features.n_features());
  for (std::size_t j = 0; j < features.n_features(); ++j) {
    cols[j].resize(features.n_rows());
    for (std::size_t i = 0; i < features.n_rows(); ++i) {
      cols[j][i] = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return {Dataset(features.schema(), std::move(cols)), KnockoffKind::gaussian, seed};
}

// Parameters are estimated on standardized columns (numerical conditioning of
// the shrinkage ladder); the draws are mapped back to the original scale. The
// sampled law is the same as direct estimation, the construction being
// equivariant under column scaling.
inline KnockoffMatrix sample_gaussian_knockoffs(const Dataset& features, Rng& rng,
                                                std::uint64_t seed = 0) {
  for (const auto& col : features.schema()) {
    if (col.is_categorical())
      throw DataError("sample_gaussian_knockoffs: requires encoded (all-continuous) data");
  }
  const EncodedMatrix enc = one_hot_encode(features.features_only());
  const StandardizeResult std_enc = standardize(enc, /*continuous_only=*/false);
  const auto params = estimate_gaussian_params(std_enc.matrix);
  Eigen::MatrixXd values = detail::gaussian_knockoff_values(std_enc.matrix.values, params, rng);
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    values.col(j) = values.col(j).array() * std_enc.scales(j) + std_enc.centers(j);
  }
  std::vector<std::vector<double>> cols(features.n_features());
  for (std::size_t j = 0; j < features.n_features(); ++j) {
    cols[j].resize(features.n_rows());
    for (std::size_t i = 0; i < features.n_rows(); ++i) {
      cols[j][i] = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return {Dataset(features.schema(), std::move(cols)), KnockoffKind::gaussian, seed};
}

struct SequentialKnockoffConfig {
  double enet_alpha = 0.5;
  int n_lambda = 20;
  double lambda_min_ratio = 1e-3;
  int n_folds = 5;
  int min_level_count = 5;
  double sd_floor = 1e-6;
  std::vector<std::size_t> order;  // empty: schema order

  PenalizedConfig penalized() const {
    PenalizedConfig cfg;
    cfg.alpha = enet_alpha;
    cfg.n_lambda = n_lambda;
    cfg.lambda_min_ratio = lambda_min_ratio;
    cfg.n_folds = n_folds;
    cfg.min_level_count = min_level_count;
    cfg.sd_floor = sd_floor;
    return cfg;
  }
};

namespace detail {

// design = one-hot encoding of [X_{-j}, knockoffs sampled so far]
inline Eigen::MatrixXd sequential_design(const Dataset& features, std::size_t skip,
                                         const std::vector<std::size_t>& done,
                                         const std::vector<std::vector<double>>& knockoff_cols) {
  const std::size_t n = features.n_rows();
  std::size_t q = 0;
  for (std::size_t j = 0; j < features.n_features(); ++j) {
    if (j == skip) continue;
    q += features.schema(j).is_categorical() ? features.schema(j).n_levels() : 1;
  }
  for (std::size_t j : done) {
    q += features.schema(j).is_categorical() ? features.schema(j).n_levels() : 1;
  }
  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                 static_cast<Eigen::Index>(q));
  std::size_t offset = 0;
  auto emit = [&](const ColumnSchema& schema, const std::vector<double>& col) {
    if (schema.is_categorical()) {
      for (std::size_t i = 0; i < n; ++i) {
        design(static_cast<Eigen::Index>(i),
               static_cast<Eigen::Index>(offset + static_cast<std::size_t>(col[i]))) = 1.0;
      }
      offset += schema.n_levels();
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(offset)) = col[i];
      }
      offset += 1;
    }
  };
  for (std::size_t j = 0; j < features.n_features(); ++j) {
    if (j != skip) emit(features.schema(j), features.column(j));
  }
  for (std::size_t j : done) emit(features.schema(j), knockoff_cols[j]);
  return design;
}

}  // namespace detail

// Sequential knockoffs through conditional independent pairs: visits columns
// in order, regresses each on the remaining originals plus the knockoffs
// sampled so far, and draws continuous knockoffs from N(mu_i, sigma) and
// categorical knockoffs from Multinom(pi_i) row by row.
inline KnockoffMatrix sample_sequential_knockoffs(const Dataset& input,
                                                  const SequentialKnockoffConfig& config,
                                                  Rng& rng, std::uint64_t seed = 0) {
  const Dataset features = input.features_only();  // the target is never read
  const std::size_t p = features.n_features();
  const std::size_t n = features.n_rows();
  if (p == 0) throw DataError("sample_sequential_knockoffs: no feature columns");

  for (std::size_t j = 0; j < p; ++j) {
    const auto& schema = features.schema(j);
    if (!schema.is_categorical()) continue;
    std::vector<std::size_t> counts(schema.n_levels(), 0);
    for (double v : features.column(j)) ++counts[static_cast<std::size_t>(v)];
    for (std::size_t l = 0; l < counts.size(); ++l) {
      if (counts[l] < static_cast<std::size_t>(config.min_level_count))
        throw DataError("sample_sequential_knockoffs: level '" + schema.levels[l] +
                        "' of column '" + schema.name + "' occurs only " +
                        std::to_string(counts[l]) + " times (< " +
                        std::to_string(config.min_level_count) + ")");
    }
  }

  std::vector<std::size_t> order = config.order;
  if (order.empty()) {
    order.resize(p);
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j < p; ++j) {
      if (sorted.size() != p || sorted[j] != j)
        throw DataError("sample_sequential_knockoffs: order must permute the feature columns");
    }
  }

  const PenalizedConfig pen = config.penalized();
  std::vector<std::vector<double>> knockoff_cols(p);
  std::vector<std::size_t> done;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  for (std::size_t j : order) {
    const Eigen::MatrixXd design = detail::sequential_design(features, j, done, knockoff_cols);
    const auto& schema = features.schema(j);
    std::vector<double> sampled(n);
    if (schema.is_categorical()) {
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i)
        labels[i] = static_cast<int>(features.column(j)[i]);
      const MultinomialFit fit =
          fit_multinomial_enet_cv(design, labels, schema.n_levels(), config.enet_alpha, rng, pen);
      for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd pi = fit.predict_proba(design.row(static_cast<Eigen::Index>(i)));
        const double u = uniform(rng) * pi.sum();
        double acc = 0.0;
        std::size_t pick = schema.n_levels() - 1;
        for (Eigen::Index k = 0; k < pi.size(); ++k) {
          acc += pi(k);
          if (u <= acc) {
            pick = static_cast<std::size_t>(k);
            break;
          }
        }
        sampled[i] = static_cast<double>(pick);
      }
    } else {
      Eigen::VectorXd y(n);
      for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = features.column(j)[i];
      const ElasticNetFit fit = fit_elastic_net_cv(design, y, config.enet_alpha, rng, pen);
      for (std::size_t i = 0; i < n; ++i) {
        const auto pred = predict_conditional(fit, design.row(static_cast<Eigen::Index>(i)));
        sampled[i] = pred.mu + pred.sigma * normal(rng);
      }
    }
    knockoff_cols[j] = std::move(sampled);
    done.push_back(j);
  }

  return {Dataset(features.schema(), std::move(knockoff_cols)), KnockoffKind::sequential, seed};
}

// Second-order validity report comparing a knockoff matrix with its source.
struct KnockoffDiagnostics {
  double max_mean_diff = 0.0;       // max_j |mean(Xj) - mean(Xkj)|
  double max_cov_diff = 0.0;        // max_jk |cov(X)_jk - cov(Xk)_jk|
  double max_cross_cov_diff = 0.0;  // max_{j != k} |cov(X, Xk)_jk - cov(X)_jk|
  double max_level_tv = 0.0;        // max per-categorical total variation distance

  nlohmann::json to_json() const {
    return {{"max_mean_diff", max_mean_diff},
            {"max_cov_diff", max_cov_diff},
            {"max_cross_cov_diff", max_cross_cov_diff},
            {"max_level_tv", max_level_tv}};
  }
};

inline KnockoffDiagnostics knockoff_diagnostics(const Dataset& x, const Dataset& knockoffs) {
  if (x.n_rows() != knockoffs.n_rows())
    throw DataError("knockoff_diagnostics: row count mismatch");
  if (x.schema_fingerprint() != knockoffs.schema_fingerprint())
    throw DataError("knockoff_diagnostics: schema mismatch");

  const EncodedMatrix ex = one_hot_encode(x.features_only());
  const EncodedMatrix ek = one_hot_encode(knockoffs.features_only());
  const auto n = ex.values.rows();
  const auto q = ex.values.cols();

  KnockoffDiagnostics report;
  const Eigen::RowVectorXd mean_x = ex.values.colwise().mean();
  const Eigen::RowVectorXd mean_k = ek.values.colwise().mean();
  report.max_mean_diff = (mean_x - mean_k).cwiseAbs().maxCoeff();

  const Eigen::MatrixXd cx = ex.values.rowwise() - mean_x;
  const Eigen::MatrixXd ck = ek.values.rowwise() - mean_k;
  const double denom = static_cast<double>(n - 1);
  const Eigen::MatrixXd cov_x = (cx.transpose() * cx) / denom;
  const Eigen::MatrixXd cov_k = (ck.transpose() * ck) / denom;
  const Eigen::MatrixXd cross = (cx.transpose() * ck) / denom;
  report.max_cov_diff = (cov_x - cov_k).cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < q; ++i) {
    for (Eigen::Index j = 0; j < q; ++j) {
      if (i == j) continue;
      report.max_cross_cov_diff =
          std::max(report.max_cross_cov_diff, std::fabs(cross(i, j) - cov_x(i, j)));
    }
  }

  for (std::size_t j = 0; j < x.n_features(); ++j) {
    const auto& schema = x.schema(j);
    if (!schema.is_categorical()) continue;
    std::vector<double> fx(schema.n_levels(), 0.0), fk(schema.n_levels(), 0.0);
    for (double v : x.column(j)) fx[static_cast<std::size_t>(v)] += 1.0;
    for (double v : knockoffs.column(j)) fk[static_cast<std::size_t>(v)] += 1.0;
    double tv = 0.0;
    for (std::size_t l = 0; l < schema.n_levels(); ++l) {
      tv += std::fabs(fx[l] - fk[l]) / static_cast<double>(x.n_rows());
    }
    report.max_level_tv = std::max(report.max_level_tv, 0.5 * tv);
  }
  return report;
}

}  // namespace cfi
