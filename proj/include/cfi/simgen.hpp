#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "cfi/core.hpp"
#include "cfi/learners.hpp"
#include "cfi/stats.hpp"
#include "cfi/tabular.hpp"

namespace cfi {

// Per-level effects on an equidistant grid from -beta to +beta; they sum to
// zero, so only procedures that treat levels individually can recover them.
inline std::vector<double> level_effects(double beta, int n_levels) {
  if (n_levels < 2) throw DataError("level_effects: need at least 2 levels");
  std::vector<double> effects(static_cast<std::size_t>(n_levels));
  for (int k = 0; k < n_levels; ++k) {
    effects[static_cast<std::size_t>(k)] =
        -beta + 2.0 * beta * static_cast<double>(k) / static_cast<double>(n_levels - 1);
  }
  return effects;
}

struct CategorizeResult {
  std::vector<int> bins;              // quantile-bin index per row, 0..c-1
  std::vector<std::string> labels;    // random letter name per bin
  std::vector<double> effects;        // level_effects(beta, c), indexed by bin
  std::vector<double> representation; // effects[bin] per row
};

// Cuts a continuous variable into c quantile bins. Ties are broken by midpoint
// (average) rank; an empty bin means the quantile boundaries collapsed.
inline CategorizeResult categorize(const std::vector<double>& values, int n_levels, double beta,
                                   Rng& rng) {
  const std::size_t n = values.size();
  if (n_levels < 2) throw DataError("categorize: need at least 2 levels");
  if (n < static_cast<std::size_t>(n_levels)) throw DataError("categorize: more levels than rows");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  // midpoint rank across ties
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }

  CategorizeResult out;
  out.bins.resize(n);
  std::vector<std::size_t> bin_counts(static_cast<std::size_t>(n_levels), 0);
  for (std::size_t r = 0; r < n; ++r) {
    auto bin = static_cast<int>(rank[r] * static_cast<double>(n_levels) / static_cast<double>(n));
    bin = std::clamp(bin, 0, n_levels - 1);
    out.bins[r] = bin;
    ++bin_counts[static_cast<std::size_t>(bin)];
  }
  for (std::size_t b = 0; b < bin_counts.size(); ++b) {
    if (bin_counts[b] == 0)
      throw DataError("categorize: quantile boundaries collapsed (too many ties)");
  }

  // random letter labels, drawn without replacement
  std::string alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  if (n_levels > static_cast<int>(alphabet.size()))
    throw DataError("categorize: at most 26 levels supported");
  std::shuffle(alphabet.begin(), alphabet.end(), rng);
  for (int b = 0; b < n_levels; ++b)
    out.labels.push_back(std::string(1, alphabet[static_cast<std::size_t>(b)]));

  out.effects = level_effects(beta, n_levels);
  out.representation.resize(n);
  for (std::size_t r = 0; r < n; ++r)
    out.representation[r] = out.effects[static_cast<std::size_t>(out.bins[r])];
  return out;
}

// +1 inside the interquartile band of N(0,1), -1 outside
inline double interquartile_indicator(double x) {
  constexpr double q25 = -0.6744897501960817;  // Phi^{-1}(0.25)
  return (x >= q25 && x <= -q25) ? 1.0 : -1.0;
}

struct GeneratedData {
  Dataset dataset;                    // features plus target
  std::vector<bool> relevant;         // ground truth per feature
  std::vector<bool> conditional_null; // true where X_j indep Y given the rest
  double oracle_value = 0.0;          // best achievable R^2 / accuracy
};

// Directed chain X1 -> X4 -> Y <- X3 <- X2 with optional quantile
// categorization of individual variables. A categorized variable enters the
// downstream equations through its level-effect representation.
struct DagScenarioConfig {
  std::size_t n = 1000;
  double beta = 0.5;
  Task target = Task::regression;
  // 0 keeps the variable continuous; c >= 2 categorizes it with c levels
  int x1_levels = 0;
  int x2_levels = 0;
  int x3_levels = 0;
  int x4_levels = 0;

  void validate() const {
    for (int c : {x1_levels, x2_levels, x3_levels, x4_levels}) {
      if (c != 0 && c < 2) throw DataError("dag scenario: level count must be 0 or >= 2");
      if (c != 0 && n < static_cast<std::size_t>(10 * c))
        throw DataError("dag scenario: need n >= 10 * levels for quantile cuts");
    }
    if (n < 10) throw DataError("dag scenario: n too small");
  }
};

namespace detail {

struct DagVariable {
  std::vector<double> feature;        // learner-visible values (level index if categorical)
  std::vector<double> contribution;   // value entering downstream equations
  ColumnSchema schema;
};

// Continuous variables contribute beta * x; categorized ones contribute their
// level effects (which already span -beta..+beta).
inline DagVariable make_dag_variable(const std::string& name, const std::vector<double>& raw,
                                     int levels, double beta, Rng& rng) {
  DagVariable var;
  var.schema.name = name;
  if (levels == 0) {
    var.schema.kind = ColumnKind::continuous;
    var.feature = raw;
    var.contribution.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) var.contribution[i] = beta * raw[i];
  } else {
    const CategorizeResult cat = categorize(raw, levels, beta, rng);
    var.schema.kind = ColumnKind::categorical;
    var.schema.levels = cat.labels;
    var.feature.resize(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
      var.feature[i] = static_cast<double>(cat.bins[i]);
    var.contribution = cat.representation;
  }
  return var;
}

}  // namespace detail

inline GeneratedData gen_dag(const DagScenarioConfig& config, Rng& rng) {
  config.validate();
  const std::size_t n = config.n;
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](double sd) {
    std::vector<double> v(n);
    for (auto& x : v) x = sd * normal(rng);
    return v;
  };

  const std::vector<double> x1_raw = draw(1.0);
  const std::vector<double> x2_raw = draw(1.0);
  const auto x1 = detail::make_dag_variable("X1", x1_raw, config.x1_levels, config.beta, rng);
  const auto x2 = detail::make_dag_variable("X2", x2_raw, config.x2_levels, config.beta, rng);

  std::vector<double> x3_raw(n), x4_raw(n);
  const std::vector<double> e3 = draw(1.0), e4 = draw(1.0);
  for (std::size_t i = 0; i < n; ++i) {
    x3_raw[i] = x2.contribution[i] + e3[i];
    x4_raw[i] = x1.contribution[i] + e4[i];
  }
  const auto x3 = detail::make_dag_variable("X3", x3_raw, config.x3_levels, config.beta, rng);
  const auto x4 = detail::make_dag_variable("X4", x4_raw, config.x4_levels, config.beta, rng);

  TargetColumn target;
  target.name = "Y";
  target.values.resize(n);
  std::vector<double> probs;
  if (config.target == Task::regression) {
    target.binary = false;
    for (std::size_t i = 0; i < n; ++i) {
      target.values[i] = x3.contribution[i] + x4.contribution[i] + normal(rng);
    }
  } else {
    target.binary = true;
    probs.resize(n);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      // as printed: logit^{-1}(beta X3 - beta X4)
      const double eta = x3.contribution[i] - x4.contribution[i];
      probs[i] = 1.0 / (1.0 + std::exp(-eta));
      target.values[i] = uniform(rng) < probs[i] ? 1.0 : 0.0;
    }
  }

  GeneratedData out{
      Dataset({x1.schema, x2.schema, x3.schema, x4.schema},
              {x1.feature, x2.feature, x3.feature, x4.feature}, target),
      {false, false, true, true},
      {true, true, false, false},
      0.0};
  if (config.target == Task::regression) {
    // SNR = Var(Y) - 1 because the noise has unit variance
    const double snr = std::max(sample_variance(target.values) - 1.0, 0.0);
    out.oracle_value = snr / (snr + 1.0);
  } else {
    double acc = 0.0;
    for (double p : probs) acc += std::max(p, 1.0 - p);
    out.oracle_value = acc / static_cast<double>(n);
  }
  return out;
}

// Noise scale sigma with var(signal) / sigma^2 = target_snr.
inline double calibrate_snr(const std::vector<double>& signal, double target_snr) {
  if (!(target_snr > 0.0) || !std::isfinite(target_snr))
    throw NumericError("calibrate_snr: target SNR must be finite and positive");
  const double var = sample_variance(signal);
  if (var <= 0.0) throw NumericError("calibrate_snr: zero-variance signal");
  return std::sqrt(var / target_snr);
}

// Scale beta_ber with mean(min(p, 1-p)) = target_ber for p = logit^{-1}(b eta);
// the achieved error is monotone decreasing in b, so bisection applies.
inline double calibrate_ber(const std::vector<double>& eta, double target_ber,
                            double tolerance = 1e-3) {
  if (eta.size() < 2 || sample_variance(eta) <= 0.0)
    throw NumericError("calibrate_ber: eta must be non-constant");
  if (!(target_ber > 0.0 && target_ber < 0.5))
    throw NumericError("calibrate_ber: target BER must lie in (0, 0.5)");
  auto ber_at = [&](double b) {
    double acc = 0.0;
    for (double e : eta) {
      const double p = 1.0 / (1.0 + std::exp(-b * e));
      acc += std::min(p, 1.0 - p);
    }
    return acc / static_cast<double>(eta.size());
  };
  double lo = 0.0, hi = 1.0;
  int doublings = 0;
  while (ber_at(hi) > target_ber) {
    hi *= 2.0;
    if (++doublings > 60) throw NumericError("calibrate_ber: target BER unreachable");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (ber_at(mid) > target_ber) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (std::fabs(ber_at(hi) - target_ber) <= tolerance) break;
  }
  return hi;
}

inline double oracle_r2(double snr) {
  if (!(snr >= 0.0)) throw NumericError("oracle_r2: SNR must be non-negative");
  return snr / (snr + 1.0);
}

inline double oracle_accuracy(const std::vector<double>& probs) {
  if (probs.empty()) throw DataError("oracle_accuracy: empty probabilities");
  double acc = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("oracle_accuracy: probability outside [0, 1]");
    acc += std::max(p, 1.0 - p);
  }
  return acc / static_cast<double>(probs.size());
}

// Twelve-variable MVN grid: pairs (X1,X2), (X3,X4), ... correlated by rho, one
// relevant and one irrelevant per pair. X1-X4 act linearly, X5-X8 through the
// interquartile indicator, X9-X12 through quantile categorization. Effect
// strengths cycle 0, 1, 0, 3 within each type block.
struct GridScenarioConfig {
  std::size_t n = 1000;
  double rho = 0.8;
  int cardinality = 5;   // levels of X9..X12
  Task target = Task::regression;
  double snr = 2.0;      // regression noise calibration
  double ber = 0.2;      // classification calibration

  void validate() const {
    if (cardinality < 2) throw DataError("grid scenario: cardinality must be >= 2");
    if (!(rho > -1.0 && rho < 1.0)) throw DataError("grid scenario: rho must lie in (-1, 1)");
    if (n < static_cast<std::size_t>(10 * cardinality))
      throw DataError("grid scenario: need n >= 10 * cardinality");
  }
};

inline GeneratedData gen_grid(const GridScenarioConfig& config, Rng& rng) {
  config.validate();
  const std::size_t n = config.n;
  constexpr std::size_t p = 12;
  const double betas[4] = {0.0, 1.0, 0.0, 3.0};

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> raw(p, std::vector<double>(n));
  for (std::size_t pair = 0; pair < p / 2; ++pair) {
    const double coef = std::sqrt(1.0 - config.rho * config.rho);
    for (std::size_t i = 0; i < n; ++i) {
      const double z1 = normal(rng);
      const double z2 = normal(rng);
      raw[2 * pair][i] = z1;
      raw[2 * pair + 1][i] = config.rho * z1 + coef * z2;
    }
  }

  std::vector<double> signal(n, 0.0);
  std::vector<ColumnSchema> schema(p);
  std::vector<std::vector<double>> features(p);

  for (std::size_t j = 0; j < p; ++j) {
    const double beta = betas[j % 4];
    const std::string name = "X" + std::to_string(j + 1);
    if (j < 4) {
      // continuous, linear effect; the learner sees the raw values
      schema[j] = {name, ColumnKind::continuous, {}};
      features[j] = raw[j];
      for (std::size_t i = 0; i < n; ++i) signal[i] += beta * raw[j][i];
    } else if (j < 8) {
      // continuous, interquartile-band indicator effect; raw values visible
      schema[j] = {name, ColumnKind::continuous, {}};
      features[j] = raw[j];
      for (std::size_t i = 0; i < n; ++i) {
        signal[i] += beta * interquartile_indicator(raw[j][i]);
      }
    } else {
      const CategorizeResult cat = categorize(raw[j], config.cardinality, beta, rng);
      schema[j] = {name, ColumnKind::categorical, cat.labels};
      features[j].resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        features[j][i] = static_cast<double>(cat.bins[i]);
        signal[i] += cat.representation[i];
      }
    }
  }

  TargetColumn target;
  target.name = "Y";
  target.values.resize(n);
  double oracle = 0.0;
  if (config.target == Task::regression) {
    target.binary = false;
    const double sigma = calibrate_snr(signal, config.snr);
    for (std::size_t i = 0; i < n; ++i) target.values[i] = signal[i] + sigma * normal(rng);
    oracle = oracle_r2(config.snr);
  } else {
    target.binary = true;
    const double b = calibrate_ber(signal, config.ber);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::vector<double> probs(n);
    for (std::size_t i = 0; i < n; ++i) {
      probs[i] = 1.0 / (1.0 + std::exp(-b * signal[i]));
      target.values[i] = uniform(rng) < probs[i] ? 1.0 : 0.0;
    }
    oracle = oracle_accuracy(probs);
  }

  std::vector<bool> relevant(p), null_flags(p);
  for (std::size_t j = 0; j < p; ++j) {
    relevant[j] = betas[j % 4] > 0.0;
    null_flags[j] = !relevant[j];
  }
  return {Dataset(std::move(schema), std::move(features), std::move(target)),
          std::move(relevant), std::move(null_flags), oracle};
}

}  // namespace cfi
