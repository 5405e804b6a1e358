#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cfi/core.hpp"
#include "cfi/stats.hpp"

namespace cfi {

// Fraction of p-values at or below alpha.
inline double rejection_rate(const std::vector<double>& p_values, double alpha) {
  if (p_values.empty()) throw DataError("rejection_rate: empty input");
  std::size_t hits = 0;
  for (double p : p_values) {
    if (std::isnan(p) || p < 0.0 || p > 1.0) throw DataError("rejection_rate: p outside [0, 1]");
    if (p <= alpha) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(p_values.size());
}

struct TopKResult {
  double sensitivity = 0.0;
  double one_minus_specificity = 0.0;
  std::vector<bool> in_top_k;
};

// Top-k membership by descending score; exact ties across the boundary are
// split deterministically by feature index.
inline TopKResult top_k_detection(const std::vector<double>& scores,
                                  const std::vector<bool>& relevant, std::size_t k = 6) {
  const std::size_t p = scores.size();
  if (relevant.size() != p) throw DataError("top_k_detection: length mismatch");
  if (k >= p) throw DataError("top_k_detection: k must be below the feature count");
  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  TopKResult out;
  out.in_top_k.assign(p, false);
  for (std::size_t i = 0; i < k; ++i) out.in_top_k[order[i]] = true;
  std::size_t n_rel = 0, n_irr = 0, hit_rel = 0, hit_irr = 0;
  for (std::size_t j = 0; j < p; ++j) {
    if (relevant[j]) {
      ++n_rel;
      if (out.in_top_k[j]) ++hit_rel;
    } else {
      ++n_irr;
      if (out.in_top_k[j]) ++hit_irr;
    }
  }
  if (n_rel == 0 || n_irr == 0) throw DataError("top_k_detection: need both classes");
  out.sensitivity = static_cast<double>(hit_rel) / static_cast<double>(n_rel);
  out.one_minus_specificity = static_cast<double>(hit_irr) / static_cast<double>(n_irr);
  return out;
}

// Mann-Whitney AUC of ranking relevant above irrelevant; ties count one half.
inline double auc_rank(const std::vector<double>& scores, const std::vector<bool>& relevant) {
  if (scores.size() != relevant.size()) throw DataError("auc_rank: length mismatch");
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!relevant[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (relevant[j]) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  if (pairs == 0) throw DataError("auc_rank: need both relevant and irrelevant features");
  return wins / static_cast<double>(pairs);
}

// Signed discrepancy between achieved and oracle model performance.
inline double validate_model(double model_value, double oracle_value) {
  return model_value - oracle_value;
}

struct ReplicateOutcome {
  std::size_t replicate = 0;
  std::vector<std::string> features;
  std::vector<double> scores;
  std::optional<std::vector<double>> p_values;          // raw one-sided
  std::optional<std::vector<double>> p_values_adjusted; // Holm
  std::vector<bool> relevant;
  std::optional<double> model_value;
  std::optional<double> oracle_value;
};

struct FeatureSummary {
  std::string feature;
  bool relevant = false;
  double mean_score = 0.0;
  double sd_score = 0.0;
  double rejection = std::numeric_limits<double>::quiet_NaN();           // raw p
  double rejection_adjusted = std::numeric_limits<double>::quiet_NaN();  // Holm p
  double top_k_rate = 0.0;
};

struct DiscrepancySummary {
  double mean = 0.0;
  double sd = 0.0;
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};

struct AggregateSummary {
  std::size_t n_replicates = 0;
  std::size_t k = 0;
  std::vector<FeatureSummary> per_feature;
  double auc_mean = 0.0;
  double auc_sd = 0.0;
  double sensitivity_mean = 0.0;
  double one_minus_specificity_mean = 0.0;
  std::optional<DiscrepancySummary> discrepancy;  // model minus oracle
};

namespace detail {

inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw DataError("quantile: empty input");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * sorted[lo] + w * sorted[hi];
}

}  // namespace detail

// Deterministic replicate aggregation: per-feature score moments, rejection
// and top-k rates, AUC moments, and model-vs-oracle discrepancy summaries.
// k = 0 uses the number of relevant features.
inline AggregateSummary aggregate(const std::vector<ReplicateOutcome>& outcomes,
                                  double alpha = 0.05, std::size_t k = 0) {
  if (outcomes.empty()) throw DataError("aggregate: no replicates");
  const auto& first = outcomes.front();
  const std::size_t p = first.features.size();
  if (p == 0) throw DataError("aggregate: empty feature set");
  for (const auto& o : outcomes) {
    if (o.features != first.features || o.relevant != first.relevant)
      throw DataError("aggregate: replicates disagree on features or ground truth");
  }
  AggregateSummary summary;
  summary.n_replicates = outcomes.size();
  if (k == 0) {
    k = static_cast<std::size_t>(std::count(first.relevant.begin(), first.relevant.end(), true));
  }
  summary.k = k;

  std::vector<double> aucs, sens, fprs;
  std::vector<std::vector<double>> score_by_feature(p), topk_by_feature(p);
  std::vector<std::vector<double>> p_by_feature(p), padj_by_feature(p);
  std::vector<double> discrepancies;
  for (const auto& o : outcomes) {
    aucs.push_back(auc_rank(o.scores, o.relevant));
    const TopKResult tk = top_k_detection(o.scores, o.relevant, k);
    sens.push_back(tk.sensitivity);
    fprs.push_back(tk.one_minus_specificity);
    for (std::size_t j = 0; j < p; ++j) {
      score_by_feature[j].push_back(o.scores[j]);
      topk_by_feature[j].push_back(tk.in_top_k[j] ? 1.0 : 0.0);
      if (o.p_values) p_by_feature[j].push_back((*o.p_values)[j]);
      if (o.p_values_adjusted) padj_by_feature[j].push_back((*o.p_values_adjusted)[j]);
    }
    if (o.model_value && o.oracle_value)
      discrepancies.push_back(validate_model(*o.model_value, *o.oracle_value));
  }

  for (std::size_t j = 0; j < p; ++j) {
    FeatureSummary fs;
    fs.feature = first.features[j];
    fs.relevant = first.relevant[j];
    fs.mean_score = mean(score_by_feature[j]);
    fs.sd_score = sample_sd(score_by_feature[j]);
    fs.top_k_rate = mean(topk_by_feature[j]);
    if (!p_by_feature[j].empty()) fs.rejection = rejection_rate(p_by_feature[j], alpha);
    if (!padj_by_feature[j].empty())
      fs.rejection_adjusted = rejection_rate(padj_by_feature[j], alpha);
    summary.per_feature.push_back(std::move(fs));
  }
  summary.auc_mean = mean(aucs);
  summary.auc_sd = sample_sd(aucs);
  summary.sensitivity_mean = mean(sens);
  summary.one_minus_specificity_mean = mean(fprs);

  if (!discrepancies.empty()) {
    DiscrepancySummary d;
    d.mean = mean(discrepancies);
    d.sd = sample_sd(discrepancies);
    std::sort(discrepancies.begin(), discrepancies.end());
    d.q25 = detail::quantile_sorted(discrepancies, 0.25);
    d.median = detail::quantile_sorted(discrepancies, 0.5);
    d.q75 = detail::quantile_sorted(discrepancies, 0.75);
    summary.discrepancy = d;
  }
  return summary;
}

}  // namespace cfi
