#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "cfi/core.hpp"
#include "cfi/knockoffs.hpp"
#include "cfi/learners.hpp"
#include "cfi/stats.hpp"
#include "cfi/tabular.hpp"

namespace cfi {

// Feature (or group) of interest. Groups within one analysis must be disjoint.
struct FeatureGroup {
  std::string id;
  std::vector<std::string> columns;
};

inline std::vector<FeatureGroup> per_column_groups(const Dataset& ds) {
  std::vector<FeatureGroup> groups;
  for (const auto& col : ds.schema()) groups.push_back({col.name, {col.name}});
  return groups;
}

inline void validate_groups(const Dataset& ds, const std::vector<FeatureGroup>& groups) {
  std::unordered_set<std::string> seen;
  for (const auto& g : groups) {
    if (g.columns.empty()) throw DataError("feature group '" + g.id + "' is empty");
    for (const auto& c : g.columns) {
      ds.column_index(c);  // existence
      if (!seen.insert(c).second)
        throw DataError("feature groups overlap on column '" + c + "'");
    }
  }
}

enum class DeltaOrientation { knockoff_minus_original, original_minus_knockoff };

struct CpiResult {
  std::string group;
  double cpi = 0.0;       // mean instance-wise loss difference
  double se = 0.0;
  double t = 0.0;
  double p_one_sided = 1.0;
  double ci_lower = 0.0;  // one-sided 1-alpha lower bound
  double p_adjusted = 1.0;
  std::size_t n_test = 0;
};

namespace detail {

inline void check_knockoff_compatible(const Dataset& test, const KnockoffMatrix& knockoffs) {
  if (test.n_rows() != knockoffs.features.n_rows())
    throw DataError("knockoff matrix row count does not match the test data");
  if (test.features_only().schema_fingerprint() != knockoffs.features.schema_fingerprint())
    throw DataError("knockoff matrix schema does not match the test data");
}

inline std::vector<double> delta_from_losses(const std::vector<double>& substituted,
                                             const std::vector<double>& original,
                                             DeltaOrientation orientation) {
  std::vector<double> delta(substituted.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = orientation == DeltaOrientation::knockoff_minus_original
                   ? substituted[i] - original[i]
                   : original[i] - substituted[i];
  }
  return delta;
}

}  // namespace detail

// Instance-wise loss differences from substituting a group's columns by their
// knockoff copies. Positive values mean the substitution hurt the model.
inline std::vector<double> compute_delta(
    const Model& model, LossKind loss, const Dataset& test, const KnockoffMatrix& knockoffs,
    const FeatureGroup& group,
    DeltaOrientation orientation = DeltaOrientation::knockoff_minus_original) {
  detail::check_knockoff_compatible(test, knockoffs);
  validate_groups(test, {group});
  const auto& truth = test.target().values;
  const auto original_losses = instance_loss(loss, model.predict(test.features_only()), truth);

  std::map<std::string, std::vector<double>> replacement;
  for (const auto& name : group.columns) {
    replacement[name] = knockoffs.features.column(knockoffs.features.column_index(name));
  }
  const Dataset substituted = test.features_only().with_replaced_columns(replacement);
  const auto substituted_losses = instance_loss(loss, model.predict(substituted), truth);
  return detail::delta_from_losses(substituted_losses, original_losses, orientation);
}

inline double cpi_statistic(const std::vector<double>& delta) {
  if (delta.empty()) throw DataError("cpi_statistic: empty delta vector");
  return mean(delta);
}

struct CpiConfig {
  KnockoffKind sampler = KnockoffKind::sequential;
  std::optional<LossKind> loss;  // default: mse (regression), log_loss (classification)
  double alpha = 0.05;
  DeltaOrientation orientation = DeltaOrientation::knockoff_minus_original;
  SequentialKnockoffConfig sequential;
};

// Algorithm: sample knockoffs for the test features once, reuse them for every
// group, test each group's deltas one-sided, Holm-adjust across the groups.
inline std::vector<CpiResult> cpi_analyze(const Model& model, const Dataset& test,
                                          const CpiConfig& config,
                                          const std::vector<FeatureGroup>& groups, Rng& rng) {
  if (groups.empty()) throw DataError("cpi_analyze: no feature groups");
  validate_groups(test, groups);
  const LossKind loss = config.loss.value_or(default_loss(model.task()));

  const KnockoffMatrix knockoffs =
      config.sampler == KnockoffKind::sequential
          ? sample_sequential_knockoffs(test, config.sequential, rng)
          : sample_gaussian_knockoffs(test.features_only(), rng);

  const auto& truth = test.target().values;
  const auto original_losses = instance_loss(loss, model.predict(test.features_only()), truth);

  std::vector<CpiResult> results;
  results.reserve(groups.size());
  for (const auto& group : groups) {
    std::map<std::string, std::vector<double>> replacement;
    for (const auto& name : group.columns) {
      replacement[name] = knockoffs.features.column(knockoffs.features.column_index(name));
    }
    const Dataset substituted = test.features_only().with_replaced_columns(replacement);
    const auto substituted_losses = instance_loss(loss, model.predict(substituted), truth);
    const auto delta =
        detail::delta_from_losses(substituted_losses, original_losses, config.orientation);

    const TTestResult tt = paired_t_test_one_sided(delta, config.alpha);
    CpiResult res;
    res.group = group.id;
    res.cpi = tt.mean;
    res.se = tt.se;
    res.t = tt.t;
    res.p_one_sided = tt.p_one_sided;
    res.ci_lower = tt.ci_lower;
    res.n_test = tt.n;
    results.push_back(std::move(res));
  }

  std::vector<double> p(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) p[i] = results[i].p_one_sided;
  const auto adjusted = holm_adjust(p);
  for (std::size_t i = 0; i < results.size(); ++i) results[i].p_adjusted = adjusted[i];
  return results;
}

}  // namespace cfi
