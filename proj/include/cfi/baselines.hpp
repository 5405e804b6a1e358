#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "cfi/core.hpp"
#include "cfi/cpi.hpp"
#include "cfi/learners.hpp"
#include "cfi/stats.hpp"
#include "cfi/tabular.hpp"

namespace cfi {

struct FiScore {
  std::string group;
  double score = 0.0;
  std::string method;  // "pfi" | "loco"
  std::optional<double> t;
  std::optional<double> p_one_sided;
  std::optional<double> p_adjusted;
  std::optional<double> ci_lower;
  std::size_t n_test = 0;
};

// Permutation feature importance: mean loss increase when the group's columns
// are jointly row-permuted in the test data, averaged over repeats. All
// columns of a group share one permutation so one-hot blocks stay valid.
inline std::vector<FiScore> pfi_analyze(const Model& model, const Dataset& test, LossKind loss,
                                        const std::vector<FeatureGroup>& groups,
                                        int n_permutations, Rng& rng) {
  if (groups.empty()) throw DataError("pfi_analyze: no feature groups");
  if (n_permutations < 1) throw DataError("pfi_analyze: need at least one permutation");
  validate_groups(test, groups);
  const auto& truth = test.target().values;
  const std::size_t n = test.n_rows();
  const double base_loss = mean(instance_loss(loss, model.predict(test.features_only()), truth));

  std::vector<FiScore> out;
  out.reserve(groups.size());
  for (const auto& group : groups) {
    double acc = 0.0;
    for (int rep = 0; rep < n_permutations; ++rep) {
      std::vector<std::size_t> perm(n);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      std::map<std::string, std::vector<double>> replacement;
      for (const auto& name : group.columns) {
        const auto& col = test.column(test.column_index(name));
        std::vector<double> permuted(n);
        for (std::size_t i = 0; i < n; ++i) permuted[i] = col[perm[i]];
        replacement[name] = std::move(permuted);
      }
      const Dataset permuted_ds = test.features_only().with_replaced_columns(replacement);
      acc += mean(instance_loss(loss, model.predict(permuted_ds), truth)) - base_loss;
    }
    FiScore score;
    score.group = group.id;
    score.method = "pfi";
    score.score = acc / static_cast<double>(n_permutations);
    score.n_test = n;
    out.push_back(std::move(score));
  }
  return out;
}

inline FiScore pfi(const Model& model, const Dataset& test, LossKind loss,
                   const FeatureGroup& group, int n_permutations, Rng& rng) {
  return pfi_analyze(model, test, loss, {group}, n_permutations, rng).front();
}

// Leave-one-covariate-out: refit without the group's columns, compare
// instance-wise losses against the full model, test one-sided and
// Holm-adjust across groups. The full fit is shared; each reduced fit gets a
// derived seed of its own.
inline std::vector<FiScore> loco_analyze(const Model& full_model, const LearnerSpec& spec,
                                         const Dataset& train, const Dataset& test, LossKind loss,
                                         const std::vector<FeatureGroup>& groups, double alpha,
                                         Rng& rng) {
  if (groups.empty()) throw DataError("loco_analyze: no feature groups");
  validate_groups(test, groups);
  const auto& truth = test.target().values;
  const std::uint64_t base_seed = rng();

  const auto full_losses = instance_loss(loss, full_model.predict(test.features_only()), truth);

  std::vector<FiScore> out;
  out.reserve(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    if (group.columns.size() >= train.n_features())
      throw DataError("loco: removing group '" + group.id + "' leaves no features");
    const Dataset reduced_train = train.drop_columns(group.columns);
    const Dataset reduced_test = test.drop_columns(group.columns);
    Rng fit_rng = make_rng(derive_seed(base_seed, g + 1));
    const ModelPtr reduced = fit(spec, reduced_train, fit_rng);
    const auto reduced_losses =
        instance_loss(loss, reduced->predict(reduced_test.features_only()), truth);

    std::vector<double> delta(truth.size());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = reduced_losses[i] - full_losses[i];
    const TTestResult tt = paired_t_test_one_sided(delta, alpha);

    FiScore score;
    score.group = group.id;
    score.method = "loco";
    score.score = tt.mean;
    score.t = tt.t;
    score.p_one_sided = tt.p_one_sided;
    score.ci_lower = tt.ci_lower;
    score.n_test = tt.n;
    out.push_back(std::move(score));
  }

  std::vector<double> p(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) p[i] = *out[i].p_one_sided;
  const auto adjusted = holm_adjust(p);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].p_adjusted = adjusted[i];
  return out;
}

inline std::vector<FiScore> loco_analyze(const LearnerSpec& spec, const Dataset& train,
                                         const Dataset& test, LossKind loss,
                                         const std::vector<FeatureGroup>& groups, double alpha,
                                         Rng& rng) {
  Rng full_rng = make_rng(derive_seed(rng(), 0));
  const ModelPtr full = fit(spec, train, full_rng);
  return loco_analyze(*full, spec, train, test, loss, groups, alpha, rng);
}

}  // namespace cfi
