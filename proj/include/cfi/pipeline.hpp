#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cfi/baselines.hpp"
#include "cfi/core.hpp"
#include "cfi/cpi.hpp"
#include "cfi/evalmetrics.hpp"
#include "cfi/knockoffs.hpp"
#include "cfi/learners.hpp"
#include "cfi/simgen.hpp"
#include "cfi/tabular.hpp"

namespace cfi {

enum class Method { cpi_seq, cpi_gauss, pfi, loco };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::cpi_seq: return "cpi-seq";
    case Method::cpi_gauss: return "cpi-gauss";
    case Method::pfi: return "pfi";
    case Method::loco: return "loco";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "cpi-seq") return Method::cpi_seq;
  if (s == "cpi-gauss") return Method::cpi_gauss;
  if (s == "pfi") return Method::pfi;
  if (s == "loco") return Method::loco;
  throw DataError("unknown method '" + s + "' (expected cpi-seq, cpi-gauss, pfi or loco)");
}

struct AnalysisConfig {
  Method method = Method::cpi_seq;
  LearnerSpec learner;
  std::optional<LossKind> loss;  // default by task
  double alpha = 0.05;
  double train_fraction = 2.0 / 3.0;
  int n_permutations = 5;
  std::uint64_t seed = 42;
  DeltaOrientation orientation = DeltaOrientation::knockoff_minus_original;
  SequentialKnockoffConfig sequential;

  nlohmann::json to_json() const {
    return {{"method", to_string(method)},
            {"learner", learner.to_string()},
            {"loss", loss ? (*loss == LossKind::mse ? "mse" : "logloss") : "default"},
            {"alpha", alpha},
            {"train_fraction", train_fraction},
            {"n_permutations", n_permutations},
            {"seed", seed},
            {"delta_orientation", orientation == DeltaOrientation::knockoff_minus_original
                                      ? "knockoff-minus-original"
                                      : "original-minus-knockoff"},
            {"enet_alpha", sequential.enet_alpha},
            {"enet_lambda_grid", sequential.n_lambda},
            {"enet_lambda_min_ratio", sequential.lambda_min_ratio},
            {"enet_cv_folds", sequential.n_folds},
            {"min_level_count", sequential.min_level_count}};
  }
};

struct FeatureResult {
  std::string group;
  double score = 0.0;
  std::optional<double> se;
  std::optional<double> t;
  std::optional<double> p_one_sided;
  std::optional<double> p_adjusted;
  std::optional<double> ci_lower;
  std::size_t n_test = 0;
};

struct AnalysisResult {
  std::string method;
  std::vector<FeatureResult> features;
  double model_value = 0.0;     // test R^2 or accuracy of the fitted model
  std::string model_metric;     // "r2" | "accuracy"
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

namespace detail {

inline FeatureResult from_cpi(const CpiResult& r) {
  FeatureResult f;
  f.group = r.group;
  f.score = r.cpi;
  f.se = r.se;
  f.t = r.t;
  f.p_one_sided = r.p_one_sided;
  f.p_adjusted = r.p_adjusted;
  f.ci_lower = r.ci_lower;
  f.n_test = r.n_test;
  return f;
}

inline FeatureResult from_fi(const FiScore& s) {
  FeatureResult f;
  f.group = s.group;
  f.score = s.score;
  f.t = s.t;
  f.p_one_sided = s.p_one_sided;
  f.p_adjusted = s.p_adjusted;
  f.ci_lower = s.ci_lower;
  f.n_test = s.n_test;
  return f;
}

}  // namespace detail

// Splits, fits, runs the requested importance method over per-column groups.
// Results are a pure function of (data, config); the seed drives the split,
// the model fit and the method's randomness through derived sub-streams.
inline AnalysisResult run_analysis(const Dataset& full, const AnalysisConfig& config) {
  if (!full.has_target()) throw DataError("run_analysis: dataset has no target column");
  Rng split_rng = make_rng(derive_seed(config.seed, 1));
  const auto [train, test] = split(full, config.train_fraction, split_rng);

  AnalysisResult out;
  out.method = to_string(config.method);
  out.n_train = train.n_rows();
  out.n_test = test.n_rows();

  const bool encode = config.method == Method::cpi_gauss;
  const Dataset model_train = encode ? to_encoded_dataset(train) : train;
  const Dataset model_test = encode ? to_encoded_dataset(test) : test;
  std::vector<FeatureGroup> groups;
  if (encode) {
    for (const auto& [name, columns] : encoded_name_groups(train)) groups.push_back({name, columns});
  } else {
    groups = per_column_groups(train);
  }

  Rng fit_rng = make_rng(derive_seed(config.seed, 2));
  const ModelPtr model = fit(config.learner, model_train, fit_rng);
  const LossKind loss = config.loss.value_or(default_loss(model->task()));
  Rng method_rng = make_rng(derive_seed(config.seed, 3));

  switch (config.method) {
    case Method::cpi_seq:
    case Method::cpi_gauss: {
      CpiConfig cpi_config;
      cpi_config.sampler =
          config.method == Method::cpi_seq ? KnockoffKind::sequential : KnockoffKind::gaussian;
      cpi_config.loss = loss;
      cpi_config.alpha = config.alpha;
      cpi_config.orientation = config.orientation;
      cpi_config.sequential = config.sequential;
      for (const auto& r : cpi_analyze(*model, model_test, cpi_config, groups, method_rng)) {
        out.features.push_back(detail::from_cpi(r));
      }
      break;
    }
    case Method::pfi: {
      for (const auto& s :
           pfi_analyze(*model, model_test, loss, groups, config.n_permutations, method_rng)) {
        out.features.push_back(detail::from_fi(s));
      }
      break;
    }
    case Method::loco: {
      for (const auto& s : loco_analyze(*model, config.learner, model_train, model_test, loss,
                                        groups, config.alpha, method_rng)) {
        out.features.push_back(detail::from_fi(s));
      }
      break;
    }
  }

  out.model_value = evaluate(*model, model_test);
  out.model_metric = model->task() == Task::classification ? "accuracy" : "r2";
  return out;
}

inline std::uint64_t config_hash(const nlohmann::json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Run metadata stamped into every output file.
inline nlohmann::json run_metadata(const nlohmann::json& config) {
  return {{"library", "cfi"},
          {"version", version()},
          {"config", config},
          {"config_hash", config_hash(config)},
          {"conventions",
           {{"auc_ties", "half-count"}, {"top_k_tie_break", "feature-index"}}}};
}

struct ResultIoOptions {
  bool write_json = true;
  bool write_csv = true;
};

inline nlohmann::json analysis_to_json(const AnalysisResult& result,
                                       const nlohmann::json& metadata) {
  const bool is_cpi = result.method.rfind("cpi", 0) == 0;
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : result.features) {
    nlohmann::json item{{"group", f.group}, {"score", f.score}, {"n_test", f.n_test}};
    if (is_cpi) item["cpi"] = f.score;
    if (f.se) item["se"] = *f.se;
    if (f.t) item["t"] = *f.t;
    if (f.p_one_sided) item["p"] = *f.p_one_sided;
    if (f.p_adjusted) item["p_adjusted"] = *f.p_adjusted;
    if (f.ci_lower) item["ci_lower"] = *f.ci_lower;
    features.push_back(std::move(item));
  }
  return {{"metadata", metadata},
          {"method", result.method},
          {"model_metric", result.model_metric},
          {"model_value", result.model_value},
          {"n_train", result.n_train},
          {"n_test", result.n_test},
          {"features", std::move(features)}};
}

inline void write_analysis_csv(const std::string& path, const AnalysisResult& result,
                               const nlohmann::json& metadata) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "# " << metadata.dump() << "\n";
  out << "group,method,score,se,t,p,p_adjusted,ci_lower,n_test\n";
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string();
    std::ostringstream ss;
    ss.precision(17);
    ss << *v;
    return ss.str();
  };
  for (const auto& f : result.features) {
    std::ostringstream score;
    score.precision(17);
    score << f.score;
    out << f.group << ',' << result.method << ',' << score.str() << ',' << opt(f.se) << ','
        << opt(f.t) << ',' << opt(f.p_one_sided) << ',' << opt(f.p_adjusted) << ','
        << opt(f.ci_lower) << ',' << f.n_test << "\n";
  }
}

// ---------------------------------------------------------------------------
// Benchmark grid: replicate x sample-size x method, replicate-level workers.

struct BenchmarkConfig {
  std::string scenario = "dag";  // "dag" | "grid"
  DagScenarioConfig dag;
  GridScenarioConfig grid;
  std::vector<std::size_t> ns{1000};
  std::vector<Method> methods{Method::cpi_seq};
  std::size_t replicates = 100;
  std::uint64_t seed = 42;
  int workers = 1;
  double alpha = 0.05;
  LearnerSpec learner;
  std::optional<LossKind> loss;
  DeltaOrientation orientation = DeltaOrientation::knockoff_minus_original;
  SequentialKnockoffConfig sequential;

  nlohmann::json to_json() const {
    nlohmann::json methods_json = nlohmann::json::array();
    for (Method m : methods) methods_json.push_back(to_string(m));
    nlohmann::json j{{"scenario", scenario},
                     {"ns", ns},
                     {"methods", methods_json},
                     {"replicates", replicates},
                     {"seed", seed},
                     {"alpha", alpha},
                     {"learner", learner.to_string()},
                     {"loss", loss ? (*loss == LossKind::mse ? "mse" : "logloss") : "default"},
                     {"delta_orientation", orientation == DeltaOrientation::knockoff_minus_original
                                               ? "knockoff-minus-original"
                                               : "original-minus-knockoff"},
                     {"enet_alpha", sequential.enet_alpha},
                     {"enet_lambda_grid", sequential.n_lambda},
                     {"enet_lambda_min_ratio", sequential.lambda_min_ratio},
                     {"enet_cv_folds", sequential.n_folds},
                     {"min_level_count", sequential.min_level_count}};
    if (scenario == "dag") {
      j["beta"] = dag.beta;
      j["target"] = dag.target == Task::regression ? "regression" : "classification";
      j["levels"] = {dag.x1_levels, dag.x2_levels, dag.x3_levels, dag.x4_levels};
    } else {
      j["rho"] = grid.rho;
      j["c"] = grid.cardinality;
      j["target"] = grid.target == Task::regression ? "regression" : "classification";
    }
    return j;
  }
};

struct BenchmarkRow {
  std::size_t n = 0;
  std::string method;
  std::size_t replicate = 0;
  std::string feature;  // "_model" for model-level metrics, "_done" sentinel
  std::string metric;   // score | p | p_adjusted | model_value | oracle_value | replicate_done
  double value = 0.0;
};

namespace detail {

inline GeneratedData benchmark_generate(const BenchmarkConfig& config, std::size_t n,
                                        std::uint64_t replicate_seed) {
  Rng rng = make_rng(derive_seed(replicate_seed, 0xD474ULL + n));
  if (config.scenario == "dag") {
    DagScenarioConfig c = config.dag;
    c.n = n;
    return gen_dag(c, rng);
  }
  if (config.scenario == "grid") {
    GridScenarioConfig c = config.grid;
    c.n = n;
    return gen_grid(c, rng);
  }
  throw DataError("unknown scenario '" + config.scenario + "'");
}

inline std::vector<BenchmarkRow> benchmark_replicate(const BenchmarkConfig& config, std::size_t n,
                                                     std::size_t replicate) {
  const std::uint64_t replicate_seed = config.seed + replicate;  // documented derivation
  const GeneratedData gen = benchmark_generate(config, n, replicate_seed);

  std::vector<BenchmarkRow> rows;
  for (Method method : config.methods) {
    AnalysisConfig a;
    a.method = method;
    a.learner = config.learner;
    a.loss = config.loss;
    a.alpha = config.alpha;
    a.seed = derive_seed(replicate_seed, 0xA11AULL + n);  // shared across methods: paired runs
    a.orientation = config.orientation;
    a.sequential = config.sequential;
    const AnalysisResult res = run_analysis(gen.dataset, a);
    for (const auto& f : res.features) {
      rows.push_back({n, res.method, replicate, f.group, "score", f.score});
      if (f.p_one_sided) rows.push_back({n, res.method, replicate, f.group, "p", *f.p_one_sided});
      if (f.p_adjusted)
        rows.push_back({n, res.method, replicate, f.group, "p_adjusted", *f.p_adjusted});
    }
    rows.push_back({n, res.method, replicate, "_model", "model_value", res.model_value});
    rows.push_back({n, res.method, replicate, "_model", "oracle_value", gen.oracle_value});
  }
  rows.push_back({n, "", replicate, "_done", "replicate_done", 1.0});
  return rows;
}

}  // namespace detail

// Streams long-format rows; used for the incremental flush and for resuming.
class BenchmarkRowSink {
 public:
  BenchmarkRowSink(const std::string& path, const std::string& scenario,
                   const nlohmann::json& metadata, bool resume)
      : scenario_(scenario) {
    if (resume && std::ifstream(path).good()) load_existing(path);
    out_.open(path, resume && !existing_.empty() ? std::ios::app : std::ios::trunc);
    if (!out_) throw DataError("cannot write '" + path + "'");
    if (existing_.empty()) {
      out_ << "# " << metadata.dump() << "\n";
      out_ << "scenario,n,method,replicate,feature,metric,value\n";
    }
  }

  bool done(std::size_t n, std::size_t replicate) const {
    return completed_.count(key(n, replicate)) > 0;
  }

  void append(const std::vector<BenchmarkRow>& rows) {
    for (const auto& r : rows) {
      std::ostringstream value;
      value.precision(17);
      value << r.value;
      out_ << scenario_ << ',' << r.n << ',' << r.method << ',' << r.replicate << ','
           << r.feature << ',' << r.metric << ',' << value.str() << "\n";
      existing_.push_back(r);
    }
    out_.flush();
  }

  const std::vector<BenchmarkRow>& rows() const { return existing_; }

 private:
  static std::string key(std::size_t n, std::size_t replicate) {
    return std::to_string(n) + ":" + std::to_string(replicate);
  }

  void load_existing(const std::string& path) {
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line.rfind("scenario,", 0) == 0) continue;
      std::istringstream ss(line);
      std::string scenario, n_s, method, rep_s, feature, metric, value_s;
      if (!std::getline(ss, scenario, ',') || !std::getline(ss, n_s, ',') ||
          !std::getline(ss, method, ',') || !std::getline(ss, rep_s, ',') ||
          !std::getline(ss, feature, ',') || !std::getline(ss, metric, ',') ||
          !std::getline(ss, value_s, ',')) {
        continue;
      }
      BenchmarkRow row{std::stoull(n_s), method, std::stoull(rep_s), feature, metric,
                       std::stod(value_s)};
      existing_.push_back(row);
      if (row.metric == "replicate_done") completed_.insert(key(row.n, row.replicate));
    }
  }

  std::string scenario_;
  std::ofstream out_;
  std::vector<BenchmarkRow> existing_;
  std::set<std::string> completed_;
};

struct BenchmarkSummary {
  // (n, method) -> aggregate over replicates
  std::map<std::pair<std::size_t, std::string>, AggregateSummary> cells;
};

// Rebuild replicate outcomes from long rows and aggregate each (n, method).
inline BenchmarkSummary summarize_benchmark(const std::vector<BenchmarkRow>& rows,
                                            const std::vector<std::string>& features,
                                            const std::vector<bool>& relevant, double alpha) {
  struct Cell {
    std::map<std::size_t, ReplicateOutcome> by_replicate;
  };
  std::map<std::pair<std::size_t, std::string>, Cell> cells;
  for (const auto& r : rows) {
    if (r.feature == "_done") continue;
    auto& cell = cells[{r.n, r.method}];
    auto& outcome = cell.by_replicate[r.replicate];
    if (outcome.features.empty()) {
      outcome.replicate = r.replicate;
      outcome.features = features;
      outcome.relevant = relevant;
      outcome.scores.assign(features.size(), 0.0);
    }
    if (r.feature == "_model") {
      if (r.metric == "model_value") outcome.model_value = r.value;
      if (r.metric == "oracle_value") outcome.oracle_value = r.value;
      continue;
    }
    const auto it = std::find(features.begin(), features.end(), r.feature);
    if (it == features.end()) throw DataError("benchmark rows mention unknown feature " + r.feature);
    const auto j = static_cast<std::size_t>(it - features.begin());
    if (r.metric == "score") {
      outcome.scores[j] = r.value;
    } else if (r.metric == "p") {
      if (!outcome.p_values) outcome.p_values = std::vector<double>(features.size(), 1.0);
      (*outcome.p_values)[j] = r.value;
    } else if (r.metric == "p_adjusted") {
      if (!outcome.p_values_adjusted)
        outcome.p_values_adjusted = std::vector<double>(features.size(), 1.0);
      (*outcome.p_values_adjusted)[j] = r.value;
    }
  }
  BenchmarkSummary summary;
  for (auto& [key, cell] : cells) {
    std::vector<ReplicateOutcome> outcomes;
    outcomes.reserve(cell.by_replicate.size());
    for (auto& [rep, outcome] : cell.by_replicate) outcomes.push_back(std::move(outcome));
    summary.cells.emplace(key, aggregate(outcomes, alpha));
  }
  return summary;
}

inline void write_benchmark_summary(const std::string& csv_path, const std::string& json_path,
                                    const std::string& scenario, const BenchmarkSummary& summary,
                                    const nlohmann::json& metadata) {
  std::ofstream csv(csv_path);
  if (!csv) throw DataError("cannot write '" + csv_path + "'");
  csv << "# " << metadata.dump() << "\n";
  csv << "scenario,n,method,feature,metric,value\n";
  csv.precision(12);
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [key, agg] : summary.cells) {
    const auto& [n, method] = key;
    for (const auto& f : agg.per_feature) {
      csv << scenario << ',' << n << ',' << method << ',' << f.feature << ",mean_score,"
          << f.mean_score << "\n";
      csv << scenario << ',' << n << ',' << method << ',' << f.feature << ",sd_score,"
          << f.sd_score << "\n";
      csv << scenario << ',' << n << ',' << method << ',' << f.feature << ",top_k_rate,"
          << f.top_k_rate << "\n";
      if (!std::isnan(f.rejection)) {
        csv << scenario << ',' << n << ',' << method << ',' << f.feature << ",rejection_rate,"
            << f.rejection << "\n";
      }
      if (!std::isnan(f.rejection_adjusted)) {
        csv << scenario << ',' << n << ',' << method << ',' << f.feature
            << ",rejection_rate_adjusted," << f.rejection_adjusted << "\n";
      }
    }
    csv << scenario << ',' << n << ',' << method << ",_all,auc_mean," << agg.auc_mean << "\n";
    csv << scenario << ',' << n << ',' << method << ",_all,auc_sd," << agg.auc_sd << "\n";
    csv << scenario << ',' << n << ',' << method << ",_all,sensitivity," << agg.sensitivity_mean
        << "\n";
    csv << scenario << ',' << n << ',' << method << ",_all,one_minus_specificity,"
        << agg.one_minus_specificity_mean << "\n";
    if (agg.discrepancy) {
      csv << scenario << ',' << n << ',' << method << ",_model,discrepancy_mean,"
          << agg.discrepancy->mean << "\n";
      csv << scenario << ',' << n << ',' << method << ",_model,discrepancy_sd,"
          << agg.discrepancy->sd << "\n";
    }

    nlohmann::json cell{{"scenario", scenario},
                        {"n", n},
                        {"method", method},
                        {"n_replicates", agg.n_replicates},
                        {"auc_mean", agg.auc_mean},
                        {"auc_sd", agg.auc_sd},
                        {"sensitivity", agg.sensitivity_mean},
                        {"one_minus_specificity", agg.one_minus_specificity_mean}};
    nlohmann::json per_feature = nlohmann::json::array();
    for (const auto& f : agg.per_feature) {
      nlohmann::json fj{{"feature", f.feature},
                        {"relevant", f.relevant},
                        {"mean_score", f.mean_score},
                        {"sd_score", f.sd_score},
                        {"top_k_rate", f.top_k_rate}};
      if (!std::isnan(f.rejection)) fj["rejection_rate"] = f.rejection;
      if (!std::isnan(f.rejection_adjusted)) fj["rejection_rate_adjusted"] = f.rejection_adjusted;
      per_feature.push_back(std::move(fj));
    }
    cell["per_feature"] = std::move(per_feature);
    if (agg.discrepancy) {
      cell["discrepancy"] = {{"mean", agg.discrepancy->mean},
                             {"sd", agg.discrepancy->sd},
                             {"q25", agg.discrepancy->q25},
                             {"median", agg.discrepancy->median},
                             {"q75", agg.discrepancy->q75}};
    }
    cells.push_back(std::move(cell));
  }
  std::ofstream js(json_path);
  if (!js) throw DataError("cannot write '" + json_path + "'");
  js << nlohmann::json{{"metadata", metadata}, {"summary", std::move(cells)}}.dump(2) << "\n";
}

// Runs the replicate grid with a replicate-level worker pool. Results are a
// pure function of (config, seed): each replicate owns derived sub-seeds and
// rows are flushed in deterministic (n, replicate) order.
inline BenchmarkSummary run_benchmark(const BenchmarkConfig& config, BenchmarkRowSink& sink) {
  if (config.replicates < 1) throw DataError("run_benchmark: need at least one replicate");
  if (config.methods.empty()) throw DataError("run_benchmark: no methods requested");

  struct Job {
    std::size_t n;
    std::size_t replicate;
  };
  std::vector<Job> jobs;
  for (std::size_t n : config.ns) {
    for (std::size_t r = 0; r < config.replicates; ++r) {
      if (!sink.done(n, r)) jobs.push_back({n, r});
    }
  }

  std::mutex mutex;
  std::condition_variable cv;
  std::map<std::size_t, std::vector<BenchmarkRow>> finished;  // job index -> rows
  std::size_t next_flush = 0;
  std::atomic<std::size_t> next_job{0};
  std::exception_ptr failure;

  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next_job.fetch_add(1);
      if (idx >= jobs.size()) return;
      std::vector<BenchmarkRow> rows;
      try {
        rows = detail::benchmark_replicate(config, jobs[idx].n, jobs[idx].replicate);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mutex);
        if (!failure) failure = std::current_exception();
        cv.notify_all();
        return;
      }
      std::unique_lock<std::mutex> lock(mutex);
      finished.emplace(idx, std::move(rows));
      while (!finished.empty() && finished.begin()->first == next_flush) {
        sink.append(finished.begin()->second);
        finished.erase(finished.begin());
        ++next_flush;
      }
      cv.notify_all();
    }
  };

  const int n_workers = std::max(1, config.workers);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  {
    // flush any stragglers in order (only reachable if a worker exited early)
    std::lock_guard<std::mutex> lock(mutex);
    while (!finished.empty() && finished.begin()->first == next_flush) {
      sink.append(finished.begin()->second);
      finished.erase(finished.begin());
      ++next_flush;
    }
  }

  // ground truth flags for the summary come from a reference generation
  const GeneratedData reference =
      detail::benchmark_generate(config, config.ns.front(), config.seed);
  std::vector<std::string> features;
  for (const auto& col : reference.dataset.schema()) features.push_back(col.name);
  return summarize_benchmark(sink.rows(), features, reference.relevant, config.alpha);
}

}  // namespace cfi
