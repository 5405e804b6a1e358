#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cfi/core.hpp"
#include "cfi/knockoffs.hpp"
#include "cfi/pipeline.hpp"
#include "cfi/simgen.hpp"
#include "cfi/tabular.hpp"

#include <CLI11.hpp>
#include <json.hpp>

// httplib must come after Eigen (pulled in through the headers above); its
// transitive system includes define macros that clash with Eigen internals
#include <httplib.h>

#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
#include <openssl/evp.h>
#endif

namespace cfi::cli {

// Flat or nested JSON config files: {"analyze": {"alpha": 0.1}, "seed": 7}.
// Command-line flags override file values (CLI11 precedence rules).
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    nlohmann::json j = nlohmann::json::object();
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_lnames().empty() && opt->get_configurable()) {
        if (!opt->results().empty()) {
          j[opt->get_lnames()[0]] = opt->results().size() == 1 ? nlohmann::json(opt->results()[0])
                                                               : nlohmann::json(opt->results());
        } else if (default_also) {
          j[opt->get_lnames()[0]] = opt->get_default_str();
        }
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const std::exception& e) {
      throw CLI::FileError(std::string("invalid JSON config: ") + e.what());
    }
    std::vector<CLI::ConfigItem> output;
    flatten(j, {}, output);
    return output;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    return v.is_string() ? v.get<std::string>() : v.dump();
  }

  static void flatten(const nlohmann::json& j, std::vector<std::string> parents,
                      std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto nested = parents;
        nested.push_back(key);
        flatten(value, nested, out);
      } else {
        CLI::ConfigItem item;
        item.parents = parents;
        item.name = key;
        if (value.is_array()) {
          for (const auto& e : value) item.inputs.push_back(scalar(e));
        } else {
          item.inputs.push_back(scalar(value));
        }
        out.push_back(std::move(item));
      }
    }
  }
};

inline void write_dataset_csv(const std::string& path, const Dataset& ds,
                              const nlohmann::json& metadata) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "# " << metadata.dump() << "\n";
  for (std::size_t j = 0; j < ds.n_features(); ++j) {
    out << ds.schema(j).name << ',';
  }
  if (!ds.has_target()) throw DataError("write_dataset_csv: dataset has no target");
  out << ds.target().name << "\n";
  out.precision(17);
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
      const auto& schema = ds.schema(j);
      if (schema.is_categorical()) {
        out << schema.levels[static_cast<std::size_t>(ds.column(j)[i])];
      } else {
        out << ds.column(j)[i];
      }
      out << ',';
    }
    out << ds.target().values[i] << "\n";
  }
}

#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
inline std::string sha256_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw NumericError("sha256 init failed");
  char buffer[1 << 16];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buffer, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}
#endif

struct FetchOptions {
  std::string url;
  std::string out_path;
  std::string sha256;  // optional expected hex digest
  int timeout_seconds = 60;
};

// Plain HTTP(S) file download with optional checksum verification. The file
// is removed again when the digest does not match.
inline void cmd_fetch(const FetchOptions& opt) {
  const auto scheme_end = opt.url.find("://");
  if (scheme_end == std::string::npos) throw DataError("invalid URL '" + opt.url + "'");
  const std::string scheme = opt.url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw DataError("unsupported scheme '" + scheme + "'");
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (scheme == "https") throw DataError("https requires a TLS-enabled build");
#endif
  const auto path_start = opt.url.find('/', scheme_end + 3);
  const std::string base = path_start == std::string::npos ? opt.url : opt.url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : opt.url.substr(path_start);

  httplib::Client client(base);
  client.set_follow_location(true);
  client.set_connection_timeout(opt.timeout_seconds);
  client.set_read_timeout(opt.timeout_seconds);
  const auto res = client.Get(path);
  if (!res) throw DataError("network failure fetching '" + opt.url + "': " +
                            httplib::to_string(res.error()));
  if (res->status != 200)
    throw DataError("fetch of '" + opt.url + "' returned HTTP " + std::to_string(res->status));

  {
    std::ofstream out(opt.out_path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + opt.out_path + "'");
    out << res->body;
  }
  if (!opt.sha256.empty()) {
#ifdef CPPHTTPLIB_OPENSSL_SUPPORT
    std::string actual = sha256_hex(opt.out_path);
    std::string expected = opt.sha256;
    std::transform(expected.begin(), expected.end(), expected.begin(), ::tolower);
    if (actual != expected) {
      std::remove(opt.out_path.c_str());
      throw DataError("checksum mismatch for '" + opt.out_path + "': got " + actual);
    }
#else
    throw DataError("checksum verification requires a TLS-enabled build");
#endif
  }
}

namespace detail {

inline LossKind parse_loss(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "logloss" || s == "log_loss") return LossKind::log_loss;
  throw DataError("unknown loss '" + s + "'");
}

inline Task parse_task(const std::string& s) {
  if (s == "regression") return Task::regression;
  if (s == "classification") return Task::classification;
  throw DataError("unknown target type '" + s + "'");
}

inline DeltaOrientation parse_orientation(const std::string& s) {
  if (s == "knockoff-minus-original") return DeltaOrientation::knockoff_minus_original;
  if (s == "original-minus-knockoff") return DeltaOrientation::original_minus_knockoff;
  throw DataError("unknown delta orientation '" + s + "'");
}

struct AnalyzeArgs {
  std::string data_path;
  std::string schema_path;
  std::string target;
  std::string learner = "rf";
  std::string method = "cpi-seq";
  std::string loss = "default";
  std::string orientation = "knockoff-minus-original";
  double alpha = 0.05;
  double train_fraction = 2.0 / 3.0;
  int n_permutations = 5;
  int min_level_count = 5;
  std::uint64_t seed = 42;
  std::string out_prefix = "analysis";
};

inline int cmd_analyze(const AnalyzeArgs& args) {
  auto schema = read_schema_json(args.schema_path);
  // the target may be listed in the schema file; features exclude it
  std::vector<ColumnSchema> features;
  for (auto& col : schema) {
    if (col.name != args.target) features.push_back(col);
  }
  const Dataset full = read_csv(args.data_path, features, args.target);

  AnalysisConfig config;
  config.method = parse_method(args.method);
  config.learner = parse_learner_spec(args.learner);
  if (args.loss != "default") config.loss = parse_loss(args.loss);
  config.alpha = args.alpha;
  config.train_fraction = args.train_fraction;
  config.n_permutations = args.n_permutations;
  config.seed = args.seed;
  config.orientation = parse_orientation(args.orientation);
  config.sequential.min_level_count = args.min_level_count;

  const AnalysisResult result = run_analysis(full, config);
  nlohmann::json meta_config = config.to_json();
  meta_config["data"] = args.data_path;
  const nlohmann::json metadata = run_metadata(meta_config);

  {
    std::ofstream js(args.out_prefix + ".json");
    if (!js) throw DataError("cannot write '" + args.out_prefix + ".json'");
    js << analysis_to_json(result, metadata).dump(2) << "\n";
  }
  write_analysis_csv(args.out_prefix + ".csv", result, metadata);

  std::cout << "method " << result.method << ", " << result.model_metric << " = "
            << result.model_value << " (n_train " << result.n_train << ", n_test "
            << result.n_test << ")\n";
  for (const auto& f : result.features) {
    std::cout << "  " << f.group << ": score " << f.score;
    if (f.p_one_sided) std::cout << ", p " << *f.p_one_sided;
    if (f.p_adjusted) std::cout << ", p_adj " << *f.p_adjusted;
    std::cout << "\n";
  }
  return 0;
}

struct SimulateArgs {
  std::string scenario = "dag";
  std::size_t n = 1000;
  double beta = 0.5;
  double rho = 0.8;
  int cardinality = 5;
  int x1_levels = 0;
  int x2_levels = 0;
  int x3_levels = 0;
  int x4_levels = 0;
  std::string target = "regression";
  std::uint64_t seed = 42;
  std::string out_prefix = "sim";
};

inline int cmd_simulate(const SimulateArgs& args) {
  Rng rng = make_rng(derive_seed(args.seed, 0xD474ULL + args.n));
  GeneratedData gen = [&] {
    if (args.scenario == "dag") {
      DagScenarioConfig config;
      config.n = args.n;
      config.beta = args.beta;
      config.target = parse_task(args.target);
      config.x1_levels = args.x1_levels;
      config.x2_levels = args.x2_levels;
      config.x3_levels = args.x3_levels;
      config.x4_levels = args.x4_levels;
      return gen_dag(config, rng);
    }
    if (args.scenario == "grid") {
      GridScenarioConfig config;
      config.n = args.n;
      config.rho = args.rho;
      config.cardinality = args.cardinality;
      config.target = parse_task(args.target);
      return gen_grid(config, rng);
    }
    throw DataError("unknown scenario '" + args.scenario + "'");
  }();

  const nlohmann::json metadata = run_metadata({{"command", "simulate"},
                                                {"scenario", args.scenario},
                                                {"n", args.n},
                                                {"beta", args.beta},
                                                {"rho", args.rho},
                                                {"c", args.cardinality},
                                                {"target", args.target},
                                                {"seed", args.seed}});
  write_dataset_csv(args.out_prefix + ".csv", gen.dataset, metadata);
  {
    std::ofstream js(args.out_prefix + ".schema.json");
    if (!js) throw DataError("cannot write schema file");
    nlohmann::json schema = schema_to_json(gen.dataset.schema());
    schema.push_back({{"name", gen.dataset.target().name},
                      {"kind", gen.dataset.target().binary ? "binary" : "continuous"}});
    js << schema.dump(2) << "\n";
  }
  {
    std::ofstream js(args.out_prefix + ".truth.json");
    if (!js) throw DataError("cannot write truth file");
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t j = 0; j < gen.dataset.n_features(); ++j) {
      features.push_back({{"name", gen.dataset.schema(j).name},
                          {"relevant", static_cast<bool>(gen.relevant[j])},
                          {"conditional_null", static_cast<bool>(gen.conditional_null[j])}});
    }
    js << nlohmann::json{{"metadata", metadata},
                         {"oracle_value", gen.oracle_value},
                         {"features", std::move(features)}}
              .dump(2)
       << "\n";
  }
  std::cout << "wrote " << args.out_prefix << ".csv (" << gen.dataset.n_rows() << " rows, "
            << gen.dataset.n_features() << " features)\n";
  return 0;
}

struct BenchmarkArgs {
  std::string scenario = "dag";
  std::vector<std::size_t> ns{1000};
  std::vector<std::string> methods{"cpi-seq"};
  std::size_t replicates = 100;
  double beta = 0.5;
  double rho = 0.8;
  int cardinality = 5;
  int x1_levels = 0;
  int x2_levels = 0;
  int x3_levels = 0;
  int x4_levels = 0;
  std::string target = "regression";
  std::string learner = "rf";
  std::string loss = "default";
  std::string orientation = "knockoff-minus-original";
  double alpha = 0.05;
  std::uint64_t seed = 42;
  int workers = 1;
  bool resume = false;
  std::string out_prefix = "benchmark";
};

inline int cmd_benchmark(const BenchmarkArgs& args) {
  BenchmarkConfig config;
  config.scenario = args.scenario;
  config.ns = args.ns;
  config.methods.clear();
  for (const auto& m : args.methods) config.methods.push_back(parse_method(m));
  config.replicates = args.replicates;
  config.seed = args.seed;
  config.workers = args.workers;
  config.alpha = args.alpha;
  config.learner = parse_learner_spec(args.learner);
  if (args.loss != "default") config.loss = parse_loss(args.loss);
  config.orientation = parse_orientation(args.orientation);
  config.dag.beta = args.beta;
  config.dag.target = parse_task(args.target);
  config.dag.x1_levels = args.x1_levels;
  config.dag.x2_levels = args.x2_levels;
  config.dag.x3_levels = args.x3_levels;
  config.dag.x4_levels = args.x4_levels;
  config.grid.rho = args.rho;
  config.grid.cardinality = args.cardinality;
  config.grid.target = parse_task(args.target);

  const nlohmann::json metadata = run_metadata(config.to_json());
  BenchmarkRowSink sink(args.out_prefix + ".rows.csv", args.scenario, metadata, args.resume);
  const BenchmarkSummary summary = run_benchmark(config, sink);
  write_benchmark_summary(args.out_prefix + ".summary.csv", args.out_prefix + ".summary.json",
                          args.scenario, summary, metadata);
  std::cout << "benchmark complete: " << summary.cells.size() << " (n, method) cells -> "
            << args.out_prefix << ".summary.{csv,json}\n";
  return 0;
}

struct DiagnosticsArgs {
  std::string data_path;
  std::string schema_path;
  std::string sampler = "sequential";
  int min_level_count = 5;
  std::uint64_t seed = 42;
  std::string out_path;  // empty: stdout
};

inline int cmd_knockoff_diagnostics(const DiagnosticsArgs& args) {
  const auto schema = read_schema_json(args.schema_path);
  const Dataset ds = read_csv(args.data_path, schema);
  Rng rng = make_rng(derive_seed(args.seed, 0x0ceaULL));

  KnockoffDiagnostics report;
  if (args.sampler == "sequential") {
    SequentialKnockoffConfig config;
    config.min_level_count = args.min_level_count;
    const auto ko = sample_sequential_knockoffs(ds, config, rng, args.seed);
    report = knockoff_diagnostics(ds, ko.features);
  } else if (args.sampler == "gaussian") {
    const Dataset encoded = to_encoded_dataset(ds);
    const auto ko = sample_gaussian_knockoffs(encoded.features_only(), rng, args.seed);
    report = knockoff_diagnostics(encoded, ko.features);
  } else {
    throw DataError("unknown sampler '" + args.sampler + "'");
  }

  const nlohmann::json out{{"metadata", run_metadata({{"command", "knockoff-diagnostics"},
                                                      {"data", args.data_path},
                                                      {"sampler", args.sampler},
                                                      {"min_level_count", args.min_level_count},
                                                      {"seed", args.seed}})},
                           {"report", report.to_json()}};
  if (args.out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream js(args.out_path);
    if (!js) throw DataError("cannot write '" + args.out_path + "'");
    js << out.dump(2) << "\n";
  }
  return 0;
}

}  // namespace detail

// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"conditional feature importance for mixed tabular data"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file mirroring the flags (flags win)");
  app.require_subcommand(1);

  detail::AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "feature importance on a CSV dataset");
  analyze_cmd->add_option("--data", analyze.data_path, "input CSV")->required();
  analyze_cmd->add_option("--schema", analyze.schema_path, "schema JSON")->required();
  analyze_cmd->add_option("--target", analyze.target, "target column name")->required();
  analyze_cmd->add_option("--learner", analyze.learner, "linear | logistic | rf(trees=...)");
  analyze_cmd->add_option("--method", analyze.method, "importance method")
      ->check(CLI::IsMember({"cpi-seq", "cpi-gauss", "pfi", "loco"}));
  analyze_cmd->add_option("--loss", analyze.loss, "mse | logloss | default");
  analyze_cmd->add_option("--delta-orientation", analyze.orientation,
                          "knockoff-minus-original | original-minus-knockoff")
      ->check(CLI::IsMember({"knockoff-minus-original", "original-minus-knockoff"}));
  analyze_cmd->add_option("--alpha", analyze.alpha, "test level");
  analyze_cmd->add_option("--train-fraction", analyze.train_fraction, "train split fraction");
  analyze_cmd->add_option("--permutations", analyze.n_permutations, "PFI permutation repeats");
  analyze_cmd->add_option("--min-level-count", analyze.min_level_count,
                          "required occurrences per categorical level");
  analyze_cmd->add_option("--seed", analyze.seed, "root seed");
  analyze_cmd->add_option("--out", analyze.out_prefix, "output prefix");

  detail::SimulateArgs simulate;
  auto* simulate_cmd = app.add_subcommand("simulate", "generate a benchmark scenario dataset");
  simulate_cmd->add_option("--scenario", simulate.scenario, "dag | grid")
      ->check(CLI::IsMember({"dag", "grid"}));
  simulate_cmd->add_option("--n", simulate.n, "rows");
  simulate_cmd->add_option("--beta", simulate.beta, "dag effect size");
  simulate_cmd->add_option("--rho", simulate.rho, "grid pair correlation");
  simulate_cmd->add_option("--c", simulate.cardinality, "grid categorical levels");
  simulate_cmd->add_option("--x1-levels", simulate.x1_levels, "dag: categorize X1 (0 = continuous)");
  simulate_cmd->add_option("--x2-levels", simulate.x2_levels, "dag: categorize X2");
  simulate_cmd->add_option("--x3-levels", simulate.x3_levels, "dag: categorize X3");
  simulate_cmd->add_option("--x4-levels", simulate.x4_levels, "dag: categorize X4");
  simulate_cmd->add_option("--target", simulate.target, "regression | classification")
      ->check(CLI::IsMember({"regression", "classification"}));
  simulate_cmd->add_option("--seed", simulate.seed, "root seed");
  simulate_cmd->add_option("--out", simulate.out_prefix, "output prefix");

  detail::BenchmarkArgs benchmark;
  auto* benchmark_cmd = app.add_subcommand("benchmark", "replicate grid over methods and sizes");
  benchmark_cmd->add_option("--scenario", benchmark.scenario, "dag | grid")
      ->check(CLI::IsMember({"dag", "grid"}));
  benchmark_cmd->add_option("--ns", benchmark.ns, "sample sizes")->delimiter(',');
  benchmark_cmd->add_option("--methods", benchmark.methods, "methods to run")->delimiter(',');
  benchmark_cmd->add_option("--replicates", benchmark.replicates, "replicates per cell");
  benchmark_cmd->add_option("--beta", benchmark.beta, "dag effect size");
  benchmark_cmd->add_option("--rho", benchmark.rho, "grid pair correlation");
  benchmark_cmd->add_option("--c", benchmark.cardinality, "grid categorical levels");
  benchmark_cmd->add_option("--x1-levels", benchmark.x1_levels, "dag: categorize X1");
  benchmark_cmd->add_option("--x2-levels", benchmark.x2_levels, "dag: categorize X2");
  benchmark_cmd->add_option("--x3-levels", benchmark.x3_levels, "dag: categorize X3");
  benchmark_cmd->add_option("--x4-levels", benchmark.x4_levels, "dag: categorize X4");
  benchmark_cmd->add_option("--target", benchmark.target, "regression | classification")
      ->check(CLI::IsMember({"regression", "classification"}));
  benchmark_cmd->add_option("--learner", benchmark.learner, "learner spec");
  benchmark_cmd->add_option("--loss", benchmark.loss, "mse | logloss | default");
  benchmark_cmd->add_option("--delta-orientation", benchmark.orientation,
                            "knockoff-minus-original | original-minus-knockoff")
      ->check(CLI::IsMember({"knockoff-minus-original", "original-minus-knockoff"}));
  benchmark_cmd->add_option("--alpha", benchmark.alpha, "test level");
  benchmark_cmd->add_option("--seed", benchmark.seed, "root seed");
  benchmark_cmd->add_option("--workers", benchmark.workers, "replicate-level worker threads");
  benchmark_cmd->add_flag("--resume", benchmark.resume, "skip replicates already in rows.csv");
  benchmark_cmd->add_option("--out", benchmark.out_prefix, "output prefix");

  detail::DiagnosticsArgs diagnostics;
  auto* diagnostics_cmd =
      app.add_subcommand("knockoff-diagnostics", "second-order knockoff validity report");
  diagnostics_cmd->add_option("--data", diagnostics.data_path, "input CSV")->required();
  diagnostics_cmd->add_option("--schema", diagnostics.schema_path, "schema JSON")->required();
  diagnostics_cmd->add_option("--sampler", diagnostics.sampler, "sequential | gaussian")
      ->check(CLI::IsMember({"sequential", "gaussian"}));
  diagnostics_cmd->add_option("--min-level-count", diagnostics.min_level_count,
                              "required occurrences per categorical level");
  diagnostics_cmd->add_option("--seed", diagnostics.seed, "root seed");
  diagnostics_cmd->add_option("--out", diagnostics.out_path, "output JSON (default stdout)");

  FetchOptions fetch;
  auto* fetch_cmd = app.add_subcommand("fetch", "download a file over HTTP(S)");
  fetch_cmd->add_option("--url", fetch.url, "source URL")->required();
  fetch_cmd->add_option("--out", fetch.out_path, "output file")->required();
  fetch_cmd->add_option("--sha256", fetch.sha256, "expected hex digest");
  fetch_cmd->add_option("--timeout", fetch.timeout_seconds, "seconds");

  try {
    app.parse(argc, argv);
    if (analyze_cmd->parsed()) return detail::cmd_analyze(analyze);
    if (simulate_cmd->parsed()) return detail::cmd_simulate(simulate);
    if (benchmark_cmd->parsed()) return detail::cmd_benchmark(benchmark);
    if (diagnostics_cmd->parsed()) return detail::cmd_knockoff_diagnostics(diagnostics);
    if (fetch_cmd->parsed()) {
      cmd_fetch(fetch);
      std::cout << "wrote " << fetch.out_path << "\n";
      return 0;
    }
    return 1;
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

inline int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("cfi");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cfi::cli
