#ifndef RFNLTISO_EXPERIMENT_HPP
#define RFNLTISO_EXPERIMENT_HPP

// Experiment kit behind the command-line tool: config files, per-run seed
// derivation, and the generate / estimate / metrics / bench / replay
// commands. Every command writes a record (<command>.record.json) holding
// the resolved config, options and seeds; replaying it regenerates the same
// numeric outputs byte for byte.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "rfnltiso/csv.hpp"
#include "rfnltiso/errors.hpp"
#include "rfnltiso/estimator.hpp"
#include "rfnltiso/metrics.hpp"
#include "rfnltiso/serialization.hpp"
#include "rfnltiso/var_synth.hpp"

namespace rfnltiso {

namespace fs = std::filesystem;

inline constexpr const char* output_dir_env = "RFNLTISO_OUTPUT_DIR";

enum class Algorithm { rf_nltiso, linear };

struct ExperimentConfig {
  std::optional<GeneratorConfig> generator;
  std::string data_csv;  // external data instead of a generator
  EstimatorConfig estimator;
  Algorithm algorithm = Algorithm::rf_nltiso;
  DetectionConfig detection;
  std::size_t mse_window = 100;
  std::size_t mse_node = 0;  // 0 = average over all nodes, else 1-based node
  std::size_t runs = 1;
  std::uint64_t base_seed = 1;
  std::string output_dir = "out";
  bool standardize = false;
  std::size_t emit_every = 1;

  void validate() const {
    if (runs == 0) throw ConfigError("experiment: runs must be >= 1");
    if (generator.has_value() == !data_csv.empty())
      throw ConfigError("experiment: exactly one of 'generator' and 'data_csv' must be given");
    if (!data_csv.empty() && !fs::exists(data_csv))
      throw ConfigError("experiment: data_csv '" + data_csv + "' does not exist");
    if (generator && (generator->N != estimator.N || generator->P != estimator.P))
      throw ConfigError("experiment: estimator N/P do not match the generator");
    if (emit_every == 0) throw ConfigError("experiment: emit_every must be >= 1");
    if (mse_window == 0) throw ConfigError("experiment: mse_window must be >= 1");
    if (mse_node > estimator.N) throw ConfigError("experiment: mse_node out of range");
    generator ? generator->validate() : void();
    estimator.validate();
    detection.validate();
  }
};

struct RunSeeds {
  std::uint64_t generator = 0;
  std::uint64_t rff = 0;
};

// Run k of an experiment uses seeds derived from (base_seed, k) only.
inline RunSeeds run_seeds(std::uint64_t base_seed, std::size_t run) {
  return {derive_seed(base_seed, {stream::run, run, 0}), derive_seed(base_seed, {stream::run, run, 1})};
}

inline std::string run_dir_name(std::size_t run) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%03zu", run);
  return buf;
}

inline const char* to_string(Algorithm a) { return a == Algorithm::rf_nltiso ? "rf-nltiso" : "linear"; }

inline json to_json(const ExperimentConfig& c) {
  json j{{"estimator", to_json(c.estimator)},
         {"algorithm", to_string(c.algorithm)},
         {"metrics",
          {{"delta", c.detection.delta},
           {"normalize", c.detection.normalize},
           {"exclude_self_loops", c.detection.exclude_self_loops},
           {"mse_window", c.mse_window},
           {"mse_node", c.mse_node}}},
         {"runs", c.runs},
         {"base_seed", c.base_seed},
         {"output_dir", c.output_dir},
         {"standardize", c.standardize},
         {"emit_every", c.emit_every}};
  if (c.generator) j["generator"] = to_json(*c.generator);
  else j["data_csv"] = c.data_csv;
  return j;
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
  constexpr const char* where = "experiment";
  detail::reject_unknown_keys(j,
                              {"generator", "data_csv", "estimator", "algorithm", "metrics", "runs", "base_seed",
                               "output_dir", "standardize", "emit_every"},
                              where);
  ExperimentConfig c;
  if (j.contains("generator")) c.generator = generator_config_from_json(j.at("generator"));
  detail::read_opt(j, "data_csv", c.data_csv, where);

  json est = j.value("estimator", json::object());
  if (c.generator) {
    if (!est.contains("N")) est["N"] = c.generator->N;
    if (!est.contains("P")) est["P"] = c.generator->P;
  }
  c.estimator = estimator_config_from_json(est);

  std::string algo = to_string(c.algorithm);
  detail::read_opt(j, "algorithm", algo, where);
  if (algo == "rf-nltiso") c.algorithm = Algorithm::rf_nltiso;
  else if (algo == "linear") c.algorithm = Algorithm::linear;
  else throw ConfigError("experiment: algorithm must be 'rf-nltiso' or 'linear'");

  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    detail::reject_unknown_keys(m, {"delta", "normalize", "exclude_self_loops", "mse_window", "mse_node"}, "metrics");
    detail::read_opt(m, "delta", c.detection.delta, "metrics");
    detail::read_opt(m, "normalize", c.detection.normalize, "metrics");
    detail::read_opt(m, "exclude_self_loops", c.detection.exclude_self_loops, "metrics");
    detail::read_opt(m, "mse_window", c.mse_window, "metrics");
    detail::read_opt(m, "mse_node", c.mse_node, "metrics");
  }
  detail::read_opt(j, "runs", c.runs, where);
  detail::read_opt(j, "base_seed", c.base_seed, where);
  detail::read_opt(j, "output_dir", c.output_dir, where);
  detail::read_opt(j, "standardize", c.standardize, where);
  detail::read_opt(j, "emit_every", c.emit_every, where);
  c.validate();
  return c;
}

inline json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(f, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

// Loads a config file; the output directory env var, when set, wins. A
// relative data_csv is resolved against the config file's directory.
inline ExperimentConfig load_experiment_config(const std::string& path) {
  json j = read_json_file(path);
  if (j.is_object() && j.contains("data_csv") && j["data_csv"].is_string()) {
    const fs::path csv(j["data_csv"].get<std::string>());
    if (csv.is_relative()) j["data_csv"] = (fs::path(path).parent_path() / csv).lexically_normal().string();
  }
  if (const char* env = std::getenv(output_dir_env); env && *env) j["output_dir"] = env;
  return experiment_config_from_json(j);
}

inline void write_json_file(const fs::path& path, const json& j) {
  auto f = open_out(path.string());
  f << j.dump(2) << '\n';
}

namespace detail {

// Runs fn(k) for k in [0, count) on a small thread pool; rethrows the first
// failure after all workers finish.
template <class Fn>
void parallel_runs(std::size_t count, Fn&& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(count, std::thread::hardware_concurrency()));
  if (workers == 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t k;
        {
          std::lock_guard lock(mu);
          if (next >= count || error) return;
          k = next++;
        }
        try {
          fn(k);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline json seeds_json(const ExperimentConfig& cfg) {
  json runs = json::array();
  for (std::size_t k = 0; k < cfg.runs; ++k) {
    const auto s = run_seeds(cfg.base_seed, k);
    runs.push_back({{"run", k}, {"generator_seed", s.generator}, {"rff_seed", s.rff}});
  }
  return runs;
}

inline void write_record(const ExperimentConfig& cfg, const std::string& command, const json& options) {
  fs::create_directories(cfg.output_dir);
  write_json_file(fs::path(cfg.output_dir) / (command + ".record.json"),
                  json{{"command", command}, {"config", to_json(cfg)}, {"options", options}, {"seeds", seeds_json(cfg)}});
}

inline GeneratorConfig generator_for_run(const ExperimentConfig& cfg, std::size_t run) {
  GeneratorConfig g = *cfg.generator;
  g.seed = run_seeds(cfg.base_seed, run).generator;
  return g;
}

inline EstimatorConfig estimator_for_run(const ExperimentConfig& cfg, std::size_t run) {
  EstimatorConfig e = cfg.estimator;
  e.rff_seed = run_seeds(cfg.base_seed, run).rff;
  return e;
}

}  // namespace detail

// --- generate -----------------------------------------------------------

inline void cmd_generate(const ExperimentConfig& cfg) {
  cfg.validate();
  if (!cfg.generator) throw ConfigError("generate: config has no 'generator' section");
  fs::create_directories(cfg.output_dir);
  detail::write_record(cfg, "generate", json::object());
  detail::parallel_runs(cfg.runs, [&](std::size_t k) {
    const fs::path dir = fs::path(cfg.output_dir) / run_dir_name(k);
    fs::create_directories(dir);
    const auto data = generate(detail::generator_for_run(cfg, k));
    auto csv = open_out((dir / "data.csv").string());
    write_timeseries_csv(csv, data);
    auto jl = open_out((dir / "topology.jsonl").string());
    write_topology_jsonl(jl, data);
  });
}

// --- estimate -----------------------------------------------------------

struct EstimateOptions {
  std::string resume;             // checkpoint to continue from (single run)
  std::size_t max_samples = 0;    // stop after this stream index (0 = all)
};

inline TimeSeriesMatrix load_run_data(const ExperimentConfig& cfg, std::size_t run) {
  TimeSeriesMatrix data;
  if (!cfg.data_csv.empty()) {
    data = read_timeseries_csv(cfg.data_csv);
  } else {
    const fs::path path = fs::path(cfg.output_dir) / run_dir_name(run) / "data.csv";
    if (fs::exists(path)) {
      data = read_timeseries_csv(path.string());
    } else {
      data = generate(detail::generator_for_run(cfg, run));
    }
  }
  if (data.N != cfg.estimator.N)
    throw DataError("data has " + std::to_string(data.N) + " nodes but estimator N=" + std::to_string(cfg.estimator.N));
  if (data.T <= cfg.estimator.P) throw DataError("data shorter than the warm-up length P");
  if (cfg.standardize) standardize(data);
  return data;
}

namespace detail {

template <class Estimator>
void run_estimation(Estimator& est, const TimeSeriesMatrix& data, std::size_t end, std::size_t emit_every,
                    const fs::path& dir) {
  auto adj_out = open_out((dir / "pseudo_adjacency.csv").string());
  auto pred_out = open_out((dir / "predictions.csv").string());
  write_pseudo_adjacency_header(adj_out, est.config().N, est.config().P);
  write_predictions_header(pred_out, est.config().N);
  std::size_t steps = 0;
  for (std::size_t t = est.consumed(); t < end; ++t) {
    const auto sample = data.sample(t);
    auto r = est.observe(sample);
    if (!r) continue;
    write_predictions_row(pred_out, r->t, sample, r->predictions);
    ++steps;
    if (steps % emit_every == 0 || t + 1 == end) {
      PseudoAdjacency adj = extract_pseudo_adjacency(est.state());
      adj.t = r->t;
      write_pseudo_adjacency_row(adj_out, adj);
    }
  }
  write_json_file(dir / "checkpoint.json", checkpoint_to_json(est));
}

}  // namespace detail

inline void cmd_estimate(const ExperimentConfig& cfg, const EstimateOptions& opt = {}) {
  cfg.validate();
  if (!opt.resume.empty() && cfg.runs != 1) throw ConfigError("estimate: --resume requires runs == 1");
  fs::create_directories(cfg.output_dir);

  // Load and check every run's data before any output is written.
  std::vector<TimeSeriesMatrix> datasets(cfg.runs);
  for (std::size_t k = 0; k < cfg.runs; ++k) datasets[k] = load_run_data(cfg, k);

  json options{{"resume", opt.resume}, {"max_samples", opt.max_samples}};
  detail::write_record(cfg, "estimate", options);
  detail::parallel_runs(cfg.runs, [&](std::size_t k) {
    const auto& data = datasets[k];
    const fs::path dir = fs::path(cfg.output_dir) / run_dir_name(k);
    fs::create_directories(dir);
    const std::size_t end = opt.max_samples ? std::min(opt.max_samples, data.T) : data.T;
    const auto ecfg = detail::estimator_for_run(cfg, k);
    if (cfg.algorithm == Algorithm::rf_nltiso) {
      auto est = opt.resume.empty() ? make_rf_estimator(ecfg) : rf_estimator_from_checkpoint(read_json_file(opt.resume));
      detail::run_estimation(est, data, end, cfg.emit_every, dir);
    } else {
      auto est = opt.resume.empty() ? make_linear_baseline(ecfg)
                                    : linear_baseline_from_checkpoint(read_json_file(opt.resume));
      detail::run_estimation(est, data, end, cfg.emit_every, dir);
    }
  });
}

// --- metrics ------------------------------------------------------------

inline json cmd_metrics(const ExperimentConfig& cfg) {
  cfg.validate();
  const fs::path out(cfg.output_dir);
  std::vector<DetectionRun> runs;
  std::vector<std::vector<double>> observed, predicted;
  std::vector<std::size_t> pred_times;
  for (std::size_t k = 0; k < cfg.runs; ++k) {
    const fs::path dir = out / run_dir_name(k);
    auto pf = open_in((dir / "predictions.csv").string());
    const auto table = read_predictions_csv(pf);
    if (table.N != cfg.estimator.N) throw DataError("metrics: predictions do not match N");
    if (k == 0) pred_times = table.times;
    else if (table.times != pred_times) throw DataError("metrics: runs have mismatched time axes");
    // Node-averaged squared error per run is carried as one series per node.
    for (std::size_t n = 0; n < table.N; ++n) {
      if (cfg.mse_node != 0 && n + 1 != cfg.mse_node) continue;
      observed.push_back(table.observed[n]);
      predicted.push_back(table.predicted[n]);
    }

    if (!cfg.generator) continue;
    auto af = open_in((dir / "pseudo_adjacency.csv").string());
    auto series = read_pseudo_adjacency_csv(af, cfg.estimator.N, cfg.estimator.P);
    auto tf = open_in((dir / "topology.jsonl").string());
    TimeSeriesMatrix truth_holder;
    truth_holder.snapshots = read_topology_jsonl(tf);
    DetectionRun run;
    for (auto& adj : series) {
      run.times.push_back(adj.t);
      run.truth.push_back(TruthMask::from(truth_holder.topology_at(adj.t)));
      run.estimates.push_back(std::move(adj));
    }
    runs.push_back(std::move(run));
  }

  // MSE: ensemble mean over runs (and the selected nodes) when runs > 1,
  // trailing moving average otherwise.
  std::vector<double> mse(pred_times.size(), 0.0);
  const std::size_t per_run = observed.size() / cfg.runs;
  std::string mse_mode;
  if (cfg.runs > 1) {
    mse = mse_curve_ensemble(observed, predicted);
    mse_mode = "ensemble_mean";
  } else {
    for (std::size_t i = 0; i < observed.size(); ++i) {
      const auto c = mse_curve_moving(observed[i], predicted[i], cfg.mse_window);
      for (std::size_t t = 0; t < c.size(); ++t) mse[t] += c[t] / static_cast<double>(per_run);
    }
    mse_mode = "moving_average_w" + std::to_string(cfg.mse_window);
  }
  {
    auto f = open_out((out / "mse.csv").string());
    write_curve_csv(f, pred_times, mse);
  }

  json report{{"config", to_json(cfg)}, {"seeds", detail::seeds_json(cfg)}, {"mse_mode", mse_mode}};
  report["mse_final"] = mse.empty() ? json(nullptr) : json(mse.back());
  if (!runs.empty()) {
    const auto curves = pmd_pfa(runs, cfg.detection);
    auto f1 = open_out((out / "pmd.csv").string());
    write_curve_csv(f1, curves.times, curves.pmd);
    auto f2 = open_out((out / "pfa.csv").string());
    write_curve_csv(f2, curves.times, curves.pfa);
    auto mean_of = [](const std::vector<std::optional<double>>& v) -> json {
      double s = 0.0;
      std::size_t c = 0;
      for (const auto& x : v)
        if (x) s += *x, ++c;
      return c ? json(s / static_cast<double>(c)) : json(nullptr);
    };
    report["pmd_mean"] = mean_of(curves.pmd);
    report["pfa_mean"] = mean_of(curves.pfa);
  }
  write_json_file(out / "report.json", report);
  detail::write_record(cfg, "metrics", json::object());
  return report;
}

// --- bench --------------------------------------------------------------

enum class BenchMode { rf_nltiso, linear, dictionary };

inline BenchMode bench_mode_from_string(const std::string& s) {
  if (s == "rf-nltiso") return BenchMode::rf_nltiso;
  if (s == "linear") return BenchMode::linear;
  if (s == "dictionary") return BenchMode::dictionary;
  throw ConfigError("bench: mode must be rf-nltiso, linear or dictionary");
}

struct BenchResult {
  std::vector<std::size_t> t;
  std::vector<double> seconds;
};

// Per-sample wall-clock of the streaming loop over the first T samples of
// `data`. The dictionary mode runs the growing-dictionary kernel reference.
inline BenchResult bench_stream(const TimeSeriesMatrix& data, const EstimatorConfig& ecfg, BenchMode mode,
                                std::size_t T) {
  if (T <= ecfg.P) throw ConfigError("bench: T must exceed the warm-up length P");
  if (T > data.T) throw ConfigError("bench: T exceeds available data");
  BenchResult out;
  using clock = std::chrono::steady_clock;
  auto timed = [&](auto& est) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto start = clock::now();
      const bool stepped = est.observe(data.sample(t)).has_value();
      const auto stop = clock::now();
      if (!stepped) continue;
      out.t.push_back(t);
      out.seconds.push_back(std::chrono::duration<double>(stop - start).count());
    }
  };
  switch (mode) {
    case BenchMode::rf_nltiso: {
      auto est = make_rf_estimator(ecfg);
      timed(est);
      break;
    }
    case BenchMode::linear: {
      auto est = make_linear_baseline(ecfg);
      timed(est);
      break;
    }
    case BenchMode::dictionary: {
      GrowingDictionaryEstimator est(ecfg.N, ecfg.P, ecfg.kernel, 0.01);
      timed(est);
      break;
    }
  }
  return out;
}

inline BenchResult cmd_bench(const ExperimentConfig& cfg, std::size_t T, BenchMode mode) {
  cfg.validate();
  if (T <= cfg.estimator.P) throw ConfigError("bench: T must exceed the warm-up length P");
  TimeSeriesMatrix data;
  if (cfg.generator) {
    GeneratorConfig g = detail::generator_for_run(cfg, 0);
    g.T = std::max(g.T, T);
    data = generate(g);
  } else {
    data = load_run_data(cfg, 0);
  }
  const auto result = bench_stream(data, detail::estimator_for_run(cfg, 0), mode, T);
  fs::create_directories(cfg.output_dir);
  auto f = open_out((fs::path(cfg.output_dir) / "bench.csv").string());
  f << "t,seconds\n";
  for (std::size_t k = 0; k < result.t.size(); ++k) f << result.t[k] << ',' << format_double(result.seconds[k]) << '\n';
  const char* mode_name = mode == BenchMode::rf_nltiso ? "rf-nltiso" : mode == BenchMode::linear ? "linear" : "dictionary";
  detail::write_record(cfg, "bench", json{{"T", T}, {"mode", mode_name}});
  return result;
}

// --- replay -------------------------------------------------------------

// Re-executes a command from its record. `output_dir`, when non-empty,
// redirects the outputs.
inline void cmd_replay(const std::string& record_path, const std::string& output_dir = {}) {
  const json rec = read_json_file(record_path);
  if (!rec.contains("command") || !rec.contains("config")) throw ConfigError("replay: not a command record");
  json cj = rec.at("config");
  if (!output_dir.empty()) cj["output_dir"] = output_dir;
  const auto cfg = experiment_config_from_json(cj);
  const std::string command = rec.at("command").get<std::string>();
  const json opt = rec.value("options", json::object());
  if (command == "generate") {
    cmd_generate(cfg);
  } else if (command == "estimate") {
    EstimateOptions o;
    o.resume = opt.value("resume", std::string{});
    o.max_samples = opt.value("max_samples", std::size_t{0});
    cmd_estimate(cfg, o);
  } else if (command == "metrics") {
    cmd_metrics(cfg);
  } else if (command == "bench") {
    cmd_bench(cfg, opt.at("T").get<std::size_t>(), bench_mode_from_string(opt.at("mode").get<std::string>()));
  } else {
    throw ConfigError("replay: unknown command '" + command + "'");
  }
}

// Maps exceptions to the documented exit codes.
template <class Fn>
int run_guarded(Fn&& fn, std::ostream& err = std::cerr) {
  try {
    fn();
    return static_cast<int>(ExitCode::ok);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::config_error);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data_error);
  } catch (const DivergenceError& e) {
    err << "numeric divergence: " << e.what() << '\n';
    return static_cast<int>(ExitCode::divergence);
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data_error);
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::config_error);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::failure);
  }
}

}  // namespace rfnltiso

#endif  // RFNLTISO_EXPERIMENT_HPP
