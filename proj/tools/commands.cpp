#include "commands.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "config.hpp"
#include "dmshm/errors.hpp"
#include "dmshm/harness.hpp"

namespace dmshm::cli {

namespace {

struct Job {
  MethodKind method;
  std::uint64_t seed;
};

Stream load_stream(const ExperimentConfig& config, std::uint64_t run_seed) {
  if (const auto* csv = std::get_if<CsvSource>(&config.data))
    return load_csv_stream(csv->path, csv->period_length, csv->target_columns);
  const auto& syn = std::get<SyntheticSource>(config.data);
  auto stream_config = syn.stream;
  stream_config.seed = syn.seed.value_or(run_seed);
  return generate_synthetic_stream(stream_config);
}

std::filesystem::path run_dir(const ExperimentConfig& config, const Job& job) {
  return config.output_dir / method_name(job.method) / ("seed_" + std::to_string(job.seed));
}

std::string fmt17(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_summary(const ExperimentConfig& config, const std::vector<Job>& jobs,
                   const std::vector<MetricsReport>& reports) {
  std::ofstream out(config.output_dir / "summary.csv", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write summary.csv");
  out << "method,runs,fe_mean,fe_std,pe_mean,pe_std\n";
  for (auto method : config.methods) {
    std::vector<double> fe, pe;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].method != method) continue;
      fe.push_back(reports[i].fe);
      pe.push_back(reports[i].pe);
    }
    auto mean_std = [](const std::vector<double>& v) {
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      return std::pair{mean, sd};
    };
    const auto [fe_mean, fe_sd] = mean_std(fe);
    const auto [pe_mean, pe_sd] = mean_std(pe);
    out << method_name(method) << ',' << fe.size() << ',' << fmt17(fe_mean) << ',' << fmt17(fe_sd)
        << ',' << fmt17(pe_mean) << ',' << fmt17(pe_sd) << '\n';
  }
}

int exit_code_for(const std::exception_ptr& error, std::ostream& err) {
  try {
    std::rethrow_exception(error);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const TrainingDivergence& e) {
    err << "training diverged in period " << e.period() << ", epoch " << e.epoch() << ": " << e.what()
        << '\n';
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int cmd_run(const std::filesystem::path& config_path, const RunOverrides& overrides,
            std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(config_path);
    if (overrides.seed) config.seeds = {*overrides.seed};
    if (overrides.method) {
      const auto kind = parse_method(*overrides.method);
      if (!kind) throw ConfigError("--method", "unknown method '" + *overrides.method + "'");
      config.methods = {*kind};
    }
    if (overrides.output_dir) config.output_dir = *overrides.output_dir;
    if (overrides.jobs) {
      if (*overrides.jobs == 0) throw ConfigError("--jobs", "--jobs must be >= 1");
      config.jobs = *overrides.jobs;
    }
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }

  std::vector<Job> jobs;
  for (auto method : config.methods)
    for (auto seed : config.seeds) jobs.push_back({method, seed});

  std::vector<MetricsReport> reports(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const auto& job = jobs[i];
      try {
        const auto stream = load_stream(config, job.seed);

        ExperimentOptions opts;
        opts.train = config.train;
        opts.budget = config.memory_budget;
        opts.future_fraction = config.future_fraction;
        opts.seed = job.seed;
        opts.projection = config.projection;
        reports[i] = run_experiment(stream, MethodSpec{job.method, {}, {}}, opts);

        const auto dir = run_dir(config, job);
        write_run_outputs(dir, reports[i]);
        auto resolved = config;
        resolved.methods = {job.method};
        resolved.seeds = {job.seed};
        resolved.jobs = 1;
        std::ofstream cfg(dir / "config.json", std::ios::binary);
        cfg << to_json(resolved).dump(2) << '\n';

        std::lock_guard lock(log_mutex);
        for (const auto& r : reports[i].records)
          out << method_name(job.method) << " seed=" << job.seed << " period=" << r.period
              << " hist_mse=" << r.historical_mse << " future_mse=" << r.future_mse
              << " gamma=" << r.gamma << '\n';
        out << method_name(job.method) << " seed=" << job.seed << " FE=" << reports[i].fe
            << " PE=" << reports[i].pe << '\n';
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  try {
    std::filesystem::create_directories(config.output_dir);
    const auto n_threads = std::min(config.jobs, jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }

  for (const auto& e : errors)
    if (e) return exit_code_for(e, err);

  try {
    write_summary(config, jobs, reports);
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
  return kExitOk;
}

int cmd_simulate(const std::string& preset, std::uint64_t seed, const std::filesystem::path& out_path,
                 std::ostream& out, std::ostream& err) {
  StreamConfig config;
  try {
    config = stream_preset(preset, seed);
  } catch (const std::out_of_range&) {
    err << "unknown preset '" << preset << "'; available presets:";
    for (const auto& name : stream_preset_names()) err << ' ' << name;
    err << '\n';
    return kExitConfig;
  }
  try {
    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    write_csv_stream(out_path, generate_synthetic_stream(config));
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
  out << "wrote " << config.periods << " periods x " << config.samples_per_period << " samples to "
      << out_path.string() << " (period_length " << config.samples_per_period << ")\n";
  return kExitOk;
}

int cmd_window(const std::filesystem::path& in_path, const std::vector<std::string>& columns,
               std::size_t window, std::size_t horizon, std::size_t target_channel,
               const std::filesystem::path& out_path, std::ostream& out, std::ostream& err) {
  try {
    if (target_channel >= columns.size())
      throw ConfigError("--target-channel", "--target-channel must index one of the --column values");
    const auto series = load_csv_series(in_path, columns);
    if (window + horizon > series.size())
      throw DataError("series has " + std::to_string(series.size()) + " rows; window + horizon is " +
                      std::to_string(window + horizon));
    const auto samples = make_windows(series, window, horizon, target_channel);
    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    write_csv_stream(out_path, Stream{samples});
    out << "wrote " << samples.size() << " windows (" << samples.input_dim() << " features, "
        << samples.target_dim() << " targets) to " << out_path.string() << '\n';
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
  return kExitOk;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continual learning for streaming regression with density-based memory selection"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run experiments described by a JSON config");
  std::string config_path;
  std::uint64_t seed = 0;
  std::string method;
  std::string out_dir;
  std::size_t jobs = 1;
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Run only this seed");
  auto* method_opt = run->add_option("--method", method, "Run only this method");
  auto* out_opt = run->add_option("--out", out_dir, "Output directory");
  auto* jobs_opt = run->add_option("--jobs", jobs, "Concurrent runs");

  auto* sim = app.add_subcommand("simulate", "Write a synthetic drifting stream as CSV");
  std::string preset;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  sim->add_option("--preset", preset, "Stream preset (drift8)")->required();
  sim->add_option("--seed", sim_seed, "Generator seed");
  sim->add_option("--out", sim_out, "Output CSV path")->required();

  auto* win = app.add_subcommand("window", "Cut a series CSV into lag-window samples");
  std::string win_in;
  std::vector<std::string> win_columns;
  std::size_t win_size = 0;
  std::size_t win_horizon = 1;
  std::size_t win_target = 0;
  std::string win_out;
  win->add_option("--in", win_in, "Series CSV (header row, one time step per row)")->required();
  win->add_option("--column", win_columns, "Series column(s) to use; repeat for several")->required();
  win->add_option("--window", win_size, "Lag window length")->required()->check(CLI::PositiveNumber);
  win->add_option("--horizon", win_horizon, "Forecast horizon")->check(CLI::PositiveNumber);
  win->add_option("--target-channel", win_target, "Index into --column of the forecast channel");
  win->add_option("--out", win_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }

  if (*run) {
    RunOverrides o;
    if (*seed_opt) o.seed = seed;
    if (*method_opt) o.method = method;
    if (*out_opt) o.output_dir = out_dir;
    if (*jobs_opt) o.jobs = jobs;
    return cmd_run(config_path, o, out, err);
  }
  if (*win) return cmd_window(win_in, win_columns, win_size, win_horizon, win_target, win_out, out, err);
  return cmd_simulate(preset, sim_seed, sim_out, out, err);
}

}  // namespace dmshm::cli
