// Benchmark driver: runs estimator x design x sample-size x replication
// sweeps, the lengthscale robustness study, and summaries of result files.
//
// Outputs one CSV of per-replication records (fixed 13-column header), a
// JSON sidecar with the config echo and RNG identity next to it, and a
// summary table on stdout. Exit code 0 if every cell succeeded, 2 if any
// cell failed (failed cells are recorded, never abort a sweep).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "kiv/bench.hpp"
#include "kiv/version.hpp"

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> split_commas(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (const auto& arg : args) {
    std::size_t start = 0;
    while (start <= arg.size()) {
      const std::size_t pos = arg.find(',', start);
      if (pos == std::string::npos) {
        if (start < arg.size()) out.push_back(arg.substr(start));
        break;
      }
      if (pos > start) out.push_back(arg.substr(start, pos - start));
      start = pos + 1;
    }
  }
  return out;
}

int default_jobs() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

struct SweepOptions {
  std::vector<std::string> designs;
  std::vector<std::string> estimators{"kiv"};
  std::vector<int> sample_sizes{1000};
  double split_ratio = 0.5;
  int reps = 40;
  double rho = 0.5;
  std::uint64_t seed = 1;
  std::string tuning = "grid";
  double c1 = 2.0, b = 2.0, c = 2.0;
  double lengthscale = 0.0;  // 0 = median heuristic
  std::string out = "results.csv";
  int jobs = default_jobs();
};

void add_common_flags(CLI::App* cmd, SweepOptions& opt) {
  cmd->add_option("--split-ratio", opt.split_ratio,
                  "Fraction of samples assigned to stage 1");
  cmd->add_option("--reps", opt.reps, "Replications per cell");
  cmd->add_option("--seed", opt.seed, "Base seed for the sweep");
  cmd->add_option("--tuning", opt.tuning, "Hyperparameter policy")
      ->check(CLI::IsMember({"grid", "rate"}));
  cmd->add_option("--c1", opt.c1, "Stage-1 smoothness prior (rate policy)");
  cmd->add_option("--b", opt.b, "Effective input dimension (rate policy)");
  cmd->add_option("--c", opt.c, "Stage-2 smoothness prior (rate policy)");
  cmd->add_option("--out", opt.out, "Results CSV path");
  cmd->add_option("--jobs", opt.jobs, "Concurrent replication workers");
}

kiv::RunConfig base_config(const SweepOptions& opt) {
  kiv::RunConfig config;
  config.sample_sizes = opt.sample_sizes;
  config.replications = opt.reps;
  config.split_ratio = opt.split_ratio;
  config.base_seed = opt.seed;
  config.jobs = opt.jobs;
  if (opt.tuning == "rate") {
    config.tuning.kind = kiv::TuningConfig::Kind::Rate;
    config.tuning.c1 = opt.c1;
    config.tuning.b = opt.b;
    config.tuning.c = opt.c;
  }
  if (opt.lengthscale > 0.0) {
    config.lengthscale_override = opt.lengthscale;
  }
  return config;
}

int finish_run(const kiv::RunConfig& config,
               const std::vector<kiv::BenchmarkRecord>& records,
               const std::string& out_path) {
  write_file(out_path, kiv::to_csv(records));
  write_file(out_path + ".meta.json", kiv::meta_json(config, records));
  std::cout << kiv::summary_table(kiv::summarize(records));
  std::cout << "wrote " << records.size() << " records to " << out_path << "\n";
  if (kiv::any_errors(records)) {
    std::cerr << "some cells failed; see " << out_path << ".meta.json\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kiv benchmark driver"};
  app.set_version_flag("--version", std::string("kivbench ") + kiv::kVersion);
  app.require_subcommand(1);

  SweepOptions opt;
  std::vector<std::string> design_args;
  std::vector<std::string> estimator_args;

  CLI::App* sweep = app.add_subcommand(
      "sweep", "Run an estimator x design x size x replication sweep");
  sweep->add_option("--design", design_args, "Design (repeat or comma-separate)")
      ->required();
  sweep->add_option("--estimators", estimator_args,
                    "Estimators: kiv, krr, twosls, sieve");
  sweep->add_option("--n-total", opt.sample_sizes,
                    "Total sample sizes n+m (repeat or comma-separate)")
      ->delimiter(',');
  sweep->add_option("--rho", opt.rho, "Demand-design confounding level");
  sweep->add_option("--lengthscale", opt.lengthscale,
                    "Override the input-kernel lengthscale (0 = median rule)");
  add_common_flags(sweep, opt);

  CLI::App* robustness = app.add_subcommand(
      "robustness",
      "Lengthscale robustness study: sigmoid design, kiv, median rule plus "
      "overrides 0.2..1.0");
  robustness->add_option("--n-total", opt.sample_sizes, "Total sample sizes")
      ->delimiter(',');
  add_common_flags(robustness, opt);

  std::string summarize_in;
  std::string summarize_out;
  CLI::App* summarize_cmd =
      app.add_subcommand("summarize", "Aggregate a results CSV");
  summarize_cmd->add_option("input", summarize_in, "Results CSV to aggregate")
      ->required();
  summarize_cmd->add_option("--out", summarize_out,
                            "Write the summary CSV here as well");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sweep->parsed()) {
      kiv::RunConfig config = base_config(opt);
      for (const auto& name : split_commas(design_args)) {
        kiv::DesignTemplate d;
        d.kind = kiv::design_from_name(name);
        d.rho = opt.rho;
        config.designs.push_back(d);
      }
      if (estimator_args.empty()) {
        config.estimators = {kiv::EstimatorKind::Kiv};
      } else {
        for (const auto& name : split_commas(estimator_args)) {
          config.estimators.push_back(kiv::estimator_from_name(name));
        }
      }
      const auto records = kiv::run_sweep(config);
      return finish_run(config, records, opt.out);
    }

    if (robustness->parsed()) {
      kiv::RunConfig config = base_config(opt);
      config.designs = {kiv::DesignTemplate{kiv::DesignKind::Sigmoid}};
      config.estimators = {kiv::EstimatorKind::Kiv};
      const auto records = kiv::robustness_study(config);
      return finish_run(config, records, opt.out);
    }

    // summarize
    const auto records = kiv::from_csv(read_file(summarize_in));
    const auto rows = kiv::summarize(records);
    std::cout << kiv::summary_table(rows);
    if (!summarize_out.empty()) {
      write_file(summarize_out, kiv::to_summary_csv(rows));
      std::cout << "wrote summary to " << summarize_out << "\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
