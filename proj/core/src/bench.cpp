#include "kiv/bench.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "kiv/rng.hpp"
#include "kiv/version.hpp"

namespace kiv {

namespace {

// Salts for deriving independent seed streams from the cell seed.
constexpr std::uint64_t kSplitSalt = 0x73706c6974ull;
constexpr std::uint64_t kCvFoldSalt = 0x637632ull;

bool is_nan(double v) { return std::isnan(v); }

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

const char* estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Kiv:
      return "kiv";
    case EstimatorKind::Krr:
      return "krr";
    case EstimatorKind::TwoSls:
      return "twosls";
    case EstimatorKind::Sieve:
      return "sieve";
  }
  return "unknown";
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "kiv") return EstimatorKind::Kiv;
  if (name == "krr") return EstimatorKind::Krr;
  if (name == "twosls") return EstimatorKind::TwoSls;
  if (name == "sieve") return EstimatorKind::Sieve;
  throw InvalidSpec("unknown estimator: " + name);
}

void RunConfig::validate() const {
  if (designs.empty() || estimators.empty() || sample_sizes.empty()) {
    throw InvalidSpec("config: need at least one design, estimator and size");
  }
  if (replications < 1) {
    throw InvalidSpec("config: replications must be >= 1");
  }
  if (!(split_ratio > 0.0) || !(split_ratio < 1.0)) {
    throw InvalidSpec("config: split_ratio must be in (0, 1)");
  }
  for (int s : sample_sizes) {
    if (s < 8) {
      throw InvalidSpec("config: sample sizes must be >= 8");
    }
  }
  for (const auto& d : designs) {
    if (d.kind == DesignKind::Demand && (!(d.rho >= 0.0) || !(d.rho < 1.0))) {
      throw InvalidSpec("config: demand rho must be in [0, 1)");
    }
  }
  if (lengthscale_override &&
      (!std::isfinite(*lengthscale_override) || !(*lengthscale_override > 0.0))) {
    throw InvalidSpec("config: lengthscale override must be finite and > 0");
  }
  if (jobs < 1) {
    throw InvalidSpec("config: jobs must be >= 1");
  }
}

namespace {

// The data seed is derived from content (design, rho, size, replication),
// not from config positions, so a cell can be reproduced in isolation and
// every estimator of a cell sees the same simulated data.
std::uint64_t cell_seed(std::uint64_t base, const DesignTemplate& design,
                        int n_total, int replication) {
  std::uint64_t s = splitmix64(base);
  s = mix_seed(s, static_cast<std::uint64_t>(design.kind));
  const std::uint64_t rho_key =
      design.kind == DesignKind::Demand ? std::bit_cast<std::uint64_t>(design.rho)
                                        : 0;
  s = mix_seed(s, rho_key);
  s = mix_seed(s, static_cast<std::uint64_t>(n_total));
  s = mix_seed(s, static_cast<std::uint64_t>(replication));
  return s;
}

GaussianKernel gaussian_from_data(const Matrix& points,
                                  const std::optional<double>& override_ls) {
  if (override_ls) {
    return GaussianKernel{
        std::vector<double>(static_cast<std::size_t>(points.cols()), *override_ls)};
  }
  return GaussianKernel{median_lengthscales(points).values};
}

// Sieve bases per design. Linear/sigmoid inputs live in (0, 1) by
// construction, so the basis range is [0, 1]; the demand design's
// continuous dimensions use the realized data range. One interior knot at
// the range midpoint, 4th order.
BSplineSpec bspline_over(double lo, double hi) {
  BSplineSpec s;
  s.order = 5;
  s.interior_knots = {0.5 * (lo + hi)};
  s.lo = lo;
  s.hi = hi;
  return s;
}

struct SieveBases {
  BasisSpec x;
  BasisSpec z;
};

SieveBases make_sieve_bases(DesignKind kind, const GeneratedSample& sample) {
  if (kind != DesignKind::Demand) {
    return {BasisSpec::bspline(bspline_over(0.0, 1.0)),
            BasisSpec::bspline(bspline_over(0.0, 1.0))};
  }
  OneHotSpec levels{{1, 2, 3, 4, 5, 6, 7}};
  const auto data_range = [](const Matrix& m, Eigen::Index col) {
    return bspline_over(m.col(col).minCoeff(), m.col(col).maxCoeff());
  };
  std::vector<DimensionBasis> x_dims{data_range(sample.x, 0),
                                     data_range(sample.x, 1), levels};
  std::vector<DimensionBasis> z_dims{data_range(sample.z, 0),
                                     data_range(sample.z, 1), levels};
  return {BasisSpec::product(std::move(x_dims)),
          BasisSpec::product(std::move(z_dims))};
}

TuningResult tune_per_config(const SplitDataset& data, const KernelSpec& kx,
                             const KernelSpec& kz, const TuningConfig& tuning) {
  if (tuning.kind == TuningConfig::Kind::Rate) {
    return tune(data, kx, kz,
                TuningPolicy::theoretical_rate(tuning.c1, tuning.b, tuning.c));
  }
  return tune_two_level(data, kx, kz);
}

int jitter_flag_of(const KivModel& model) {
  return (model.stage1_report.jitter_applied > 0.0 ||
          model.stage2_report.jitter_applied > 0.0)
             ? 1
             : 0;
}

}  // namespace

BenchmarkRecord run_cell(const CellTask& task) {
  BenchmarkRecord rec;
  rec.design = design_name(task.design.kind);
  rec.estimator = task.estimator_label.empty() ? estimator_name(task.estimator)
                                               : task.estimator_label;
  rec.n_total = task.n_total;
  rec.split_ratio = task.split_ratio;
  rec.rho = task.design.kind == DesignKind::Demand
                ? task.design.rho
                : std::numeric_limits<double>::quiet_NaN();
  rec.replication = task.replication;
  rec.seed = task.seed;

  const auto start = std::chrono::steady_clock::now();
  try {
    DesignSpec spec;
    spec.kind = task.design.kind;
    spec.rho = task.design.kind == DesignKind::Demand ? task.design.rho : 0.0;
    spec.sample_size = task.n_total;
    spec.split_ratio = task.split_ratio;
    spec.seed = task.seed;

    const GeneratedSample sample = sample_design(spec);
    const EvalGrid grid = eval_grid(task.design.kind);
    Vector predictions;

    switch (task.estimator) {
      case EstimatorKind::Kiv: {
        const auto split = split_indices(task.n_total, task.split_ratio,
                                         mix_seed(task.seed, kSplitSalt));
        const SplitDataset data = make_split(sample, split);
        const KernelSpec kx = gaussian_from_data(sample.x, task.lengthscale_override);
        const KernelSpec kz = gaussian_from_data(sample.z, std::nullopt);
        const TuningResult tuned = tune_per_config(data, kx, kz, task.tuning);
        const KivModel model = fit_kiv(data, kx, kz, tuned.lambda, tuned.xi);
        predictions = predict(model, grid.points);
        rec.lambda = model.lambda;
        rec.xi = model.xi;
        rec.jitter_flag = jitter_flag_of(model);
        break;
      }
      case EstimatorKind::Sieve: {
        const auto split = split_indices(task.n_total, task.split_ratio,
                                         mix_seed(task.seed, kSplitSalt));
        const SplitDataset data = make_split(sample, split);
        const SieveBases bases = make_sieve_bases(task.design.kind, sample);
        const KernelSpec kx = FeatureMapKernel{bases.x};
        const KernelSpec kz = FeatureMapKernel{bases.z};
        const TuningResult tuned = tune_per_config(data, kx, kz, task.tuning);
        const KivModel model = fit_kiv(data, kx, kz, tuned.lambda, tuned.xi);
        predictions = predict(model, grid.points);
        rec.lambda = model.lambda;
        rec.xi = model.xi;
        rec.jitter_flag = jitter_flag_of(model);
        break;
      }
      case EstimatorKind::Krr: {
        const KernelSpec kernel =
            gaussian_from_data(sample.x, task.lengthscale_override);
        const std::uint64_t fold_seed = mix_seed(task.seed, kCvFoldSalt);
        const double coarse = cv2_tune_krr(sample.x, sample.y, kernel,
                                           log_grid(1e-10, 1.0, 20), fold_seed);
        const double reg = cv2_tune_krr(sample.x, sample.y, kernel,
                                        refine_grid(coarse), fold_seed);
        const KrrModel model = fit_krr(sample.x, sample.y, kernel, reg);
        predictions = predict(model, grid.points);
        rec.lambda = model.reg;
        rec.jitter_flag = model.report.jitter_applied > 0.0 ? 1 : 0;
        break;
      }
      case EstimatorKind::TwoSls: {
        const TwoSlsModel model = fit_2sls(sample.x, sample.y, sample.z);
        predictions = predict(model, grid.points);
        rec.jitter_flag = model.report.jitter_applied > 0.0 ? 1 : 0;
        break;
      }
    }

    const MseResult r = mse_vs_truth(predictions, grid);
    rec.mse = r.mse;
    rec.log10_mse = r.log10_mse;
    rec.mse_floored = r.floored;
  } catch (const std::exception& e) {
    rec.error = e.what();
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - start)
                    .count();
  return rec;
}

namespace {

std::vector<BenchmarkRecord> run_tasks(const std::vector<CellTask>& tasks,
                                       int jobs) {
  std::vector<BenchmarkRecord> results(tasks.size());
  const int workers = std::max(
      1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (workers == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      results[i] = run_cell(tasks[i]);
    }
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < tasks.size();
           i = next.fetch_add(1)) {
        results[i] = run_cell(tasks[i]);
      }
    });
  }
  for (auto& t : pool) t.join();
  return results;
}

}  // namespace

std::vector<BenchmarkRecord> run_sweep(const RunConfig& config) {
  config.validate();
  std::vector<CellTask> tasks;
  tasks.reserve(config.designs.size() * config.estimators.size() *
                config.sample_sizes.size() *
                static_cast<std::size_t>(config.replications));
  for (const auto& design : config.designs) {
    for (const auto estimator : config.estimators) {
      for (int size : config.sample_sizes) {
        for (int rep = 0; rep < config.replications; ++rep) {
          CellTask task;
          task.design = design;
          task.estimator = estimator;
          task.n_total = size;
          task.split_ratio = config.split_ratio;
          task.tuning = config.tuning;
          task.lengthscale_override = config.lengthscale_override;
          task.replication = rep;
          task.seed = cell_seed(config.base_seed, design, size, rep);
          tasks.push_back(std::move(task));
        }
      }
    }
  }
  return run_tasks(tasks, config.jobs);
}

std::vector<BenchmarkRecord> robustness_study(const RunConfig& config) {
  RunConfig cfg = config;
  cfg.designs = {DesignTemplate{DesignKind::Sigmoid}};
  cfg.estimators = {EstimatorKind::Kiv};
  if (cfg.sample_sizes.empty()) {
    cfg.sample_sizes = {1000};
  }
  cfg.lengthscale_override.reset();
  cfg.validate();

  const std::vector<std::optional<double>> groups = {
      std::nullopt, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<CellTask> tasks;
  for (const auto& group : groups) {
    for (int size : cfg.sample_sizes) {
      for (int rep = 0; rep < cfg.replications; ++rep) {
        CellTask task;
        task.design = cfg.designs.front();
        task.estimator = EstimatorKind::Kiv;
        task.estimator_label =
            group ? "kiv@ls=" + fmt_short(*group) : "kiv@ls=median";
        task.n_total = size;
        task.split_ratio = cfg.split_ratio;
        task.tuning = cfg.tuning;
        task.lengthscale_override = group;
        task.replication = rep;
        task.seed = cell_seed(cfg.base_seed, task.design, size, rep);
        tasks.push_back(std::move(task));
      }
    }
  }
  return run_tasks(tasks, cfg.jobs);
}

double quantile_linear(std::vector<double> values, double p) {
  if (values.empty()) {
    throw EmptyInput("quantile of an empty set");
  }
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) {
    return values.back();
  }
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<BenchmarkRecord>& records) {
  if (records.empty()) {
    throw EmptyInput("summarize: no records");
  }
  using Key = std::tuple<std::string, std::string, int, std::uint64_t>;
  std::vector<Key> order;
  std::map<Key, std::vector<const BenchmarkRecord*>> groups;
  for (const auto& r : records) {
    Key key{r.design, r.estimator, r.n_total, std::bit_cast<std::uint64_t>(r.rho)};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) {
      order.push_back(key);
    }
    it->second.push_back(&r);
  }

  std::vector<SummaryRow> rows;
  rows.reserve(order.size());
  for (const auto& key : order) {
    const auto& group = groups[key];
    SummaryRow row;
    row.design = std::get<0>(key);
    row.estimator = std::get<1>(key);
    row.n_total = std::get<2>(key);
    row.rho = std::bit_cast<double>(std::get<3>(key));
    std::vector<double> losses;
    for (const auto* r : group) {
      if (r->failed()) {
        ++row.errors;
      } else {
        losses.push_back(r->log10_mse);
      }
    }
    row.count = static_cast<int>(losses.size());
    if (!losses.empty()) {
      row.median_log10_mse = quantile_linear(losses, 0.5);
      row.q1_log10_mse = quantile_linear(losses, 0.25);
      row.q3_log10_mse = quantile_linear(losses, 0.75);
      row.iqr_log10_mse = row.q3_log10_mse - row.q1_log10_mse;
      row.mean_log10_mse =
          std::accumulate(losses.begin(), losses.end(), 0.0) /
          static_cast<double>(losses.size());
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string to_csv(const std::vector<BenchmarkRecord>& records) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : records) {
    out += r.design;
    out += ',';
    out += r.estimator;
    out += ',';
    out += std::to_string(r.n_total);
    out += ',';
    out += fmt_double(r.split_ratio);
    out += ',';
    out += fmt_double(r.rho);
    out += ',';
    out += std::to_string(r.replication);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += fmt_double(r.lambda);
    out += ',';
    out += fmt_double(r.xi);
    out += ',';
    out += fmt_double(r.mse);
    out += ',';
    out += fmt_double(r.log10_mse);
    out += ',';
    out += fmt_double(r.wall_ms);
    out += ',';
    out += std::to_string(r.jitter_flag);
    out += '\n';
  }
  return out;
}

std::vector<BenchmarkRecord> from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw InvalidSpec("results csv: unexpected header");
  }
  std::vector<BenchmarkRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = line.find(',', start);
      if (pos == std::string::npos) {
        fields.push_back(line.substr(start));
        break;
      }
      fields.push_back(line.substr(start, pos - start));
      start = pos + 1;
    }
    if (fields.size() != 13) {
      throw InvalidSpec("results csv: malformed row");
    }
    BenchmarkRecord r;
    r.design = fields[0];
    r.estimator = fields[1];
    r.n_total = std::stoi(fields[2]);
    r.split_ratio = std::stod(fields[3]);
    r.rho = std::stod(fields[4]);
    r.replication = std::stoi(fields[5]);
    r.seed = std::stoull(fields[6]);
    r.lambda = std::stod(fields[7]);
    r.xi = std::stod(fields[8]);
    r.mse = std::stod(fields[9]);
    r.log10_mse = std::stod(fields[10]);
    r.wall_ms = std::stod(fields[11]);
    r.jitter_flag = std::stoi(fields[12]);
    records.push_back(std::move(r));
  }
  return records;
}

std::string to_summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out =
      "design,estimator,n_total,rho,count,errors,median_log10_mse,"
      "mean_log10_mse,q1_log10_mse,q3_log10_mse,iqr_log10_mse\n";
  for (const auto& r : rows) {
    out += r.design + ',' + r.estimator + ',' + std::to_string(r.n_total) + ',' +
           fmt_double(r.rho) + ',' + std::to_string(r.count) + ',' +
           std::to_string(r.errors) + ',' + fmt_double(r.median_log10_mse) +
           ',' + fmt_double(r.mean_log10_mse) + ',' +
           fmt_double(r.q1_log10_mse) + ',' + fmt_double(r.q3_log10_mse) + ',' +
           fmt_double(r.iqr_log10_mse) + '\n';
  }
  return out;
}

std::string summary_table(const std::vector<SummaryRow>& rows) {
  char buf[256];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-8s %-16s %8s %6s %6s %7s %12s %12s %12s\n",
                "design", "estimator", "n_total", "rho", "count", "errors",
                "median", "mean", "iqr");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf,
                  "%-8s %-16s %8d %6s %6d %7d %12.4f %12.4f %12.4f\n",
                  r.design.c_str(), r.estimator.c_str(), r.n_total,
                  is_nan(r.rho) ? "-" : fmt_short(r.rho).c_str(), r.count,
                  r.errors, r.median_log10_mse, r.mean_log10_mse,
                  r.iqr_log10_mse);
    out += buf;
  }
  return out;
}

std::string meta_json(const RunConfig& config,
                      const std::vector<BenchmarkRecord>& records) {
  nlohmann::json j;
  j["library"] = "kiv";
  j["version"] = kVersion;
  j["rng"] = Rng::kIdentity;
  j["csv_header"] = kCsvHeader;

  nlohmann::json cfg;
  cfg["designs"] = nlohmann::json::array();
  for (const auto& d : config.designs) {
    nlohmann::json dj;
    dj["design"] = design_name(d.kind);
    if (d.kind == DesignKind::Demand) {
      dj["rho"] = d.rho;
    }
    cfg["designs"].push_back(dj);
  }
  cfg["estimators"] = nlohmann::json::array();
  for (const auto e : config.estimators) {
    cfg["estimators"].push_back(estimator_name(e));
  }
  cfg["sample_sizes"] = config.sample_sizes;
  cfg["replications"] = config.replications;
  cfg["split_ratio"] = config.split_ratio;
  cfg["tuning"] =
      config.tuning.kind == TuningConfig::Kind::Grid
          ? nlohmann::json{{"kind", "grid"}}
          : nlohmann::json{{"kind", "rate"},
                           {"c1", config.tuning.c1},
                           {"b", config.tuning.b},
                           {"c", config.tuning.c}};
  if (config.lengthscale_override) {
    cfg["lengthscale_override"] = *config.lengthscale_override;
  } else {
    cfg["lengthscale_override"] = nullptr;
  }
  cfg["base_seed"] = config.base_seed;
  cfg["jobs"] = config.jobs;
  j["config"] = cfg;

  j["record_count"] = records.size();
  j["errors"] = nlohmann::json::array();
  j["floored"] = nlohmann::json::array();
  for (const auto& r : records) {
    if (r.failed()) {
      j["errors"].push_back({{"design", r.design},
                             {"estimator", r.estimator},
                             {"n_total", r.n_total},
                             {"replication", r.replication},
                             {"seed", r.seed},
                             {"message", r.error}});
    }
    if (r.mse_floored) {
      j["floored"].push_back({{"design", r.design},
                              {"estimator", r.estimator},
                              {"n_total", r.n_total},
                              {"replication", r.replication}});
    }
  }
  return j.dump(2) + "\n";
}

bool any_errors(const std::vector<BenchmarkRecord>& records) {
  return std::any_of(records.begin(), records.end(),
                     [](const BenchmarkRecord& r) { return r.failed(); });
}

}  // namespace kiv
