#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "kiv/designs.hpp"
#include "kiv/estimators.hpp"

namespace kiv {

enum class EstimatorKind { Kiv, Krr, TwoSls, Sieve };

const char* estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

// How benchmark cells pick hyperparameters. Grid runs the two-level
// search (coarse 20-point log grid, one 10-point refinement); Rate uses
// the closed-form schedules with the given prior constants. KernelRidge
// always tunes by 2-fold cross-validation and 2SLS has no
// hyperparameters, whichever policy is selected.
struct TuningConfig {
  enum class Kind { Grid, Rate };
  Kind kind = Kind::Grid;
  double c1 = 2.0;
  double b = 2.0;
  double c = 2.0;
};

struct DesignTemplate {
  DesignKind kind = DesignKind::Linear;
  double rho = 0.5;  // used by the demand design only
};

struct RunConfig {
  std::vector<DesignTemplate> designs;
  std::vector<EstimatorKind> estimators;
  std::vector<int> sample_sizes;
  int replications = 40;
  double split_ratio = 0.5;
  TuningConfig tuning;
  std::optional<double> lengthscale_override;  // robustness study
  std::uint64_t base_seed = 1;
  int jobs = 1;

  void validate() const;
};

// One record per (design, estimator, sample size, replication), carrying
// enough metadata to re-run that cell exactly. For baselines the lambda
// column holds the chosen ridge regularizer and xi is nan; failed cells
// hold nan in lambda/xi/mse/log10_mse and the message in `error`
// (sidecar-only, not a CSV column).
struct BenchmarkRecord {
  std::string design;
  std::string estimator;
  int n_total = 0;
  double split_ratio = 0.5;
  double rho = std::numeric_limits<double>::quiet_NaN();
  int replication = 0;
  std::uint64_t seed = 0;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double xi = std::numeric_limits<double>::quiet_NaN();
  double mse = std::numeric_limits<double>::quiet_NaN();
  double log10_mse = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
  int jitter_flag = 0;
  std::string error;
  bool mse_floored = false;

  bool failed() const { return !error.empty(); }
};

// One benchmark cell, fully described. The seed determines the simulated
// data set; cells sharing (design, size, replication) share the seed so
// every estimator sees identical data.
struct CellTask {
  DesignTemplate design;
  EstimatorKind estimator = EstimatorKind::Kiv;
  std::string estimator_label;  // defaults to estimator_name(estimator)
  int n_total = 1000;
  double split_ratio = 0.5;
  TuningConfig tuning;
  std::optional<double> lengthscale_override;
  int replication = 0;
  std::uint64_t seed = 0;
};

// Runs one cell; failures are captured in the record, never thrown.
BenchmarkRecord run_cell(const CellTask& task);

// Full sweep: every (design, estimator, size, replication) cell. Cells
// run on up to config.jobs worker threads; output order is always
// (design, estimator, size, replication) regardless of completion order.
std::vector<BenchmarkRecord> run_sweep(const RunConfig& config);

// Lengthscale robustness study on the sigmoid design: one KIV group per
// override in {0.2, 0.4, 0.6, 0.8, 1.0} plus the median-heuristic
// default, labeled kiv@ls=<value> / kiv@ls=median. Uses config.sample_sizes,
// replications, seed and jobs; designs/estimators in config are ignored.
std::vector<BenchmarkRecord> robustness_study(const RunConfig& config);

// Per-cell aggregate of log10 MSE across replications.
struct SummaryRow {
  std::string design;
  std::string estimator;
  int n_total = 0;
  double rho = std::numeric_limits<double>::quiet_NaN();
  int count = 0;   // successful replications
  int errors = 0;  // failed replications
  double median_log10_mse = std::numeric_limits<double>::quiet_NaN();
  double mean_log10_mse = std::numeric_limits<double>::quiet_NaN();
  double q1_log10_mse = std::numeric_limits<double>::quiet_NaN();
  double q3_log10_mse = std::numeric_limits<double>::quiet_NaN();
  double iqr_log10_mse = std::numeric_limits<double>::quiet_NaN();
};

// Groups records by (design, estimator, n_total, rho). Throws EmptyInput
// on an empty record set.
std::vector<SummaryRow> summarize(const std::vector<BenchmarkRecord>& records);

// Quantile by linear interpolation between order statistics (the R
// type-7 convention): position (n-1)p on the sorted values.
double quantile_linear(std::vector<double> values, double p);

inline constexpr const char* kCsvHeader =
    "design,estimator,n_total,split_ratio,rho,replication,seed,lambda,xi,mse,"
    "log10_mse,wall_ms,jitter_flag";

// Records round-trip exactly: from_csv(to_csv(r)) == r for the CSV-visible
// fields (error/floored flags travel in the JSON sidecar).
std::string to_csv(const std::vector<BenchmarkRecord>& records);
std::vector<BenchmarkRecord> from_csv(const std::string& text);

std::string to_summary_csv(const std::vector<SummaryRow>& rows);
std::string summary_table(const std::vector<SummaryRow>& rows);

// Sidecar metadata: config echo, RNG identity, library version, failed
// cells and floored-MSE cells.
std::string meta_json(const RunConfig& config,
                      const std::vector<BenchmarkRecord>& records);

bool any_errors(const std::vector<BenchmarkRecord>& records);

}  // namespace kiv
