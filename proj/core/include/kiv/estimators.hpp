#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "kiv/designs.hpp"
#include "kiv/kernels.hpp"
#include "kiv/linalg.hpp"
#include "kiv/types.hpp"

namespace kiv {

// Two-stage sample: stage 1 holds the n observations used to learn the
// conditional mean embedding, stage 2 the m observations used to learn
// the structural function. Column dimensions agree across stages.
struct SplitDataset {
  Matrix x1;
  Vector y1;
  Matrix z1;
  Matrix x2;
  Vector y2;
  Matrix z2;

  Eigen::Index n() const { return x1.rows(); }
  Eigen::Index m() const { return x2.rows(); }
  void validate() const;
};

// Assembles a SplitDataset from a generated sample and a split.
SplitDataset make_split(const GeneratedSample& sample, const SplitIndices& split);

// Fitted two-stage estimator: the stage-1 anchor points, the dual
// coefficients, and the hyperparameters that produced them.
struct KivModel {
  Matrix anchors;  // stage-1 inputs X
  Vector alpha;
  KernelSpec kernel_x;
  KernelSpec kernel_z;
  double lambda = 0.0;
  double xi = 0.0;
  SpdSolveReport stage1_report;
  SpdSolveReport stage2_report;
};

// Hyperparameter selection policy. GridSearch minimizes the two
// out-of-sample validation losses sequentially over the given grids;
// TheoreticalRate uses lambda = n^(-1/(c1+1)), xi = m^(-b/(bc+1)).
struct TuningPolicy {
  enum class Kind { GridSearch, TheoreticalRate };
  Kind kind = Kind::GridSearch;
  std::vector<double> lambda_grid;
  std::vector<double> xi_grid;
  double c1 = 2.0;  // stage-1 smoothness, in (1, 2]
  double b = 2.0;   // effective input dimension, > 1
  double c = 2.0;   // stage-2 smoothness, in (1, 2]

  static TuningPolicy grid_search(std::vector<double> lambdas,
                                  std::vector<double> xis);
  static TuningPolicy theoretical_rate(double c1, double b, double c);
  void validate() const;
};

struct TuningTraceEntry {
  int stage = 1;  // 1 = lambda sweep, 2 = xi sweep
  double value = 0.0;
  double loss = 0.0;
};

struct TuningResult {
  double lambda = 0.0;
  double xi = 0.0;
  std::vector<TuningTraceEntry> trace;
};

// Two-stage closed-form fit:
//   W = K_XX (K_ZZ + n lambda I)^-1 K_ZZ~
//   alpha = (W W' + m xi K_XX)^-1 W y~
// Both solves run through the jitter-laddered Cholesky path.
KivModel fit_kiv(const SplitDataset& data, const KernelSpec& kernel_x,
                 const KernelSpec& kernel_z, double lambda, double xi);

// h(x) = alpha' K_Xx for each row of x.
Vector predict(const KivModel& model, const Matrix& x);

// Out-of-sample stage-1 embedding loss
//   L1(lambda) = (1/m) tr[K_X~X~ - 2 K_X~X G + G' K_XX G],
//   G = (K_ZZ + n lambda I)^-1 K_ZZ~,
// evaluated on the stage-2 samples.
double stage1_loss(const SplitDataset& data, const KernelSpec& kernel_x,
                   const KernelSpec& kernel_z, double lambda);

// Crossed stage-2 validation loss: fit with (lambda, xi), then mean squared
// error of the predictions on the stage-1 (x, y) pairs.
double stage2_loss(const SplitDataset& data, const KernelSpec& kernel_x,
                   const KernelSpec& kernel_z, double lambda, double xi);

// Sequential hyperparameter selection: lambda* minimizes stage1_loss over
// the lambda grid, then xi* minimizes stage2_loss(lambda*, .) over the xi
// grid. Ties break toward the larger (smoother) regularizer. Returns the
// full evaluated trace for audit.
TuningResult tune(const SplitDataset& data, const KernelSpec& kernel_x,
                  const KernelSpec& kernel_z, const TuningPolicy& policy);

// Default two-level search: a 20-point logarithmic grid on [1e-10, 1]
// refined once by a 10-point grid spanning the decade around the coarse
// minimizer. Costs 30 stage-1 evaluations and 30 stage-2 fits.
TuningResult tune_two_level(const SplitDataset& data, const KernelSpec& kernel_x,
                            const KernelSpec& kernel_z);

// count log-spaced values from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

// 10 log-spaced values spanning one decade centered on `center`.
std::vector<double> refine_grid(double center);

// --- Baselines ---------------------------------------------------------

// Kernel ridge regression with dual coefficients (K + reg*s*I)^-1 y,
// s the sample count.
struct KrrModel {
  Matrix anchors;
  Vector alpha;
  KernelSpec kernel;
  double reg = 0.0;
  SpdSolveReport report;
};

KrrModel fit_krr(const Matrix& x, const Vector& y, const KernelSpec& kernel,
                 double reg);
Vector predict(const KrrModel& model, const Matrix& x);

// Two-fold cross-validation over the grid; folds are a seeded half/half
// split, ties break toward the larger regularizer.
double cv2_tune_krr(const Matrix& x, const Vector& y, const KernelSpec& kernel,
                    const std::vector<double>& grid, std::uint64_t seed);

// Linear two-stage least squares with intercepts appended internally:
// Xbar = Z1 (Z1'Z1)^-1 Z1'X1, beta = (Xbar'Xbar)^-1 Xbar'y.
// beta[0] is the intercept.
struct TwoSlsModel {
  Vector beta;
  SpdSolveReport report;
};

TwoSlsModel fit_2sls(const Matrix& x, const Vector& y, const Matrix& z);
Vector predict(const TwoSlsModel& model, const Matrix& x);

// Sieve IV: the same two-stage estimator over feature-map kernels built
// from finite bases.
struct SieveFit {
  KivModel model;
  TuningResult tuning;
};

SieveFit fit_sieve_iv(const SplitDataset& data, const BasisSpec& basis_x,
                      const BasisSpec& basis_z, const TuningPolicy& policy);

using FittedBaseline = std::variant<KrrModel, TwoSlsModel, KivModel>;
Vector predict(const FittedBaseline& model, const Matrix& x);

}  // namespace kiv
