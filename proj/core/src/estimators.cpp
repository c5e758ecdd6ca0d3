#include "kiv/estimators.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "kiv/rng.hpp"

namespace kiv {

void SplitDataset::validate() const {
  if (x1.rows() < 1 || x2.rows() < 1) {
    throw DimensionMismatch("split dataset: both stages need samples");
  }
  if (x1.cols() != x2.cols() || z1.cols() != z2.cols()) {
    throw DimensionMismatch(
        "split dataset: column dimensions differ across stages");
  }
  if (y1.size() != x1.rows() || z1.rows() != x1.rows() ||
      y2.size() != x2.rows() || z2.rows() != x2.rows()) {
    throw DimensionMismatch("split dataset: row counts differ within a stage");
  }
  ensure_finite(x1, "x1");
  ensure_finite(y1, "y1");
  ensure_finite(z1, "z1");
  ensure_finite(x2, "x2");
  ensure_finite(y2, "y2");
  ensure_finite(z2, "z2");
}

SplitDataset make_split(const GeneratedSample& sample, const SplitIndices& split) {
  SplitDataset data;
  const auto take = [&](const std::vector<int>& idx, Matrix& xm, Vector& yv,
                        Matrix& zm) {
    xm.resize(static_cast<Eigen::Index>(idx.size()), sample.x.cols());
    zm.resize(static_cast<Eigen::Index>(idx.size()), sample.z.cols());
    yv.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      xm.row(r) = sample.x.row(idx[i]);
      zm.row(r) = sample.z.row(idx[i]);
      yv[r] = sample.y[idx[i]];
    }
  };
  take(split.stage1, data.x1, data.y1, data.z1);
  take(split.stage2, data.x2, data.y2, data.z2);
  data.validate();
  return data;
}

TuningPolicy TuningPolicy::grid_search(std::vector<double> lambdas,
                                       std::vector<double> xis) {
  TuningPolicy p;
  p.kind = Kind::GridSearch;
  p.lambda_grid = std::move(lambdas);
  p.xi_grid = std::move(xis);
  p.validate();
  return p;
}

TuningPolicy TuningPolicy::theoretical_rate(double c1, double b, double c) {
  TuningPolicy p;
  p.kind = Kind::TheoreticalRate;
  p.c1 = c1;
  p.b = b;
  p.c = c;
  p.validate();
  return p;
}

void TuningPolicy::validate() const {
  if (kind == Kind::GridSearch) {
    for (const auto* grid : {&lambda_grid, &xi_grid}) {
      if (grid->empty()) {
        throw InvalidSpec("tuning: grids must be nonempty");
      }
      double prev = 0.0;
      for (double v : *grid) {
        if (!std::isfinite(v) || !(v > 0.0) || !(v > prev)) {
          throw InvalidSpec(
              "tuning: grids must be positive and strictly ascending");
        }
        prev = v;
      }
    }
    return;
  }
  if (!(c1 > 1.0) || !(c1 <= 2.0)) {
    throw InvalidSpec("tuning: c1 must be in (1, 2]");
  }
  if (!(b > 1.0)) {
    throw InvalidSpec("tuning: b must be > 1");
  }
  if (!(c > 1.0) || !(c <= 2.0)) {
    throw InvalidSpec("tuning: c must be in (1, 2]");
  }
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > lo) || count < 2) {
    throw InvalidSpec("log_grid: need 0 < lo < hi and count >= 2");
  }
  std::vector<double> grid(static_cast<std::size_t>(count));
  const double step = std::log10(hi / lo) / (count - 1);
  for (int i = 0; i < count; ++i) {
    grid[static_cast<std::size_t>(i)] = lo * std::pow(10.0, step * i);
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

std::vector<double> refine_grid(double center) {
  if (!(center > 0.0)) {
    throw InvalidSpec("refine_grid: center must be > 0");
  }
  const double half = std::sqrt(10.0);
  return log_grid(center / half, center * half, 10);
}

namespace {

void check_hyper(double lambda, double xi) {
  ensure_finite(lambda, "lambda");
  ensure_finite(xi, "xi");
  if (!(lambda > 0.0) || !(xi > 0.0)) {
    throw InvalidSpec("hyperparameters must be > 0");
  }
}

// Stage-1 kernel matrices shared by fitting and tuning.
struct StageOneMatrices {
  Matrix k_xx;   // n x n, stage-1 inputs
  Matrix k_zz;   // n x n, stage-1 instruments
  Matrix k_zz2;  // n x m, stage-1 vs stage-2 instruments
};

StageOneMatrices stage_one_matrices(const SplitDataset& data,
                                    const KernelSpec& kernel_x,
                                    const KernelSpec& kernel_z) {
  StageOneMatrices k;
  k.k_xx = gram_matrix(kernel_x, data.x1, data.x1);
  k.k_zz = gram_matrix(kernel_z, data.z1, data.z1);
  k.k_zz2 = gram_matrix(kernel_z, data.z1, data.z2);
  return k;
}

// sum_i k(p_i, p_i) without a full Gram matrix.
double gram_trace_self(const KernelSpec& spec, const Matrix& points) {
  if (std::holds_alternative<GaussianKernel>(spec)) {
    return static_cast<double>(points.rows());  // unit diagonal
  }
  const auto& basis = std::get<FeatureMapKernel>(spec).basis;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    sum += basis_vector(basis, points.row(i)).squaredNorm();
  }
  return sum;
}

struct TwoStageFit {
  Vector alpha;
  SpdSolveReport stage1_report;
  SpdSolveReport stage2_report;
};

// The closed form on precomputed kernel matrices:
//   W = K_XX (K_ZZ + n lambda I)^-1 K_ZZ~,
//   alpha = (W W' + m xi K_XX)^-1 W y~.
TwoStageFit solve_two_stage(const StageOneMatrices& k, const Vector& y2,
                            double lambda, double xi) {
  const auto n = k.k_zz.rows();
  const auto m = k.k_zz2.cols();
  TwoStageFit fit;

  auto stage1 =
      regularized_solve(k.k_zz, static_cast<double>(n) * lambda, k.k_zz2);
  fit.stage1_report = stage1.report;
  Matrix w = k.k_xx * stage1.solution;

  Matrix system = w * w.transpose();
  system.noalias() += static_cast<double>(m) * xi * k.k_xx;
  auto stage2 = solve_spd(system, w * y2);
  fit.stage2_report = stage2.report;
  fit.alpha = stage2.solution.col(0);
  return fit;
}

// Spectral profile of the stage-1 validation loss, so a lambda grid costs
// one eigendecomposition plus O(n^2) per value instead of an n-RHS solve
// per value. Writing K_ZZ = Q diag(s) Q', U = Q'K_ZZ~, V = K_X~X Q,
// G = Q'K_XX Q, S = U U', and d_k(lambda) = 1/(s_k + n lambda):
//   tr(K_X~X Gamma)          = sum_k d_k (U V)_kk
//   tr(Gamma' K_XX Gamma)    = d' (G o S') d        (o = entrywise)
// which reproduces the laddered-solve loss to rounding error.
class Stage1LossProfile {
 public:
  Stage1LossProfile(const SplitDataset& data, const KernelSpec& kernel_x,
                    const StageOneMatrices& k) {
    n_ = k.k_zz.rows();
    m_ = k.k_zz2.cols();
    Eigen::SelfAdjointEigenSolver<Matrix> eig((k.k_zz + k.k_zz.transpose()) *
                                              0.5);
    if (eig.info() != Eigen::Success) {
      throw FactorizationFailure("stage-1 profile: eigendecomposition failed");
    }
    // Negative eigenvalues of a PSD kernel matrix are rounding noise.
    eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
    const Matrix& q = eig.eigenvectors();

    const Matrix u = q.transpose() * k.k_zz2;                       // n x m
    const Matrix v = gram_matrix(kernel_x, data.x2, data.x1) * q;   // m x n
    cross_ = (u.array() * v.transpose().array()).rowwise().sum();
    const Matrix g = q.transpose() * k.k_xx * q;
    const Matrix s = u * u.transpose();
    quad_ = g.cwiseProduct(s.transpose());
    const_term_ = gram_trace_self(kernel_x, data.x2);
  }

  double loss(double lambda) const {
    const Vector d =
        (eigenvalues_.array() + static_cast<double>(n_) * lambda).inverse();
    const double lin = d.dot(cross_);
    const double quad = d.dot(quad_ * d);
    return (const_term_ - 2.0 * lin + quad) / static_cast<double>(m_);
  }

 private:
  Eigen::Index n_ = 0, m_ = 0;
  Vector eigenvalues_;
  Vector cross_;
  Matrix quad_;
  double const_term_ = 0.0;
};

// Stage-2 sweep state at a fixed lambda: W does not change with xi.
struct Stage2Context {
  Matrix wwt;
  Vector wy;
  Eigen::Index m = 0;
};

Stage2Context make_stage2_context(const StageOneMatrices& k, const Vector& y2,
                                  double lambda) {
  const auto n = k.k_zz.rows();
  auto stage1 =
      regularized_solve(k.k_zz, static_cast<double>(n) * lambda, k.k_zz2);
  Matrix w = k.k_xx * stage1.solution;
  Stage2Context ctx;
  ctx.wwt = w * w.transpose();
  ctx.wy = w * y2;
  ctx.m = k.k_zz2.cols();
  return ctx;
}

// Crossed validation loss at (lambda fixed by ctx, xi): mean squared error
// of the fitted function on the stage-1 (x, y) pairs. Since the anchors
// are the stage-1 inputs, fitted values are just K_XX alpha.
double stage2_context_loss(const Stage2Context& ctx, const StageOneMatrices& k,
                           const Vector& y1, double xi) {
  Matrix system = ctx.wwt;
  system.noalias() += static_cast<double>(ctx.m) * xi * k.k_xx;
  auto sol = solve_spd(system, ctx.wy);
  const Vector fitted = k.k_xx * sol.solution.col(0);
  return (y1 - fitted).squaredNorm() / static_cast<double>(y1.size());
}

struct GridWinner {
  double value = 0.0;
  double loss = std::numeric_limits<double>::infinity();
};

// Ascending sweep with ties broken toward the larger regularizer.
template <typename LossFn>
GridWinner grid_argmin(const std::vector<double>& grid, int stage,
                       std::vector<TuningTraceEntry>& trace, LossFn&& loss_fn) {
  GridWinner best;
  best.value = grid.front();
  bool found = false;
  for (double v : grid) {
    const double loss = loss_fn(v);
    trace.push_back({stage, v, loss});
    if (loss <= best.loss) {
      best.loss = loss;
      best.value = v;
      found = true;
    }
  }
  if (!found) {
    throw NonFinite("tuning: every grid loss was non-finite");
  }
  return best;
}

void validate_for_fit(const SplitDataset& data, const KernelSpec& kernel_x,
                      const KernelSpec& kernel_z) {
  data.validate();
  validate_kernel(kernel_x, data.x1.cols());
  validate_kernel(kernel_z, data.z1.cols());
}

TuningResult tune_on_grids(const SplitDataset& data, const StageOneMatrices& k,
                           const Stage1LossProfile& profile,
                           const std::vector<double>& lambda_grid,
                           const std::vector<double>& xi_grid,
                           std::vector<TuningTraceEntry>& trace) {
  TuningResult result;
  result.lambda = grid_argmin(lambda_grid, 1, trace,
                              [&](double l) { return profile.loss(l); })
                      .value;
  const Stage2Context ctx = make_stage2_context(k, data.y2, result.lambda);
  result.xi = grid_argmin(xi_grid, 2, trace, [&](double xi) {
                return stage2_context_loss(ctx, k, data.y1, xi);
              }).value;
  return result;
}

}  // namespace

KivModel fit_kiv(const SplitDataset& data, const KernelSpec& kernel_x,
                 const KernelSpec& kernel_z, double lambda, double xi) {
  validate_for_fit(data, kernel_x, kernel_z);
  check_hyper(lambda, xi);
  const auto k = stage_one_matrices(data, kernel_x, kernel_z);
  auto fit = solve_two_stage(k, data.y2, lambda, xi);

  KivModel model;
  model.anchors = data.x1;
  model.alpha = std::move(fit.alpha);
  model.kernel_x = kernel_x;
  model.kernel_z = kernel_z;
  model.lambda = lambda;
  model.xi = xi;
  model.stage1_report = fit.stage1_report;
  model.stage2_report = fit.stage2_report;
  return model;
}

Vector predict(const KivModel& model, const Matrix& x) {
  if (x.cols() != model.anchors.cols()) {
    throw DimensionMismatch("predict: input dimension differs from training");
  }
  return gram_matrix(model.kernel_x, x, model.anchors) * model.alpha;
}

double stage1_loss(const SplitDataset& data, const KernelSpec& kernel_x,
                   const KernelSpec& kernel_z, double lambda) {
  validate_for_fit(data, kernel_x, kernel_z);
  ensure_finite(lambda, "lambda");
  if (!(lambda > 0.0)) {
    throw InvalidSpec("stage1_loss: lambda must be > 0");
  }
  const auto k = stage_one_matrices(data, kernel_x, kernel_z);
  const auto n = data.n();
  const auto m = data.m();
  auto gamma =
      regularized_solve(k.k_zz, static_cast<double>(n) * lambda, k.k_zz2);
  const Matrix k_x2x1 = gram_matrix(kernel_x, data.x2, data.x1);
  const double t_self = gram_trace_self(kernel_x, data.x2);
  const double t_cross =
      trace_product(k_x2x1.transpose(), gamma.solution);
  const double t_quad =
      trace_product(gamma.solution, k.k_xx * gamma.solution);
  return (t_self - 2.0 * t_cross + t_quad) / static_cast<double>(m);
}

double stage2_loss(const SplitDataset& data, const KernelSpec& kernel_x,
                   const KernelSpec& kernel_z, double lambda, double xi) {
  const KivModel model = fit_kiv(data, kernel_x, kernel_z, lambda, xi);
  const Vector fitted = predict(model, data.x1);
  return (data.y1 - fitted).squaredNorm() / static_cast<double>(data.n());
}

TuningResult tune(const SplitDataset& data, const KernelSpec& kernel_x,
                  const KernelSpec& kernel_z, const TuningPolicy& policy) {
  validate_for_fit(data, kernel_x, kernel_z);
  policy.validate();

  if (policy.kind == TuningPolicy::Kind::TheoreticalRate) {
    TuningResult result;
    result.lambda =
        std::pow(static_cast<double>(data.n()), -1.0 / (policy.c1 + 1.0));
    result.xi = std::pow(static_cast<double>(data.m()),
                         -policy.b / (policy.b * policy.c + 1.0));
    return result;
  }

  const auto k = stage_one_matrices(data, kernel_x, kernel_z);
  const Stage1LossProfile profile(data, kernel_x, k);
  std::vector<TuningTraceEntry> trace;
  TuningResult result = tune_on_grids(data, k, profile, policy.lambda_grid,
                                      policy.xi_grid, trace);
  result.trace = std::move(trace);
  return result;
}

TuningResult tune_two_level(const SplitDataset& data, const KernelSpec& kernel_x,
                            const KernelSpec& kernel_z) {
  validate_for_fit(data, kernel_x, kernel_z);
  const auto k = stage_one_matrices(data, kernel_x, kernel_z);
  const Stage1LossProfile profile(data, kernel_x, k);
  const std::vector<double> coarse = log_grid(1e-10, 1.0, 20);

  // Each stage takes the argmin over coarse and refinement points together:
  // on a flat loss the refinement neighbors can all be worse than the
  // coarse minimizer, which then stays selected.
  TuningResult result;
  std::vector<TuningTraceEntry> trace;
  const auto stage1_winner = [&](const std::vector<double>& grid) {
    return grid_argmin(grid, 1, trace,
                       [&](double l) { return profile.loss(l); });
  };
  const GridWinner lambda_coarse = stage1_winner(coarse);
  const GridWinner lambda_refined = stage1_winner(refine_grid(lambda_coarse.value));
  result.lambda = lambda_refined.loss <= lambda_coarse.loss
                      ? lambda_refined.value
                      : lambda_coarse.value;

  const Stage2Context ctx = make_stage2_context(k, data.y2, result.lambda);
  const auto stage2_winner = [&](const std::vector<double>& grid) {
    return grid_argmin(grid, 2, trace, [&](double xi) {
      return stage2_context_loss(ctx, k, data.y1, xi);
    });
  };
  const GridWinner xi_coarse = stage2_winner(coarse);
  const GridWinner xi_refined = stage2_winner(refine_grid(xi_coarse.value));
  result.xi =
      xi_refined.loss <= xi_coarse.loss ? xi_refined.value : xi_coarse.value;
  result.trace = std::move(trace);
  return result;
}

KrrModel fit_krr(const Matrix& x, const Vector& y, const KernelSpec& kernel,
                 double reg) {
  if (x.rows() < 1 || y.size() != x.rows()) {
    throw DimensionMismatch("fit_krr: x and y row counts must match");
  }
  ensure_finite(x, "x");
  ensure_finite(y, "y");
  ensure_finite(reg, "reg");
  if (!(reg > 0.0)) {
    throw InvalidSpec("fit_krr: reg must be > 0");
  }
  validate_kernel(kernel, x.cols());

  const Matrix k = gram_matrix(kernel, x, x);
  auto sol = regularized_solve(k, reg * static_cast<double>(x.rows()), y);

  KrrModel model;
  model.anchors = x;
  model.alpha = sol.solution.col(0);
  model.kernel = kernel;
  model.reg = reg;
  model.report = sol.report;
  return model;
}

Vector predict(const KrrModel& model, const Matrix& x) {
  if (x.cols() != model.anchors.cols()) {
    throw DimensionMismatch("predict: input dimension differs from training");
  }
  return gram_matrix(model.kernel, x, model.anchors) * model.alpha;
}

double cv2_tune_krr(const Matrix& x, const Vector& y, const KernelSpec& kernel,
                    const std::vector<double>& grid, std::uint64_t seed) {
  if (x.rows() < 4) {
    throw InvalidSpec("cv2_tune_krr: need at least 4 samples");
  }
  if (y.size() != x.rows()) {
    throw DimensionMismatch("cv2_tune_krr: x and y row counts must match");
  }
  if (grid.empty()) {
    throw InvalidSpec("cv2_tune_krr: grid must be nonempty");
  }

  std::vector<int> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t half = order.size() / 2;
  std::vector<int> fold_a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  std::vector<int> fold_b(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
  std::sort(fold_a.begin(), fold_a.end());
  std::sort(fold_b.begin(), fold_b.end());

  const auto gather = [&](const std::vector<int>& idx, Matrix& xs, Vector& ys) {
    xs.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
    ys.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      xs.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
      ys[static_cast<Eigen::Index>(i)] = y[idx[i]];
    }
  };
  Matrix xa, xb;
  Vector ya, yb;
  gather(fold_a, xa, ya);
  gather(fold_b, xb, yb);

  double best_reg = grid.front();
  double best_loss = std::numeric_limits<double>::infinity();
  for (double reg : grid) {
    const KrrModel ma = fit_krr(xa, ya, kernel, reg);
    const KrrModel mb = fit_krr(xb, yb, kernel, reg);
    const double err_a =
        (yb - predict(ma, xb)).squaredNorm() / static_cast<double>(yb.size());
    const double err_b =
        (ya - predict(mb, xa)).squaredNorm() / static_cast<double>(ya.size());
    const double loss = 0.5 * (err_a + err_b);
    if (loss <= best_loss) {
      best_loss = loss;
      best_reg = reg;
    }
  }
  return best_reg;
}

namespace {

Matrix with_intercept(const Matrix& m) {
  Matrix out(m.rows(), m.cols() + 1);
  out.col(0).setOnes();
  out.rightCols(m.cols()) = m;
  return out;
}

}  // namespace

TwoSlsModel fit_2sls(const Matrix& x, const Vector& y, const Matrix& z) {
  if (x.rows() < 2 || x.rows() != y.size() || x.rows() != z.rows()) {
    throw DimensionMismatch("fit_2sls: x, y, z row counts must match");
  }
  ensure_finite(x, "x");
  ensure_finite(y, "y");
  ensure_finite(z, "z");

  const Matrix z1 = with_intercept(z);
  const Matrix x1 = with_intercept(x);
  try {
    // First stage: project inputs onto the instrument span.
    auto first = solve_spd(z1.transpose() * z1, z1.transpose() * x1);
    const Matrix xbar = z1 * first.solution;
    // Second stage: regress outputs on the projected inputs.
    auto second = solve_spd(xbar.transpose() * xbar, xbar.transpose() * y);

    TwoSlsModel model;
    model.beta = second.solution.col(0);
    model.report.jitter_applied =
        std::max(first.report.jitter_applied, second.report.jitter_applied);
    model.report.condition_hint = second.report.condition_hint;
    return model;
  } catch (const FactorizationFailure& e) {
    throw RankDeficient(std::string("fit_2sls: ") + e.what());
  }
}

Vector predict(const TwoSlsModel& model, const Matrix& x) {
  if (x.cols() + 1 != model.beta.size()) {
    throw DimensionMismatch("predict: input dimension differs from training");
  }
  return with_intercept(x) * model.beta;
}

SieveFit fit_sieve_iv(const SplitDataset& data, const BasisSpec& basis_x,
                      const BasisSpec& basis_z, const TuningPolicy& policy) {
  const KernelSpec kernel_x = FeatureMapKernel{basis_x};
  const KernelSpec kernel_z = FeatureMapKernel{basis_z};
  SieveFit fit;
  fit.tuning = tune(data, kernel_x, kernel_z, policy);
  fit.model = fit_kiv(data, kernel_x, kernel_z, fit.tuning.lambda, fit.tuning.xi);
  return fit;
}

Vector predict(const FittedBaseline& model, const Matrix& x) {
  return std::visit([&](const auto& m) { return predict(m, x); }, model);
}

}  // namespace kiv
