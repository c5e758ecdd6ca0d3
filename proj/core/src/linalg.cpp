#include "kiv/linalg.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <string>

namespace kiv {

void ensure_finite(const Eigen::Ref<const Matrix>& m, const char* name) {
  if (!m.allFinite()) {
    throw NonFinite(std::string(name) + " contains NaN or Inf");
  }
}

void ensure_finite(double x, const char* name) {
  if (!std::isfinite(x)) {
    throw NonFinite(std::string(name) + " is not finite");
  }
}

namespace {

// Jitter ladder, as multiples of the mean diagonal of the system matrix.
constexpr double kJitterScales[] = {0.0, 1e-12, 1e-10, 1e-8};

SpdSolveResult solve_symmetrized(Matrix a, const Matrix& b) {
  a = ((a + a.transpose()) * 0.5).eval();

  double mean_diag = a.diagonal().mean();
  if (!(mean_diag > 0.0)) {
    mean_diag = 1.0;  // degenerate scale; ladder still probes absolute jitter
  }

  for (double scale : kJitterScales) {
    const double jitter = scale * mean_diag;
    Matrix system = a;
    if (jitter > 0.0) {
      system.diagonal().array() += jitter;
    }
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() == Eigen::Success) {
      SpdSolveResult result;
      result.solution = llt.solve(b);
      result.report.jitter_applied = jitter;
      const double rcond = llt.rcond();
      if (rcond > 0.0) {
        result.report.condition_hint = 1.0 / rcond;
      }
      return result;
    }
  }
  throw FactorizationFailure(
      "system is not positive definite after the jitter ladder");
}

}  // namespace

SpdSolveResult regularized_solve(const Matrix& k, double shift, const Matrix& b) {
  if (k.rows() < 1 || k.rows() != k.cols()) {
    throw DimensionMismatch("regularized_solve: K must be square and nonempty");
  }
  if (b.rows() != k.rows() || b.cols() < 1) {
    throw DimensionMismatch("regularized_solve: B row count must match K");
  }
  ensure_finite(k, "K");
  ensure_finite(b, "B");
  ensure_finite(shift, "shift");
  if (!(shift > 0.0)) {
    throw InvalidSpec("regularized_solve: shift must be > 0");
  }
  // Symmetry within 1e-10 relative tolerance.
  const double asym = (k - k.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, k.cwiseAbs().maxCoeff());
  if (asym > 1e-10 * scale) {
    throw DimensionMismatch("regularized_solve: K is not symmetric");
  }

  Matrix system = k;
  system.diagonal().array() += shift;
  return solve_symmetrized(std::move(system), b);
}

SpdSolveResult solve_spd(const Matrix& a, const Matrix& b) {
  if (a.rows() < 1 || a.rows() != a.cols()) {
    throw DimensionMismatch("solve_spd: A must be square and nonempty");
  }
  if (b.rows() != a.rows() || b.cols() < 1) {
    throw DimensionMismatch("solve_spd: B row count must match A");
  }
  ensure_finite(a, "A");
  ensure_finite(b, "B");
  return solve_symmetrized(a, b);
}

double trace(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("trace: matrix must be square");
  }
  return a.diagonal().sum();
}

double trace_product(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch("trace_product: shapes must match");
  }
  return a.cwiseProduct(b).sum();
}

}  // namespace kiv
