#pragma once

#include <optional>

#include "kiv/types.hpp"

namespace kiv {

// Outcome of a symmetric positive-definite solve. jitter_applied is the
// diagonal boost that made the factorization succeed and is 0 when the
// unmodified system factorized on the first attempt. condition_hint is a
// condition-number estimate (1/rcond) of the factorized matrix.
struct SpdSolveReport {
  double jitter_applied = 0.0;
  std::optional<double> condition_hint;
};

struct SpdSolveResult {
  Matrix solution;
  SpdSolveReport report;
};

// Solves (K + shift*I) S = B by Cholesky factorization.
//
// K must be square and symmetric within 1e-10 relative tolerance; it is
// symmetrized as (K + K')/2 before the shift is added, since kernel
// evaluation order can break symmetry in the last bit. If the shifted
// system does not factorize (kernel matrices with near-duplicate points
// can be numerically indefinite), retries with additive diagonal jitter
// 1e-12, 1e-10, 1e-8 times the mean diagonal of the assembled system and
// records the applied boost. Throws FactorizationFailure once the ladder
// is exhausted.
SpdSolveResult regularized_solve(const Matrix& k, double shift, const Matrix& b);

// Same factorization and jitter ladder for an already-assembled symmetric
// positive (semi)definite system A S = B.
SpdSolveResult solve_spd(const Matrix& a, const Matrix& b);

// tr(A); A must be square.
double trace(const Matrix& a);

// tr(A'B) accumulated entrywise without materializing the product.
// A and B must have identical shapes.
double trace_product(const Matrix& a, const Matrix& b);

}  // namespace kiv
