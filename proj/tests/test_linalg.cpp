#include <doctest.h>

#include "kiv/linalg.hpp"
#include "kiv/rng.hpp"
#include "oracles.hpp"

using namespace kiv;

namespace {

Matrix random_spd(Eigen::Index n, Rng& rng, double diag_boost = 0.5) {
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = rng.normal();
  }
  Matrix spd = a * a.transpose();
  spd.diagonal().array() += diag_boost;
  return spd;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  }
  return m;
}

oracle::Mat to_oracle(const Matrix& m) {
  oracle::Mat out = oracle::make(static_cast<std::size_t>(m.rows()),
                                 static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("regularized_solve scalar system") {
  Matrix k(1, 1), b(1, 1);
  k << 1.0;
  b << 1.0;
  const auto r = regularized_solve(k, 1.0, b);
  CHECK(r.solution(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(r.report.jitter_applied == 0.0);
}

TEST_CASE("regularized_solve diagonal system") {
  const Matrix k = Matrix::Identity(3, 3);
  const Matrix b = Matrix::Identity(3, 3);
  const auto r = regularized_solve(k, 0.5, b);
  CHECK((r.solution - (2.0 / 3.0) * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <
        1e-14);
}

TEST_CASE("regularized_solve matches explicit-inverse oracle on 8x8") {
  Rng rng(42);
  const Matrix k = random_spd(8, rng);
  const Matrix b = random_matrix(8, 3, rng);

  Matrix shifted = k;
  shifted.diagonal().array() += 0.1;
  const oracle::Mat inv = oracle::invert(to_oracle(shifted));
  const oracle::Mat expected = oracle::multiply(inv, to_oracle(b));

  const auto r = regularized_solve(k, 0.1, b);
  double max_rel = 0.0;
  for (Eigen::Index i = 0; i < 8; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      const double e = expected[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      max_rel = std::max(max_rel,
                         std::abs(r.solution(i, j) - e) / std::max(1.0, std::abs(e)));
    }
  }
  CHECK(max_rel < 1e-10);
}

TEST_CASE("regularized_solve residual bound up to 500x500") {
  for (const int n : {5, 50, 200, 500}) {
    Rng rng(static_cast<std::uint64_t>(n));
    const Matrix k = random_spd(n, rng);
    const Matrix b = random_matrix(n, 2, rng);
    const auto r = regularized_solve(k, 0.01, b);
    Matrix system = (k + k.transpose()) * 0.5;
    system.diagonal().array() += 0.01;
    const double residual = (system * r.solution - b).cwiseAbs().maxCoeff();
    CHECK(residual <= 1e-8 * std::max(1.0, b.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("regularized_solve is deterministic") {
  Rng rng(7);
  const Matrix k = random_spd(40, rng);
  const Matrix b = random_matrix(40, 5, rng);
  const auto r1 = regularized_solve(k, 0.3, b);
  const auto r2 = regularized_solve(k, 0.3, b);
  CHECK((r1.solution - r2.solution).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("jitter ladder engages on a numerically indefinite system") {
  // Small negative eigenvalue, shift too small to cover it.
  Matrix k = Matrix::Zero(2, 2);
  k(0, 0) = 1.0;
  k(1, 1) = -1e-9;
  const auto r = regularized_solve(k, 1e-12, Matrix::Identity(2, 2));
  CHECK(r.report.jitter_applied > 0.0);

  // Clean SPD system reports zero jitter.
  Rng rng(3);
  const auto clean = regularized_solve(random_spd(10, rng), 0.1,
                                       Matrix::Identity(10, 10));
  CHECK(clean.report.jitter_applied == 0.0);
  CHECK(clean.report.condition_hint.has_value());
}

TEST_CASE("regularized_solve error paths") {
  const Matrix id = Matrix::Identity(3, 3);
  Matrix bad = id;
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(regularized_solve(bad, 1.0, id), NonFinite);
  CHECK_THROWS_AS(regularized_solve(id, 1.0, Matrix::Identity(4, 4)),
                  DimensionMismatch);
  Matrix asym = id;
  asym(0, 2) = 1.0;
  CHECK_THROWS_AS(regularized_solve(asym, 1.0, id), DimensionMismatch);
  // Strongly negative definite stays unfactorizable through the ladder.
  CHECK_THROWS_AS(regularized_solve(Matrix(-id), 1e-9, id), FactorizationFailure);
}

TEST_CASE("trace basics") {
  CHECK(trace(Matrix::Identity(3, 3)) == doctest::Approx(3.0));
  CHECK_THROWS_AS(trace(Matrix::Zero(2, 3)), DimensionMismatch);
}

TEST_CASE("trace_product examples and Gram positivity") {
  Matrix a(2, 2);
  a << 1, 2, 3, 4;
  CHECK(trace_product(a, a) == doctest::Approx(30.0));  // sum of squares
  CHECK(trace_product(a, Matrix::Zero(2, 2)) == 0.0);
  CHECK_THROWS_AS(trace_product(a, Matrix::Zero(3, 2)), DimensionMismatch);

  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix m = random_matrix(6, 4, rng);
    CHECK(trace_product(m, m) >= 0.0);
    // tr(A'B) computed entrywise equals the materialized product's trace.
    const Matrix n = random_matrix(6, 4, rng);
    CHECK(trace_product(m, n) ==
          doctest::Approx((m.transpose() * n).trace()).epsilon(1e-12));
  }
}
