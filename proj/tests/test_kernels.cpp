#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <numeric>

#include "kiv/kernels.hpp"
#include "kiv/rng.hpp"
#include "oracles.hpp"

using namespace kiv;

namespace {

Matrix random_points(Eigen::Index n, Eigen::Index d, Rng& rng, double scale = 1.0) {
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

}  // namespace

TEST_CASE("gaussian gram values") {
  const KernelSpec spec = GaussianKernel{{1.0}};
  Matrix zero(1, 1);
  zero << 0.0;
  CHECK(gram_matrix(spec, zero, zero)(0, 0) == doctest::Approx(1.0));

  Matrix one(1, 1);
  one << 1.0;
  CHECK(gram_matrix(spec, zero, one)(0, 0) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("gaussian gram matches the naive per-entry oracle") {
  Rng rng(5);
  const Matrix a = random_points(7, 3, rng);
  const Matrix b = random_points(9, 3, rng);
  const std::vector<double> ls{0.7, 1.3, 2.1};
  const Matrix g = gram_matrix(GaussianKernel{ls}, a, b);
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const std::vector<double> pa{a(i, 0), a(i, 1), a(i, 2)};
      const std::vector<double> pb{b(j, 0), b(j, 1), b(j, 2)};
      CHECK(g(i, j) ==
            doctest::Approx(oracle::gaussian_kernel(pa, pb, ls)).epsilon(1e-13));
    }
  }
}

TEST_CASE("product kernel equals elementwise product of per-dimension grams") {
  Rng rng(17);
  const Matrix pts = random_points(25, 3, rng);
  const std::vector<double> ls{0.5, 1.0, 2.0};
  const Matrix full = gram_matrix(GaussianKernel{ls}, pts, pts);
  Matrix prod = Matrix::Ones(25, 25);
  for (int d = 0; d < 3; ++d) {
    prod = prod.cwiseProduct(
        gram_matrix(GaussianKernel{{ls[static_cast<std::size_t>(d)]}},
                    pts.col(d), pts.col(d)));
  }
  CHECK((full - prod).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("gaussian gram is symmetric PSD") {
  Rng rng(23);
  // Small sets against the hand-rolled Jacobi eigenvalue oracle.
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix pts = random_points(8, 2, rng);
    const Matrix g = gram_matrix(GaussianKernel{{1.0, 1.0}}, pts, pts);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    oracle::Mat gm = oracle::make(8, 8);
    for (int i = 0; i < 8; ++i) {
      for (int j = 0; j < 8; ++j) {
        gm[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = g(i, j);
      }
    }
    for (double eig : oracle::jacobi_eigenvalues(gm)) {
      CHECK(eig >= -1e-8);
    }
  }
  // Larger sets against Eigen's symmetric eigensolver.
  const Matrix pts = random_points(200, 2, rng);
  const Matrix g = gram_matrix(GaussianKernel{{0.8, 1.2}}, pts, pts);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("feature map kernel: linear with intercept") {
  const KernelSpec spec = FeatureMapKernel{BasisSpec::linear_with_intercept()};
  Matrix a(1, 1), b(1, 1);
  a << 2.0;
  b << 3.0;
  CHECK(gram_matrix(spec, a, b)(0, 0) == doctest::Approx(7.0));
}

TEST_CASE("gram_matrix error paths") {
  CHECK_THROWS_AS(
      gram_matrix(GaussianKernel{{1.0}}, Matrix::Zero(2, 1), Matrix::Zero(2, 2)),
      DimensionMismatch);
  CHECK_THROWS_AS(
      gram_matrix(GaussianKernel{{1.0, 1.0}}, Matrix::Zero(2, 1), Matrix::Zero(2, 1)),
      InvalidSpec);
  CHECK_THROWS_AS(
      gram_matrix(GaussianKernel{{-1.0}}, Matrix::Zero(2, 1), Matrix::Zero(2, 1)),
      InvalidSpec);
}

TEST_CASE("median heuristic examples") {
  Matrix two(2, 1);
  two << 0.0, 1.0;
  CHECK(median_heuristic(two, 0) == doctest::Approx(1.0));

  Matrix three(3, 1);
  three << 0.0, 1.0, 3.0;
  CHECK(median_heuristic(three, 0) == doctest::Approx(2.0));

  Matrix equal(3, 1);
  equal << 5.0, 5.0, 5.0;
  CHECK_THROWS_AS(median_heuristic(equal, 0), DegenerateInput);
}

TEST_CASE("median heuristic invariances") {
  Rng rng(31);
  Matrix pts = random_points(41, 1, rng);
  const double base = median_heuristic(pts, 0);

  // Permutation invariance (below the subsample cap).
  std::vector<int> order(41);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  Matrix shuffled(41, 1);
  for (int i = 0; i < 41; ++i) shuffled(i, 0) = pts(order[static_cast<std::size_t>(i)], 0);
  CHECK(median_heuristic(shuffled, 0) == doctest::Approx(base).epsilon(1e-15));

  // Translation invariance.
  Matrix translated = pts.array() + 42.0;
  CHECK(median_heuristic(translated, 0) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("median heuristic subsample cap is deterministic") {
  Rng rng(37);
  const Matrix pts = random_points(3000, 1, rng);
  const double a = median_heuristic(pts, 0);
  const double b = median_heuristic(pts, 0);
  CHECK(a == b);
  CHECK(a > 0.0);
}

TEST_CASE("median_lengthscales applies the degenerate fallback") {
  Matrix pts(4, 2);
  pts << 0.0, 7.0, 1.0, 7.0, 2.0, 7.0, 4.0, 7.0;
  const auto ls = median_lengthscales(pts);
  CHECK(ls.values.size() == 2);
  CHECK(ls.values[0] > 0.0);
  CHECK(ls.values[1] == 1.0);
  REQUIRE(ls.fallback_dims.size() == 1);
  CHECK(ls.fallback_dims[0] == 1);
}

TEST_CASE("bspline basis: box function and endpoint interpolation") {
  BSplineSpec box;
  box.order = 1;
  box.lo = 0.0;
  box.hi = 1.0;
  const Vector v = bspline_basis(box, 0.37);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == 1.0);

  BSplineSpec cubic;
  cubic.order = 4;
  cubic.interior_knots = {0.5};
  const Vector at_left = bspline_basis(cubic, 0.0);
  REQUIRE(at_left.size() == 5);
  CHECK(at_left[0] == doctest::Approx(1.0));
  CHECK(at_left.tail(4).cwiseAbs().maxCoeff() == 0.0);
  const Vector at_right = bspline_basis(cubic, 1.0);
  CHECK(at_right[4] == doctest::Approx(1.0));
}

TEST_CASE("bspline basis matches the recursive oracle") {
  BSplineSpec spec;
  spec.order = 4;
  spec.interior_knots = {0.3, 0.7};
  std::vector<double> knots;
  for (int i = 0; i < spec.order; ++i) knots.push_back(spec.lo);
  for (double k : spec.interior_knots) knots.push_back(k);
  for (int i = 0; i < spec.order; ++i) knots.push_back(spec.hi);

  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const double x = rng.uniform();
    const Vector v = bspline_basis(spec, x);
    REQUIRE(v.size() == 6);
    for (int i = 0; i < 6; ++i) {
      CHECK(v[i] == doctest::Approx(oracle::bspline_recursive(
                        knots, static_cast<std::size_t>(i), 4, x))
                        .epsilon(1e-12));
    }
  }
}

TEST_CASE("bspline partition of unity") {
  Rng rng(47);
  std::vector<BSplineSpec> specs;
  BSplineSpec a;
  a.order = 4;
  a.interior_knots = {0.5};
  specs.push_back(a);
  BSplineSpec b;
  b.order = 3;
  b.interior_knots = {0.2, 0.4, 0.9};
  specs.push_back(b);
  BSplineSpec c;
  c.order = 2;
  c.lo = -2.0;
  c.hi = 3.0;
  c.interior_knots = {0.0};
  specs.push_back(c);

  for (const auto& spec : specs) {
    for (int trial = 0; trial < 1000; ++trial) {
      const double x = spec.lo + (spec.hi - spec.lo) * rng.uniform();
      CHECK(std::abs(bspline_basis(spec, x).sum() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("bspline clamps out-of-range evaluation") {
  BSplineSpec spec;
  spec.order = 4;
  spec.interior_knots = {0.5};
  CHECK((bspline_basis(spec, -3.0) - bspline_basis(spec, 0.0)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((bspline_basis(spec, 9.0) - bspline_basis(spec, 1.0)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("bspline spec validation") {
  BSplineSpec bad;
  bad.order = 0;
  CHECK_THROWS_AS(bspline_basis(bad, 0.5), InvalidSpec);
  BSplineSpec outside;
  outside.order = 2;
  outside.interior_knots = {1.5};
  CHECK_THROWS_AS(bspline_basis(outside, 0.5), InvalidSpec);
  BSplineSpec unsorted;
  unsorted.order = 2;
  unsorted.interior_knots = {0.7, 0.3};
  CHECK_THROWS_AS(bspline_basis(unsorted, 0.5), InvalidSpec);
}

TEST_CASE("tensor-product basis composes bspline and one-hot dimensions") {
  BSplineSpec cont;
  cont.order = 2;
  cont.interior_knots = {0.5};
  const BasisSpec basis =
      BasisSpec::product({cont, OneHotSpec{{1, 2, 3}}});
  CHECK(basis_size(basis, 2) == 9);  // 3 spline functions x 3 levels

  Eigen::RowVectorXd point(2);
  point << 0.25, 2.0;
  const Vector v = basis_vector(basis, point);
  REQUIRE(v.size() == 9);
  CHECK(v.sum() == doctest::Approx(1.0));  // both factors sum to one
  // Only the middle one-hot slot of each spline block can be nonzero.
  for (Eigen::Index i = 0; i < 9; ++i) {
    if (i % 3 != 1) CHECK(v[i] == 0.0);
  }
}

TEST_CASE("one-hot snaps to the nearest level") {
  const BasisSpec basis = BasisSpec::product({OneHotSpec{{1, 2, 3}}});
  Eigen::RowVectorXd point(1);
  point << 2.2;
  const Vector v = basis_vector(basis, point);
  CHECK(v[0] == 0.0);
  CHECK(v[1] == 1.0);
  CHECK(v[2] == 0.0);
}
